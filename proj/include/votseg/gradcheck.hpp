#pragma once

#include <cmath>
#include <vector>

#include "votseg/agent.hpp"
#include "votseg/rng.hpp"

namespace votseg {

struct GradCheckReport {
    double critic_max_rel = 0;
    double actor_max_rel = 0;

    bool passing(double bound = 1e-4) const { return critic_max_rel < bound && actor_max_rel < bound; }
};

namespace detail {

inline double rel_error(double a, double b) {
    const double scale = std::max({1e-5, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

inline double log_policy(const Mlp& actor, std::span<const double> s, int action_index) {
    const std::vector<double> logits = actor.forward(s);
    const double m = std::max(logits[0], logits[1]);
    const double z = std::log(std::exp(logits[0] - m) + std::exp(logits[1] - m)) + m;
    return logits[action_index] - z;
}

/// Central finite differences of `eval` over every parameter of `mlp`.
template <typename Eval>
std::vector<double> fd_gradient(Mlp& mlp, double h, Eval&& eval) {
    std::vector<double> p = mlp.param_vector();
    std::vector<double> g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + h;
        mlp.set_param_vector(p);
        const double hi = eval();
        p[i] = saved - h;
        mlp.set_param_vector(p);
        const double lo = eval();
        p[i] = saved;
        g[i] = (hi - lo) / (2 * h);
    }
    mlp.set_param_vector(p);
    return g;
}

}  // namespace detail

/// Compares analytic value and log-policy gradients against central finite
/// differences on small randomized nets. `corrupt` perturbs one analytic
/// actor component, for verifying the check itself can fail.
inline GradCheckReport run_gradient_check(std::uint64_t seed, int pairs = 10, double h = 1e-5,
                                          bool corrupt = false) {
    GradCheckReport report;
    for (int i = 0; i < pairs; ++i) {
        AgentNet net = make_agent(3, {16, 16}, mix_seed(seed, static_cast<std::uint64_t>(i)));
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i), 7u));
        for (Mlp* mlp : {&net.actor, &net.critic}) {
            std::vector<double> p = mlp->param_vector();
            for (auto& v : p) v = rng.uniform(-0.5, 0.5);
            mlp->set_param_vector(p);
        }
        StateVec s(static_cast<std::size_t>(net.actor.input_dim()));
        for (auto& v : s) v = rng.uniform(-1.0, 1.0);

        {
            MlpCache cache;
            net.critic.forward(s, &cache);
            const double dout[1] = {1.0};
            const std::vector<double> analytic = Mlp::grad_vector(net.critic.backward(cache, dout));
            const std::vector<double> fd =
                detail::fd_gradient(net.critic, h, [&] { return net.critic.forward(s)[0]; });
            for (std::size_t j = 0; j < analytic.size(); ++j)
                report.critic_max_rel = std::max(report.critic_max_rel, detail::rel_error(analytic[j], fd[j]));
        }
        {
            const int ai = i % 2;
            MlpCache cache;
            const std::vector<double> logits = net.actor.forward(s, &cache);
            const std::array<double, 2> pi = softmax2(logits[0], logits[1]);
            const double dout[2] = {(ai == 0 ? 1.0 : 0.0) - pi[0], (ai == 1 ? 1.0 : 0.0) - pi[1]};
            std::vector<double> analytic = Mlp::grad_vector(net.actor.backward(cache, dout));
            if (corrupt && !analytic.empty()) analytic[0] += 1e-3;
            const std::vector<double> fd =
                detail::fd_gradient(net.actor, h, [&] { return detail::log_policy(net.actor, s, ai); });
            for (std::size_t j = 0; j < analytic.size(); ++j)
                report.actor_max_rel = std::max(report.actor_max_rel, detail::rel_error(analytic[j], fd[j]));
        }
    }
    return report;
}

}  // namespace votseg
