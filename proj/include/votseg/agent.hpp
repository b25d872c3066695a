#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "votseg/features.hpp"
#include "votseg/rng.hpp"
#include "votseg/template.hpp"

namespace votseg {

// ---------------------------------------------------------------------------
// Fully connected net with tanh hidden layers and a linear output layer.
// Everything is explicit doubles so gradients can be checked against finite
// differences exactly as written.

struct Layer {
    int in = 0;
    int out = 0;
    std::vector<double> w;  // row-major, out x in
    std::vector<double> b;
};

struct MlpCache {
    std::vector<std::vector<double>> act;  // act[0] is the input
};

struct MlpGrad {
    std::vector<Layer> layers;
};

class Mlp {
  public:
    Mlp() = default;
    explicit Mlp(std::vector<int> dims) : dims_(std::move(dims)) {
        if (dims_.size() < 2) throw std::invalid_argument("Mlp: need input and output dims");
        for (int d : dims_)
            if (d <= 0) throw std::invalid_argument("Mlp: nonpositive layer dim");
        for (std::size_t i = 1; i < dims_.size(); ++i) {
            Layer l;
            l.in = dims_[i - 1];
            l.out = dims_[i];
            l.w.assign(static_cast<std::size_t>(l.in) * l.out, 0.0);
            l.b.assign(l.out, 0.0);
            layers_.push_back(std::move(l));
        }
    }

    void init_params(Rng& rng) {
        for (auto& l : layers_) {
            const double s = 1.0 / std::sqrt(static_cast<double>(l.in));
            for (auto& v : l.w) v = rng.uniform(-s, s);
            for (auto& v : l.b) v = rng.uniform(-s, s);
        }
    }

    int input_dim() const { return dims_.front(); }
    int output_dim() const { return dims_.back(); }
    const std::vector<int>& dims() const { return dims_; }
    const std::vector<Layer>& layers() const { return layers_; }

    std::vector<double> forward(std::span<const double> x, MlpCache* cache = nullptr) const {
        if (static_cast<int>(x.size()) != input_dim())
            throw std::invalid_argument("Mlp::forward: input length " + std::to_string(x.size()) +
                                        ", expected " + std::to_string(input_dim()));
        if (cache) {
            cache->act.clear();
            cache->act.emplace_back(x.begin(), x.end());
        }
        std::vector<double> cur(x.begin(), x.end());
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            const Layer& l = layers_[li];
            std::vector<double> next(l.out);
            for (int o = 0; o < l.out; ++o) {
                double acc = l.b[o];
                const double* row = l.w.data() + static_cast<std::size_t>(o) * l.in;
                for (int i = 0; i < l.in; ++i) acc += row[i] * cur[i];
                next[o] = li + 1 < layers_.size() ? std::tanh(acc) : acc;
            }
            cur = std::move(next);
            if (cache) cache->act.push_back(cur);
        }
        return cur;
    }

    /// Gradients of sum(dout . output) with respect to all parameters.
    MlpGrad backward(const MlpCache& cache, std::span<const double> dout) const {
        if (cache.act.size() != layers_.size() + 1) throw std::invalid_argument("Mlp::backward: stale cache");
        if (static_cast<int>(dout.size()) != output_dim())
            throw std::invalid_argument("Mlp::backward: bad output gradient length");
        MlpGrad g;
        g.layers.resize(layers_.size());
        std::vector<double> delta(dout.begin(), dout.end());
        for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
            const Layer& l = layers_[li];
            const std::vector<double>& in = cache.act[li];
            Layer& gl = g.layers[li];
            gl.in = l.in;
            gl.out = l.out;
            gl.w.assign(l.w.size(), 0.0);
            gl.b = delta;
            for (int o = 0; o < l.out; ++o) {
                double* row = gl.w.data() + static_cast<std::size_t>(o) * l.in;
                for (int i = 0; i < l.in; ++i) row[i] = delta[o] * in[i];
            }
            if (li == 0) break;
            std::vector<double> prev(l.in, 0.0);
            for (int o = 0; o < l.out; ++o) {
                const double* row = l.w.data() + static_cast<std::size_t>(o) * l.in;
                for (int i = 0; i < l.in; ++i) prev[i] += row[i] * delta[o];
            }
            for (int i = 0; i < l.in; ++i) prev[i] *= 1.0 - in[i] * in[i];
            delta = std::move(prev);
        }
        return g;
    }

    void apply_update(const MlpGrad& g, double scale) {
        if (g.layers.size() != layers_.size()) throw std::invalid_argument("Mlp::apply_update: shape mismatch");
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            for (double v : g.layers[li].w)
                if (!std::isfinite(v)) throw std::runtime_error("Mlp::apply_update: non-finite gradient");
            for (double v : g.layers[li].b)
                if (!std::isfinite(v)) throw std::runtime_error("Mlp::apply_update: non-finite gradient");
            for (std::size_t i = 0; i < layers_[li].w.size(); ++i) layers_[li].w[i] += scale * g.layers[li].w[i];
            for (std::size_t i = 0; i < layers_[li].b.size(); ++i) layers_[li].b[i] += scale * g.layers[li].b[i];
        }
        for (const auto& l : layers_) {
            for (double v : l.w)
                if (!std::isfinite(v)) throw std::runtime_error("Mlp::apply_update: non-finite parameter");
            for (double v : l.b)
                if (!std::isfinite(v)) throw std::runtime_error("Mlp::apply_update: non-finite parameter");
        }
    }

    std::vector<double> param_vector() const {
        std::vector<double> out;
        for (const auto& l : layers_) {
            out.insert(out.end(), l.w.begin(), l.w.end());
            out.insert(out.end(), l.b.begin(), l.b.end());
        }
        return out;
    }

    void set_param_vector(std::span<const double> p) {
        std::size_t pos = 0;
        for (auto& l : layers_) {
            if (pos + l.w.size() + l.b.size() > p.size())
                throw std::invalid_argument("Mlp::set_param_vector: too few values");
            std::copy(p.begin() + pos, p.begin() + pos + l.w.size(), l.w.begin());
            pos += l.w.size();
            std::copy(p.begin() + pos, p.begin() + pos + l.b.size(), l.b.begin());
            pos += l.b.size();
        }
        if (pos != p.size()) throw std::invalid_argument("Mlp::set_param_vector: too many values");
    }

    static std::vector<double> grad_vector(const MlpGrad& g) {
        std::vector<double> out;
        for (const auto& l : g.layers) {
            out.insert(out.end(), l.w.begin(), l.w.end());
            out.insert(out.end(), l.b.begin(), l.b.end());
        }
        return out;
    }

  private:
    std::vector<int> dims_;
    std::vector<Layer> layers_;
};

// ---------------------------------------------------------------------------
// Actor-critic agent over the two-action decision space.

constexpr double kDefaultActorLr = 1e-4;
constexpr double kDefaultCriticLr = 5e-4;
constexpr double kLrDecayFactor = 0.99;
constexpr int kLrDecayEvery = 200;
constexpr double kDefaultGamma = 0.9;

struct AgentNet {
    int feature_dim = 0;  // per-stream D; net input is 2*D
    Mlp actor;
    Mlp critic;
    double lr_actor = kDefaultActorLr;
    double lr_critic = kDefaultCriticLr;
    double lr_decay = kLrDecayFactor;
    int lr_decay_every = kLrDecayEvery;
    std::int64_t iteration = 0;
};

struct Transition {
    StateVec state;
    Action action = Action::Update;
    double reward = 0;
    StateVec next_state;
    bool terminal = false;
};

inline AgentNet make_agent(int feature_dim, std::vector<int> hidden, std::uint64_t seed) {
    if (feature_dim <= 0) throw std::invalid_argument("make_agent: nonpositive feature dim");
    AgentNet net;
    net.feature_dim = feature_dim;
    std::vector<int> actor_dims{2 * feature_dim};
    actor_dims.insert(actor_dims.end(), hidden.begin(), hidden.end());
    std::vector<int> critic_dims = actor_dims;
    actor_dims.push_back(2);
    critic_dims.push_back(1);
    net.actor = Mlp(actor_dims);
    net.critic = Mlp(critic_dims);
    Rng actor_rng(mix_seed(seed, 0xAC702u));
    Rng critic_rng(mix_seed(seed, 0xC217Cu));
    net.actor.init_params(actor_rng);
    net.critic.init_params(critic_rng);
    return net;
}

inline AgentNet make_agent(int feature_dim, std::uint64_t seed) {
    return make_agent(feature_dim, {128, 128}, seed);
}

inline std::array<double, 2> softmax2(double l0, double l1) {
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m);
    const double e1 = std::exp(l1 - m);
    const double z = e0 + e1;
    return {e0 / z, e1 / z};
}

inline std::array<double, 2> actor_forward(const AgentNet& net, std::span<const double> s,
                                           MlpCache* cache = nullptr) {
    const std::vector<double> logits = net.actor.forward(s, cache);
    return softmax2(logits[0], logits[1]);
}

inline double critic_forward(const AgentNet& net, std::span<const double> s, MlpCache* cache = nullptr) {
    return net.critic.forward(s, cache)[0];
}

/// Steep cubic payoff above the overlap floor, flat penalty at or below it.
inline double reward(double j) {
    if (!(j >= 0.0 && j <= 1.0)) throw std::invalid_argument("reward: overlap outside [0,1]");
    return j > 0.1 ? 100.0 * j * j * j + 10.0 : -10.0;
}

inline double td_error(double r, double v_next, double v, double gamma, bool terminal = false) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("td_error: gamma outside [0,1]");
    return r + gamma * (terminal ? 0.0 : v_next) - v;
}

inline void update_critic(AgentNet& net, std::span<const double> s, double delta) {
    if (!std::isfinite(delta)) throw std::invalid_argument("update_critic: non-finite delta");
    MlpCache cache;
    net.critic.forward(s, &cache);
    const double dout[1] = {1.0};
    const MlpGrad g = net.critic.backward(cache, dout);
    net.critic.apply_update(g, net.lr_critic * delta);
}

inline void update_actor(AgentNet& net, std::span<const double> s, Action a, double delta) {
    if (!std::isfinite(delta)) throw std::invalid_argument("update_actor: non-finite delta");
    MlpCache cache;
    const std::vector<double> logits = net.actor.forward(s, &cache);
    const std::array<double, 2> pi = softmax2(logits[0], logits[1]);
    const int ai = a == Action::Update ? 0 : 1;
    // d log pi(a) / d logit_j = [j == a] - pi_j
    const double dout[2] = {(ai == 0 ? 1.0 : 0.0) - pi[0], (ai == 1 ? 1.0 : 0.0) - pi[1]};
    const MlpGrad g = net.actor.backward(cache, dout);
    net.actor.apply_update(g, net.lr_actor * delta);
}

enum class SampleMode { Stochastic, Greedy };

inline Action sample_action(const std::array<double, 2>& probs, SampleMode mode, Rng& rng) {
    if (!(probs[0] >= 0 && probs[1] >= 0 && std::abs(probs[0] + probs[1] - 1.0) <= 1e-9))
        throw std::invalid_argument("sample_action: invalid distribution");
    if (mode == SampleMode::Greedy) return probs[0] >= probs[1] ? Action::Update : Action::Keep;
    return rng.uniform() < probs[0] ? Action::Update : Action::Keep;
}

/// Call once per processed transition; every 200th call (by default) shaves
/// 1% off both learning rates.
inline void decay_learning_rates(AgentNet& net) {
    ++net.iteration;
    if (net.lr_decay_every > 0 && net.iteration % net.lr_decay_every == 0) {
        net.lr_actor *= net.lr_decay;
        net.lr_critic *= net.lr_decay;
    }
}

// ---------------------------------------------------------------------------
// Checkpoints: line-oriented text with hex floats, so round trips preserve
// every bit.

namespace detail {

inline std::string hexf(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline double parse_hexf(const std::string& tok, const std::string& what) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || tok.empty())
        throw std::runtime_error(what + ": bad float token '" + tok + "'");
    return v;
}

inline void write_mlp(std::ostream& out, const std::string& name, const Mlp& mlp) {
    const std::vector<double> p = mlp.param_vector();
    out << name << ' ' << p.size() << '\n';
    for (std::size_t i = 0; i < p.size(); ++i) out << hexf(p[i]) << (i % 8 == 7 ? '\n' : ' ');
    if (!p.empty() && p.size() % 8 != 0) out << '\n';
}

inline void read_mlp(std::istream& in, const std::string& name, Mlp& mlp, const std::string& what) {
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != name)
        throw std::runtime_error(what + ": expected section '" + name + "'");
    std::vector<double> p(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::string tok;
        if (!(in >> tok)) throw std::runtime_error(what + ": truncated in section '" + name + "'");
        p[i] = parse_hexf(tok, what);
    }
    mlp.set_param_vector(p);
}

}  // namespace detail

constexpr int kCheckpointVersion = 1;

inline void save_checkpoint(const AgentNet& net, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << "votseg-agent " << kCheckpointVersion << '\n';
    out << "feature_dim " << net.feature_dim << '\n';
    out << "hidden";
    const auto& dims = net.actor.dims();
    for (std::size_t i = 1; i + 1 < dims.size(); ++i) out << ' ' << dims[i];
    out << '\n';
    out << "lr_actor " << detail::hexf(net.lr_actor) << '\n';
    out << "lr_critic " << detail::hexf(net.lr_critic) << '\n';
    out << "iteration " << net.iteration << '\n';
    detail::write_mlp(out, "actor", net.actor);
    detail::write_mlp(out, "critic", net.critic);
    if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

/// Pass expected_feature_dim >= 0 to insist on a particular input size.
inline AgentNet load_checkpoint(const std::string& path, int expected_feature_dim = -1) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    const std::string what = "load_checkpoint(" + path + ")";
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "votseg-agent")
        throw std::runtime_error(what + ": not an agent checkpoint");
    if (version != kCheckpointVersion)
        throw std::runtime_error(what + ": version " + std::to_string(version) + ", expected " +
                                 std::to_string(kCheckpointVersion));
    std::string key;
    int feature_dim = 0;
    if (!(in >> key >> feature_dim) || key != "feature_dim") throw std::runtime_error(what + ": missing feature_dim");
    if (expected_feature_dim >= 0 && feature_dim != expected_feature_dim)
        throw std::runtime_error(what + ": feature_dim " + std::to_string(feature_dim) + ", expected " +
                                 std::to_string(expected_feature_dim));
    if (!(in >> key) || key != "hidden") throw std::runtime_error(what + ": missing hidden dims");
    std::string rest;
    std::getline(in, rest);
    std::istringstream hs(rest);
    std::vector<int> hidden;
    int h = 0;
    while (hs >> h) hidden.push_back(h);
    std::string tok;
    AgentNet net;
    if (!(in >> key >> tok) || key != "lr_actor") throw std::runtime_error(what + ": missing lr_actor");
    net.lr_actor = detail::parse_hexf(tok, what);
    if (!(in >> key >> tok) || key != "lr_critic") throw std::runtime_error(what + ": missing lr_critic");
    net.lr_critic = detail::parse_hexf(tok, what);
    if (!(in >> key >> net.iteration) || key != "iteration") throw std::runtime_error(what + ": missing iteration");
    net.feature_dim = feature_dim;
    std::vector<int> actor_dims{2 * feature_dim};
    actor_dims.insert(actor_dims.end(), hidden.begin(), hidden.end());
    std::vector<int> critic_dims = actor_dims;
    actor_dims.push_back(2);
    critic_dims.push_back(1);
    net.actor = Mlp(actor_dims);
    net.critic = Mlp(critic_dims);
    detail::read_mlp(in, "actor", net.actor, what);
    detail::read_mlp(in, "critic", net.critic, what);
    return net;
}

}  // namespace votseg
