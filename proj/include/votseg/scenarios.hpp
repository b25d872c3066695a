#pragma once

#include <cmath>
#include <stdexcept>

#include "votseg/datasets.hpp"
#include "votseg/proposals.hpp"
#include "votseg/rng.hpp"

namespace votseg {

/// A renderable scene plus the detector behavior that goes with it.
struct Scenario {
    SynthConfig synth;
    DetectorScript script;
};

namespace detail {

inline double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

inline std::vector<Waypoint> random_walk(Rng& rng, int frames, double x0, double y0, double lo_x, double hi_x,
                                         double lo_y, double hi_y, double leg_min, double leg_max) {
    std::vector<Waypoint> pts;
    const int legs = 3;
    double x = clampd(x0, lo_x, hi_x);
    double y = clampd(y0, lo_y, hi_y);
    pts.push_back({0, x, y});
    for (int i = 1; i <= legs; ++i) {
        const double angle = rng.uniform(0.0, 6.283185307179586);
        const double len = rng.uniform(leg_min, leg_max);
        x = clampd(x + len * std::cos(angle), lo_x, hi_x);
        y = clampd(y + len * std::sin(angle), lo_y, hi_y);
        pts.push_back({i == legs ? frames - 1 : i * (frames - 1) / legs, x, y});
    }
    return pts;
}

}  // namespace detail

/// Up to four well-separated objects on smooth trajectories, one per frame
/// quadrant so supports never touch. With `identity_detector` the script
/// reproduces ground truth exactly (no jitter, no morphology, no dropouts).
inline Scenario make_basic_scenario(int objects, int frames, std::uint64_t seed, bool identity_detector = true) {
    if (objects < 1 || objects > 4) throw std::invalid_argument("make_basic_scenario: 1..4 objects supported");
    if (frames < 2) throw std::invalid_argument("make_basic_scenario: need at least two frames");
    Scenario sc;
    sc.synth.name = "basic";
    sc.synth.frames = frames;
    sc.synth.seed = mix_seed(seed, 0x5CE2Eu);
    Rng rng(mix_seed(seed, 0xBA51Cu));

    const double cx[4] = {64, 192, 64, 192};
    const double cy[4] = {64, 64, 192, 192};
    const std::array<std::uint8_t, 3> colors[4] = {
        {220, 120, 90}, {110, 200, 120}, {120, 140, 230}, {225, 210, 110}};
    for (int k = 0; k < objects; ++k) {
        SynthObject o;
        o.shape = k % 2 == 0 ? ShapeKind::Ellipse : ShapeKind::Rectangle;
        o.rx = 18 + rng.uniform(0.0, 8.0);
        o.ry = 14 + rng.uniform(0.0, 8.0);
        o.color = colors[k];
        o.waypoints = detail::random_walk(rng, frames, cx[k] + rng.uniform(-12.0, 12.0),
                                          cy[k] + rng.uniform(-12.0, 12.0), cx[k] - 25, cx[k] + 25, cy[k] - 25,
                                          cy[k] + 25, 12.0, 30.0);
        sc.synth.objects.push_back(std::move(o));
    }

    if (identity_detector) {
        sc.script.box_jitter = 0;
        sc.script.morph_radius = 0;
        sc.script.dropout_prob = 0;
    } else {
        sc.script.box_jitter = 0.03;
        sc.script.morph_radius = 1;
    }
    sc.script.seed = mix_seed(seed, 0xDE7EC7u);
    return sc;
}

/// One bright ellipse shadowed by a darker translated clone. For three short
/// windows the clone sweeps in next to the target while the target's own
/// detection is suppressed, so the clone is the only candidate: accepting it
/// moves the template onto the wrong instance for good, declining it costs a
/// few frames of staleness. Clone and target supports stay disjoint even at
/// closest approach, though their boxes overlap slightly.
inline Scenario make_drift_scenario(std::uint64_t seed, int frames = 40) {
    if (frames < 40) throw std::invalid_argument("make_drift_scenario: need at least 40 frames");
    Scenario sc;
    sc.synth.name = "drift";
    sc.synth.frames = frames;
    sc.synth.seed = mix_seed(seed, 0x5CE2Eu);
    Rng rng(mix_seed(seed, 0xD21F7u));

    SynthObject o;
    o.shape = ShapeKind::Ellipse;
    o.rx = 24 + rng.uniform(0.0, 6.0);
    o.ry = 18 + rng.uniform(0.0, 5.0);
    o.color = {static_cast<std::uint8_t>(215 + rng.uniform_int(0, 25)),
               static_cast<std::uint8_t>(205 + rng.uniform_int(0, 20)),
               static_cast<std::uint8_t>(190 + rng.uniform_int(0, 20))};
    const double mx = o.rx + 10;
    const double my = o.ry + 10;
    o.waypoints = detail::random_walk(rng, frames, rng.uniform(mx, 256 - mx), rng.uniform(my, 256 - my), mx,
                                      256 - mx, my, 256 - my, 18.0, 28.0);
    sc.synth.objects.push_back(o);

    SynthDistractor d;
    d.source = 0;
    d.color_scale = 0.42 + rng.uniform(0.0, 0.04);
    const auto far_offset = [&rng]() {
        const double sx = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double sy = rng.bernoulli(0.5) ? 1.0 : -1.0;
        return std::pair<double, double>{sx * rng.uniform(88.0, 100.0), sy * rng.uniform(70.0, 82.0)};
    };
    auto [fx, fy] = far_offset();
    d.offsets.push_back({0, fx, fy});
    const int starts[3] = {8, 20, 32};
    for (int w = 0; w < 3; ++w) {
        const int b = starts[w] + static_cast<int>(rng.uniform_int(-1, 1));
        const double tx = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double ty = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double nx = tx * 1.55 * o.rx;
        const double ny = ty * 1.45 * o.ry;
        d.offsets.push_back({b - 4, fx, fy});
        d.offsets.push_back({b, nx, ny});
        d.offsets.push_back({b + 2, nx, ny});
        std::tie(fx, fy) = far_offset();
        d.offsets.push_back({b + 5, fx, fy});
        sc.script.swap_events.push_back(SwapEvent{0, b, b + 3});
    }
    d.offsets.push_back({frames - 1, fx, fy});
    sc.synth.distractors.push_back(std::move(d));

    sc.script.box_jitter = 0.04;
    sc.script.morph_radius = 1;
    sc.script.dropout_prob = 0;
    sc.script.distractor_confidence_scale = 0.5;
    sc.script.seed = mix_seed(seed, 0xDE7EC7u);
    return sc;
}

/// Fixed evaluation set: ten drift sequences derived from one seed.
inline std::vector<Scenario> make_drift_benchmark(std::uint64_t seed = 7, int count = 10) {
    std::vector<Scenario> out;
    for (int i = 0; i < count; ++i) out.push_back(make_drift_scenario(mix_seed(seed, static_cast<std::uint64_t>(i))));
    return out;
}

/// Training sequences drawn from a disjoint seed range so evaluation stays
/// held out.
inline std::vector<Scenario> make_drift_training_set(std::uint64_t seed = 1000, int count = 20) {
    std::vector<Scenario> out;
    for (int i = 0; i < count; ++i)
        out.push_back(make_drift_scenario(mix_seed(seed, 0xED0u + static_cast<std::uint64_t>(i))));
    return out;
}

}  // namespace votseg
