#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "votseg/matching.hpp"
#include "votseg/rng.hpp"

using namespace votseg;

namespace {

ImagePtr random_frame(int w, int h, std::uint64_t seed) {
    auto img = std::make_shared<Image>(w, h);
    Rng rng(seed);
    for (auto& b : img->pixels) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

// Frozen reference: per-pixel triple-loop histogram and explicit L2 sum.
std::array<double, 512> histogram_oracle(const Image& patch) {
    std::array<double, 512> h{};
    for (int y = 0; y < patch.height; ++y)
        for (int x = 0; x < patch.width; ++x) {
            const std::uint8_t* px = patch.at(x, y);
            const int r = px[0] / 32;
            const int g = px[1] / 32;
            const int b = px[2] / 32;
            h[static_cast<std::size_t>(r) * 64 + static_cast<std::size_t>(g) * 8 + b] += 1.0;
        }
    const double n = static_cast<double>(patch.width) * patch.height;
    for (double& v : h) v /= n;
    return h;
}

double distance_oracle(const Image& a, const Image& b) {
    const auto ha = histogram_oracle(a);
    const auto hb = histogram_oracle(b);
    double s = 0.0;
    for (int i = 0; i < 512; ++i) s += (ha[i] - hb[i]) * (ha[i] - hb[i]);
    return std::sqrt(s);
}

}  // namespace

TEST_CASE("check_weights accepts convex pairs and rejects the rest") {
    CHECK_NOTHROW(check_weights(MatchWeights{1.0, 0.0}));
    CHECK_NOTHROW(check_weights(MatchWeights{0.5, 0.5}));
    CHECK_THROWS_AS(check_weights(MatchWeights{0.7, 0.7}), std::invalid_argument);
    CHECK_THROWS_AS(check_weights(MatchWeights{-0.1, 1.1}), std::invalid_argument);
}

TEST_CASE("score_iou blends box and mask overlap") {
    auto frame = random_frame(32, 32, 1);
    const Box tbox{4, 4, 12, 12};
    TargetTemplate t = init_template(frame, tbox);

    Proposal p;
    p.box = Box{8, 4, 16, 12};
    p.mask = BitMask::filled_box(32, 32, p.box);
    p.confidence = 1.0;

    const double biou = box_iou(tbox, p.box);
    const double miou = mask_iou(t.mask, p.mask);
    CHECK(score_iou(t, p, MatchWeights{1.0, 0.0}) == biou);
    CHECK(score_iou(t, p, MatchWeights{0.0, 1.0}) == miou);
    CHECK(score_iou(t, p, MatchWeights{0.5, 0.5}) == Catch::Approx(0.5 * biou + 0.5 * miou).epsilon(1e-15));
}

TEST_CASE("embedding matches the per-pixel histogram oracle") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto patch = random_frame(17, 13, seed);
        const Embedding e = embed(*patch);
        const auto oracle = histogram_oracle(*patch);
        const auto vals = e.values();
        REQUIRE(vals.size() == 512);
        double total = 0.0;
        for (int i = 0; i < 512; ++i) {
            REQUIRE(vals[i] == oracle[i]);
            total += vals[i];
        }
        CHECK(total == Catch::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("l2_distance matches the explicit sum and is a metric on examples") {
    auto a = random_frame(10, 10, 100);
    auto b = random_frame(10, 10, 101);
    const Embedding ea = embed(*a);
    const Embedding eb = embed(*b);
    CHECK(ea.l2_distance(eb) == Catch::Approx(distance_oracle(*a, *b)).epsilon(1e-14));
    CHECK(ea.l2_distance(ea) == 0.0);
    CHECK(ea.l2_distance(eb) == eb.l2_distance(ea));
}

TEST_CASE("score_appearance is one for identical crops and decreasing in distance") {
    auto frame = random_frame(40, 40, 9);
    const TargetTemplate t = init_template(frame, Box{5, 5, 20, 20});
    Proposal same;
    same.box = Box{5, 5, 20, 20};
    same.mask = BitMask::filled_box(40, 40, same.box);
    CHECK(score_appearance(t, same, *frame) == 1.0);

    auto dark = std::make_shared<Image>(40, 40);
    dark->fill(10, 10, 10);
    Proposal other = same;
    const double s_other = score_appearance(t, other, *dark);
    CHECK(s_other < 1.0);
    CHECK(s_other == Catch::Approx(1.0 / (1.0 + distance_oracle(crop(*frame, t.box), crop(*dark, same.box)))));

    // proposal box hanging off the frame is scored on its visible part
    Proposal edge = same;
    edge.box = Box{-5, -5, 10, 10};
    CHECK_NOTHROW(score_appearance(t, edge, *frame));
}

TEST_CASE("select_best picks the highest score with ties to the lowest index") {
    const std::vector<double> scores{0.2, 0.9, 0.9, 0.1};
    auto best = select_best(scores);
    REQUIRE(best.has_value());
    CHECK(*best == 1);
    CHECK_FALSE(select_best(std::span<const double>{}).has_value());
    const std::vector<double> single{0.5};
    CHECK(*select_best(single) == 0);
}
