#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "votseg/features.hpp"
#include "votseg/rng.hpp"

using namespace votseg;

namespace {

ImagePtr random_frame(int w, int h, std::uint64_t seed) {
    auto img = std::make_shared<Image>(w, h);
    Rng rng(seed);
    for (auto& b : img->pixels) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

// Frozen reference: recompute one pooled cell directly from the pixels.
double cell_oracle(const Image& view, int grid, int gx, int gy) {
    const auto edge = [&](int i, int extent) {
        return static_cast<int>(std::lround(static_cast<double>(i) * extent / grid));
    };
    const int x0 = edge(gx, view.width);
    const int x1 = edge(gx + 1, view.width);
    const int y0 = edge(gy, view.height);
    const int y1 = edge(gy + 1, view.height);
    double sum = 0.0;
    long count = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const std::uint8_t* px = view.at(x, y);
            sum += px[0] + px[1] + px[2];
            ++count;
        }
    return count == 0 ? 0.0 : sum / (765.0 * count);
}

}  // namespace

TEST_CASE("feature_dim adds six geometry slots") {
    CHECK(feature_dim(16) == 262);
    CHECK(feature_dim(4) == 22);
}

TEST_CASE("extract matches the per-cell oracle") {
    auto view = random_frame(37, 29, 12);
    const Box box{5, 3, 20, 17};
    const std::vector<double> f = extract(*view, box, 4);
    REQUIRE(f.size() == 22);
    for (int gy = 0; gy < 4; ++gy)
        for (int gx = 0; gx < 4; ++gx)
            REQUIRE(f[static_cast<std::size_t>(gy) * 4 + gx] ==
                    Catch::Approx(cell_oracle(*view, 4, gx, gy)).epsilon(1e-15));
}

TEST_CASE("geometry features are normalized box statistics") {
    auto view = random_frame(100, 50, 4);
    const Box box{10, 5, 40, 25};
    const std::vector<double> f = extract(*view, box, 2);
    const double* geo = f.data() + 4;
    CHECK(geo[0] == Catch::Approx(25.0 / 100.0));
    CHECK(geo[1] == Catch::Approx(15.0 / 50.0));
    CHECK(geo[2] == Catch::Approx(30.0 / 100.0));
    CHECK(geo[3] == Catch::Approx(20.0 / 50.0));
    CHECK(geo[4] == Catch::Approx(600.0 / 5000.0));
    CHECK(geo[5] == Catch::Approx(1.5 / 4.0));

    // very wide boxes saturate the aspect slot
    const std::vector<double> wide = extract(*view, Box{0, 20, 90, 22}, 2);
    CHECK(wide[4 + 5] == 1.0);
}

TEST_CASE("pooled luminance is bounded and tracks brightness") {
    auto bright = std::make_shared<Image>(32, 32);
    bright->fill(255, 255, 255);
    auto dark = std::make_shared<Image>(32, 32);
    dark->fill(0, 0, 0);
    const Box box{0, 0, 32, 32};
    const auto fb = extract(*bright, box, 16);
    const auto fd = extract(*dark, box, 16);
    for (int i = 0; i < 256; ++i) {
        CHECK(fb[i] == 1.0);
        CHECK(fd[i] == 0.0);
    }
}

TEST_CASE("build_state concatenates the template and prediction streams") {
    auto frame0 = random_frame(64, 48, 1);
    auto frame1 = random_frame(64, 48, 2);
    const TargetTemplate t = init_template(frame0, Box{8, 8, 24, 24});
    BitMask pmask = BitMask::filled_box(64, 48, Box{30, 20, 44, 34});
    const PredictedResult p{frame1, Box{30, 20, 44, 34}, pmask, 0.9};

    const StateVec s = build_state(t, p, 16);
    REQUIRE(s.size() == 524);

    const Image tv = compose_template_view(t);
    const Image pv = compose_prediction_view(p);
    const auto ft = extract(tv, t.box, 16);
    const auto fp = extract(pv, p.box, 16);
    for (int i = 0; i < 262; ++i) {
        REQUIRE(s[i] == ft[i]);
        REQUIRE(s[262 + i] == fp[i]);
    }

    StateScratch scratch;
    StateVec via_scratch;
    build_state(t, p, 16, scratch, via_scratch);
    CHECK(via_scratch == s);
    CHECK(build_state(t, p, 16, scratch) == s);
}

TEST_CASE("masked pixels outside the prediction contribute zero luminance") {
    auto frame = std::make_shared<Image>(32, 32);
    frame->fill(255, 255, 255);
    BitMask mask(32, 32);
    // fill only the top-left quadrant
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) mask.set(x, y, true);
    const PredictedResult p{frame, Box{0, 0, 16, 16}, mask, 1.0};
    const Image view = compose_prediction_view(p);
    const auto f = extract(view, p.box, 2);
    CHECK(f[0] == 1.0);
    CHECK(f[1] == 0.0);
    CHECK(f[2] == 0.0);
    CHECK(f[3] == 0.0);
}
