#include <catch2/catch_amalgamated.hpp>

#include <cstring>

#include "votseg/rng.hpp"
#include "votseg/template.hpp"

using namespace votseg;

namespace {

ImagePtr random_frame(int w, int h, std::uint64_t seed) {
    auto img = std::make_shared<Image>(w, h);
    Rng rng(seed);
    for (auto& b : img->pixels) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
    return img;
}

}  // namespace

TEST_CASE("action names") {
    CHECK(std::string(action_name(Action::Update)) == "update");
    CHECK(std::string(action_name(Action::Keep)) == "keep");
}

TEST_CASE("init_template fills the box as the initial mask") {
    auto frame = random_frame(20, 15, 3);
    const Box box{4, 5, 10, 12};
    const TargetTemplate t = init_template(frame, box);
    CHECK(t.frame == frame);
    CHECK(t.box == box);
    CHECK(t.mask.count() == box.area());
    CHECK(box_from_mask(t.mask) == box);
    CHECK_THROWS_AS(init_template(nullptr, box), std::invalid_argument);
    CHECK_THROWS_AS(init_template(frame, Box{15, 0, 25, 5}), std::invalid_argument);
}

TEST_CASE("apply_decision keeps or replaces the template") {
    auto frame0 = random_frame(16, 16, 1);
    auto frame1 = random_frame(16, 16, 2);
    const TargetTemplate t = init_template(frame0, Box{2, 2, 6, 6});
    BitMask pmask(16, 16);
    pmask.set(9, 9, true);
    pmask.set(10, 9, true);
    const PredictedResult p{frame1, Box{9, 9, 11, 10}, pmask, 0.7};

    const TargetTemplate kept = apply_decision(t, p, Action::Keep);
    CHECK(kept.frame == frame0);
    CHECK(kept.box == t.box);
    CHECK(kept.mask == t.mask);

    const TargetTemplate updated = apply_decision(t, p, Action::Update);
    CHECK(updated.frame == frame1);
    CHECK(updated.box == p.box);
    CHECK(updated.mask == pmask);

    const PredictedResult bad{random_frame(8, 8, 3), Box{0, 0, 2, 2}, BitMask(8, 8), 0.5};
    CHECK_THROWS_AS(apply_decision(t, bad, Action::Update), std::invalid_argument);
}

TEST_CASE("compose_template_view blacks out everything outside the box") {
    auto frame = random_frame(12, 10, 8);
    const Box box{3, 2, 8, 7};
    const TargetTemplate t = init_template(frame, box);
    const Image view = compose_template_view(t);
    REQUIRE(view.same_dims(*frame));
    for (int y = 0; y < 10; ++y)
        for (int x = 0; x < 12; ++x) {
            const bool inside = x >= box.x0 && x < box.x1 && y >= box.y0 && y < box.y1;
            if (inside) {
                REQUIRE(std::memcmp(view.at(x, y), frame->at(x, y), 3) == 0);
            } else {
                REQUIRE(view.at(x, y)[0] == 0);
                REQUIRE(view.at(x, y)[1] == 0);
                REQUIRE(view.at(x, y)[2] == 0);
            }
        }
}

TEST_CASE("compose_prediction_view blacks out everything outside the mask") {
    auto frame = random_frame(9, 9, 21);
    BitMask mask(9, 9);
    mask.set(0, 0, true);
    mask.set(4, 4, true);
    mask.set(8, 8, true);
    const PredictedResult p{frame, Box{0, 0, 9, 9}, mask, 1.0};
    const Image view = compose_prediction_view(p);
    for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 9; ++x) {
            if (mask.get(x, y)) {
                REQUIRE(std::memcmp(view.at(x, y), frame->at(x, y), 3) == 0);
            } else {
                REQUIRE(view.at(x, y)[0] == 0);
            }
        }
}

TEST_CASE("view overloads reuse a preallocated buffer") {
    auto frame = random_frame(14, 11, 30);
    const TargetTemplate t = init_template(frame, Box{1, 1, 5, 5});
    Image buffer;
    compose_template_view(t, buffer);
    CHECK(buffer.same_dims(*frame));
    CHECK(buffer == compose_template_view(t));
}
