#include <catch2/catch_amalgamated.hpp>

#include "votseg/geometry.hpp"
#include "votseg/rng.hpp"

using namespace votseg;

namespace {

// Frozen reference: counts intersection and union pixel by pixel, no packing.
double pixel_iou_oracle(const BitMask& a, const BitMask& b) {
    std::int64_t inter = 0;
    std::int64_t uni = 0;
    for (int y = 0; y < a.height(); ++y) {
        for (int x = 0; x < a.width(); ++x) {
            const bool pa = a.get(x, y);
            const bool pb = b.get(x, y);
            inter += pa && pb;
            uni += pa || pb;
        }
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BitMask random_mask(int w, int h, double density, Rng& rng) {
    BitMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (rng.bernoulli(density)) m.set(x, y, true);
    return m;
}

}  // namespace

TEST_CASE("box accessors and validity") {
    const Box b{2, 3, 7, 11};
    CHECK(b.width() == 5);
    CHECK(b.height() == 8);
    CHECK(b.area() == 40);
    CHECK(b.center_x() == Catch::Approx(4.5));
    CHECK(b.center_y() == Catch::Approx(7.0));
    CHECK(b.diagonal() == Catch::Approx(std::sqrt(25.0 + 64.0)));
    CHECK(b.valid());
    CHECK_FALSE(Box{3, 3, 3, 5}.valid());
    CHECK_FALSE(Box{4, 3, 3, 5}.valid());
    CHECK_THROWS_AS(require_valid(Box{1, 1, 1, 1}, "test"), std::invalid_argument);
}

TEST_CASE("box_iou matches hand-computed values") {
    CHECK(box_iou(Box{0, 0, 2, 2}, Box{0, 0, 2, 2}) == 1.0);
    CHECK(box_iou(Box{0, 0, 2, 2}, Box{5, 5, 7, 7}) == 0.0);
    // 2x2 boxes overlapping in a 1x2 strip: 2 / (4 + 4 - 2)
    CHECK(box_iou(Box{0, 0, 2, 2}, Box{1, 0, 3, 2}) == Catch::Approx(2.0 / 6.0));
    CHECK_THROWS_AS(box_iou(Box{0, 0, 0, 2}, Box{0, 0, 2, 2}), std::invalid_argument);
}

TEST_CASE("intersect and enclosing boxes") {
    const Box a{0, 0, 4, 4};
    const Box b{2, 1, 6, 3};
    CHECK(intersect_boxes(a, b) == Box{2, 1, 4, 3});
    const Box boxes[] = {a, b, Box{-1, 2, 1, 8}};
    CHECK(enclosing_box(boxes) == Box{-1, 0, 6, 8});
    CHECK_THROWS_AS(enclosing_box(std::span<const Box>{}), std::invalid_argument);
}

TEST_CASE("expand_box scales about the center and clamps") {
    CHECK(expand_box(Box{10, 10, 20, 20}, 2.0, 100, 100) == Box{5, 5, 25, 25});
    CHECK(expand_box(Box{10, 10, 20, 20}, 1.0, 100, 100) == Box{10, 10, 20, 20});
    // odd width, ratio 1.5: center 11.5, half width 4.5
    CHECK(expand_box(Box{10, 10, 13, 13}, 3.0, 100, 100) == Box{7, 7, 16, 16});
    CHECK(expand_box(Box{0, 0, 10, 10}, 2.0, 12, 12) == Box{0, 0, 12, 12});
    CHECK_THROWS_AS(expand_box(Box{0, 0, 4, 4}, 0.5, 10, 10), std::invalid_argument);
}

TEST_CASE("bitmask get/set/count across word boundaries") {
    BitMask m(130, 3);
    CHECK(m.row_words() == 3);
    CHECK(m.count() == 0);
    CHECK(m.empty());
    m.set(0, 0, true);
    m.set(63, 0, true);
    m.set(64, 0, true);
    m.set(129, 2, true);
    CHECK(m.count() == 4);
    CHECK(m.get(63, 0));
    CHECK(m.get(64, 0));
    CHECK_FALSE(m.get(65, 0));
    m.set(63, 0, false);
    CHECK(m.count() == 3);
    CHECK_THROWS_AS(BitMask(0, 4), std::invalid_argument);
}

TEST_CASE("filled_box and box_from_mask round trip") {
    Rng rng(41);
    for (int i = 0; i < 50; ++i) {
        const int w = static_cast<int>(rng.uniform_int(5, 80));
        const int h = static_cast<int>(rng.uniform_int(5, 80));
        const int x0 = static_cast<int>(rng.uniform_int(0, w - 2));
        const int y0 = static_cast<int>(rng.uniform_int(0, h - 2));
        const Box b{x0, y0, static_cast<int>(rng.uniform_int(x0 + 1, w)), static_cast<int>(rng.uniform_int(y0 + 1, h))};
        const BitMask m = BitMask::filled_box(w, h, b);
        CHECK(m.count() == b.area());
        CHECK(box_from_mask(m) == b);
    }
    CHECK_THROWS_AS(box_from_mask(BitMask(4, 4)), std::invalid_argument);
    CHECK_THROWS_AS(BitMask::filled_box(4, 4, Box{0, 0, 5, 1}), std::invalid_argument);
}

TEST_CASE("mask_iou equals the per-pixel oracle on random pairs") {
    Rng rng(1234);
    const double densities[] = {0.05, 0.3, 0.5, 0.9};
    for (int i = 0; i < 200; ++i) {
        const double da = densities[i % 4];
        const double db = densities[(i / 4) % 4];
        const BitMask a = random_mask(32, 32, da, rng);
        const BitMask b = random_mask(32, 32, db, rng);
        REQUIRE(mask_iou(a, b) == pixel_iou_oracle(a, b));
    }
}

TEST_CASE("mask_iou edge cases") {
    const BitMask empty_a(16, 16);
    const BitMask empty_b(16, 16);
    CHECK(mask_iou(empty_a, empty_b) == 1.0);
    BitMask one(16, 16);
    one.set(3, 3, true);
    CHECK(mask_iou(empty_a, one) == 0.0);
    CHECK(mask_iou(one, one) == 1.0);
    CHECK_THROWS_AS(mask_iou(BitMask(8, 8), BitMask(8, 9)), std::invalid_argument);
}

TEST_CASE("clip_to zeroes bits outside the box") {
    Rng rng(77);
    BitMask m = random_mask(40, 30, 0.5, rng);
    BitMask clipped = m;
    const Box region{10, 5, 25, 20};
    clipped.clip_to(region);
    for (int y = 0; y < 30; ++y)
        for (int x = 0; x < 40; ++x) {
            const bool inside = x >= region.x0 && x < region.x1 && y >= region.y0 && y < region.y1;
            REQUIRE(clipped.get(x, y) == (inside && m.get(x, y)));
        }
}

TEST_CASE("translate_mask shifts and drops bits at the border") {
    BitMask m(8, 8);
    m.set(1, 1, true);
    m.set(7, 7, true);
    const BitMask t = translate_mask(m, 2, -1);
    CHECK(t.count() == 1);
    CHECK(t.get(3, 0));
    const BitMask zero = translate_mask(m, 8, 0);
    CHECK(zero.empty());
    const BitMask id = translate_mask(m, 0, 0);
    CHECK(id == m);
}

TEST_CASE("dilate and erode behave as square structuring elements") {
    BitMask m(9, 9);
    m.set(4, 4, true);
    const BitMask d1 = dilate_mask(m, 1);
    CHECK(d1.count() == 9);
    for (int y = 3; y <= 5; ++y)
        for (int x = 3; x <= 5; ++x) CHECK(d1.get(x, y));
    CHECK(erode_mask(d1, 1) == m);
    CHECK(erode_mask(m, 1).empty());
    CHECK(dilate_mask(m, 0) == m);

    // erosion treats the border as background
    BitMask full(5, 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) full.set(x, y, true);
    const BitMask e = erode_mask(full, 1);
    CHECK(e.count() == 9);
    CHECK(e.get(2, 2));
    CHECK_FALSE(e.get(0, 0));
}
