#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace votseg {

/// Axis-aligned box over half-open integer pixel ranges [x0,x1) x [y0,y1).
struct Box {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
    double center_x() const { return 0.5 * (x0 + x1); }
    double center_y() const { return 0.5 * (y0 + y1); }
    double diagonal() const { return std::hypot(static_cast<double>(width()), static_cast<double>(height())); }
    bool valid() const { return x0 < x1 && y0 < y1; }

    bool operator==(const Box&) const = default;
};

inline void require_valid(const Box& b, const char* what) {
    if (!b.valid()) {
        throw std::invalid_argument(std::string(what) + ": degenerate box [" + std::to_string(b.x0) + "," +
                                    std::to_string(b.y0) + "," + std::to_string(b.x1) + "," + std::to_string(b.y1) +
                                    "]");
    }
}

inline std::int64_t box_intersection_area(const Box& a, const Box& b) {
    const int w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const int h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    if (w <= 0 || h <= 0) return 0;
    return static_cast<std::int64_t>(w) * h;
}

inline double box_iou(const Box& a, const Box& b) {
    require_valid(a, "box_iou");
    require_valid(b, "box_iou");
    const std::int64_t inter = box_intersection_area(a, b);
    const std::int64_t uni = a.area() + b.area() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline Box intersect_boxes(const Box& a, const Box& b) {
    return Box{std::max(a.x0, b.x0), std::max(a.y0, b.y0), std::min(a.x1, b.x1), std::min(a.y1, b.y1)};
}

inline Box enclosing_box(std::span<const Box> boxes) {
    if (boxes.empty()) throw std::invalid_argument("enclosing_box: empty box list");
    Box out = boxes[0];
    for (const Box& b : boxes.subspan(1)) {
        out.x0 = std::min(out.x0, b.x0);
        out.y0 = std::min(out.y0, b.y0);
        out.x1 = std::max(out.x1, b.x1);
        out.y1 = std::max(out.y1, b.y1);
    }
    return out;
}

/// Scales the sides of `b` by `ratio` about its center, rounding outward
/// (floor for mins, ceil for maxes) and clamping to the frame.
inline Box expand_box(const Box& b, double ratio, int frame_w, int frame_h) {
    require_valid(b, "expand_box");
    if (ratio < 1.0) throw std::invalid_argument("expand_box: ratio must be >= 1");
    const double cx = b.center_x();
    const double cy = b.center_y();
    const double hw = 0.5 * ratio * b.width();
    const double hh = 0.5 * ratio * b.height();
    Box out;
    out.x0 = std::max(0, static_cast<int>(std::floor(cx - hw)));
    out.y0 = std::max(0, static_cast<int>(std::floor(cy - hh)));
    out.x1 = std::min(frame_w, static_cast<int>(std::ceil(cx + hw)));
    out.y1 = std::min(frame_h, static_cast<int>(std::ceil(cy + hh)));
    return out;
}

/// Binary mask with rows packed into 64-bit words so that IOU reduces to
/// word-wise AND/OR plus popcount. Bits beyond `width` in the final word of
/// each row are always zero.
class BitMask {
public:
    BitMask() = default;

    BitMask(int width, int height)
        : width_(width), height_(height), row_words_((width + 63) / 64),
          words_(static_cast<std::size_t>(row_words_) * height, 0) {
        if (width <= 0 || height <= 0) throw std::invalid_argument("BitMask: dimensions must be positive");
    }

    static BitMask filled_box(int width, int height, const Box& b) {
        BitMask m(width, height);
        require_valid(b, "BitMask::filled_box");
        if (b.x0 < 0 || b.y0 < 0 || b.x1 > width || b.y1 > height)
            throw std::invalid_argument("BitMask::filled_box: box outside mask bounds");
        for (int y = b.y0; y < b.y1; ++y)
            for (int x = b.x0; x < b.x1; ++x) m.set(x, y, true);
        return m;
    }

    int width() const { return width_; }
    int height() const { return height_; }
    int row_words() const { return row_words_; }
    std::span<const std::uint64_t> words() const { return words_; }

    bool get(int x, int y) const {
        return (words_[static_cast<std::size_t>(y) * row_words_ + (x >> 6)] >> (x & 63)) & 1u;
    }

    void set(int x, int y, bool v) {
        std::uint64_t& w = words_[static_cast<std::size_t>(y) * row_words_ + (x >> 6)];
        const std::uint64_t bit = 1ULL << (x & 63);
        if (v)
            w |= bit;
        else
            w &= ~bit;
    }

    std::int64_t count() const {
        std::int64_t n = 0;
        for (std::uint64_t w : words_) n += std::popcount(w);
        return n;
    }

    bool empty() const { return count() == 0; }

    bool same_dims(const BitMask& o) const { return width_ == o.width_ && height_ == o.height_; }

    bool operator==(const BitMask& o) const {
        return width_ == o.width_ && height_ == o.height_ && words_ == o.words_;
    }

    /// Zeroes every bit outside `b`.
    void clip_to(const Box& b) {
        for (int y = 0; y < height_; ++y) {
            if (y >= b.y0 && y < b.y1) {
                for (int x = 0; x < width_; ++x)
                    if (x < b.x0 || x >= b.x1) set(x, y, false);
            } else {
                auto* row = &words_[static_cast<std::size_t>(y) * row_words_];
                std::fill(row, row + row_words_, 0ULL);
            }
        }
    }

private:
    friend double mask_iou(const BitMask& a, const BitMask& b);

    int width_ = 0;
    int height_ = 0;
    int row_words_ = 0;
    std::vector<std::uint64_t> words_;
};

/// IOU of two equally sized masks; both-empty pairs count as full agreement.
inline double mask_iou(const BitMask& a, const BitMask& b) {
    if (!a.same_dims(b))
        throw std::invalid_argument("mask_iou: dimension mismatch " + std::to_string(a.width()) + "x" +
                                    std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                                    std::to_string(b.height()));
    std::int64_t inter = 0;
    std::int64_t uni = 0;
    const std::size_t n = a.words_.size();
    for (std::size_t i = 0; i < n; ++i) {
        inter += std::popcount(a.words_[i] & b.words_[i]);
        uni += std::popcount(a.words_[i] | b.words_[i]);
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Tight bounding box of the foreground.
inline Box box_from_mask(const BitMask& m) {
    int min_x = m.width(), min_y = m.height(), max_x = -1, max_y = -1;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y)) continue;
            min_x = std::min(min_x, x);
            min_y = std::min(min_y, y);
            max_x = std::max(max_x, x);
            max_y = std::max(max_y, y);
        }
    }
    if (max_x < 0) throw std::invalid_argument("box_from_mask: empty mask");
    return Box{min_x, min_y, max_x + 1, max_y + 1};
}

/// Foreground shifted by (dx, dy); bits leaving the frame are dropped.
inline BitMask translate_mask(const BitMask& m, int dx, int dy) {
    BitMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        const int sy = y - dy;
        if (sy < 0 || sy >= m.height()) continue;
        for (int x = 0; x < m.width(); ++x) {
            const int sx = x - dx;
            if (sx < 0 || sx >= m.width()) continue;
            if (m.get(sx, sy)) out.set(x, y, true);
        }
    }
    return out;
}

namespace detail {

// Separable square-structuring-element pass. `dilate` grows runs, otherwise
// shrinks them; border pixels are treated as background for erosion.
inline BitMask morph_pass(const BitMask& m, int radius, bool dilate) {
    BitMask tmp(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            bool v = dilate ? false : true;
            for (int k = -radius; k <= radius; ++k) {
                const int sx = x + k;
                const bool bit = (sx >= 0 && sx < m.width()) ? m.get(sx, y) : false;
                if (dilate)
                    v = v || bit;
                else
                    v = v && bit;
            }
            tmp.set(x, y, v);
        }
    }
    BitMask out(m.width(), m.height());
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            bool v = dilate ? false : true;
            for (int k = -radius; k <= radius; ++k) {
                const int sy = y + k;
                const bool bit = (sy >= 0 && sy < m.height()) ? tmp.get(x, sy) : false;
                if (dilate)
                    v = v || bit;
                else
                    v = v && bit;
            }
            out.set(x, y, v);
        }
    }
    return out;
}

}  // namespace detail

inline BitMask dilate_mask(const BitMask& m, int radius) {
    if (radius <= 0) return m;
    return detail::morph_pass(m, radius, true);
}

inline BitMask erode_mask(const BitMask& m, int radius) {
    if (radius <= 0) return m;
    return detail::morph_pass(m, radius, false);
}

}  // namespace votseg
