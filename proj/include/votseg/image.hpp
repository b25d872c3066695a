#pragma once

#include <cstdint>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <vector>

#include "votseg/geometry.hpp"

namespace votseg {

/// Row-major RGB image, 8 bits per channel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3

    Image() = default;
    Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {
        if (w <= 0 || h <= 0) throw std::invalid_argument("Image: dimensions must be positive");
    }

    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        for (std::size_t i = 0; i + 2 < pixels.size(); i += 3) {
            pixels[i] = r;
            pixels[i + 1] = g;
            pixels[i + 2] = b;
        }
    }

    bool same_dims(const Image& o) const { return width == o.width && height == o.height; }
    bool operator==(const Image& o) const = default;
};

using ImagePtr = std::shared_ptr<const Image>;

inline bool box_within(const Box& b, int w, int h) {
    return b.x0 >= 0 && b.y0 >= 0 && b.x1 <= w && b.y1 <= h;
}

/// Copy of the pixels inside `b`.
inline Image crop(const Image& img, const Box& b) {
    require_valid(b, "crop");
    if (!box_within(b, img.width, img.height)) throw std::invalid_argument("crop: box outside image");
    Image out(b.width(), b.height());
    for (int y = 0; y < b.height(); ++y)
        std::memcpy(out.at(0, y), img.at(b.x0, b.y0 + y), static_cast<std::size_t>(b.width()) * 3);
    return out;
}

}  // namespace votseg
