#pragma once

#include <png.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "votseg/image.hpp"

namespace votseg {

/// Label image: one object index per pixel, 0 = background.
struct LabelMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> labels;

    LabelMap() = default;
    LabelMap(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

    std::uint8_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    void set(int x, int y, std::uint8_t v) { labels[static_cast<std::size_t>(y) * width + x] = v; }
    bool operator==(const LabelMap&) const = default;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open " + path);
    return f;
}

}  // namespace detail

/// The PASCAL-style palette: label k -> color via bit spreading. Index 0 is
/// black, 1 dark red, 2 dark green, ...
inline std::array<std::array<std::uint8_t, 3>, 256> label_palette() {
    std::array<std::array<std::uint8_t, 3>, 256> pal{};
    for (int i = 0; i < 256; ++i) {
        int id = i;
        std::uint8_t r = 0, g = 0, b = 0;
        for (int j = 0; j < 8; ++j) {
            r |= static_cast<std::uint8_t>(((id >> 0) & 1) << (7 - j));
            g |= static_cast<std::uint8_t>(((id >> 1) & 1) << (7 - j));
            b |= static_cast<std::uint8_t>(((id >> 2) & 1) << (7 - j));
            id >>= 3;
        }
        pal[i] = {r, g, b};
    }
    return pal;
}

inline Image read_png_rgb(const std::string& path) {
    auto file = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng init failed for " + path);
    }
    Image img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    img = Image(w, h);
    rows.resize(h);
    for (int y = 0; y < h; ++y) rows[y] = img.at(0, y);
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Reads an indexed (palette) or 8-bit grayscale PNG as raw labels.
inline LabelMap read_png_labels(const std::string& path) {
    auto file = detail::open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng init failed for " + path);
    }
    LabelMap map;
    std::vector<png_bytep> rows;
    bool bad_type = false;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG " + path);
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    bad_type = color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY;
    png_set_packing(png);  // expand 1/2/4-bit indices to one byte each
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (!bad_type) {
        map = LabelMap(w, h);
        rows.resize(h);
        for (int y = 0; y < h; ++y) rows[y] = map.labels.data() + static_cast<std::size_t>(y) * w;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (bad_type) throw std::runtime_error("mask PNG must be indexed or 8-bit gray: " + path);
    return map;
}

inline void write_png_rgb(const std::string& path, const Image& img) {
    auto file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng init failed for " + path);
    }
    std::vector<png_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) rows[y] = const_cast<png_bytep>(img.at(0, y));
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void write_png_labels(const std::string& path, const LabelMap& map) {
    auto file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng init failed for " + path);
    }
    std::vector<png_bytep> rows(map.height);
    std::array<png_color, 256> pal{};
    const auto colors = label_palette();
    for (int i = 0; i < 256; ++i) pal[i] = {colors[i][0], colors[i][1], colors[i][2]};
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG " + path);
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, map.width, map.height, 8, PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_PLTE(png, info, pal.data(), 256);
    png_write_info(png, info);
    for (int y = 0; y < map.height; ++y)
        rows[y] = const_cast<png_bytep>(map.labels.data() + static_cast<std::size_t>(y) * map.width);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace votseg
