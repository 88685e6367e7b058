// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <png.h>

#include "mkmeans/color.hpp"

namespace mkmeans {

// Decoded 8-bit sRGB raster, row-major.
struct Raster {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<RgbColor> pixels;

    std::uint64_t pixel_count() const {
        return static_cast<std::uint64_t>(width) * height;
    }
    RgbColor at(std::uint32_t x, std::uint32_t y) const {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
};

class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline bool looks_like_png(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

inline bool looks_like_ppm(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6';
}

struct PngReadCursor {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

inline void png_read_from_memory(png_structp png, png_bytep out, png_size_t len) {
    auto* cur = static_cast<PngReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + len > cur->size) {
        png_error(png, "unexpected end of PNG stream");
    }
    std::memcpy(out, cur->data + cur->pos, len);
    cur->pos += len;
}

} // namespace detail

// Binary PPM (P6, maxval 255). Whitespace and '#' comments in the header are
// accepted; emitted headers are canonical.
inline Raster decode_ppm(std::span<const std::uint8_t> bytes, std::string_view name) {
    std::size_t pos = 0;
    auto fail = [&](const std::string& why) -> std::size_t {
        throw DecodeError("PPM decode failed for '" + std::string(name) + "': " + why);
    };
    auto next_token = [&]() -> std::uint64_t {
        while (pos < bytes.size()) {
            const char c = static_cast<char>(bytes[pos]);
            if (c == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
            fail("malformed header");
        }
        std::uint64_t v = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            if (v > 0xffffffffull) fail("header value out of range");
            ++pos;
        }
        return v;
    };

    if (!detail::looks_like_ppm(bytes)) {
        fail("missing P6 magic");
    }
    pos = 2;
    const std::uint64_t width = next_token();
    const std::uint64_t height = next_token();
    const std::uint64_t maxval = next_token();
    if (width == 0 || height == 0) fail("zero dimension");
    if (maxval != 255) fail("unsupported maxval " + std::to_string(maxval) + " (only 255)");
    if (pos >= bytes.size()) fail("missing pixel data");
    const char sep = static_cast<char>(bytes[pos]);
    if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n') {
        fail("missing whitespace after maxval");
    }
    ++pos;

    const std::uint64_t need = width * height * 3;
    if (bytes.size() - pos < need) {
        fail("pixel data shorter than header promises");
    }
    Raster raster;
    raster.width = static_cast<std::uint32_t>(width);
    raster.height = static_cast<std::uint32_t>(height);
    raster.pixels.resize(static_cast<std::size_t>(width * height));
    static_assert(sizeof(RgbColor) == 3);
    std::memcpy(raster.pixels.data(), bytes.data() + pos, static_cast<std::size_t>(need));
    return raster;
}

inline std::vector<std::uint8_t> encode_ppm(const Raster& raster) {
    std::string header = "P6\n" + std::to_string(raster.width) + " " +
                         std::to_string(raster.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    const auto* raw = reinterpret_cast<const std::uint8_t*>(raster.pixels.data());
    out.insert(out.end(), raw, raw + raster.pixels.size() * 3);
    return out;
}

// PNG decode via libpng. Everything is normalized to 8-bit RGB: palettes and
// grayscale are expanded, 16-bit is narrowed, alpha is discarded.
inline Raster decode_png(std::span<const std::uint8_t> bytes, std::string_view name) {
    if (!detail::looks_like_png(bytes)) {
        throw DecodeError("PNG decode failed for '" + std::string(name) + "': missing signature");
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) {
        throw DecodeError("PNG decode failed: cannot allocate read struct");
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DecodeError("PNG decode failed: cannot allocate info struct");
    }

    detail::PngReadCursor cursor{bytes.data(), bytes.size(), 0};
    std::vector<RgbColor> pixels;
    std::vector<png_bytep> row_ptrs;
    png_uint_32 width = 0;
    png_uint_32 height = 0;

    // libpng reports errors through longjmp; keep raw loops in this scope.
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("PNG decode failed for '" + std::string(name) + "': corrupt stream");
    }

    png_set_read_fn(png, &cursor, detail::png_read_from_memory);
    png_read_info(png, info);

    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    const int color_type = png_get_color_type(png, info);
    const int bit_depth = png_get_bit_depth(png, info);

    if (bit_depth == 16) {
        png_set_strip_16(png);
    }
    if (color_type == PNG_COLOR_TYPE_PALETTE) {
        png_set_palette_to_rgb(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_set_gray_to_rgb(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS)) {
        png_set_tRNS_to_alpha(png);
    }
    // Alpha planes are dropped, not composited.
    png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    if (png_get_rowbytes(png, info) != static_cast<std::size_t>(width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("PNG decode failed for '" + std::string(name) +
                          "': unsupported channel layout");
    }

    pixels.resize(static_cast<std::size_t>(width) * height);
    row_ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) {
        row_ptrs[y] = reinterpret_cast<png_bytep>(pixels.data() + static_cast<std::size_t>(y) * width);
    }
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Raster raster;
    raster.width = width;
    raster.height = height;
    raster.pixels = std::move(pixels);
    return raster;
}

// Sniffs the payload and dispatches to the matching decoder. `name` is used
// only for error messages.
inline Raster decode_image(std::span<const std::uint8_t> bytes, std::string_view name) {
    if (detail::looks_like_png(bytes)) {
        return decode_png(bytes, name);
    }
    if (detail::looks_like_ppm(bytes)) {
        return decode_ppm(bytes, name);
    }
    throw DecodeError("unsupported image format for '" + std::string(name) +
                      "' (expected PNG or binary PPM)");
}

} // namespace mkmeans
