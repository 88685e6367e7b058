// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mkmeans/color.hpp"
#include "mkmeans/image.hpp"

namespace mkmeans {

// One extracted pixel: container key, grid position, source color and the
// (a*, b*) feature every later phase clusters on.
struct PixelRecord {
    std::string image_id;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    RgbColor rgb;
    AbPoint feature;
};

// Streams every pixel of a raster in row-major order as
// fn(x, y, rgb, feature). This is the allocation-free path the pipeline
// feeds its feature store from.
template <typename Fn>
void for_each_pixel(const Raster& raster, Fn&& fn) {
    std::size_t idx = 0;
    for (std::uint32_t y = 0; y < raster.height; ++y) {
        for (std::uint32_t x = 0; x < raster.width; ++x, ++idx) {
            const RgbColor rgb = raster.pixels[idx];
            fn(x, y, rgb, rgb_to_ab(rgb));
        }
    }
}

inline std::vector<PixelRecord> extract_pixels(const Raster& raster, const std::string& image_id) {
    std::vector<PixelRecord> records;
    records.reserve(raster.pixel_count());
    for_each_pixel(raster, [&](std::uint32_t x, std::uint32_t y, RgbColor rgb, AbPoint feature) {
        records.push_back(PixelRecord{image_id, x, y, rgb, feature});
    });
    return records;
}

// Debug dump line mirroring the pixel-extraction job output:
// image_id,x,y,r,g,b
inline std::string format_pixel_line(const std::string& image_id, std::uint32_t x,
                                     std::uint32_t y, RgbColor rgb) {
    std::string line = image_id;
    line += ',';
    line += std::to_string(x);
    line += ',';
    line += std::to_string(y);
    line += ',';
    line += std::to_string(rgb.r);
    line += ',';
    line += std::to_string(rgb.g);
    line += ',';
    line += std::to_string(rgb.b);
    return line;
}

} // namespace mkmeans
