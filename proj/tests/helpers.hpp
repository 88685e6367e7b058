// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared test utilities: synthetic datasets, independent reference
// implementations used as oracles, and small file helpers. Everything here
// is deliberately written without touching the library's code paths it is
// used to check.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <unistd.h>
#include <zlib.h>

#include "mkmeans/color.hpp"
#include "mkmeans/rng.hpp"

namespace testutil {

// ---------------------------------------------------------------------------
// files

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("mkmeans_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(++counter));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
}

inline std::string slurp_text(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    return std::string(bytes.begin(), bytes.end());
}

// ---------------------------------------------------------------------------
// synthetic data

inline double normal(mkmeans::Rng& rng) {
    const double u1 = 1.0 - rng.next_double();
    const double u2 = rng.next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

struct BlobData {
    std::vector<mkmeans::AbPoint> points;
    std::vector<std::uint32_t> truth;
    std::vector<mkmeans::AbPoint> centers;
};

// G isotropic unit-sigma Gaussian blobs with pairwise center separation of at
// least `separation`, placed on a circle.
inline BlobData make_blobs(std::uint32_t g, std::size_t n, double separation,
                           std::uint64_t seed) {
    BlobData data;
    const double radius =
        g == 1 ? 0.0 : separation / (2.0 * std::sin(3.14159265358979324 / g)) * 1.05;
    for (std::uint32_t i = 0; i < g; ++i) {
        const double angle = 6.283185307179586 * i / g;
        data.centers.push_back({radius * std::cos(angle), radius * std::sin(angle)});
    }
    mkmeans::Rng rng(seed);
    data.points.reserve(n);
    data.truth.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t c = static_cast<std::uint32_t>(i % g);
        data.points.push_back(
            {data.centers[c].a + normal(rng), data.centers[c].b + normal(rng)});
        data.truth.push_back(c);
    }
    return data;
}

inline std::vector<mkmeans::AbPoint> random_points(std::size_t n, double lo, double hi,
                                                   std::uint64_t seed) {
    mkmeans::Rng rng(seed);
    std::vector<mkmeans::AbPoint> points;
    points.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        points.push_back({lo + (hi - lo) * rng.next_double(), lo + (hi - lo) * rng.next_double()});
    }
    return points;
}

// ---------------------------------------------------------------------------
// reference sRGB -> CIELAB converter (independent formulation: textbook D65
// white point, the 841/108 linear-segment constants, std::pow throughout)

inline void reference_rgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8, double& l,
                                 double& a, double& b) {
    auto linear = [](double u) {
        return u > 0.04045 ? std::pow((u + 0.055) / 1.055, 2.4) : u / 12.92;
    };
    const double lr = linear(r8 / 255.0);
    const double lg = linear(g8 / 255.0);
    const double lb = linear(b8 / 255.0);

    const double x = (0.4124564 * lr + 0.3575761 * lg + 0.1804375 * lb) / 0.95047;
    const double y = (0.2126729 * lr + 0.7151522 * lg + 0.0721750 * lb) / 1.0;
    const double z = (0.0193339 * lr + 0.1191920 * lg + 0.9503041 * lb) / 1.08883;

    auto f = [](double t) {
        return t > 0.008856451679035631 ? std::pow(t, 1.0 / 3.0)
                                        : (841.0 / 108.0) * t + 4.0 / 29.0;
    };
    const double fx = f(x);
    const double fy = f(y);
    const double fz = f(z);
    l = 116.0 * fy - 16.0;
    a = 500.0 * (fx - fy);
    b = 200.0 * (fy - fz);
}

// ---------------------------------------------------------------------------
// exact k-means++ seeding (Arthur & Vassilvitskii), the oracle the scalable
// initialization is compared against

inline std::vector<std::size_t> exact_kmeanspp(const std::vector<mkmeans::AbPoint>& points,
                                               std::uint32_t k, mkmeans::Rng& rng) {
    std::vector<std::size_t> chosen;
    chosen.push_back(static_cast<std::size_t>(rng.next_below(points.size())));
    std::vector<double> dist_sq(points.size(), std::numeric_limits<double>::infinity());
    while (chosen.size() < k) {
        const mkmeans::AbPoint last = points[chosen.back()];
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            dist_sq[i] = std::min(dist_sq[i], mkmeans::lab_distance_sq(points[i], last));
            total += dist_sq[i];
        }
        if (total <= 0.0) {
            chosen.push_back(chosen.back());
            continue;
        }
        const double u = rng.next_double() * total;
        double acc = 0.0;
        std::size_t pick = points.size() - 1;
        for (std::size_t i = 0; i < points.size(); ++i) {
            acc += dist_sq[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        chosen.push_back(pick);
    }
    return chosen;
}

// ---------------------------------------------------------------------------
// minimal PNG builder (zlib only, independent of the libpng decode path)

namespace pngdetail {

inline void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline void add_chunk(std::vector<std::uint8_t>& out, const char type[5],
                      const std::vector<std::uint8_t>& data) {
    put_u32be(out, static_cast<std::uint32_t>(data.size()));
    std::vector<std::uint8_t> payload(type, type + 4);
    payload.insert(payload.end(), data.begin(), data.end());
    out.insert(out.end(), payload.begin(), payload.end());
    const auto crc = ::crc32(0, payload.data(), static_cast<uInt>(payload.size()));
    put_u32be(out, static_cast<std::uint32_t>(crc));
}

} // namespace pngdetail

// Builds an 8-bit PNG. `channels` must be 3 (RGB) or 4 (RGBA); `samples` is
// row-major, channels interleaved.
inline std::vector<std::uint8_t> build_png(std::uint32_t width, std::uint32_t height,
                                           int channels,
                                           const std::vector<std::uint8_t>& samples) {
    std::vector<std::uint8_t> raw;
    raw.reserve((static_cast<std::size_t>(width) * channels + 1) * height);
    for (std::uint32_t y = 0; y < height; ++y) {
        raw.push_back(0); // filter: none
        const std::size_t row = static_cast<std::size_t>(y) * width * channels;
        raw.insert(raw.end(), samples.begin() + row, samples.begin() + row + width * channels);
    }

    uLongf bound = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (::compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK) {
        throw std::runtime_error("zlib compress failed");
    }
    compressed.resize(bound);

    std::vector<std::uint8_t> png = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> ihdr;
    pngdetail::put_u32be(ihdr, width);
    pngdetail::put_u32be(ihdr, height);
    ihdr.push_back(8);                              // bit depth
    ihdr.push_back(channels == 4 ? 6 : 2);          // color type
    ihdr.push_back(0);                              // compression
    ihdr.push_back(0);                              // filter
    ihdr.push_back(0);                              // interlace
    pngdetail::add_chunk(png, "IHDR", ihdr);
    pngdetail::add_chunk(png, "IDAT", compressed);
    pngdetail::add_chunk(png, "IEND", {});
    return png;
}

} // namespace testutil
