// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <utility>

namespace mkmeans {

// 8-bit sRGB triple. The channel range is enforced by the type.
struct RgbColor {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const RgbColor&, const RgbColor&) = default;
};

// CIE L*a*b* with D65 white.
struct LabColor {
    double l_star = 0.0;
    double a_star = 0.0;
    double b_star = 0.0;
};

// The (a*, b*) chromaticity pair all clustering phases operate on.
struct AbPoint {
    double a = 0.0;
    double b = 0.0;

    friend bool operator==(const AbPoint&, const AbPoint&) = default;
};

namespace detail {

// sRGB -> linear RGB -> CIE XYZ matrix (D65, 2 degree observer).
inline constexpr double kSrgbToXyz[3][3] = {
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
};

// White point taken as the matrix row sums, so neutral inputs (r=g=b) land
// exactly on the L* axis instead of absorbing rounding from the constants.
inline constexpr double kWhiteX = kSrgbToXyz[0][0] + kSrgbToXyz[0][1] + kSrgbToXyz[0][2];
inline constexpr double kWhiteY = kSrgbToXyz[1][0] + kSrgbToXyz[1][1] + kSrgbToXyz[1][2];
inline constexpr double kWhiteZ = kSrgbToXyz[2][0] + kSrgbToXyz[2][1] + kSrgbToXyz[2][2];

inline constexpr double kLabEps = 216.0 / 24389.0;   // (6/29)^3
inline constexpr double kLabKappa = 24389.0 / 27.0;

inline double lab_f(double t) {
    return t > kLabEps ? std::cbrt(t) : (kLabKappa * t + 16.0) / 116.0;
}

// Gamma decode of an 8-bit channel, tabulated once.
inline const std::array<double, 256>& srgb_decode_table() {
    static const std::array<double, 256> table = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i) {
            const double u = i / 255.0;
            t[i] = u <= 0.04045 ? u / 12.92 : std::pow((u + 0.055) / 1.055, 2.4);
        }
        return t;
    }();
    return table;
}

} // namespace detail

inline LabColor rgb_to_lab(RgbColor c) {
    const auto& decode = detail::srgb_decode_table();
    const double lr = decode[c.r];
    const double lg = decode[c.g];
    const double lb = decode[c.b];

    using detail::kSrgbToXyz;
    const double x = kSrgbToXyz[0][0] * lr + kSrgbToXyz[0][1] * lg + kSrgbToXyz[0][2] * lb;
    const double y = kSrgbToXyz[1][0] * lr + kSrgbToXyz[1][1] * lg + kSrgbToXyz[1][2] * lb;
    const double z = kSrgbToXyz[2][0] * lr + kSrgbToXyz[2][1] * lg + kSrgbToXyz[2][2] * lb;

    const double fx = detail::lab_f(x / detail::kWhiteX);
    const double fy = detail::lab_f(y / detail::kWhiteY);
    const double fz = detail::lab_f(z / detail::kWhiteZ);

    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline AbPoint rgb_to_ab(RgbColor c) {
    const LabColor lab = rgb_to_lab(c);
    return {lab.a_star, lab.b_star};
}

inline double lab_distance_sq(AbPoint p, AbPoint q) {
    const double da = p.a - q.a;
    const double db = p.b - q.b;
    return da * da + db * db;
}

// Index of the nearest center and the squared distance to it. Ties break
// toward the lowest index.
inline std::pair<std::size_t, double> nearest_center(AbPoint p,
                                                     std::span<const AbPoint> centers) {
    std::size_t best = 0;
    double best_d = lab_distance_sq(p, centers[0]);
    for (std::size_t i = 1; i < centers.size(); ++i) {
        const double d = lab_distance_sq(p, centers[i]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return {best, best_d};
}

} // namespace mkmeans
