// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkmeans/cluster.hpp"
#include "mkmeans/color.hpp"
#include "mkmeans/mr_engine.hpp"

namespace mkmeans {

// Simplified Silhouette Index: distances are point-to-centroid only, never
// point-to-point. Per point, a = distance to the assigned centroid and
// b = distance to the nearest other centroid; the partition score is the
// plain mean over points.

struct SSIReport {
    std::uint32_t partition_id = 0;
    double mean_ssi = 0.0;
    std::uint64_t point_count = 0;
};

inline constexpr double kSsiEpsilon = 1e-12;

// (b - a) / max(a, b, eps). Equals the centroid-distance silhouette formula
// whenever a <= b, and stays defined at the a = b = 0 degenerate point.
inline double point_ssi(double own_dist, double min_other_dist) {
    const double denom = std::max({own_dist, min_other_dist, kSsiEpsilon});
    return (min_other_dist - own_dist) / denom;
}

// Mean SSI over one partition. Distances here are unsquared Euclidean in
// (a*, b*). labels[i] must be the final cluster of point i.
inline SSIReport partition_ssi(std::span<const AbPoint> points,
                               std::span<const std::uint8_t> labels, const PartitionModel& model,
                               const mr::EngineConfig& engine = {}) {
    if (model.k < 2) {
        throw std::invalid_argument("SSI undefined for a single cluster");
    }
    if (!model.valid()) {
        throw std::invalid_argument("partition_ssi requires a valid model");
    }
    if (labels.size() != points.size()) {
        throw std::invalid_argument("labels must match the point count");
    }
    if (points.empty()) {
        throw std::invalid_argument("partition_ssi requires at least one point");
    }

    auto chunks = mr::chunks_of(points, engine.chunk_size);
    std::vector<std::size_t> offsets(chunks.size());
    std::size_t off = 0;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        offsets[i] = off;
        off += chunks[i].size();
    }

    auto partials =
        mr::map_chunks<double>(chunks, engine, [&](std::size_t ci, std::span<const AbPoint> chunk) {
            double sum = 0.0;
            const std::size_t base = offsets[ci];
            for (std::size_t i = 0; i < chunk.size(); ++i) {
                const AbPoint p = chunk[i];
                const std::uint32_t own = labels[base + i];
                const double a = std::sqrt(lab_distance_sq(p, model.centers[own]));
                double other_sq = std::numeric_limits<double>::infinity();
                for (std::uint32_t c = 0; c < model.k; ++c) {
                    if (c == own) {
                        continue;
                    }
                    const double d = lab_distance_sq(p, model.centers[c]);
                    if (d < other_sq) {
                        other_sq = d;
                    }
                }
                sum += point_ssi(a, std::sqrt(other_sq));
            }
            return sum;
        });

    double total = 0.0;
    for (double s : partials) {
        total += s;
    }
    return SSIReport{model.k, total / static_cast<double>(points.size()), points.size()};
}

// The k with the highest mean SSI; ties break toward the smallest k.
inline std::uint32_t select_k(std::span<const SSIReport> reports) {
    if (reports.empty()) {
        throw std::invalid_argument("select_k requires at least one report");
    }
    const SSIReport* best = nullptr;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const SSIReport& r = reports[i];
        for (std::size_t j = 0; j < i; ++j) {
            if (reports[j].partition_id == r.partition_id) {
                throw std::invalid_argument("duplicate partition id " +
                                            std::to_string(r.partition_id));
            }
        }
        if (!best || r.mean_ssi > best->mean_ssi ||
            (r.mean_ssi == best->mean_ssi && r.partition_id < best->partition_id)) {
            best = &r;
        }
    }
    return best->partition_id;
}

} // namespace mkmeans
