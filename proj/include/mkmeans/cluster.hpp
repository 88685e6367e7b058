// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkmeans/color.hpp"
#include "mkmeans/mr_engine.hpp"

namespace mkmeans {

// Lloyd's iterative phase, executed for all requested k values inside the
// same engine passes. A "partition" is the whole clustering for one k.

struct PartitionModel {
    std::uint32_t k = 0;
    std::vector<AbPoint> centers; // cluster id -> center

    bool valid() const { return k >= 1 && centers.size() == k; }
};

struct Assignment {
    std::uint64_t pixel = 0; // index into the point stream
    std::uint32_t partition_id = 0;
    std::uint32_t cluster_id = 0;
    double dist_sq = 0.0;
};

struct ClusterConfig {
    std::uint32_t max_iters = 20;
    double tol = 1e-3; // center-shift convergence threshold, (a*, b*) units
};

enum class StopReason { stable, shift_below_tol, max_iters };

// Per-cluster bookkeeping carried to the output files: member count, color
// sums for the mean cluster color, and the assigned pixel nearest to the
// center (its coordinates stand in for the center's "pixel coordinates").
struct ClusterAux {
    std::uint64_t count = 0;
    std::uint64_t sum_r = 0, sum_g = 0, sum_b = 0;
    std::uint64_t nearest_idx = 0;
    double nearest_dist = std::numeric_limits<double>::infinity();

    RgbColor mean_rgb() const {
        if (count == 0) {
            return {0, 0, 0};
        }
        auto channel = [&](std::uint64_t sum) {
            return static_cast<std::uint8_t>((sum + count / 2) / count);
        };
        return {channel(sum_r), channel(sum_g), channel(sum_b)};
    }
};

inline Assignment assign(std::uint64_t pixel_index, AbPoint feature, const PartitionModel& model) {
    const auto [cluster, dist_sq] = nearest_center(feature, model.centers);
    return Assignment{pixel_index, model.k, static_cast<std::uint32_t>(cluster), dist_sq};
}

// Component-wise mean of the assigned features, in assignment order. Empty
// clusters are reseeded at the farthest assigned point of the partition
// (largest dist_sq, ties toward the lowest pixel index).
inline PartitionModel recompute_centers(std::span<const Assignment> assignments,
                                        std::span<const AbPoint> points, std::uint32_t k) {
    if (assignments.empty()) {
        throw std::invalid_argument("recompute_centers requires at least one assignment");
    }
    std::vector<double> sum_a(k, 0.0), sum_b(k, 0.0);
    std::vector<std::uint64_t> count(k, 0);
    for (const Assignment& a : assignments) {
        sum_a[a.cluster_id] += points[a.pixel].a;
        sum_b[a.cluster_id] += points[a.pixel].b;
        ++count[a.cluster_id];
    }

    std::vector<std::pair<double, std::uint64_t>> farthest;
    farthest.reserve(assignments.size());
    for (const Assignment& a : assignments) {
        farthest.emplace_back(a.dist_sq, a.pixel);
    }
    std::sort(farthest.begin(), farthest.end(), [](const auto& x, const auto& y) {
        return x.first != y.first ? x.first > y.first : x.second < y.second;
    });

    PartitionModel model{k, std::vector<AbPoint>(k)};
    std::size_t next_reseed = 0;
    for (std::uint32_t c = 0; c < k; ++c) {
        if (count[c] > 0) {
            model.centers[c] = {sum_a[c] / static_cast<double>(count[c]),
                                sum_b[c] / static_cast<double>(count[c])};
        } else if (next_reseed < farthest.size()) {
            model.centers[c] = points[farthest[next_reseed++].second];
        } else {
            model.centers[c] = points[assignments.front().pixel];
        }
    }
    return model;
}

struct PartitionOutcome {
    PartitionModel model;
    std::vector<std::uint8_t> labels; // final cluster id per point
    std::vector<double> cost_history; // sum of dist_sq per assignment pass
    std::vector<ClusterAux> aux;      // final per-cluster bookkeeping
    std::uint32_t iterations = 0;
    StopReason stop = StopReason::max_iters;
};

struct MultiKResult {
    std::map<std::uint32_t, PartitionOutcome> partitions;
};

// Called after each engine iteration, per still-active partition.
using IterationSink = std::function<void(std::uint32_t iter, const PartitionModel& model,
                                         const std::vector<ClusterAux>& aux)>;

namespace detail {

struct PartitionPartial {
    std::vector<ClusterAux> aux;      // one per cluster
    std::vector<double> sum_a, sum_b; // feature sums per cluster
    double cost = 0.0;
    std::uint64_t changed = 0;
    // Farthest assigned points, kept sorted (dist desc, idx asc), at most k
    // entries: the reseed pool for empty clusters.
    std::vector<std::pair<double, std::uint64_t>> farthest;

    void init(std::uint32_t k) {
        aux.assign(k, ClusterAux{});
        sum_a.assign(k, 0.0);
        sum_b.assign(k, 0.0);
    }

    void note_farthest(double dist, std::uint64_t idx, std::uint32_t k) {
        if (farthest.size() == k && dist <= farthest.back().first) {
            return;
        }
        auto pos = std::lower_bound(farthest.begin(), farthest.end(), std::make_pair(dist, idx),
                                    [](const auto& x, const auto& y) {
                                        return x.first != y.first ? x.first > y.first
                                                                  : x.second < y.second;
                                    });
        farthest.insert(pos, {dist, idx});
        if (farthest.size() > k) {
            farthest.pop_back();
        }
    }
};

inline void merge_partial(PartitionPartial& acc, const PartitionPartial& part, std::uint32_t k) {
    for (std::uint32_t c = 0; c < k; ++c) {
        acc.sum_a[c] += part.sum_a[c];
        acc.sum_b[c] += part.sum_b[c];
        acc.aux[c].count += part.aux[c].count;
        acc.aux[c].sum_r += part.aux[c].sum_r;
        acc.aux[c].sum_g += part.aux[c].sum_g;
        acc.aux[c].sum_b += part.aux[c].sum_b;
        const auto& n = part.aux[c];
        auto& m = acc.aux[c];
        if (n.count > 0 && (n.nearest_dist < m.nearest_dist ||
                            (n.nearest_dist == m.nearest_dist && n.nearest_idx < m.nearest_idx))) {
            m.nearest_dist = n.nearest_dist;
            m.nearest_idx = n.nearest_idx;
        }
    }
    acc.cost += part.cost;
    acc.changed += part.changed;
    for (const auto& f : part.farthest) {
        acc.note_farthest(f.first, f.second, k);
    }
}

} // namespace detail

// Runs Lloyd iterations for every partition until it stabilizes (no point
// changes cluster), its centers shift less than tol, or max_iters is hit;
// partitions converge independently but share each engine pass. `rgb` may be
// empty when no color bookkeeping is wanted (the mean colors come out 0).
inline MultiKResult run_multi_k(std::span<const AbPoint> points, std::span<const RgbColor> rgb,
                                const std::map<std::uint32_t, PartitionModel>& initial,
                                const ClusterConfig& cfg, const mr::EngineConfig& engine = {},
                                const IterationSink& sink = {}) {
    if (points.empty()) {
        throw std::invalid_argument("run_multi_k requires a non-empty point set");
    }
    if (initial.empty()) {
        throw std::invalid_argument("run_multi_k requires at least one initial model");
    }
    if (cfg.max_iters < 1) {
        throw std::invalid_argument("max_iters must be >= 1");
    }
    if (!rgb.empty() && rgb.size() != points.size()) {
        throw std::invalid_argument("rgb span must be empty or match the point count");
    }
    for (const auto& [k, model] : initial) {
        if (!model.valid() || model.k != k) {
            throw std::invalid_argument("invalid initial model for k = " + std::to_string(k));
        }
        if (k > 255) {
            throw std::invalid_argument("k > 255 is not supported by the label encoding");
        }
    }

    MultiKResult result;
    struct Active {
        std::uint32_t k;
        PartitionOutcome* out;
    };
    std::vector<Active> active;
    for (const auto& [k, model] : initial) {
        auto& outcome = result.partitions[k];
        outcome.model = model;
        outcome.labels.assign(points.size(), 0);
        active.push_back({k, &outcome});
    }

    auto chunks = mr::chunks_of(points, engine.chunk_size);
    std::vector<std::size_t> offsets(chunks.size());
    {
        std::size_t off = 0;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            offsets[i] = off;
            off += chunks[i].size();
        }
    }

    for (std::uint32_t iter = 1; !active.empty() && iter <= cfg.max_iters; ++iter) {
        // One fused pass: assign every point for every active partition and
        // accumulate per-cluster sums in the same sweep.
        using Partials = std::vector<detail::PartitionPartial>; // one per active k
        auto partials = mr::map_chunks<Partials>(
            chunks, engine, [&](std::size_t ci, std::span<const AbPoint> chunk) {
                Partials locals(active.size());
                for (std::size_t ai = 0; ai < active.size(); ++ai) {
                    locals[ai].init(active[ai].k);
                }
                const std::size_t base = offsets[ci];
                for (std::size_t i = 0; i < chunk.size(); ++i) {
                    const AbPoint p = chunk[i];
                    const std::uint64_t idx = base + i;
                    for (std::size_t ai = 0; ai < active.size(); ++ai) {
                        const Active& act = active[ai];
                        const auto [cluster, dist] = nearest_center(p, act.out->model.centers);
                        auto& part = locals[ai];
                        auto& aux = part.aux[cluster];
                        part.sum_a[cluster] += p.a;
                        part.sum_b[cluster] += p.b;
                        ++aux.count;
                        if (!rgb.empty()) {
                            aux.sum_r += rgb[idx].r;
                            aux.sum_g += rgb[idx].g;
                            aux.sum_b += rgb[idx].b;
                        }
                        if (dist < aux.nearest_dist ||
                            (dist == aux.nearest_dist && idx < aux.nearest_idx)) {
                            aux.nearest_dist = dist;
                            aux.nearest_idx = idx;
                        }
                        part.cost += dist;
                        part.note_farthest(dist, idx, act.k);
                        auto& label = act.out->labels[idx];
                        const auto new_label = static_cast<std::uint8_t>(cluster);
                        if (iter == 1 || label != new_label) {
                            ++part.changed;
                            label = new_label;
                        }
                    }
                }
                return locals;
            });

        std::vector<detail::PartitionPartial> totals(active.size());
        for (std::size_t ai = 0; ai < active.size(); ++ai) {
            totals[ai].init(active[ai].k);
        }
        for (const Partials& chunk_partials : partials) {
            for (std::size_t ai = 0; ai < active.size(); ++ai) {
                detail::merge_partial(totals[ai], chunk_partials[ai], active[ai].k);
            }
        }

        std::vector<Active> still_active;
        for (std::size_t ai = 0; ai < active.size(); ++ai) {
            const Active& act = active[ai];
            detail::PartitionPartial& tot = totals[ai];
            PartitionOutcome& out = *act.out;
            out.cost_history.push_back(tot.cost);
            out.iterations = iter;

            PartitionModel next{act.k, std::vector<AbPoint>(act.k)};
            std::size_t next_reseed = 0;
            for (std::uint32_t c = 0; c < act.k; ++c) {
                if (tot.aux[c].count > 0) {
                    const auto n = static_cast<double>(tot.aux[c].count);
                    next.centers[c] = {tot.sum_a[c] / n, tot.sum_b[c] / n};
                } else if (next_reseed < tot.farthest.size()) {
                    const std::uint64_t idx = tot.farthest[next_reseed++].second;
                    next.centers[c] = points[idx];
                    tot.aux[c].nearest_idx = idx;
                    tot.aux[c].nearest_dist = 0.0;
                    if (!rgb.empty()) {
                        tot.aux[c].sum_r = rgb[idx].r;
                        tot.aux[c].sum_g = rgb[idx].g;
                        tot.aux[c].sum_b = rgb[idx].b;
                        tot.aux[c].count = 1;
                    }
                } else {
                    next.centers[c] = out.model.centers[c];
                }
            }

            double max_shift = 0.0;
            for (std::uint32_t c = 0; c < act.k; ++c) {
                max_shift = std::max(
                    max_shift, std::sqrt(lab_distance_sq(next.centers[c], out.model.centers[c])));
            }

            const bool stable = iter > 1 && tot.changed == 0;
            out.aux = std::move(tot.aux);
            if (stable) {
                out.stop = StopReason::stable;
            } else {
                out.model = next;
                if (max_shift < cfg.tol) {
                    out.stop = StopReason::shift_below_tol;
                } else if (iter == cfg.max_iters) {
                    out.stop = StopReason::max_iters;
                } else {
                    still_active.push_back(act);
                }
            }
            if (sink) {
                sink(iter, out.model, out.aux);
            }
        }
        active = std::move(still_active);
    }
    return result;
}

// Materializes Assignment records from a final partition, mostly for tests
// and the points-file writer.
inline std::vector<Assignment> make_assignments(std::span<const AbPoint> points,
                                                const PartitionOutcome& outcome) {
    std::vector<Assignment> out;
    out.reserve(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const std::uint32_t c = outcome.labels[i];
        out.push_back(Assignment{i, outcome.model.k, c,
                                 lab_distance_sq(points[i], outcome.model.centers[c])});
    }
    return out;
}

} // namespace mkmeans
