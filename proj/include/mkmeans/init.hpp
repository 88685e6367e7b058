// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkmeans/color.hpp"
#include "mkmeans/mr_engine.hpp"
#include "mkmeans/rng.hpp"

namespace mkmeans {

// Scalable k-means++ initialization: oversample candidate centers for a few
// rounds with probability l * d^2(x, C) / phi(C), weigh the candidates by
// nearest-point counts, then reduce to k with weighted k-means++ seeding.
// One oversampling pass is shared by every requested k; only the final
// reduction is per k.

struct InitConfig {
    double oversample = 0.0;  // l; expected selections per round
    std::uint32_t rounds = 5; // oversampling passes
    std::uint64_t seed = 0;
};

struct CandidateSet {
    std::vector<AbPoint> centers;
    std::vector<std::uint64_t> weights; // points whose nearest candidate this is
    std::vector<std::uint64_t> source;  // index of the sampled point in the dataset

    std::size_t size() const { return centers.size(); }
};

namespace detail {

// Substream tags; combined with the user seed they fix every random draw
// before any job starts.
inline constexpr std::uint64_t kSeedTagFirstCenter = 0x5eed;
inline constexpr std::uint64_t kSeedTagRoundBase = 0xab00;
inline constexpr std::uint64_t kSeedTagReduceBase = 0xcafe0000;

} // namespace detail

inline std::size_t seed_initial(std::span<const AbPoint> points, Rng& rng) {
    if (points.empty()) {
        throw std::invalid_argument("cannot seed a center from an empty point set");
    }
    return static_cast<std::size_t>(rng.next_below(points.size()));
}

// Reference clustering cost: sum over points of the squared distance to the
// nearest center.
inline double cost_phi(std::span<const AbPoint> points, std::span<const AbPoint> centers) {
    if (centers.empty()) {
        throw std::invalid_argument("cost_phi requires at least one center");
    }
    double sum = 0.0;
    for (const AbPoint& p : points) {
        sum += nearest_center(p, centers).second;
    }
    return sum;
}

// Folds new centers into a per-point nearest-distance cache. Chunks write
// disjoint ranges, so this parallelizes without changing any value.
inline void update_min_dists(const std::vector<std::span<const AbPoint>>& chunks,
                             std::span<const AbPoint> new_centers, std::span<double> min_dist_sq,
                             const mr::EngineConfig& cfg) {
    if (new_centers.empty()) {
        return;
    }
    std::size_t offset = 0;
    std::vector<std::size_t> offsets(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        offsets[i] = offset;
        offset += chunks[i].size();
    }
    mr::map_chunks<int>(chunks, cfg, [&](std::size_t ci, std::span<const AbPoint> chunk) {
        double* cache = min_dist_sq.data() + offsets[ci];
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            double best = cache[i];
            for (const AbPoint& c : new_centers) {
                const double d = lab_distance_sq(chunk[i], c);
                if (d < best) {
                    best = d;
                }
            }
            cache[i] = best;
        }
        return 0;
    });
}

// Sum of the cached nearest distances, folded in chunk order so the result
// is identical for any worker count.
inline double chunked_phi(std::span<const double> min_dist_sq, std::size_t chunk_size,
                          const mr::EngineConfig& cfg) {
    auto chunks = mr::chunks_of(min_dist_sq, chunk_size);
    auto partials = mr::map_chunks<double>(chunks, cfg, [](std::size_t, std::span<const double> c) {
        double s = 0.0;
        for (double d : c) {
            s += d;
        }
        return s;
    });
    double phi = 0.0;
    for (double p : partials) {
        phi += p;
    }
    return phi;
}

// One oversampling pass over cached distances. Every point consumes exactly
// one uniform draw from its chunk substream, so the selection is a pure
// function of (round_seed, chunk grid, distances) regardless of workers.
inline std::vector<std::uint64_t> sample_candidates(
    const std::vector<std::span<const double>>& dist_chunks, double oversample, double phi,
    std::uint64_t round_seed, const mr::EngineConfig& cfg) {
    if (phi <= 0.0) {
        return {};
    }
    std::vector<std::size_t> offsets(dist_chunks.size());
    std::size_t offset = 0;
    for (std::size_t i = 0; i < dist_chunks.size(); ++i) {
        offsets[i] = offset;
        offset += dist_chunks[i].size();
    }
    auto partials = mr::map_chunks<std::vector<std::uint64_t>>(
        dist_chunks, cfg, [&](std::size_t ci, std::span<const double> dists) {
            Rng rng(mix_seed(round_seed, ci));
            std::vector<std::uint64_t> selected;
            for (std::size_t i = 0; i < dists.size(); ++i) {
                const double u = rng.next_double();
                const double p = oversample * dists[i] / phi;
                if (u < p) {
                    selected.push_back(offsets[ci] + i);
                }
            }
            return selected;
        });
    std::vector<std::uint64_t> all;
    for (auto& part : partials) {
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

// Spec-level single round: recomputes d^2(x, C) from scratch, then samples.
// `phi` must be cost_phi(points, centers); a zero phi yields no candidates.
inline std::vector<std::uint64_t> oversample_round(std::span<const AbPoint> points,
                                                   std::span<const AbPoint> centers,
                                                   double oversample, double phi,
                                                   std::uint64_t round_seed,
                                                   const mr::EngineConfig& cfg = {}) {
    if (centers.empty()) {
        throw std::invalid_argument("oversample_round requires at least one center");
    }
    std::vector<double> min_dist_sq(points.size(), std::numeric_limits<double>::infinity());
    auto chunks = mr::chunks_of(points, cfg.chunk_size);
    update_min_dists(chunks, centers, min_dist_sq, cfg);
    auto dist_chunks = mr::chunks_of(std::span<const double>(min_dist_sq), cfg.chunk_size);
    return sample_candidates(dist_chunks, oversample, phi, round_seed, cfg);
}

// Weight of a candidate = number of points whose nearest candidate it is
// (ties toward the lowest candidate index).
inline std::vector<std::uint64_t> weigh_candidates(std::span<const AbPoint> points,
                                                   std::span<const AbPoint> candidates,
                                                   const mr::EngineConfig& cfg = {}) {
    if (candidates.empty()) {
        throw std::invalid_argument("weigh_candidates requires at least one candidate");
    }
    auto chunks = mr::chunks_of(points, cfg.chunk_size);
    auto partials = mr::map_chunks<std::vector<std::uint64_t>>(
        chunks, cfg, [&](std::size_t, std::span<const AbPoint> chunk) {
            std::vector<std::uint64_t> counts(candidates.size(), 0);
            for (const AbPoint& p : chunk) {
                ++counts[nearest_center(p, candidates).first];
            }
            return counts;
        });
    std::vector<std::uint64_t> weights(candidates.size(), 0);
    for (const auto& part : partials) {
        for (std::size_t i = 0; i < part.size(); ++i) {
            weights[i] += part[i];
        }
    }
    return weights;
}

namespace detail {

// Draws an index with probability proportional to score[i]; a zero total
// falls back to the lowest-index entry not yet chosen.
inline std::size_t weighted_pick(std::span<const double> scores, double total, Rng& rng,
                                 std::span<const char> chosen) {
    if (total > 0.0) {
        const double u = rng.next_double() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            acc += scores[i];
            if (u < acc) {
                return i;
            }
        }
        // Rounding can leave u at the very top of the last nonzero score.
        for (std::size_t i = scores.size(); i-- > 0;) {
            if (scores[i] > 0.0) {
                return i;
            }
        }
    }
    for (std::size_t i = 0; i < chosen.size(); ++i) {
        if (!chosen[i]) {
            return i;
        }
    }
    return 0;
}

} // namespace detail

// Weighted k-means++ over the candidate set: the first pick is proportional
// to weight, every later pick proportional to weight * d^2 to the centers
// chosen so far. Returns indices into the candidate set.
inline std::vector<std::size_t> reduce_to_k(const CandidateSet& candidates, std::uint32_t k,
                                            Rng& rng) {
    if (k < 1) {
        throw std::invalid_argument("reduce_to_k requires k >= 1");
    }
    const std::size_t m = candidates.size();
    if (m == 0) {
        throw std::invalid_argument("reduce_to_k requires a non-empty candidate set");
    }
    std::vector<std::size_t> chosen_idx;
    if (m <= k) {
        chosen_idx.resize(m);
        for (std::size_t i = 0; i < m; ++i) {
            chosen_idx[i] = i;
        }
        return chosen_idx;
    }

    std::vector<char> chosen(m, 0);
    std::vector<double> scores(m);
    std::vector<double> dist_sq(m, std::numeric_limits<double>::infinity());

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        scores[i] = static_cast<double>(candidates.weights[i]);
        total += scores[i];
    }
    std::size_t pick = detail::weighted_pick(scores, total, rng, chosen);

    for (std::uint32_t round = 0; round < k; ++round) {
        chosen[pick] = 1;
        chosen_idx.push_back(pick);
        if (chosen_idx.size() == k) {
            break;
        }
        total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double d = lab_distance_sq(candidates.centers[i], candidates.centers[pick]);
            if (d < dist_sq[i]) {
                dist_sq[i] = d;
            }
            scores[i] = chosen[i] ? 0.0 : static_cast<double>(candidates.weights[i]) * dist_sq[i];
            total += scores[i];
        }
        pick = detail::weighted_pick(scores, total, rng, chosen);
    }
    return chosen_idx;
}

struct InitResult {
    std::map<std::uint32_t, std::vector<std::uint64_t>> seeds; // k -> point indices
    CandidateSet candidates;
};

// Full initialization: one shared oversampling pass sized for max(ks), then
// a per-k weighted reduction executed as one engine job keyed by k.
inline InitResult init_multi_k(std::span<const AbPoint> points,
                               std::span<const std::uint32_t> ks, const InitConfig& cfg,
                               const mr::EngineConfig& engine = {}) {
    if (points.empty()) {
        throw std::invalid_argument("init_multi_k requires a non-empty point set");
    }
    if (ks.empty()) {
        throw std::invalid_argument("init_multi_k requires at least one k");
    }
    for (std::uint32_t k : ks) {
        if (k < 1) {
            throw std::invalid_argument("init_multi_k requires k >= 1");
        }
        if (k > points.size()) {
            throw std::invalid_argument("k = " + std::to_string(k) +
                                        " exceeds the number of points (" +
                                        std::to_string(points.size()) + ")");
        }
    }
    if (!(cfg.oversample > 0.0)) {
        throw std::invalid_argument("oversampling factor must be > 0");
    }
    if (cfg.rounds < 1) {
        throw std::invalid_argument("rounds must be >= 1");
    }

    InitResult result;
    CandidateSet& cands = result.candidates;

    Rng first_rng(mix_seed(cfg.seed, detail::kSeedTagFirstCenter));
    const std::size_t first = seed_initial(points, first_rng);
    cands.centers.push_back(points[first]);
    cands.source.push_back(first);

    auto point_chunks = mr::chunks_of(points, engine.chunk_size);
    std::vector<double> min_dist_sq(points.size(), std::numeric_limits<double>::infinity());
    update_min_dists(point_chunks, std::span<const AbPoint>(&cands.centers.back(), 1),
                     min_dist_sq, engine);
    auto dist_chunks = mr::chunks_of(std::span<const double>(min_dist_sq), engine.chunk_size);

    for (std::uint32_t round = 0; round < cfg.rounds; ++round) {
        const double phi = chunked_phi(min_dist_sq, engine.chunk_size, engine);
        if (phi <= 0.0) {
            break; // every point already coincides with a candidate
        }
        const std::uint64_t round_seed =
            mix_seed(cfg.seed, detail::kSeedTagRoundBase + round);
        const auto selected =
            sample_candidates(dist_chunks, cfg.oversample, phi, round_seed, engine);
        if (selected.empty()) {
            continue;
        }
        const std::size_t old_size = cands.centers.size();
        for (std::uint64_t idx : selected) {
            cands.centers.push_back(points[idx]);
            cands.source.push_back(idx);
        }
        update_min_dists(point_chunks,
                         std::span<const AbPoint>(cands.centers.data() + old_size,
                                                  cands.centers.size() - old_size),
                         min_dist_sq, engine);
    }

    cands.weights = weigh_candidates(points, cands.centers, engine);

    // Per-k reduction as an engine job keyed by k, one reduce group per k.
    auto ks_chunks = mr::chunks_of(ks, 1);
    auto reduced = mr::run_job<std::uint32_t, std::uint32_t, std::vector<std::uint64_t>>(
        ks_chunks,
        [](const std::uint32_t& k, auto&& emit) { emit(k, k); },
        [&](const std::uint32_t& k, const std::vector<std::uint32_t>&, auto&& emit) {
            Rng rng(mix_seed(cfg.seed, detail::kSeedTagReduceBase + k));
            const auto chosen = reduce_to_k(cands, k, rng);
            std::vector<std::uint64_t> seeds;
            seeds.reserve(k);
            for (std::size_t ci : chosen) {
                seeds.push_back(cands.source[ci]);
            }
            // Candidate starvation: pad with distinct points drawn uniformly.
            std::vector<AbPoint> values;
            values.reserve(k);
            for (std::uint64_t s : seeds) {
                values.push_back(points[s]);
            }
            auto is_taken = [&](AbPoint p) {
                for (const AbPoint& v : values) {
                    if (v == p) {
                        return true;
                    }
                }
                return false;
            };
            std::size_t attempts = 0;
            const std::size_t max_attempts = 64 + 16 * static_cast<std::size_t>(k);
            while (seeds.size() < k) {
                const std::uint64_t idx = rng.next_below(points.size());
                if (!is_taken(points[idx])) {
                    seeds.push_back(idx);
                    values.push_back(points[idx]);
                } else if (++attempts > max_attempts) {
                    // Fewer distinct values than k; first take any remaining
                    // distinct value, then allow duplicates.
                    bool found = false;
                    for (std::uint64_t i = 0; i < points.size() && !found; ++i) {
                        if (!is_taken(points[i])) {
                            seeds.push_back(i);
                            values.push_back(points[i]);
                            found = true;
                        }
                    }
                    if (!found) {
                        seeds.push_back(idx);
                        values.push_back(points[idx]);
                    }
                }
            }
            emit(std::move(seeds));
        },
        engine);

    for (auto& [k, outs] : reduced) {
        result.seeds.emplace(k, std::move(outs.front()));
    }
    return result;
}

} // namespace mkmeans
