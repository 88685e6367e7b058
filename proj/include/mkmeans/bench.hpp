// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mkmeans/pipeline.hpp"

namespace mkmeans {

// Speedup and scaleup sweeps. "Nodes" are emulated by engine workers on one
// host; the sweep preserves the measurement methodology, not any absolute
// cluster numbers.
//   speedup(n) = T(1 worker) / T(n workers), same data
//   scaleup(n) = T(1 worker, 1x data) / T(n workers, nx data)

struct BenchRow {
    std::string phase; // init | cluster | validate
    std::uint32_t workers = 0;
    std::uint64_t pixels = 0;
    double seconds = 0.0;
    double metric = 1.0; // speedup or scaleup vs the workers=1 baseline
};

namespace detail {

struct PhaseMedians {
    PhaseSeconds seconds;
    std::uint64_t pixels = 0;
};

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Runs the pipeline `repeats` times and keeps the per-phase median wall
// time. Artifact emission is disabled so only phase work is measured.
inline PhaseMedians run_timed(PipelineConfig cfg, std::uint32_t repeats) {
    cfg.write_points = false;
    cfg.write_label_maps = false;
    cfg.write_pixel_dump = false;
    std::vector<double> init_s, cluster_s, validate_s;
    PhaseMedians out;
    for (std::uint32_t r = 0; r < repeats; ++r) {
        const PipelineResult res = run_pipeline(cfg);
        init_s.push_back(res.seconds.init);
        cluster_s.push_back(res.seconds.cluster);
        validate_s.push_back(res.seconds.validate);
        out.pixels = res.pixels;
    }
    out.seconds.init = median(init_s);
    out.seconds.cluster = median(cluster_s);
    out.seconds.validate = median(validate_s);
    return out;
}

inline void append_rows(std::vector<BenchRow>& rows, const PhaseMedians& run,
                        const PhaseMedians& base, std::uint32_t workers) {
    const std::pair<const char*, std::pair<double, double>> phases[] = {
        {"init", {run.seconds.init, base.seconds.init}},
        {"cluster", {run.seconds.cluster, base.seconds.cluster}},
        {"validate", {run.seconds.validate, base.seconds.validate}},
    };
    for (const auto& [phase, secs] : phases) {
        const auto [run_s, base_s] = secs;
        rows.push_back(BenchRow{phase, workers, run.pixels, run_s,
                                run_s > 0.0 ? base_s / run_s : 1.0});
    }
}

} // namespace detail

inline std::vector<BenchRow> bench_speedup(const PipelineConfig& cfg,
                                           const std::vector<std::uint32_t>& worker_list,
                                           std::uint32_t repeats = 3) {
    if (std::find(worker_list.begin(), worker_list.end(), 1u) == worker_list.end()) {
        throw std::invalid_argument("speedup sweep requires workers=1 in the list");
    }
    if (repeats < 1) {
        throw std::invalid_argument("repeats must be >= 1");
    }

    std::map<std::uint32_t, detail::PhaseMedians> runs;
    for (std::uint32_t w : worker_list) {
        if (runs.count(w)) {
            continue;
        }
        PipelineConfig run_cfg = cfg;
        run_cfg.engine.workers = w;
        runs.emplace(w, detail::run_timed(run_cfg, repeats));
    }

    std::vector<BenchRow> rows;
    const detail::PhaseMedians& base = runs.at(1);
    for (const auto& [w, medians] : runs) {
        detail::append_rows(rows, medians, base, w);
    }
    return rows;
}

// scale_list pairs (workers n, data multiplier n); the (1, 1) baseline is
// added if missing. Data is scaled by replicating the container's pixel
// stream.
inline std::vector<BenchRow> bench_scaleup(
    const PipelineConfig& cfg, const std::vector<std::pair<std::uint32_t, std::uint32_t>>& scale_list,
    std::uint32_t repeats = 3) {
    if (repeats < 1) {
        throw std::invalid_argument("repeats must be >= 1");
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> scales = scale_list;
    if (std::find(scales.begin(), scales.end(), std::make_pair(1u, 1u)) == scales.end()) {
        scales.insert(scales.begin(), {1u, 1u});
    }
    for (const auto& [workers, multiplier] : scales) {
        if (workers < 1 || multiplier < 1) {
            throw std::invalid_argument("workers and data multiplier must be >= 1");
        }
    }

    auto run_scale = [&](std::uint32_t workers, std::uint32_t multiplier) {
        PipelineConfig run_cfg = cfg;
        run_cfg.engine.workers = workers;
        run_cfg.replicate = cfg.replicate * multiplier;
        return detail::run_timed(run_cfg, repeats);
    };

    const detail::PhaseMedians base = run_scale(1, 1);
    std::vector<BenchRow> rows;
    for (const auto& [workers, multiplier] : scales) {
        const detail::PhaseMedians medians =
            (workers == 1 && multiplier == 1) ? base : run_scale(workers, multiplier);
        detail::append_rows(rows, medians, base, workers);
    }
    return rows;
}

inline void write_bench_csv(const std::filesystem::path& path, std::span<const BenchRow> rows) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << "phase,workers,pixels,seconds,metric\n";
    for (const BenchRow& row : rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%s,%u,%llu,%.6f,%.6f\n", row.phase.c_str(), row.workers,
                      static_cast<unsigned long long>(row.pixels), row.seconds, row.metric);
        out << line;
    }
    if (!out.flush()) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

} // namespace mkmeans
