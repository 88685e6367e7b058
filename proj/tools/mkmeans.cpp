// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0
//
// mkmeans command line: pack images into a sequence container, run the
// multi-k clustering pipeline, re-validate from the text artifacts, and run
// speedup / scaleup sweeps.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mkmeans/bench.hpp"
#include "mkmeans/pipeline.hpp"
#include "mkmeans/sequence_file.hpp"

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

int cmd_pack(const std::vector<fs::path>& images, const fs::path& output) {
    mkmeans::SequenceWriter writer(output);
    for (const fs::path& path : images) {
        const auto bytes = read_file(path);
        if (!mkmeans::detail::looks_like_png(bytes) && !mkmeans::detail::looks_like_ppm(bytes)) {
            throw std::runtime_error("unsupported image format for '" + path.string() +
                                     "' (expected PNG or binary PPM)");
        }
        writer.add(path.filename().string(), bytes);
    }
    writer.close();
    std::cout << "packed " << writer.count() << " images into " << output.string() << "\n";
    return 0;
}

void print_pipeline_summary(const mkmeans::PipelineResult& result) {
    std::cout << "pixels: " << result.pixels << " (" << result.images << " images)\n";
    for (const auto& report : result.reports) {
        char line[96];
        std::snprintf(line, sizeof line, "k=%u  ssi=%.9f  iterations=%u\n", report.partition_id,
                      report.mean_ssi, result.iterations.at(report.partition_id));
        std::cout << line;
    }
    char timing[160];
    std::snprintf(timing, sizeof timing, "phases: init %.3fs, cluster %.3fs, validate %.3fs\n",
                  result.seconds.init, result.seconds.cluster, result.seconds.validate);
    std::cout << timing;
    std::cout << "best k: " << result.best_k << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-k scalable k-means++ clustering of raster imagery"};
    app.require_subcommand(1);

    // pack
    std::vector<fs::path> pack_images;
    fs::path pack_output;
    auto* pack = app.add_subcommand("pack", "pack images into a sequence container");
    pack->add_option("images", pack_images, "input images (PNG or binary PPM)")
        ->required()
        ->check(CLI::ExistingFile);
    pack->add_option("-o,--output", pack_output, "container file to write")->required();

    // cluster
    mkmeans::PipelineConfig cfg;
    std::vector<std::uint32_t> ks{5, 6, 7};
    double oversample = 0.0;
    auto* cluster = app.add_subcommand("cluster", "run init + clustering + validation");
    cluster->add_option("-i,--input", cfg.container, "sequence container")
        ->required()
        ->check(CLI::ExistingFile);
    cluster->add_option("-k,--ks", ks, "k values, e.g. -k 5,6,7")->delimiter(',');
    cluster->add_option("-o,--output", cfg.out_dir, "output directory")->required();
    cluster->add_option("--workers", cfg.engine.workers, "emulated node count")
        ->check(CLI::PositiveNumber);
    cluster->add_option("--seed", cfg.init.seed, "random seed");
    cluster->add_option("--rounds", cfg.init.rounds, "oversampling rounds")
        ->check(CLI::PositiveNumber);
    cluster->add_option("--oversample", oversample, "oversampling factor l (default 2*max k)");
    cluster->add_option("--max-iters", cfg.cluster.max_iters, "Lloyd iteration cap")
        ->check(CLI::PositiveNumber);
    cluster->add_option("--tol", cfg.cluster.tol, "center-shift convergence threshold");
    cluster->add_option("--chunk-size", cfg.engine.chunk_size, "records per map task")
        ->check(CLI::PositiveNumber);
    cluster->add_option("--memory-budget-mb", cfg.memory_budget_mb,
                        "feature columns spill to disk beyond this");
    cluster->add_option("--replicate", cfg.replicate, "duplicate the pixel stream N times")
        ->check(CLI::PositiveNumber);
    cluster->add_flag("--label-maps", cfg.write_label_maps, "write per-(image, k) label rasters");
    cluster->add_flag("--pixel-dump", cfg.write_pixel_dump, "write pixels.txt debug dump");
    bool no_points = false;
    cluster->add_flag("--no-points", no_points, "skip the (large) points.txt artifact");

    // validate
    fs::path validate_dir;
    auto* validate = app.add_subcommand("validate", "recompute SSI from the text artifacts");
    validate->add_option("-o,--output", validate_dir, "directory holding cluster outputs")
        ->required()
        ->check(CLI::ExistingDirectory);

    // bench
    auto* bench = app.add_subcommand("bench", "speedup / scaleup sweeps");
    bench->require_subcommand(1);
    fs::path bench_container, bench_csv;
    std::vector<std::uint32_t> bench_workers{1, 2, 4};
    std::uint32_t bench_repeats = 3;
    std::vector<std::uint32_t> bench_ks{5, 6, 7};
    std::uint64_t bench_seed = 0;
    auto add_bench_options = [&](CLI::App* sub) {
        sub->add_option("-i,--input", bench_container, "sequence container")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--workers", bench_workers, "worker counts, e.g. --workers 1,2,4")
            ->delimiter(',');
        sub->add_option("--repeats", bench_repeats, "runs per configuration (median taken)")
            ->check(CLI::PositiveNumber);
        sub->add_option("-k,--ks", bench_ks, "k values")->delimiter(',');
        sub->add_option("--seed", bench_seed, "random seed");
        sub->add_option("-o,--output", bench_csv, "CSV file to write")->required();
    };
    auto* speedup = bench->add_subcommand("speedup", "fixed data, varying workers");
    add_bench_options(speedup);
    auto* scaleup = bench->add_subcommand("scaleup", "data and workers scaled together");
    add_bench_options(scaleup);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pack) {
            return cmd_pack(pack_images, pack_output);
        }
        if (*cluster) {
            cfg.ks = ks;
            cfg.init.oversample = oversample;
            cfg.write_points = !no_points;
            const auto result = mkmeans::run_pipeline(cfg, &std::cout);
            print_pipeline_summary(result);
            return 0;
        }
        if (*validate) {
            const auto content = mkmeans::validate_from_files(
                validate_dir, validate_dir / "ssi_recomputed.txt");
            for (const auto& report : content.reports) {
                char line[64];
                std::snprintf(line, sizeof line, "%u,%.9f\n", report.partition_id,
                              report.mean_ssi);
                std::cout << line;
            }
            std::cout << "BEST," << content.best_k << "\n";
            return 0;
        }
        if (*bench) {
            mkmeans::PipelineConfig bench_cfg;
            bench_cfg.container = bench_container;
            bench_cfg.out_dir = fs::temp_directory_path() / "mkmeans_bench";
            bench_cfg.ks = bench_ks;
            bench_cfg.init.seed = bench_seed;
            std::vector<mkmeans::BenchRow> rows;
            if (*speedup) {
                rows = mkmeans::bench_speedup(bench_cfg, bench_workers, bench_repeats);
            } else {
                std::vector<std::pair<std::uint32_t, std::uint32_t>> scales;
                for (std::uint32_t w : bench_workers) {
                    scales.emplace_back(w, w);
                }
                rows = mkmeans::bench_scaleup(bench_cfg, scales, bench_repeats);
            }
            mkmeans::write_bench_csv(bench_csv, rows);
            for (const auto& row : rows) {
                char line[160];
                std::snprintf(line, sizeof line, "%-8s workers=%u pixels=%llu %.6fs metric=%.3f\n",
                              row.phase.c_str(), row.workers,
                              static_cast<unsigned long long>(row.pixels), row.seconds,
                              row.metric);
                std::cout << line;
            }
            std::cout << "wrote " << bench_csv.string() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
