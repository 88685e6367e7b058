// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one self-contained check per release criterion, each
// printing a single PASS / FAIL / SKIP line. Runs everything by default; a
// criterion name as argv[1] runs just that one. Exit status is nonzero if
// any executed criterion fails.
//
// The desk-scale criteria deliberately exercise the installed CLI binary
// (pointed at by MKMEANS_CLI_PATH) rather than library internals.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "helpers.hpp"
#include "mkmeans/bench.hpp"
#include "mkmeans/cluster.hpp"
#include "mkmeans/init.hpp"
#include "mkmeans/pipeline.hpp"
#include "mkmeans/sequence_file.hpp"
#include "mkmeans/silhouette.hpp"

using namespace mkmeans;
namespace fs = std::filesystem;

namespace {

enum class Outcome { pass, fail, skip };

struct Criterion {
    std::string name;
    std::function<Outcome(std::string&)> run;
};

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(MKMEANS_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
}

// Synthetic noise-image container of at least `min_pixels` pixels.
void build_noise_container(const fs::path& path, std::uint64_t min_pixels, std::uint64_t seed) {
    SequenceWriter writer(path);
    Rng rng(seed);
    std::uint64_t pixels = 0;
    int index = 0;
    while (pixels < min_pixels) {
        const std::uint32_t w = 1024, h = 512;
        Raster r;
        r.width = w;
        r.height = h;
        r.pixels.reserve(static_cast<std::size_t>(w) * h);
        for (std::uint64_t i = 0; i < static_cast<std::uint64_t>(w) * h; ++i) {
            r.pixels.push_back({static_cast<std::uint8_t>(rng.next_below(256)),
                                static_cast<std::uint8_t>(rng.next_below(256)),
                                static_cast<std::uint8_t>(rng.next_below(256))});
        }
        writer.add("noise" + std::to_string(index++) + ".ppm", encode_ppm(r));
        pixels += r.pixel_count();
    }
    writer.close();
}

// --------------------------------------------------------------------------
// Determinism: `cluster` with a fixed seed produces byte-identical
// centroid_k.txt, points and SSI files across workers in {1, 2, 4};
// each run under 2 minutes on a 2M-pixel container.

Outcome criterion_determinism(std::string& detail) {
    testutil::TempDir dir("acc_det");
    const fs::path container = dir.path() / "c.mksq";
    build_noise_container(container, 2'000'000, 11);

    std::vector<fs::path> outs;
    double worst = 0.0;
    for (int workers : {1, 2, 4}) {
        const fs::path out = dir.path() / ("w" + std::to_string(workers));
        const double t0 = now_seconds();
        const int rc = run_cli("cluster -i " + container.string() + " -k 5,6,7 --seed 42" +
                               " --workers " + std::to_string(workers) + " -o " + out.string());
        const double elapsed = now_seconds() - t0;
        worst = std::max(worst, elapsed);
        if (rc != 0) {
            detail = "cluster exited with " + std::to_string(rc);
            return Outcome::fail;
        }
        outs.push_back(out);
    }

    for (const char* name :
         {"centroid_5.txt", "centroid_6.txt", "centroid_7.txt", "points.txt", "ssi.txt"}) {
        const auto base = testutil::slurp(outs[0] / name);
        if (base.empty()) {
            detail = std::string(name) + " is empty";
            return Outcome::fail;
        }
        for (std::size_t i = 1; i < outs.size(); ++i) {
            if (testutil::slurp(outs[i] / name) != base) {
                detail = std::string(name) + " differs between worker counts";
                return Outcome::fail;
            }
        }
    }
    {
        std::ostringstream os;
        os.setf(std::ios::fixed);
        os.precision(1);
        os << "byte-identical across workers {1,2,4}; slowest run " << worst << "s";
        detail = os.str();
    }
    if (worst >= 120.0) {
        detail += " (over the 2 min budget)";
        return Outcome::fail;
    }
    return Outcome::pass;
}

// --------------------------------------------------------------------------
// Lloyd monotonicity: 100 random instances, non-increasing cost within 1e-9
// relative slack, zero violations.

Outcome criterion_lloyd_monotonicity(std::string& detail) {
    int violations = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto points = testutil::random_points(2000, -50, 50, 4000 + trial);
        Rng rng(14000 + trial);
        const std::uint32_t k = 2 + static_cast<std::uint32_t>(rng.next_below(5));
        PartitionModel model{k, {}};
        std::set<std::uint64_t> used;
        while (model.centers.size() < k) {
            const std::uint64_t idx = rng.next_below(points.size());
            if (used.insert(idx).second) {
                model.centers.push_back(points[idx]);
            }
        }
        std::map<std::uint32_t, PartitionModel> models;
        models.emplace(k, std::move(model));
        const auto result = run_multi_k(points, {}, models, ClusterConfig{60, 0.0});
        const auto& history = result.partitions.at(k).cost_history;
        for (std::size_t i = 1; i < history.size(); ++i) {
            if (history[i] > history[i - 1] * (1.0 + 1e-9)) {
                ++violations;
            }
        }
    }
    detail = "100 instances, " + std::to_string(violations) + " violations";
    return violations == 0 ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------------------
// SSI oracle equivalence on 20 random instances, 1e-9 absolute.

Outcome criterion_ssi_oracle(std::string& detail) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const auto points = testutil::random_points(1000, -60, 60, 21000 + trial);
        Rng rng(22000 + trial);
        const std::uint32_t k = 2 + static_cast<std::uint32_t>(rng.next_below(5));
        const auto centers = testutil::random_points(k, -60, 60, 23000 + trial);
        std::vector<std::uint8_t> labels;
        for (std::size_t i = 0; i < points.size(); ++i) {
            labels.push_back(static_cast<std::uint8_t>(rng.next_below(k)));
        }

        const auto report =
            partition_ssi(points, labels, PartitionModel{k, centers}, mr::EngineConfig{3, 128});

        double oracle = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const double a = std::hypot(points[i].a - centers[labels[i]].a,
                                        points[i].b - centers[labels[i]].b);
            double b = std::numeric_limits<double>::infinity();
            for (std::uint32_t c = 0; c < k; ++c) {
                if (c != labels[i]) {
                    b = std::min(b, std::hypot(points[i].a - centers[c].a,
                                               points[i].b - centers[c].b));
                }
            }
            oracle += (b - a) / std::max({a, b, 1e-12});
        }
        oracle /= static_cast<double>(points.size());
        worst = std::max(worst, std::abs(report.mean_ssi - oracle));
    }
    std::ostringstream os;
    os << "max |ssi - oracle| = " << worst;
    detail = os.str();
    return worst < 1e-9 ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------------------
// Init quality: k-means|| final cost within 1.1x of exact k-means++ on five
// 6-sigma-separated blobs, averaged over 20 seeds, under 1 minute.

Outcome criterion_init_quality(std::string& detail) {
    const double t0 = now_seconds();
    const auto blobs = testutil::make_blobs(5, 10000, 6.0, 31000);
    const std::uint32_t k = 5;
    const std::vector<std::uint32_t> ks = {k};

    double scalable_total = 0.0;
    double exact_total = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto init = init_multi_k(blobs.points, ks, InitConfig{2.0 * k, 5, seed});
        PartitionModel scalable{k, {}};
        for (std::uint64_t idx : init.seeds.at(k)) {
            scalable.centers.push_back(blobs.points[idx]);
        }

        Rng rng(90000 + seed);
        PartitionModel exact{k, {}};
        for (std::size_t idx : testutil::exact_kmeanspp(blobs.points, k, rng)) {
            exact.centers.push_back(blobs.points[idx]);
        }

        for (const auto& [tag, model] : {std::pair<const char*, PartitionModel*>{"s", &scalable},
                                         {"e", &exact}}) {
            std::map<std::uint32_t, PartitionModel> models;
            models.emplace(k, *model);
            const auto result = run_multi_k(blobs.points, {}, models, ClusterConfig{50, 0.0});
            const double cost = result.partitions.at(k).cost_history.back();
            (*tag == 's' ? scalable_total : exact_total) += cost;
        }
    }
    const double ratio = scalable_total / exact_total;
    const double elapsed = now_seconds() - t0;
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(4);
    os << "cost ratio " << ratio << " (budget 1.1), " << elapsed << "s";
    detail = os.str();
    if (elapsed >= 60.0) {
        return Outcome::fail;
    }
    return ratio <= 1.1 ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------------------
// Model selection: G blobs -> select_k over ks = {2..8} returns G in >= 18
// of 20 seeded runs, for G in {3, 4, 5}.

Outcome criterion_model_selection(std::string& detail) {
    const std::vector<std::uint32_t> ks = {2, 3, 4, 5, 6, 7, 8};
    std::ostringstream os;
    bool ok = true;
    for (std::uint32_t g : {3u, 4u, 5u}) {
        int hits = 0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            const auto blobs = testutil::make_blobs(g, 2000, 6.0, 41000 + 100 * g + seed);
            const auto init = init_multi_k(blobs.points, ks, InitConfig{16.0, 5, seed});
            std::map<std::uint32_t, PartitionModel> models;
            for (const auto& [k, seeds] : init.seeds) {
                PartitionModel m{k, {}};
                for (std::uint64_t idx : seeds) {
                    m.centers.push_back(blobs.points[idx]);
                }
                models.emplace(k, std::move(m));
            }
            const auto result = run_multi_k(blobs.points, {}, models, ClusterConfig{50, 1e-6});
            std::vector<SSIReport> reports;
            for (const auto& [k, outcome] : result.partitions) {
                reports.push_back(partition_ssi(blobs.points, outcome.labels, outcome.model));
            }
            if (select_k(reports) == g) {
                ++hits;
            }
        }
        os << "G=" << g << ": " << hits << "/20  ";
        if (hits < 18) {
            ok = false;
        }
    }
    detail = os.str();
    return ok ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------------------
// Oversampling expectation: mean selections per round within 3*sqrt(l) of l
// (l=10, n=10000, one center chosen), over 1000 seeded rounds.

Outcome criterion_oversampling_expectation(std::string& detail) {
    const auto points = testutil::random_points(10000, -50, 50, 51000);
    const std::vector<AbPoint> centers = {points[4321]};
    const double phi = cost_phi(points, centers);
    const double l = 10.0;
    double total = 0.0;
    for (int round = 0; round < 1000; ++round) {
        total += static_cast<double>(
            oversample_round(points, centers, l, phi, 52000 + round).size());
    }
    const double mean = total / 1000.0;
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "mean selections " << mean << ", bound " << l << " +/- " << 3.0 * std::sqrt(l);
    detail = os.str();
    return std::abs(mean - l) < 3.0 * std::sqrt(l) ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------------------
// Color anchors: exact black, neutral white, and 20 random colors within
// 1e-4 of the independent reference converter.

Outcome criterion_color_anchors(std::string& detail) {
    const LabColor black = rgb_to_lab({0, 0, 0});
    if (black.l_star != 0.0 || black.a_star != 0.0 || black.b_star != 0.0) {
        detail = "black not exact";
        return Outcome::fail;
    }
    const LabColor white = rgb_to_lab({255, 255, 255});
    if (std::abs(white.l_star - 100.0) > 1e-9 || std::abs(white.a_star) >= 1e-6 ||
        std::abs(white.b_star) >= 1e-6) {
        detail = "white not neutral";
        return Outcome::fail;
    }

    Rng rng(61000);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const RgbColor c{static_cast<std::uint8_t>(rng.next_below(256)),
                         static_cast<std::uint8_t>(rng.next_below(256)),
                         static_cast<std::uint8_t>(rng.next_below(256))};
        double rl, ra, rb;
        testutil::reference_rgb_to_lab(c.r, c.g, c.b, rl, ra, rb);
        const LabColor lab = rgb_to_lab(c);
        worst = std::max({worst, std::abs(lab.l_star - rl), std::abs(lab.a_star - ra),
                          std::abs(lab.b_star - rb)});
    }
    std::ostringstream os;
    os << "black/white exact; max |impl - reference| = " << worst;
    detail = os.str();
    return worst < 1e-4 ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------------------
// Container round-trip: 1000 randomized pack/unpack cases, byte-exact.

Outcome criterion_container_roundtrip(std::string& detail) {
    Rng rng(71000);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t count = rng.next_below(8);
        std::vector<SequenceEntry> entries;
        for (std::size_t i = 0; i < count; ++i) {
            SequenceEntry e;
            e.key = "k" + std::to_string(trial) + "_" + std::to_string(i);
            e.value.resize(rng.next_below(2048));
            for (auto& byte : e.value) {
                byte = static_cast<std::uint8_t>(rng.next_below(256));
            }
            entries.push_back(std::move(e));
        }
        const auto bytes = pack(entries);
        if (unpack(bytes) != entries) {
            detail = "mismatch at trial " + std::to_string(trial);
            return Outcome::fail;
        }
    }
    detail = "1000 randomized cases byte-exact";
    return Outcome::pass;
}

// --------------------------------------------------------------------------
// Desk-scale speedup: clustering phase, 4 workers vs 1 on a >= 2M pixel
// container, speedup >= 2.0 -- meaningful only with >= 4 physical cores.

Outcome criterion_desk_speedup(std::string& detail) {
    testutil::TempDir dir("acc_speed");
    const fs::path container = dir.path() / "c.mksq";
    build_noise_container(container, 2'000'000, 81);

    PipelineConfig cfg;
    cfg.container = container;
    cfg.out_dir = dir.path() / "out";
    cfg.ks = {5, 6, 7};
    cfg.init.seed = 3;
    const auto rows = bench_speedup(cfg, {1, 4}, 1);
    double speedup = 0.0;
    for (const auto& row : rows) {
        if (row.phase == "cluster" && row.workers == 4) {
            speedup = row.metric;
        }
    }
    const unsigned cores = std::thread::hardware_concurrency();
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(2);
    os << "cluster-phase speedup " << speedup << " with 4 workers on " << cores << " cores";
    detail = os.str();
    if (cores < 4) {
        detail += " -- requires >= 4 physical cores, machine has fewer";
        return Outcome::skip;
    }
    return speedup >= 2.0 ? Outcome::pass : Outcome::fail;
}

// --------------------------------------------------------------------------
// Smoke test at scale: the default ks={5,6,7} configuration end-to-end on a
// 1 GB container within 30 minutes at 4 workers; three centroid files, one
// SSI file with three partition rows.

Outcome criterion_smoke_1gb(std::string& detail) {
    testutil::TempDir dir("acc_smoke");
    const fs::path container = dir.path() / "big.mksq";
    {
        SequenceWriter writer(container);
        Rng rng(90001);
        const std::uint32_t w = 2048, h = 2048; // 12.6 MB per image
        Raster r;
        r.width = w;
        r.height = h;
        r.pixels.resize(static_cast<std::size_t>(w) * h);
        std::uint64_t bytes = 0;
        int index = 0;
        while (bytes < 1'000'000'000ull) {
            // Smooth gradients plus noise, reseeded per image.
            const auto base_r = static_cast<std::uint8_t>(rng.next_below(256));
            const auto base_g = static_cast<std::uint8_t>(rng.next_below(256));
            for (std::uint32_t y = 0; y < h; ++y) {
                for (std::uint32_t x = 0; x < w; ++x) {
                    r.pixels[static_cast<std::size_t>(y) * w + x] = {
                        static_cast<std::uint8_t>(base_r + (x >> 4)),
                        static_cast<std::uint8_t>(base_g + (y >> 4)),
                        static_cast<std::uint8_t>(rng.next_below(256))};
                }
            }
            const auto ppm = encode_ppm(r);
            writer.add("sat" + std::to_string(index++) + ".ppm", ppm);
            bytes += ppm.size();
        }
        writer.close();
    }
    const auto container_bytes = fs::file_size(container);

    const fs::path out = dir.path() / "out";
    const double t0 = now_seconds();
    // points.txt is gated off: the criterion requires the centroid and SSI
    // artifacts, and the points dump at this scale is ~35 GB of text.
    const int rc = run_cli("cluster -i " + container.string() +
                           " -k 5,6,7 --seed 7 --workers 4 --no-points -o " + out.string());
    const double elapsed = now_seconds() - t0;
    if (rc != 0) {
        detail = "cluster exited with " + std::to_string(rc);
        return Outcome::fail;
    }

    int centroid_files = 0;
    for (std::uint32_t k : {5u, 6u, 7u}) {
        const auto path = out / ("centroid_" + std::to_string(k) + ".txt");
        if (fs::exists(path) && read_centroid_file(path).size() == k) {
            ++centroid_files;
        }
    }
    const auto ssi = read_ssi_file(out / "ssi.txt");

    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(1);
    os << container_bytes / 1e9 << " GB container, " << elapsed << "s, " << centroid_files
       << " centroid files, " << ssi.reports.size() << " SSI rows, best k " << ssi.best_k;
    detail = os.str();

    if (centroid_files != 3 || ssi.reports.size() != 3) {
        return Outcome::fail;
    }
    return elapsed < 1800.0 ? Outcome::pass : Outcome::fail;
}

} // namespace

int main(int argc, char** argv) {
    std::vector<Criterion> criteria = {
        {"color_anchors", criterion_color_anchors},
        {"container_roundtrip", criterion_container_roundtrip},
        {"oversampling_expectation", criterion_oversampling_expectation},
        {"ssi_oracle", criterion_ssi_oracle},
        {"lloyd_monotonicity", criterion_lloyd_monotonicity},
        {"init_quality", criterion_init_quality},
        {"model_selection", criterion_model_selection},
        {"determinism", criterion_determinism},
        {"desk_speedup", criterion_desk_speedup},
        {"smoke_1gb", criterion_smoke_1gb},
    };

    const std::string filter = argc > 1 ? argv[1] : "";
    int failures = 0;
    int executed = 0;
    for (const auto& criterion : criteria) {
        if (!filter.empty() && criterion.name != filter) {
            continue;
        }
        ++executed;
        std::string detail;
        Outcome outcome = Outcome::fail;
        try {
            outcome = criterion.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
            outcome = Outcome::fail;
        }
        const char* tag = outcome == Outcome::pass ? "PASS"
                          : outcome == Outcome::skip ? "SKIP"
                                                     : "FAIL";
        std::printf("[%s] %-26s %s\n", tag, criterion.name.c_str(), detail.c_str());
        std::fflush(stdout);
        if (outcome == Outcome::fail) {
            ++failures;
        }
    }
    if (executed == 0) {
        std::fprintf(stderr, "no criterion named '%s'\n", filter.c_str());
        return 2;
    }
    return failures == 0 ? 0 : 1;
}
