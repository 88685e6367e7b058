// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkmeans/cluster.hpp"
#include "mkmeans/feature_store.hpp"
#include "mkmeans/formats.hpp"
#include "mkmeans/image.hpp"
#include "mkmeans/init.hpp"
#include "mkmeans/mr_engine.hpp"
#include "mkmeans/pixel.hpp"
#include "mkmeans/sequence_file.hpp"
#include "mkmeans/silhouette.hpp"

namespace mkmeans {

// End-to-end run: container -> pixel extraction -> shared k-means||
// initialization -> multi-k Lloyd -> SSI validation and k selection, with
// all text artifacts written to an output directory.

struct PipelineConfig {
    std::filesystem::path container;
    std::filesystem::path out_dir;
    std::vector<std::uint32_t> ks{5, 6, 7};
    InitConfig init;        // oversample <= 0 selects the 2 * max(ks) default
    ClusterConfig cluster;
    mr::EngineConfig engine;
    bool write_points = true;
    bool write_label_maps = false;
    bool write_pixel_dump = false;
    std::uint32_t replicate = 1;        // duplicate the pixel stream N times
    std::uint64_t memory_budget_mb = 1024; // feature columns spill beyond this
};

struct PhaseSeconds {
    double init = 0.0;
    double cluster = 0.0;
    double validate = 0.0;
};

struct PipelineResult {
    std::uint32_t best_k = 0;
    std::vector<SSIReport> reports;
    std::uint64_t pixels = 0;
    std::uint64_t images = 0;
    PhaseSeconds seconds;
    std::map<std::uint32_t, std::uint32_t> iterations;
    std::map<std::uint32_t, double> final_cost;
};

class PipelineError : public std::runtime_error {
public:
    PipelineError(const std::string& phase, const std::string& what)
        : std::runtime_error(phase + " phase failed: " + what), phase_(phase) {}

    const std::string& phase() const { return phase_; }

private:
    std::string phase_;
};

namespace detail {

inline std::string sanitize_for_filename(const std::string& id) {
    std::string out;
    out.reserve(id.size());
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                        (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
        out.push_back(ok ? c : '_');
    }
    return out.empty() ? "image" : out;
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace detail

inline void validate_config(const PipelineConfig& cfg) {
    if (cfg.ks.empty()) {
        throw std::invalid_argument("at least one k value is required");
    }
    for (std::uint32_t k : cfg.ks) {
        if (k < 2) {
            throw std::invalid_argument("k must be >= 2 (SSI validation needs two clusters)");
        }
        if (k > 255) {
            throw std::invalid_argument("k must be <= 255");
        }
    }
    for (std::size_t i = 0; i < cfg.ks.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (cfg.ks[i] == cfg.ks[j]) {
                throw std::invalid_argument("duplicate k value " + std::to_string(cfg.ks[i]));
            }
        }
    }
    if (cfg.replicate < 1) {
        throw std::invalid_argument("replicate must be >= 1");
    }
    if (cfg.engine.workers < 1 || cfg.engine.chunk_size < 1) {
        throw std::invalid_argument("engine config must have workers >= 1 and chunk_size >= 1");
    }
    if (cfg.cluster.max_iters < 1) {
        throw std::invalid_argument("max_iters must be >= 1");
    }
    if (cfg.cluster.tol < 0) {
        throw std::invalid_argument("tol must be >= 0");
    }
    if (cfg.init.rounds < 1) {
        throw std::invalid_argument("rounds must be >= 1");
    }
}

inline PipelineResult run_pipeline(const PipelineConfig& cfg, std::ostream* log = nullptr) {
    validate_config(cfg);
    std::filesystem::create_directories(cfg.out_dir);

    PipelineResult result;
    FeatureStore store(cfg.memory_budget_mb << 20);

    // Pixel extraction (the mapper-only read job; not a timed phase).
    try {
        for (std::uint32_t rep = 0; rep < cfg.replicate; ++rep) {
            SequenceReader reader(cfg.container);
            SequenceEntry entry;
            while (reader.next(entry)) {
                const Raster raster = decode_image(entry.value, entry.key);
                const std::string id =
                    rep == 0 ? entry.key : entry.key + "~r" + std::to_string(rep);
                store.add_raster(raster, id);
            }
        }
        store.finalize();
    } catch (const std::exception& e) {
        throw PipelineError("extract", e.what());
    }
    result.pixels = store.size();
    result.images = store.images().size();
    if (result.pixels == 0) {
        throw PipelineError("extract", "container holds no pixels");
    }
    const std::uint32_t max_k = *std::max_element(cfg.ks.begin(), cfg.ks.end());
    if (max_k > result.pixels) {
        throw PipelineError("extract", "k = " + std::to_string(max_k) +
                                           " exceeds the pixel count " +
                                           std::to_string(result.pixels));
    }
    if (log) {
        *log << "extracted " << result.pixels << " pixels from " << result.images << " images"
             << (store.spilled() ? " (spilled to disk)" : "") << "\n";
    }

    const auto features = store.features();
    const auto rgb = store.rgb();
    const auto positions = store.positions();

    if (cfg.write_pixel_dump) {
        std::ofstream dump(cfg.out_dir / "pixels.txt", std::ios::trunc);
        for (std::size_t i = 0; i < positions.size(); ++i) {
            const PixelPos& pos = positions[i];
            dump << format_pixel_line(store.images()[pos.image].id, pos.x, pos.y, rgb[i]) << '\n';
        }
    }

    // Initialization phase (shared k-means|| pass, per-k reduction).
    InitConfig init_cfg = cfg.init;
    if (!(init_cfg.oversample > 0.0)) {
        init_cfg.oversample = 2.0 * max_k;
    }
    InitResult init;
    auto t0 = std::chrono::steady_clock::now();
    try {
        init = init_multi_k(features, cfg.ks, init_cfg, cfg.engine);
    } catch (const std::exception& e) {
        throw PipelineError("init", e.what());
    }
    result.seconds.init = detail::seconds_since(t0);

    std::map<std::uint32_t, PartitionModel> models;
    for (const auto& [k, seeds] : init.seeds) {
        PartitionModel model{k, {}};
        model.centers.reserve(k);
        std::vector<CentroidLine> lines;
        lines.reserve(k);
        for (std::uint32_t c = 0; c < k; ++c) {
            const std::uint64_t idx = seeds[c];
            model.centers.push_back(features[idx]);
            lines.push_back(CentroidLine{k, c, positions[idx].x, positions[idx].y, rgb[idx]});
        }
        write_centroid_file(centroid_file_path(cfg.out_dir, k), lines);
        models.emplace(k, std::move(model));
    }
    if (log) {
        *log << "init: " << init.candidates.size() << " candidates, " << models.size()
             << " partitions, " << result.seconds.init << " s\n";
    }

    // Clustering phase. The sink refreshes centroid_<k>.txt on every
    // iteration: coordinates of the assigned pixel nearest each center, and
    // the cluster's mean color.
    auto write_model_file = [&](const PartitionModel& model, const std::vector<ClusterAux>& aux) {
        std::vector<CentroidLine> lines;
        lines.reserve(model.k);
        for (std::uint32_t c = 0; c < model.k; ++c) {
            const PixelPos pos = positions[aux[c].nearest_idx];
            lines.push_back(CentroidLine{model.k, c, pos.x, pos.y, aux[c].mean_rgb()});
        }
        write_centroid_file(centroid_file_path(cfg.out_dir, model.k), lines);
    };

    MultiKResult clustering;
    t0 = std::chrono::steady_clock::now();
    try {
        clustering = run_multi_k(features, rgb, models, cfg.cluster, cfg.engine,
                                 [&](std::uint32_t, const PartitionModel& model,
                                     const std::vector<ClusterAux>& aux) {
                                     write_model_file(model, aux);
                                 });
    } catch (const std::exception& e) {
        throw PipelineError("cluster", e.what());
    }
    result.seconds.cluster = detail::seconds_since(t0);
    for (const auto& [k, outcome] : clustering.partitions) {
        result.iterations[k] = outcome.iterations;
        result.final_cost[k] = outcome.cost_history.back();
        if (log) {
            *log << "cluster k=" << k << ": " << outcome.iterations << " iterations, cost "
                 << outcome.cost_history.back() << "\n";
        }
    }

    // Validation phase: per-partition SSI and the BEST line.
    t0 = std::chrono::steady_clock::now();
    try {
        for (const auto& [k, outcome] : clustering.partitions) {
            result.reports.push_back(
                partition_ssi(features, outcome.labels, outcome.model, cfg.engine));
        }
        result.best_k = select_k(result.reports);
    } catch (const std::exception& e) {
        throw PipelineError("validate", e.what());
    }
    result.seconds.validate = detail::seconds_since(t0);
    write_ssi_file(cfg.out_dir / "ssi.txt", result.reports, result.best_k);

    // Record-count reconciliation across the phases.
    for (const auto& [k, outcome] : clustering.partitions) {
        if (outcome.labels.size() != result.pixels) {
            throw PipelineError("cluster", "assignment count mismatch for k=" +
                                               std::to_string(k));
        }
    }
    for (const SSIReport& r : result.reports) {
        if (r.point_count != result.pixels) {
            throw PipelineError("validate", "SSI point count mismatch for k=" +
                                                std::to_string(r.partition_id));
        }
    }

    if (cfg.write_points) {
        PointsWriter writer(cfg.out_dir / "points.txt");
        for (const auto& [k, outcome] : clustering.partitions) {
            std::vector<RgbColor> cluster_colors(outcome.model.k);
            for (std::uint32_t c = 0; c < outcome.model.k; ++c) {
                cluster_colors[c] = outcome.aux[c].mean_rgb();
            }
            for (std::size_t i = 0; i < result.pixels; ++i) {
                const std::uint32_t c = outcome.labels[i];
                writer.add(PointLine{k, c, cluster_colors[c], positions[i].x, positions[i].y,
                                     rgb[i]});
            }
        }
        writer.close();
    }

    if (cfg.write_label_maps) {
        for (const auto& [k, outcome] : clustering.partitions) {
            std::vector<RgbColor> cluster_colors(outcome.model.k);
            for (std::uint32_t c = 0; c < outcome.model.k; ++c) {
                cluster_colors[c] = outcome.aux[c].mean_rgb();
            }
            for (const auto& info : store.images()) {
                Raster map;
                map.width = info.width;
                map.height = info.height;
                map.pixels.resize(info.count);
                for (std::uint64_t i = 0; i < info.count; ++i) {
                    map.pixels[i] = cluster_colors[outcome.labels[info.start + i]];
                }
                const auto bytes = encode_ppm(map);
                const std::string stem = std::filesystem::path(info.id).stem().string();
                const auto path = cfg.out_dir / ("labels_" + std::to_string(k) + "_" +
                                                 detail::sanitize_for_filename(stem) + ".ppm");
                std::ofstream out(path, std::ios::binary | std::ios::trunc);
                out.write(reinterpret_cast<const char*>(bytes.data()),
                          static_cast<std::streamsize>(bytes.size()));
            }
        }
    }

    if (log) {
        *log << "validate: " << result.seconds.validate << " s, best k = " << result.best_k
             << "\n";
    }
    return result;
}

// Recomputes per-partition SSI from the text artifacts alone (centroid files
// for the centers, points file for the assignments), the way a downstream
// consumer would.
inline SsiFileContent validate_from_files(const std::filesystem::path& dir,
                                          const std::filesystem::path& ssi_out) {
    std::map<std::uint32_t, std::vector<AbPoint>> centers;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("centroid_", 0) != 0 || entry.path().extension() != ".txt") {
            continue;
        }
        const auto lines = read_centroid_file(entry.path());
        if (lines.empty()) {
            continue;
        }
        auto& model = centers[lines.front().partition_id];
        model.resize(lines.size());
        for (const CentroidLine& line : lines) {
            if (line.cluster_id >= lines.size() || line.partition_id != lines.front().partition_id) {
                throw std::runtime_error("inconsistent centroid file: " + entry.path().string());
            }
            model[line.cluster_id] = rgb_to_ab(line.rgb);
        }
    }
    if (centers.empty()) {
        throw std::runtime_error("no centroid files found in " + dir.string());
    }

    std::map<std::uint32_t, double> ssi_sum;
    std::map<std::uint32_t, std::uint64_t> ssi_count;
    read_points_file(dir / "points.txt", [&](const PointLine& p) {
        auto it = centers.find(p.partition_id);
        if (it == centers.end()) {
            throw std::runtime_error("points file references unknown partition " +
                                     std::to_string(p.partition_id));
        }
        const auto& model = it->second;
        if (model.size() < 2) {
            throw std::runtime_error("SSI undefined for a single cluster (partition " +
                                     std::to_string(p.partition_id) + ")");
        }
        if (p.cluster_id >= model.size()) {
            throw std::runtime_error("points file references unknown cluster " +
                                     std::to_string(p.cluster_id));
        }
        const AbPoint feature = rgb_to_ab(p.point_color);
        const double own = std::sqrt(lab_distance_sq(feature, model[p.cluster_id]));
        double other_sq = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < model.size(); ++c) {
            if (c != p.cluster_id) {
                other_sq = std::min(other_sq, lab_distance_sq(feature, model[c]));
            }
        }
        ssi_sum[p.partition_id] += point_ssi(own, std::sqrt(other_sq));
        ++ssi_count[p.partition_id];
    });

    SsiFileContent content;
    for (const auto& [k, sum] : ssi_sum) {
        content.reports.push_back(
            SSIReport{k, sum / static_cast<double>(ssi_count[k]), ssi_count[k]});
    }
    content.best_k = select_k(content.reports);
    write_ssi_file(ssi_out, content.reports, content.best_k);
    return content;
}

} // namespace mkmeans
