// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mkmeans/color.hpp"
#include "mkmeans/silhouette.hpp"

namespace mkmeans {

// Text artifacts exchanged between the phases (and with anything downstream
// that wants to read them):
//   centroid_<k>.txt   partitionId,clusterId,x,y,r,g,b
//   points.txt         partitionId,clusterId,clusterColor,pointX,pointY,pointColor
//                      with colors serialized as r:g:b
//   ssi.txt            partitionId,mean_ssi (9 decimals), final line BEST,<k>
//   pixels.txt         image_id,x,y,r,g,b (debug dump of the extraction job)

struct CentroidLine {
    std::uint32_t partition_id = 0;
    std::uint32_t cluster_id = 0;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    RgbColor rgb;
};

inline std::filesystem::path centroid_file_path(const std::filesystem::path& dir,
                                                std::uint32_t k) {
    return dir / ("centroid_" + std::to_string(k) + ".txt");
}

inline void write_centroid_file(const std::filesystem::path& path,
                                std::span<const CentroidLine> lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const CentroidLine& line : lines) {
        out << line.partition_id << ',' << line.cluster_id << ',' << line.x << ',' << line.y
            << ',' << int(line.rgb.r) << ',' << int(line.rgb.g) << ',' << int(line.rgb.b) << '\n';
    }
    if (!out.flush()) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

inline std::vector<CentroidLine> read_centroid_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::vector<CentroidLine> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        CentroidLine c;
        unsigned r = 0, g = 0, b = 0;
        if (std::sscanf(line.c_str(), "%u,%u,%u,%u,%u,%u,%u", &c.partition_id, &c.cluster_id,
                        &c.x, &c.y, &r, &g, &b) != 7 ||
            r > 255 || g > 255 || b > 255) {
            throw std::runtime_error("malformed centroid line in " + path.string() + ": " + line);
        }
        c.rgb = {static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                 static_cast<std::uint8_t>(b)};
        lines.push_back(c);
    }
    return lines;
}

struct PointLine {
    std::uint32_t partition_id = 0;
    std::uint32_t cluster_id = 0;
    RgbColor cluster_color;
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    RgbColor point_color;
};

// Buffered line-by-line writer; the points file is by far the largest text
// artifact, so it avoids iostream formatting in the loop.
class PointsWriter {
public:
    explicit PointsWriter(const std::filesystem::path& path)
        : file_(std::fopen(path.string().c_str(), "wb")), path_(path) {
        if (!file_) {
            throw std::runtime_error("cannot write " + path.string());
        }
        buffer_.resize(1 << 20);
        std::setvbuf(file_, buffer_.data(), _IOFBF, buffer_.size());
    }

    PointsWriter(const PointsWriter&) = delete;
    PointsWriter& operator=(const PointsWriter&) = delete;

    ~PointsWriter() {
        if (file_) {
            std::fclose(file_);
        }
    }

    void add(const PointLine& p) {
        char line[96];
        const int len = std::snprintf(line, sizeof line, "%u,%u,%u:%u:%u,%u,%u,%u:%u:%u\n",
                                      p.partition_id, p.cluster_id, p.cluster_color.r,
                                      p.cluster_color.g, p.cluster_color.b, p.x, p.y,
                                      p.point_color.r, p.point_color.g, p.point_color.b);
        if (std::fwrite(line, 1, static_cast<std::size_t>(len), file_) !=
            static_cast<std::size_t>(len)) {
            throw std::runtime_error("failed writing " + path_.string());
        }
        ++count_;
    }

    void close() {
        if (file_) {
            const int rc = std::fclose(file_);
            file_ = nullptr;
            if (rc != 0) {
                throw std::runtime_error("failed writing " + path_.string());
            }
        }
    }

    std::uint64_t count() const { return count_; }

private:
    std::FILE* file_;
    std::filesystem::path path_;
    std::vector<char> buffer_;
    std::uint64_t count_ = 0;
};

// Streams point lines to fn(PointLine); returns the line count.
template <typename Fn>
std::uint64_t read_points_file(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::string line;
    std::uint64_t count = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        PointLine p;
        unsigned cr, cg, cb, pr, pg, pb;
        if (std::sscanf(line.c_str(), "%u,%u,%u:%u:%u,%u,%u,%u:%u:%u", &p.partition_id,
                        &p.cluster_id, &cr, &cg, &cb, &p.x, &p.y, &pr, &pg, &pb) != 10 ||
            cr > 255 || cg > 255 || cb > 255 || pr > 255 || pg > 255 || pb > 255) {
            throw std::runtime_error("malformed point line in " + path.string() + ": " + line);
        }
        p.cluster_color = {static_cast<std::uint8_t>(cr), static_cast<std::uint8_t>(cg),
                           static_cast<std::uint8_t>(cb)};
        p.point_color = {static_cast<std::uint8_t>(pr), static_cast<std::uint8_t>(pg),
                         static_cast<std::uint8_t>(pb)};
        fn(p);
        ++count;
    }
    return count;
}

inline void write_ssi_file(const std::filesystem::path& path, std::span<const SSIReport> reports,
                           std::uint32_t best_k) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    for (const SSIReport& r : reports) {
        char line[64];
        std::snprintf(line, sizeof line, "%u,%.9f\n", r.partition_id, r.mean_ssi);
        out << line;
    }
    out << "BEST," << best_k << '\n';
    if (!out.flush()) {
        throw std::runtime_error("failed writing " + path.string());
    }
}

struct SsiFileContent {
    std::vector<SSIReport> reports; // point_count not stored in the file
    std::uint32_t best_k = 0;
};

inline SsiFileContent read_ssi_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    SsiFileContent content;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        if (line.rfind("BEST,", 0) == 0) {
            content.best_k = static_cast<std::uint32_t>(std::stoul(line.substr(5)));
            continue;
        }
        SSIReport r;
        double ssi = 0.0;
        if (std::sscanf(line.c_str(), "%u,%lf", &r.partition_id, &ssi) != 2) {
            throw std::runtime_error("malformed ssi line in " + path.string() + ": " + line);
        }
        r.mean_ssi = ssi;
        content.reports.push_back(r);
    }
    return content;
}

} // namespace mkmeans
