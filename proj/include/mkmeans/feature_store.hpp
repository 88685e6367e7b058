// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <fcntl.h>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <vector>

#include "mkmeans/color.hpp"
#include "mkmeans/image.hpp"
#include "mkmeans/pixel.hpp"

namespace mkmeans {

// Grid position and source image of one extracted pixel.
struct PixelPos {
    std::uint32_t x = 0;
    std::uint32_t y = 0;
    std::uint32_t image = 0; // index into FeatureStore::images()
};

static_assert(sizeof(AbPoint) == 16);
static_assert(sizeof(RgbColor) == 3);
static_assert(sizeof(PixelPos) == 12);

namespace detail {

// Read-only mapping of a whole file. The path is unlinked right after the
// map is established, so spill files disappear even on abnormal exit.
class MappedFile {
public:
    MappedFile() = default;

    void map_and_unlink(const std::filesystem::path& path) {
        fd_ = ::open(path.string().c_str(), O_RDONLY);
        if (fd_ < 0) {
            throw std::runtime_error("cannot open spill file " + path.string());
        }
        struct stat st{};
        if (::fstat(fd_, &st) != 0) {
            throw std::runtime_error("cannot stat spill file " + path.string());
        }
        size_ = static_cast<std::size_t>(st.st_size);
        if (size_ > 0) {
            ptr_ = ::mmap(nullptr, size_, PROT_READ, MAP_SHARED, fd_, 0);
            if (ptr_ == MAP_FAILED) {
                ptr_ = nullptr;
                throw std::runtime_error("mmap failed for " + path.string());
            }
        }
        std::filesystem::remove(path);
    }

    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;

    ~MappedFile() {
        if (ptr_) {
            ::munmap(ptr_, size_);
        }
        if (fd_ >= 0) {
            ::close(fd_);
        }
    }

    template <typename T>
    std::span<const T> view() const {
        return {static_cast<const T*>(ptr_), size_ / sizeof(T)};
    }

private:
    int fd_ = -1;
    void* ptr_ = nullptr;
    std::size_t size_ = 0;
};

class SpillFile {
public:
    explicit SpillFile(const std::filesystem::path& path)
        : path_(path), file_(std::fopen(path.string().c_str(), "wb")) {
        if (!file_) {
            throw std::runtime_error("cannot create spill file " + path.string());
        }
    }

    SpillFile(const SpillFile&) = delete;
    SpillFile& operator=(const SpillFile&) = delete;

    ~SpillFile() {
        if (file_) {
            std::fclose(file_);
            std::filesystem::remove(path_);
        }
    }

    void write(const void* data, std::size_t bytes) {
        if (bytes > 0 && std::fwrite(data, 1, bytes, file_) != bytes) {
            throw std::runtime_error("spill write failed for " + path_.string());
        }
    }

    // Closes the write handle and hands the file over to a read-only map.
    void seal(MappedFile& map) {
        if (std::fclose(file_) != 0) {
            file_ = nullptr;
            throw std::runtime_error("spill flush failed for " + path_.string());
        }
        file_ = nullptr;
        map.map_and_unlink(path_);
    }

private:
    std::filesystem::path path_;
    std::FILE* file_;
};

} // namespace detail

// Column store for the extracted pixel stream: (a*, b*) features, source
// colors and grid positions. Lives in RAM up to a byte budget, then spills
// to memory-mapped files so containers larger than RAM still stream.
class FeatureStore {
public:
    struct ImageInfo {
        std::string id;
        std::uint64_t start = 0;
        std::uint64_t count = 0;
        std::uint32_t width = 0;
        std::uint32_t height = 0;
    };

    static constexpr std::uint64_t kBytesPerPixel =
        sizeof(AbPoint) + sizeof(RgbColor) + sizeof(PixelPos);

    explicit FeatureStore(std::uint64_t memory_budget_bytes = 1ull << 30,
                          std::filesystem::path spill_dir = std::filesystem::temp_directory_path())
        : budget_(memory_budget_bytes), spill_dir_(std::move(spill_dir)) {}

    void add_raster(const Raster& raster, const std::string& image_id) {
        if (finalized_) {
            throw std::logic_error("feature store already finalized");
        }
        const std::uint32_t image_index = static_cast<std::uint32_t>(images_.size());
        images_.push_back(ImageInfo{image_id, size_, raster.pixel_count(), raster.width,
                                    raster.height});
        if (!spill_ && (size_ + raster.pixel_count()) * kBytesPerPixel > budget_) {
            start_spill();
        }
        for_each_pixel(raster, [&](std::uint32_t x, std::uint32_t y, RgbColor rgb, AbPoint f) {
            if (spill_) {
                spill_->features.write(&f, sizeof f);
                spill_->rgb.write(&rgb, sizeof rgb);
                const PixelPos pos{x, y, image_index};
                spill_->positions.write(&pos, sizeof pos);
            } else {
                features_.push_back(f);
                rgb_.push_back(rgb);
                positions_.push_back(PixelPos{x, y, image_index});
            }
        });
        size_ += raster.pixel_count();
    }

    void finalize() {
        if (finalized_) {
            return;
        }
        if (spill_) {
            spill_->features.seal(feature_map_);
            spill_->rgb.seal(rgb_map_);
            spill_->positions.seal(position_map_);
            spill_.reset();
        }
        finalized_ = true;
    }

    std::uint64_t size() const { return size_; }
    bool spilled() const { return spilled_; }
    const std::vector<ImageInfo>& images() const { return images_; }

    std::span<const AbPoint> features() const {
        require_finalized();
        return spilled_ ? feature_map_.view<AbPoint>() : std::span<const AbPoint>(features_);
    }
    std::span<const RgbColor> rgb() const {
        require_finalized();
        return spilled_ ? rgb_map_.view<RgbColor>() : std::span<const RgbColor>(rgb_);
    }
    std::span<const PixelPos> positions() const {
        require_finalized();
        return spilled_ ? position_map_.view<PixelPos>() : std::span<const PixelPos>(positions_);
    }

private:
    struct Spill {
        detail::SpillFile features;
        detail::SpillFile rgb;
        detail::SpillFile positions;

        Spill(const std::filesystem::path& f, const std::filesystem::path& r,
              const std::filesystem::path& p)
            : features(f), rgb(r), positions(p) {}
    };

    void require_finalized() const {
        if (!finalized_) {
            throw std::logic_error("feature store not finalized");
        }
    }

    void start_spill() {
        const std::string stem =
            "mkmeans_" + std::to_string(::getpid()) + "_" + std::to_string(++spill_counter());
        spill_ = std::make_unique<Spill>(spill_dir_ / (stem + ".feat"),
                                         spill_dir_ / (stem + ".rgb"),
                                         spill_dir_ / (stem + ".pos"));
        spill_->features.write(features_.data(), features_.size() * sizeof(AbPoint));
        spill_->rgb.write(rgb_.data(), rgb_.size() * sizeof(RgbColor));
        spill_->positions.write(positions_.data(), positions_.size() * sizeof(PixelPos));
        features_ = {};
        rgb_ = {};
        positions_ = {};
        spilled_ = true;
    }

    static std::uint64_t& spill_counter() {
        static std::uint64_t counter = 0;
        return counter;
    }

    std::uint64_t budget_;
    std::filesystem::path spill_dir_;
    std::vector<AbPoint> features_;
    std::vector<RgbColor> rgb_;
    std::vector<PixelPos> positions_;
    std::vector<ImageInfo> images_;
    std::unique_ptr<Spill> spill_;
    detail::MappedFile feature_map_;
    detail::MappedFile rgb_map_;
    detail::MappedFile position_map_;
    std::uint64_t size_ = 0;
    bool finalized_ = false;
    bool spilled_ = false;
};

} // namespace mkmeans
