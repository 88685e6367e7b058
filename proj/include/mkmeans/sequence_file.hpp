// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace mkmeans {

// One record of the binary key-value container: the key is the source file
// name, the value the raw (still encoded) image bytes.
struct SequenceEntry {
    std::string key;
    std::vector<std::uint8_t> value;

    friend bool operator==(const SequenceEntry&, const SequenceEntry&) = default;
};

// Container layout, bit-exact:
//   bytes 0-5   magic "MKSQ1\0"
//   bytes 6-13  entry count, u64 little-endian
//   per entry   key length (u32 LE), key bytes, value length (u32 LE), value bytes
// No padding, no checksum.
inline constexpr std::array<std::uint8_t, 6> kSequenceMagic = {'M', 'K', 'S', 'Q', '1', '\0'};
inline constexpr std::size_t kSequenceHeaderSize = 14;

class SequenceParseError : public std::runtime_error {
public:
    enum class Kind { bad_magic, truncated, length_overflow };

    SequenceParseError(Kind kind, std::uint64_t offset, const std::string& what)
        : std::runtime_error(what + " at byte offset " + std::to_string(offset)),
          kind_(kind),
          offset_(offset) {}

    Kind kind() const { return kind_; }
    std::uint64_t offset() const { return offset_; }

private:
    Kind kind_;
    std::uint64_t offset_;
};

namespace detail {

inline void put_u32le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline void put_u64le(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

inline std::uint32_t get_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

inline std::uint64_t get_u64le(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
        v = v << 8 | p[i];
    }
    return v;
}

inline void check_unique_key(std::unordered_set<std::string>& seen, const std::string& key) {
    if (key.empty()) {
        throw std::invalid_argument("sequence entry key must be non-empty");
    }
    if (!seen.insert(key).second) {
        throw std::invalid_argument("duplicate sequence entry key: " + key);
    }
}

} // namespace detail

inline std::vector<std::uint8_t> pack(std::span<const SequenceEntry> entries) {
    std::unordered_set<std::string> seen;
    std::size_t total = kSequenceHeaderSize;
    for (const auto& e : entries) {
        detail::check_unique_key(seen, e.key);
        if (e.key.size() > std::numeric_limits<std::uint32_t>::max() ||
            e.value.size() > std::numeric_limits<std::uint32_t>::max()) {
            throw std::invalid_argument("sequence entry too large for u32 length: " + e.key);
        }
        total += 8 + e.key.size() + e.value.size();
    }

    std::vector<std::uint8_t> out(kSequenceHeaderSize);
    out.reserve(total);
    std::memcpy(out.data(), kSequenceMagic.data(), kSequenceMagic.size());
    const std::uint64_t count = entries.size();
    for (int i = 0; i < 8; ++i) {
        out[kSequenceMagic.size() + i] = static_cast<std::uint8_t>(count >> (8 * i));
    }
    for (const auto& e : entries) {
        detail::put_u32le(out, static_cast<std::uint32_t>(e.key.size()));
        out.insert(out.end(), e.key.begin(), e.key.end());
        detail::put_u32le(out, static_cast<std::uint32_t>(e.value.size()));
        out.insert(out.end(), e.value.begin(), e.value.end());
    }
    return out;
}

inline std::vector<SequenceEntry> unpack(std::span<const std::uint8_t> bytes) {
    using Kind = SequenceParseError::Kind;
    if (bytes.size() < kSequenceMagic.size() ||
        std::memcmp(bytes.data(), kSequenceMagic.data(), kSequenceMagic.size()) != 0) {
        throw SequenceParseError(Kind::bad_magic, 0, "not a sequence container (bad magic)");
    }
    if (bytes.size() < kSequenceHeaderSize) {
        throw SequenceParseError(Kind::truncated, bytes.size(), "truncated container header");
    }

    const std::uint64_t count = detail::get_u64le(bytes.data() + kSequenceMagic.size());
    std::vector<SequenceEntry> entries;
    std::uint64_t pos = kSequenceHeaderSize;
    for (std::uint64_t i = 0; i < count; ++i) {
        SequenceEntry entry;
        for (int field = 0; field < 2; ++field) {
            if (bytes.size() - pos < 4) {
                throw SequenceParseError(Kind::truncated, pos, "truncated entry length field");
            }
            const std::uint32_t len = detail::get_u32le(bytes.data() + pos);
            pos += 4;
            if (len > bytes.size() - pos) {
                throw SequenceParseError(Kind::length_overflow, pos - 4,
                                         "entry length " + std::to_string(len) +
                                             " exceeds remaining container bytes");
            }
            if (field == 0) {
                entry.key.assign(reinterpret_cast<const char*>(bytes.data() + pos), len);
            } else {
                entry.value.assign(bytes.data() + pos, bytes.data() + pos + len);
            }
            pos += len;
        }
        entries.push_back(std::move(entry));
    }
    if (pos != bytes.size()) {
        throw SequenceParseError(Kind::truncated, pos, "container continues past final entry");
    }
    return entries;
}

// Streaming writer for containers too large to assemble in memory. The entry
// count is patched into the header on close.
class SequenceWriter {
public:
    explicit SequenceWriter(const std::filesystem::path& path)
        : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
        if (!out_) {
            throw std::runtime_error("cannot open container for writing: " + path.string());
        }
        std::vector<std::uint8_t> header(kSequenceMagic.begin(), kSequenceMagic.end());
        detail::put_u64le(header, 0);
        out_.write(reinterpret_cast<const char*>(header.data()),
                   static_cast<std::streamsize>(header.size()));
    }

    void add(const std::string& key, std::span<const std::uint8_t> value) {
        detail::check_unique_key(seen_, key);
        std::vector<std::uint8_t> lengths;
        detail::put_u32le(lengths, static_cast<std::uint32_t>(key.size()));
        out_.write(reinterpret_cast<const char*>(lengths.data()), 4);
        out_.write(key.data(), static_cast<std::streamsize>(key.size()));
        lengths.clear();
        detail::put_u32le(lengths, static_cast<std::uint32_t>(value.size()));
        out_.write(reinterpret_cast<const char*>(lengths.data()), 4);
        out_.write(reinterpret_cast<const char*>(value.data()),
                   static_cast<std::streamsize>(value.size()));
        ++count_;
    }

    void close() {
        if (!out_.is_open()) {
            return;
        }
        out_.seekp(static_cast<std::streamoff>(kSequenceMagic.size()));
        std::vector<std::uint8_t> count_bytes;
        detail::put_u64le(count_bytes, count_);
        out_.write(reinterpret_cast<const char*>(count_bytes.data()), 8);
        out_.close();
        if (!out_) {
            throw std::runtime_error("failed writing container: " + path_.string());
        }
    }

    std::uint64_t count() const { return count_; }

private:
    std::ofstream out_;
    std::filesystem::path path_;
    std::unordered_set<std::string> seen_;
    std::uint64_t count_ = 0;
};

// Streaming reader; validates lengths against the file size so corrupt
// containers fail with an offset instead of an allocation blowup.
class SequenceReader {
public:
    explicit SequenceReader(const std::filesystem::path& path)
        : in_(path, std::ios::binary), path_(path) {
        using Kind = SequenceParseError::Kind;
        if (!in_) {
            throw std::runtime_error("cannot open container: " + path.string());
        }
        file_size_ = std::filesystem::file_size(path);
        std::array<std::uint8_t, kSequenceHeaderSize> header{};
        if (file_size_ < kSequenceMagic.size() ||
            !in_.read(reinterpret_cast<char*>(header.data()),
                      static_cast<std::streamsize>(std::min<std::uint64_t>(file_size_, header.size())))) {
            throw SequenceParseError(Kind::truncated, 0, "truncated container header");
        }
        if (std::memcmp(header.data(), kSequenceMagic.data(), kSequenceMagic.size()) != 0) {
            throw SequenceParseError(Kind::bad_magic, 0, "not a sequence container (bad magic)");
        }
        if (file_size_ < kSequenceHeaderSize) {
            throw SequenceParseError(Kind::truncated, file_size_, "truncated container header");
        }
        count_ = detail::get_u64le(header.data() + kSequenceMagic.size());
        pos_ = kSequenceHeaderSize;
    }

    std::uint64_t count() const { return count_; }

    // Returns false when all entries have been read.
    bool next(SequenceEntry& entry) {
        using Kind = SequenceParseError::Kind;
        if (read_ == count_) {
            return false;
        }
        entry.key.clear();
        entry.value.clear();
        for (int field = 0; field < 2; ++field) {
            if (file_size_ - pos_ < 4) {
                throw SequenceParseError(Kind::truncated, pos_, "truncated entry length field");
            }
            std::array<std::uint8_t, 4> raw{};
            in_.read(reinterpret_cast<char*>(raw.data()), 4);
            const std::uint32_t len = detail::get_u32le(raw.data());
            pos_ += 4;
            if (len > file_size_ - pos_) {
                throw SequenceParseError(Kind::length_overflow, pos_ - 4,
                                         "entry length " + std::to_string(len) +
                                             " exceeds remaining container bytes");
            }
            if (field == 0) {
                entry.key.resize(len);
                in_.read(entry.key.data(), len);
            } else {
                entry.value.resize(len);
                in_.read(reinterpret_cast<char*>(entry.value.data()), len);
            }
            pos_ += len;
        }
        if (!in_) {
            throw SequenceParseError(Kind::truncated, pos_, "read failure inside entry");
        }
        ++read_;
        return true;
    }

    void rewind() {
        in_.clear();
        in_.seekg(static_cast<std::streamoff>(kSequenceHeaderSize));
        pos_ = kSequenceHeaderSize;
        read_ = 0;
    }

private:
    std::ifstream in_;
    std::filesystem::path path_;
    std::uint64_t file_size_ = 0;
    std::uint64_t count_ = 0;
    std::uint64_t pos_ = 0;
    std::uint64_t read_ = 0;
};

} // namespace mkmeans
