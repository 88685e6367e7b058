// Copyright 2026 The mkmeans Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <map>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace mkmeans::mr {

// Local map/shuffle/reduce over partitioned record sets. The worker count
// emulates cluster size; results are required to be bit-identical for any
// worker count, which the engine guarantees by
//   * fixed chunk boundaries (chosen by the caller, never by scheduling),
//   * collecting mapped records in chunk emission order before reduction,
//   * reducing keys in ascending order with outputs stored per key.

struct EngineConfig {
    std::size_t workers = 1;     // emulated node count
    std::size_t chunk_size = 65536; // records per map task
};

template <typename Key, typename Value>
struct KeyedRecord {
    Key key;
    Value value;
};

class JobError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void validate(const EngineConfig& cfg) {
    if (cfg.workers < 1) {
        throw std::invalid_argument("engine workers must be >= 1");
    }
    if (cfg.chunk_size < 1) {
        throw std::invalid_argument("engine chunk_size must be >= 1");
    }
}

template <typename Key>
std::string key_to_string(const Key& key) {
    std::ostringstream os;
    os << key;
    return os.str();
}

// Runs fn(task_index) for every index in [0, task_count) on at most
// `workers` threads. Exceptions are captured per task and the one with the
// lowest task index is rethrown, so failures are reported deterministically.
template <typename Fn>
void parallel_tasks(std::size_t task_count, std::size_t workers, Fn&& fn) {
    if (task_count == 0) {
        return;
    }
    if (workers <= 1 || task_count == 1) {
        for (std::size_t i = 0; i < task_count; ++i) {
            fn(i);
        }
        return;
    }

    std::vector<std::exception_ptr> errors(task_count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= task_count) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    const std::size_t spawn = std::min(workers, task_count);
    pool.reserve(spawn);
    for (std::size_t i = 0; i < spawn; ++i) {
        pool.emplace_back(worker);
    }
    for (auto& t : pool) {
        t.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace detail

// Splits records into n chunks whose sizes differ by at most one and whose
// concatenation preserves the input order.
template <typename T>
std::vector<std::span<const T>> partition(std::span<const T> records, std::size_t n) {
    if (n < 1) {
        throw std::invalid_argument("partition count must be >= 1");
    }
    std::vector<std::span<const T>> chunks;
    chunks.reserve(n);
    const std::size_t base = records.size() / n;
    const std::size_t extra = records.size() % n;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t len = base + (i < extra ? 1 : 0);
        chunks.push_back(records.subspan(pos, len));
        pos += len;
    }
    return chunks;
}

// Fixed-size chunking; the boundaries depend only on chunk_size, so the same
// grid is produced no matter how many workers later execute it.
template <typename T>
std::vector<std::span<const T>> chunks_of(std::span<const T> records, std::size_t chunk_size) {
    if (chunk_size < 1) {
        throw std::invalid_argument("chunk_size must be >= 1");
    }
    std::vector<std::span<const T>> chunks;
    chunks.reserve(records.size() / chunk_size + 1);
    for (std::size_t pos = 0; pos < records.size(); pos += chunk_size) {
        chunks.push_back(records.subspan(pos, std::min(chunk_size, records.size() - pos)));
    }
    if (chunks.empty()) {
        chunks.push_back(records);
    }
    return chunks;
}

// Parallel map over fixed chunks: fn(chunk_index, chunk) -> Partial. The
// partials come back indexed by chunk, for the caller to fold in chunk
// order. This is the primitive the pipeline phases put their hot loops on.
template <typename Partial, typename T, typename Fn>
std::vector<Partial> map_chunks(const std::vector<std::span<const T>>& chunks,
                                const EngineConfig& cfg, Fn&& fn) {
    detail::validate(cfg);
    std::vector<Partial> partials(chunks.size());
    detail::parallel_tasks(chunks.size(), cfg.workers, [&](std::size_t i) {
        try {
            partials[i] = fn(i, chunks[i]);
        } catch (const std::exception& e) {
            throw JobError("map task failed on chunk " + std::to_string(i) + ": " + e.what());
        }
    });
    return partials;
}

// Full map/shuffle/reduce job.
//   map_fn(record, emit)            emit(Key, Value), any number of times
//   reduce_fn(key, values, emit)    emit(Out), any number of times
// Values reach the reducer in canonical emission order (chunk-major, then
// emission order within the chunk), which equals the order a sequential run
// would produce; keys are reduced in ascending order. Output is therefore
// independent of the worker count.
template <typename Key, typename Value, typename Out, typename In, typename MapFn,
          typename ReduceFn>
std::map<Key, std::vector<Out>> run_job(const std::vector<std::span<const In>>& chunks,
                                        const MapFn& map_fn, const ReduceFn& reduce_fn,
                                        const EngineConfig& cfg) {
    detail::validate(cfg);

    // Map.
    std::vector<std::vector<KeyedRecord<Key, Value>>> mapped(chunks.size());
    detail::parallel_tasks(chunks.size(), cfg.workers, [&](std::size_t i) {
        auto& out = mapped[i];
        auto emit = [&out](Key key, Value value) {
            out.push_back(KeyedRecord<Key, Value>{std::move(key), std::move(value)});
        };
        try {
            for (const In& record : chunks[i]) {
                map_fn(record, emit);
            }
        } catch (const std::exception& e) {
            throw JobError("map task failed on chunk " + std::to_string(i) + ": " + e.what());
        }
    });

    // Shuffle: group by key, preserving chunk-major emission order.
    std::map<Key, std::vector<Value>> groups;
    for (auto& chunk_out : mapped) {
        for (auto& rec : chunk_out) {
            groups[rec.key].push_back(std::move(rec.value));
        }
        chunk_out.clear();
        chunk_out.shrink_to_fit();
    }

    // Reduce, keys ascending. Distinct keys may run concurrently; outputs
    // are stored per key so the final order never depends on scheduling.
    std::vector<typename std::map<Key, std::vector<Value>>::iterator> key_slots;
    key_slots.reserve(groups.size());
    for (auto it = groups.begin(); it != groups.end(); ++it) {
        key_slots.push_back(it);
    }
    std::vector<std::vector<Out>> reduced(key_slots.size());
    detail::parallel_tasks(key_slots.size(), cfg.workers, [&](std::size_t i) {
        const Key& key = key_slots[i]->first;
        auto& out = reduced[i];
        auto emit = [&out](Out value) { out.push_back(std::move(value)); };
        try {
            reduce_fn(key, key_slots[i]->second, emit);
        } catch (const std::exception& e) {
            throw JobError("reduce task failed on key " + detail::key_to_string(key) + ": " +
                           e.what());
        }
    });

    std::map<Key, std::vector<Out>> result;
    for (std::size_t i = 0; i < key_slots.size(); ++i) {
        result.emplace(key_slots[i]->first, std::move(reduced[i]));
    }
    return result;
}

// Convenience overload: chunks the records by cfg.chunk_size first.
template <typename Key, typename Value, typename Out, typename In, typename MapFn,
          typename ReduceFn>
std::map<Key, std::vector<Out>> run_job(std::span<const In> records, const MapFn& map_fn,
                                        const ReduceFn& reduce_fn, const EngineConfig& cfg) {
    detail::validate(cfg);
    return run_job<Key, Value, Out>(chunks_of(records, cfg.chunk_size), map_fn, reduce_fn, cfg);
}

} // namespace mkmeans::mr
