#pragma once

#include <lignn/access.hpp>
#include <lignn/dram.hpp>
#include <lignn/error.hpp>

#include <bit>
#include <cstdint>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace lignn {

/// Row equivalence class hasher: maps a vertex to the physical row holding the
/// start of its feature vector. Two aligned features share a DRAM row iff their
/// start addresses do, so this key groups vertices whose reads can be merged.
class RecHasher {
public:
    RecHasher(const FeatureLayout& layout, const AddressMapping& mapping) : layout_(layout), mapping_(mapping) {
        const auto fb = layout.feature_bytes();
        const auto align = std::uint64_t{layout.alignment_kb} * 1024;
        fast_ = std::has_single_bit(fb) && std::has_single_bit(align) && layout.base % align == 0;
        if (fast_) {
            shift_ = static_cast<unsigned>(std::countr_zero(fb));
            // Row-identifying bits: everything outside the column and burst-offset fields.
            key_mask_ = mapping.row_key(~Address{0});
        }
    }

    /// Bit-operation form when the layout is power-of-two aligned, full
    /// decomposition otherwise.
    Address row_hash(VertexId v) const {
        if (fast_) return (layout_.base + (Address{v} << shift_)) & key_mask_;
        return row_hash_full(v);
    }

    /// Reference path: decompose the start address and rebuild its row key.
    Address row_hash_full(VertexId v) const {
        return mapping_.row_key(mapping_.decompose(feature_range(v, layout_).start));
    }

    bool uses_bit_operations() const { return fast_; }
    const FeatureLayout& layout() const { return layout_; }
    const AddressMapping& mapping() const { return mapping_; }

private:
    FeatureLayout layout_;
    AddressMapping mapping_;
    bool fast_ = false;
    unsigned shift_ = 0;
    Address key_mask_ = 0;
};

enum class EvictionPolicy : std::uint8_t { longest, oldest };

inline std::string_view to_string(EvictionPolicy p) { return p == EvictionPolicy::longest ? "longest" : "oldest"; }

inline EvictionPolicy parse_eviction_policy(std::string_view s) {
    if (s == "longest") return EvictionPolicy::longest;
    if (s == "oldest") return EvictionPolicy::oldest;
    throw ConfigError("unknown eviction policy '" + std::string(s) + "'");
}

struct RecTableConfig {
    std::size_t max_entries = 64;
    std::size_t max_depth = 32;  // emission threshold ("Range")
    EvictionPolicy policy = EvictionPolicy::longest;
};

struct Emission {
    std::uint64_t batch = 0;
    Address row_class = 0;
    std::size_t length = 0;
};

/// REC table: edge FIFOs keyed by row class. Entries keep insertion order.
class RecTable {
public:
    struct Entry {
        Address key = 0;
        std::uint64_t age = 0;
        std::vector<FeatureReadRequest> queue;
    };

    explicit RecTable(RecTableConfig cfg) : cfg_(cfg) {
        if (cfg.max_entries == 0 || cfg.max_depth == 0) throw ConfigError("REC table dimensions must be positive");
    }

    std::size_t find(Address key) const {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].key == key) return i;
        }
        return npos;
    }

    std::size_t open(Address key) {
        entries_.push_back({key, next_age_++, {}});
        return entries_.size() - 1;
    }

    std::vector<FeatureReadRequest> take(std::size_t i) {
        auto q = std::move(entries_[i].queue);
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
        return q;
    }

    Entry& at(std::size_t i) { return entries_[i]; }
    std::span<const Entry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool full() const { return entries_.size() >= cfg_.max_entries; }
    bool empty() const { return entries_.empty(); }
    const RecTableConfig& config() const { return cfg_; }

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

private:
    RecTableConfig cfg_;
    std::vector<Entry> entries_;
    std::uint64_t next_age_ = 0;
};

/// Entry to emit when the table is at capacity: the longest queue (older entry
/// on ties), or the oldest entry.
inline std::size_t eviction_policy(const RecTable& t) {
    const auto entries = t.entries();
    std::size_t pick = RecTable::npos;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (pick == RecTable::npos) {
            pick = i;
            continue;
        }
        const auto& a = entries[i];
        const auto& b = entries[pick];
        const bool better = t.config().policy == EvictionPolicy::longest
                                ? (a.queue.size() > b.queue.size() ||
                                   (a.queue.size() == b.queue.size() && a.age < b.age))
                                : a.age < b.age;
        if (better) pick = i;
    }
    return pick;
}

/// Streaming merger: each edge joins its row-class queue; a queue is emitted
/// whole when it reaches max_depth, when a new class needs room in a full table,
/// or at flush. The output is a permutation of the input.
class Merger {
public:
    Merger(RecHasher hasher, RecTableConfig cfg) : hasher_(std::move(hasher)), table_(cfg) {}

    template <typename Out>
    void push(const FeatureReadRequest& r, Out&& out) {
        const Address key = hasher_.row_hash(r.src);
        auto i = table_.find(key);
        if (i == RecTable::npos) {
            if (table_.full()) emit(eviction_policy(table_), out);
            i = table_.open(key);
        }
        table_.at(i).queue.push_back(r);
        if (table_.at(i).queue.size() >= table_.config().max_depth) emit(i, out);
    }

    /// Emits every remaining queue, oldest entry first.
    template <typename Out>
    void flush(Out&& out) {
        while (!table_.empty()) emit(0, out);
    }

    const std::vector<Emission>& emissions() const { return log_; }
    const RecTable& table() const { return table_; }
    const RecHasher& hasher() const { return hasher_; }

private:
    template <typename Out>
    void emit(std::size_t i, Out& out) {
        const Address key = table_.entries()[i].key;
        auto q = table_.take(i);
        log_.push_back({log_.size(), key, q.size()});
        for (const auto& r : q) out(r);
    }

    RecHasher hasher_;
    RecTable table_;
    std::vector<Emission> log_;
};

inline std::vector<FeatureReadRequest> merge_stream(std::span<const FeatureReadRequest> edges,
                                                    const RecHasher& hasher, RecTableConfig cfg,
                                                    std::vector<Emission>* log = nullptr) {
    Merger m(hasher, cfg);
    std::vector<FeatureReadRequest> out;
    out.reserve(edges.size());
    auto sink = [&](const FeatureReadRequest& r) { out.push_back(r); };
    for (const auto& e : edges) m.push(e, sink);
    m.flush(sink);
    if (log) *log = m.emissions();
    return out;
}

inline void write_emission_log(std::ostream& os, std::span<const Emission> log) {
    os << "batch,class,length\n";
    for (const auto& e : log) os << e.batch << ',' << e.row_class << ',' << e.length << '\n';
}

}  // namespace lignn
