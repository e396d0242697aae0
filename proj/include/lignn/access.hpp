#pragma once

#include <lignn/dram.hpp>
#include <lignn/error.hpp>
#include <lignn/graph.hpp>

#include <bit>
#include <cstdint>
#include <list>
#include <ostream>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lignn {

/// Row-major feature matrix in DRAM: feature v starts at base + v * feature_bytes().
struct FeatureLayout {
    Address base = 0;
    std::uint32_t alignment_kb = 4;
    std::uint32_t feature_length = 256;
    std::uint32_t element_size = 4;

    std::uint64_t feature_bytes() const { return std::uint64_t{feature_length} * element_size; }

    void validate(const DramConfig& cfg) const {
        if (alignment_kb == 0 || base % (std::uint64_t{alignment_kb} * 1024) != 0) {
            throw AlignmentError("feature base " + std::to_string(base) + " is not aligned to " +
                                 std::to_string(alignment_kb) + " KB");
        }
        if (feature_length == 0 || feature_bytes() % cfg.bytes_per_burst() != 0) {
            throw AlignmentError("feature size " + std::to_string(feature_bytes()) +
                                 " B is not a multiple of the " + std::to_string(cfg.bytes_per_burst()) +
                                 " B burst of " + cfg.standard);
        }
        if (cfg.bytes_per_burst() % element_size != 0) {
            throw AlignmentError("element size does not divide the burst");
        }
    }

    friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

struct ByteRange {
    Address start = 0;
    Address end = 0;

    std::uint64_t size() const { return end - start; }
    friend bool operator==(const ByteRange&, const ByteRange&) = default;
};

inline ByteRange feature_range(VertexId v, const FeatureLayout& layout) {
    const Address start = layout.base + layout.feature_bytes() * v;
    return {start, start + layout.feature_bytes()};
}

/// One neighbor-feature read of the aggregation. `seq` is the edge's position in
/// the original trace and keys every random draw made for it.
struct FeatureReadRequest {
    std::uint64_t seq = 0;
    VertexId dst = 0;
    VertexId src = 0;
    ByteRange range;

    friend bool operator==(const FeatureReadRequest&, const FeatureReadRequest&) = default;
};

/// Splits a burst-aligned range into bursts, ascending address.
inline std::vector<BurstRequest> bursts_for_range(ByteRange range, const AddressMapping& mapping,
                                                  const DramConfig& cfg, BurstTag tag = {}) {
    const auto bpb = cfg.bytes_per_burst();
    if (range.start % bpb != 0 || range.end % bpb != 0 || range.end < range.start) {
        throw AlignmentError("range [" + std::to_string(range.start) + ", " + std::to_string(range.end) +
                             ") is not aligned to " + std::to_string(bpb) + " B bursts");
    }
    std::vector<BurstRequest> out;
    out.reserve(range.size() / bpb);
    std::uint32_t segment = 0;
    for (Address a = range.start; a < range.end; a += bpb) {
        BurstRequest b;
        b.address = a;
        b.vector = mapping.decompose(a);
        b.tag = tag;
        b.tag.segment = segment++;
        out.push_back(b);
    }
    return out;
}

inline std::vector<BurstRequest> bursts_for_request(const FeatureReadRequest& r, const AddressMapping& mapping,
                                                    const DramConfig& cfg) {
    return bursts_for_range(r.range, mapping, cfg, BurstTag{r.seq, r.dst, r.src, 0});
}

/// Naive traversal: destinations ascending, sources in CSR order; one request per edge.
inline std::vector<FeatureReadRequest> gen_trace(const Graph& g, const FeatureLayout& layout) {
    std::vector<FeatureReadRequest> out;
    out.reserve(g.num_edges());
    std::uint64_t seq = 0;
    for (std::uint64_t v = 0; v < g.num_vertices(); ++v) {
        const auto dst = static_cast<VertexId>(v);
        for (auto src : g.neighbors(dst)) out.push_back({seq++, dst, src, feature_range(src, layout)});
    }
    return out;
}

/// Whole-feature LRU cache. Capacity 0 disables it (every access misses).
class LruCache {
public:
    explicit LruCache(std::size_t capacity) : capacity_(capacity) {}

    /// Looks up `v`, inserting it on a miss. Returns true on a hit.
    bool access(VertexId v) {
        if (capacity_ == 0) return false;
        if (auto it = index_.find(v); it != index_.end()) {
            order_.splice(order_.begin(), order_, it->second);
            return true;
        }
        if (order_.size() == capacity_) {
            index_.erase(order_.back());
            order_.pop_back();
        }
        order_.push_front(v);
        index_[v] = order_.begin();
        return false;
    }

    bool contains(VertexId v) const { return index_.contains(v); }
    std::size_t size() const { return order_.size(); }
    std::size_t capacity() const { return capacity_; }

    /// Residents, most recently used first.
    std::vector<VertexId> residents() const { return {order_.begin(), order_.end()}; }

private:
    std::size_t capacity_;
    std::list<VertexId> order_;
    std::unordered_map<VertexId, std::list<VertexId>::iterator> index_;
};

enum class AccessClass : std::uint8_t { hit, new_session, merge };

inline std::string_view to_string(AccessClass c) {
    switch (c) {
        case AccessClass::hit: return "hit";
        case AccessClass::new_session: return "new";
        case AccessClass::merge: return "merge";
    }
    return "?";
}

struct CacheFilterResult {
    std::vector<FeatureReadRequest> misses;
    std::vector<bool> hit;  // per input request
    std::uint64_t hits = 0;
};

inline CacheFilterResult cache_filter(std::span<const FeatureReadRequest> stream, LruCache& cache) {
    CacheFilterResult r;
    r.hit.reserve(stream.size());
    for (const auto& req : stream) {
        const bool h = cache.access(req.src);
        r.hit.push_back(h);
        if (h) {
            ++r.hits;
        } else {
            r.misses.push_back(req);
        }
    }
    return r;
}

/// Burst-equivalent access counts: cache hits (bursts per feature each) plus
/// DRAM bursts that opened or joined a row session.
struct AccessBreakdown {
    std::uint64_t hit = 0;
    std::uint64_t new_session = 0;
    std::uint64_t merge = 0;

    std::uint64_t total() const { return hit + new_session + merge; }
    friend bool operator==(const AccessBreakdown&, const AccessBreakdown&) = default;
};

struct TraceRecord {
    std::uint64_t seq;
    VertexId dst;
    VertexId src;
    Address address;
    AccessClass cls;
};

inline void write_trace_csv_header(std::ostream& os) { os << "seq,dst,src,address,class\n"; }

inline void write_trace_csv_row(std::ostream& os, const TraceRecord& r) {
    os << r.seq << ',' << r.dst << ',' << r.src << ',' << r.address << ',' << to_string(r.cls) << '\n';
}

}  // namespace lignn
