#pragma once

#include <lignn/access.hpp>
#include <lignn/dram.hpp>
#include <lignn/error.hpp>
#include <lignn/rng.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

namespace lignn {

enum class FilterMode : std::uint8_t {
    element_mask,     // drop the burst iff all K elements are masked
    effective_ratio,  // drop the burst iff its unmasked fraction is below theta
    burst,            // one Bernoulli(alpha) draw per burst segment
};

inline std::string_view to_string(FilterMode m) {
    switch (m) {
        case FilterMode::element_mask: return "element-mask";
        case FilterMode::effective_ratio: return "effective-ratio";
        case FilterMode::burst: return "burst";
    }
    return "?";
}

inline FilterMode parse_filter_mode(std::string_view s) {
    for (auto m : {FilterMode::element_mask, FilterMode::effective_ratio, FilterMode::burst}) {
        if (to_string(m) == s) return m;
    }
    throw ConfigError("unknown burst filter mode '" + std::string(s) + "'");
}

/// Burst filter B. Draws are keyed by (seed, edge seq, element or segment) so a
/// given edge sees the same mask regardless of where it sits in the stream.
struct BurstFilter {
    double alpha = 0.0;
    std::uint32_t elements_per_burst = 8;
    FilterMode mode = FilterMode::element_mask;
    double theta = 0.5;
    std::uint64_t seed = 0;

    struct Decision {
        bool drop = false;
        std::uint32_t kept_elements = 0;
    };

    void validate() const {
        if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("droprate must lie in [0, 1]");
        if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("effective-ratio threshold must lie in [0, 1]");
        if (elements_per_burst == 0) throw ConfigError("a burst holds at least one element");
    }

    Decision decide(const BurstTag& tag) const {
        const std::uint32_t k = elements_per_burst;
        if (mode == FilterMode::burst) {
            const bool drop = counter_bernoulli(alpha, seed ^ burst_salt, tag.seq, tag.segment);
            return {drop, drop ? 0u : k};
        }
        std::uint32_t kept = 0;
        const std::uint64_t first = std::uint64_t{tag.segment} * k;
        for (std::uint32_t e = 0; e < k; ++e) {
            if (!counter_bernoulli(alpha, seed ^ element_salt, tag.seq, first + e)) ++kept;
        }
        const bool drop = mode == FilterMode::element_mask ? kept == 0
                                                           : static_cast<double>(kept) < theta * k;
        return {drop, drop ? 0u : kept};
    }

    static constexpr std::uint64_t element_salt = 0x656c656d656e7473ULL;
    static constexpr std::uint64_t burst_salt = 0x6275727374736567ULL;
};

struct LgtDims {
    std::size_t entries = 16;
    std::size_t depth = 16;

    friend bool operator==(const LgtDims&, const LgtDims&) = default;
};

/// Locality group table: a small content-addressable table keyed by physical
/// row, each entry a FIFO of pending bursts. Entries keep insertion order.
class LocalityGroupTable {
public:
    struct Entry {
        Address key = 0;
        std::uint64_t channel = 0;
        std::uint64_t age = 0;
        std::vector<BurstRequest> queue;
    };

    enum class PushStatus { ok, table_full, queue_full };

    static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

    explicit LocalityGroupTable(LgtDims dims) : dims_(dims) {
        if (dims.entries == 0 || dims.depth == 0) throw ConfigError("LGT dimensions must be positive");
    }

    /// Appends `b` to the queue for `key`; on overflow nothing is inserted.
    PushStatus push(Address key, const BurstRequest& b) {
        auto i = find(key);
        if (i == npos) {
            if (entries_.size() == dims_.entries) return PushStatus::table_full;
            entries_.push_back({key, b.vector.channel, next_age_++, {}});
            entries_.back().queue.reserve(dims_.depth);
            i = entries_.size() - 1;
        } else if (entries_[i].queue.size() == dims_.depth) {
            return PushStatus::queue_full;
        }
        entries_[i].queue.push_back(b);
        ++occupancy_;
        return PushStatus::ok;
    }

    std::size_t find(Address key) const {
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            if (entries_[i].key == key) return i;
        }
        return npos;
    }

    std::size_t queue_size(Address key) const {
        const auto i = find(key);
        return i == npos ? 0 : entries_[i].queue.size();
    }

    /// Removes entry `i` and returns its queue.
    std::vector<BurstRequest> take(std::size_t i) {
        auto q = std::move(entries_[i].queue);
        entries_.erase(entries_.begin() + static_cast<std::ptrdiff_t>(i));
        occupancy_ -= q.size();
        return q;
    }

    std::span<const Entry> entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    std::size_t occupancy() const { return occupancy_; }
    bool empty() const { return entries_.empty(); }
    const LgtDims& dims() const { return dims_; }

private:
    LgtDims dims_;
    std::vector<Entry> entries_;
    std::size_t occupancy_ = 0;
    std::uint64_t next_age_ = 0;
};

enum class TriggerPolicy : std::uint8_t { none, per_feature, every_n_features, occupancy_threshold };

inline std::string_view to_string(TriggerPolicy p) {
    switch (p) {
        case TriggerPolicy::none: return "none";
        case TriggerPolicy::per_feature: return "per-feature";
        case TriggerPolicy::every_n_features: return "every-n-features";
        case TriggerPolicy::occupancy_threshold: return "occupancy-threshold";
    }
    return "?";
}

inline TriggerPolicy parse_trigger_policy(std::string_view s) {
    for (auto p : {TriggerPolicy::none, TriggerPolicy::per_feature, TriggerPolicy::every_n_features,
                   TriggerPolicy::occupancy_threshold}) {
        if (to_string(p) == s) return p;
    }
    throw ConfigError("unknown trigger policy '" + std::string(s) + "'");
}

/// Trigger F. Notified after every burst appended to the LGT.
class Trigger {
public:
    struct Event {
        std::size_t entries = 0;      // T.size
        std::size_t queue_size = 0;   // T[v].size
        std::size_t occupancy = 0;    // bursts queued in T
        bool end_of_request = false;  // last burst of the current feature read
    };

    Trigger() = default;
    Trigger(TriggerPolicy policy, std::size_t parameter, LgtDims dims, bool guard = true)
        : policy_(policy), parameter_(parameter), dims_(dims), guard_(guard) {
        if ((policy == TriggerPolicy::every_n_features || policy == TriggerPolicy::occupancy_threshold) &&
            parameter == 0) {
            throw ConfigError("trigger parameter must be positive");
        }
    }

    TriggerPolicy policy() const { return policy_; }
    std::size_t parameter() const { return parameter_; }

    bool notify(const Event& e) {
        if (e.end_of_request) ++features_;
        // Guard: a full table or queue cannot accept the next burst without overflow.
        if (guard_ && (e.entries >= dims_.entries || e.queue_size >= dims_.depth)) return true;
        switch (policy_) {
            case TriggerPolicy::none: return false;
            case TriggerPolicy::per_feature: return e.end_of_request;
            case TriggerPolicy::every_n_features: return e.end_of_request && features_ % parameter_ == 0;
            case TriggerPolicy::occupancy_threshold: return e.occupancy >= parameter_;
        }
        return false;
    }

private:
    TriggerPolicy policy_ = TriggerPolicy::none;
    std::size_t parameter_ = 1;
    LgtDims dims_;
    bool guard_ = true;
    std::uint64_t features_ = 0;
};

enum class Criteria : std::uint8_t {
    longest,          // unconstrained longest queue
    channel_balance,  // longest queue whose channel is within its kept-burst quota
    any,              // queue size ignored; uniform pick
};

inline std::string_view to_string(Criteria c) {
    switch (c) {
        case Criteria::longest: return "longest";
        case Criteria::channel_balance: return "channel-balance";
        case Criteria::any: return "any";
    }
    return "?";
}

inline Criteria parse_criteria(std::string_view s) {
    for (auto c : {Criteria::longest, Criteria::channel_balance, Criteria::any}) {
        if (to_string(c) == s) return c;
    }
    throw ConfigError("unknown criteria '" + std::string(s) + "'");
}

/// Seeded tie-breaker: uniform choice among equal candidates.
class TieBreaker {
public:
    explicit TieBreaker(std::uint64_t seed = 0) : seed_(seed) {}

    /// Reservoir step: the j-th tied candidate (1-based) replaces the current pick with probability 1/j.
    bool replace(std::uint64_t j) { return counter_uniform(seed_, 0x7469657321ULL, draws_++) * j < 1.0; }

private:
    std::uint64_t seed_;
    std::uint64_t draws_ = 0;
};

/// Persistent state of row-granularity dropout.
struct RowDropoutState {
    double delta = 0.0;
    double alpha = 0.0;
    Criteria criteria = Criteria::longest;
    std::uint32_t channels = 1;
    std::uint64_t channel_slack = 0;   // bursts a channel may run ahead of its fair share
    std::uint64_t channel_window = 0;  // kept bursts per quota window; 0 resets every call
    std::vector<std::uint64_t> channel_kept;
    std::uint64_t window_kept = 0;
    TieBreaker ties;

    bool over_quota(std::uint64_t channel) const {
        if (channel_kept.empty() || channels <= 1) return false;
        return channel_kept[channel] > window_kept / channels + channel_slack;
    }

    void note_kept(std::uint64_t channel, std::uint64_t bursts) {
        if (channel_kept.size() != channels) channel_kept.assign(channels, 0);
        channel_kept[channel] += bursts;
        window_kept += bursts;
    }

    void start_call() {
        if (channel_window == 0 || window_kept >= channel_window) {
            channel_kept.assign(channels, 0);
            window_kept = 0;
        }
    }
};

enum class Extreme { shortest, longest };

/// Index of a minimal/maximal queue among entries accepted by `allowed`
/// (all entries when empty); uniform among ties. Returns npos if none qualifies.
inline std::size_t select_extreme(const LocalityGroupTable& t, Extreme mode, TieBreaker& ties,
                                  const std::function<bool(const LocalityGroupTable::Entry&)>& allowed = {}) {
    std::size_t best = LocalityGroupTable::npos;
    std::size_t best_size = 0;
    std::uint64_t tied = 0;
    const auto entries = t.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (allowed && !allowed(entries[i])) continue;
        const auto sz = entries[i].queue.size();
        const bool better = best == LocalityGroupTable::npos ||
                            (mode == Extreme::longest ? sz > best_size : sz < best_size);
        if (better) {
            best = i;
            best_size = sz;
            tied = 1;
        } else if (sz == best_size && ties.replace(++tied)) {
            best = i;
        }
    }
    return best;
}

/// Index of the queue to keep under criteria C, or npos when C rejects every queue.
inline std::size_t select_keep(const LocalityGroupTable& t, RowDropoutState& s) {
    switch (s.criteria) {
        case Criteria::longest: return select_extreme(t, Extreme::longest, s.ties);
        case Criteria::channel_balance:
            return select_extreme(t, Extreme::longest, s.ties,
                                  [&](const LocalityGroupTable::Entry& e) { return !s.over_quota(e.channel); });
        case Criteria::any: {
            // Equal treatment: every queue ties.
            std::size_t pick = LocalityGroupTable::npos;
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (s.ties.replace(i + 1)) pick = i;
            }
            return pick;
        }
    }
    return LocalityGroupTable::npos;
}

struct OutputBatch {
    std::vector<BurstRequest> kept;
    std::vector<BurstRequest> dropped;
    std::uint64_t k = 0;
    std::uint64_t d = 0;
    std::uint64_t criteria_misses = 0;
};

/// Row-granularity keep/drop decision over the LGT. While the table is non-empty
/// and fewer than n bursts were output: drop the shortest queue if
/// delta + (k+d)*alpha - d > 0, else keep the longest queue satisfying C.
/// Queues move whole. Afterwards delta += (k+d)*alpha - d.
inline OutputBatch ordering_output(LocalityGroupTable& t, std::uint64_t n, RowDropoutState& s) {
    OutputBatch out;
    s.start_call();
    while (!t.empty() && out.k + out.d < n) {
        const double balance = s.delta + static_cast<double>(out.k + out.d) * s.alpha - static_cast<double>(out.d);
        if (balance > 0) {
            auto q = t.take(select_extreme(t, Extreme::shortest, s.ties));
            out.d += q.size();
            out.dropped.insert(out.dropped.end(), q.begin(), q.end());
            continue;
        }
        auto i = select_keep(t, s);
        if (i == LocalityGroupTable::npos) {
            ++out.criteria_misses;
            i = select_extreme(t, Extreme::longest, s.ties);
        }
        const auto channel = t.entries()[i].channel;
        auto q = t.take(i);
        out.k += q.size();
        s.note_kept(channel, q.size());
        out.kept.insert(out.kept.end(), q.begin(), q.end());
    }
    s.delta += static_cast<double>(out.k + out.d) * s.alpha - static_cast<double>(out.d);
    return out;
}

struct LocalityFilterConfig {
    BurstFilter filter;
    bool burst_filter = true;  // apply B
    bool use_lgt = false;      // a trigger exists; otherwise bursts passing B go straight out
    TriggerPolicy trigger = TriggerPolicy::per_feature;
    std::size_t trigger_parameter = 1;
    bool trigger_guard = true;
    LgtDims dims;
    bool row_dropout = false;
    double alpha = 0.0;
    Criteria criteria = Criteria::longest;
    std::uint64_t channel_slack = 0;
    std::uint64_t channel_window = 0;
    std::uint64_t batch = 0;  // n per firing; 0 = drain the whole table
    std::uint64_t seed = 0;
};

struct FilterStats {
    std::uint64_t entered = 0;        // bursts expanded from requests
    std::uint64_t filtered = 0;       // dropped by B
    std::uint64_t grouped = 0;        // appended to the LGT
    std::uint64_t kept = 0;           // emitted as kept (all paths)
    std::uint64_t row_kept = 0;       // kept by ordering_output
    std::uint64_t row_dropped = 0;    // dropped by ordering_output
    std::uint64_t residual_kept = 0;  // drained at end of stream
    std::uint64_t forced_outputs = 0;
    std::uint64_t forced_bursts = 0;
    std::uint64_t criteria_misses = 0;
    std::uint64_t firings = 0;
    std::uint64_t kept_elements = 0;

    std::uint64_t dropped() const { return filtered + row_dropped; }

    /// Dropped share of the bursts that went through row-dropout decisions.
    double row_drop_fraction() const {
        const auto total = row_kept + row_dropped;
        return total == 0 ? 0.0 : static_cast<double>(row_dropped) / static_cast<double>(total);
    }
};

enum class DropReason : std::uint8_t { burst_filter, row_dropout };

/// Burst dropout plus locality grouping. Requests expand to bursts; bursts failing
/// B are discarded; survivors are grouped by physical row in the LGT and released
/// through ordering_output whenever the trigger fires. Without an LGT, survivors
/// are emitted directly, one batch per request.
///
/// A sink provides `kept(std::span<const BurstRequest>)`, called once per output
/// batch in output order, and `dropped(const BurstRequest&, DropReason)`.
class LocalityFilter {
public:
    LocalityFilter(LocalityFilterConfig cfg, const DramConfig& dram, const AddressMapping& mapping)
        : cfg_(std::move(cfg)), dram_(dram), mapping_(mapping), table_(cfg_.dims),
          trigger_(cfg_.trigger, cfg_.trigger_parameter, cfg_.dims, cfg_.trigger_guard) {
        cfg_.filter.validate();
        if (cfg_.row_dropout && !(cfg_.alpha >= 0.0 && cfg_.alpha < 1.0)) {
            throw ConfigError("row dropout needs a droprate in [0, 1)");
        }
        state_.alpha = cfg_.row_dropout ? cfg_.alpha : 0.0;
        state_.criteria = cfg_.criteria;
        state_.channels = dram.channels;
        state_.channel_slack = cfg_.channel_slack;
        state_.channel_window = cfg_.channel_window;
        state_.ties = TieBreaker(cfg_.seed);
        forced_ties_ = TieBreaker(cfg_.seed ^ 0x666f72636564ULL);
    }

    template <typename Sink>
    void push(const FeatureReadRequest& r, Sink& sink) {
        auto bursts = bursts_for_request(r, mapping_, dram_);
        std::vector<BurstRequest> survivors;
        survivors.reserve(bursts.size());
        for (auto& b : bursts) {
            ++stats_.entered;
            b.kept_elements = cfg_.filter.elements_per_burst;
            if (cfg_.burst_filter) {
                const auto dec = cfg_.filter.decide(b.tag);
                if (dec.drop) {
                    ++stats_.filtered;
                    sink.dropped(b, DropReason::burst_filter);
                    continue;
                }
                b.kept_elements = dec.kept_elements;
            }
            survivors.push_back(b);
        }
        if (!cfg_.use_lgt) {
            if (!survivors.empty()) emit_kept(survivors, sink);
            return;
        }
        for (std::size_t i = 0; i < survivors.size(); ++i) group(survivors[i], i + 1 == survivors.size(), sink);
        if (survivors.empty()) {
            // Every burst was filtered; the request still counts as a feature for F.
            Trigger::Event e{table_.size(), 0, table_.occupancy(), true};
            if (trigger_.notify(e)) fire(sink);
        }
    }

    /// Releases residual LGT contents as kept, longest queue first.
    template <typename Sink>
    void finish(Sink& sink) {
        std::vector<BurstRequest> batch;
        while (!table_.empty()) {
            auto q = table_.take(select_extreme(table_, Extreme::longest, forced_ties_));
            stats_.residual_kept += q.size();
            batch.insert(batch.end(), q.begin(), q.end());
        }
        if (!batch.empty()) emit_kept(batch, sink);
    }

    const FilterStats& stats() const { return stats_; }
    const RowDropoutState& state() const { return state_; }
    const LocalityGroupTable& table() const { return table_; }
    const std::vector<double>& delta_history() const { return delta_history_; }

private:
    template <typename Sink>
    void group(const BurstRequest& b, bool last, Sink& sink) {
        const Address key = mapping_.row_key(b.address);
        auto status = table_.push(key, b);
        while (status != LocalityGroupTable::PushStatus::ok) {
            force_output(sink);
            status = table_.push(key, b);
        }
        ++stats_.grouped;
        Trigger::Event e{table_.size(), table_.queue_size(key), table_.occupancy(), last};
        if (trigger_.notify(e)) fire(sink);
    }

    template <typename Sink>
    void fire(Sink& sink) {
        ++stats_.firings;
        const std::uint64_t n = cfg_.batch == 0 ? table_.occupancy() : cfg_.batch;
        auto out = ordering_output(table_, n, state_);
        delta_history_.push_back(state_.delta);
        stats_.criteria_misses += out.criteria_misses;
        stats_.row_kept += out.k;
        stats_.row_dropped += out.d;
        for (const auto& b : out.dropped) sink.dropped(b, DropReason::row_dropout);
        if (!out.kept.empty()) emit_kept(out.kept, sink);
    }

    // Overflow: the longest queue leaves as kept without touching delta.
    template <typename Sink>
    void force_output(Sink& sink) {
        auto q = table_.take(select_extreme(table_, Extreme::longest, forced_ties_));
        ++stats_.forced_outputs;
        stats_.forced_bursts += q.size();
        emit_kept(q, sink);
    }

    template <typename Sink>
    void emit_kept(std::span<const BurstRequest> batch, Sink& sink) {
        stats_.kept += batch.size();
        for (const auto& b : batch) stats_.kept_elements += b.kept_elements;
        sink.kept(batch);
    }

    LocalityFilterConfig cfg_;
    DramConfig dram_;
    AddressMapping mapping_;
    LocalityGroupTable table_;
    Trigger trigger_;
    RowDropoutState state_;
    TieBreaker forced_ties_;
    FilterStats stats_;
    std::vector<double> delta_history_;
};

/// Collects everything a LocalityFilter emits; handy for tests and small runs.
struct CollectingSink {
    std::vector<std::vector<BurstRequest>> batches;
    std::vector<BurstRequest> dropped_bursts;

    void kept(std::span<const BurstRequest> batch) { batches.emplace_back(batch.begin(), batch.end()); }
    void dropped(const BurstRequest& b, DropReason) { dropped_bursts.push_back(b); }

    std::vector<BurstRequest> kept_bursts() const {
        std::vector<BurstRequest> out;
        for (const auto& b : batches) out.insert(out.end(), b.begin(), b.end());
        return out;
    }
};

/// Keep/drop mask: one flag per (edge, burst segment) in trace order, true = kept.
class DropMask {
public:
    DropMask(std::uint64_t edges, std::uint32_t segments_per_edge)
        : segments_(segments_per_edge), bits_(edges * segments_per_edge, true) {}

    void mark_dropped(const BurstTag& tag) {
        auto bit = bits_.at(tag.seq * segments_ + tag.segment);
        if (bit) ++false_count_;
        bit = false;
    }

    std::size_t size() const { return bits_.size(); }
    std::uint64_t false_count() const { return false_count_; }
    bool kept(std::uint64_t seq, std::uint32_t segment) const { return bits_.at(seq * segments_ + segment); }
    const std::vector<bool>& bits() const { return bits_; }

    /// Packed bitstream: u64 little-endian bit count, then bits LSB-first per byte.
    void write(std::ostream& os) const {
        const std::uint64_t n = bits_.size();
        for (int i = 0; i < 8; ++i) os.put(static_cast<char>(n >> (8 * i)));
        unsigned char byte = 0;
        for (std::uint64_t i = 0; i < n; ++i) {
            if (bits_[i]) byte |= static_cast<unsigned char>(1u << (i % 8));
            if (i % 8 == 7) {
                os.put(static_cast<char>(byte));
                byte = 0;
            }
        }
        if (n % 8 != 0) os.put(static_cast<char>(byte));
    }

private:
    std::uint32_t segments_;
    std::vector<bool> bits_;
    std::uint64_t false_count_ = 0;
};

/// Mask over the whole trace: dropped bursts are false, everything else true.
inline DropMask emit_mask(std::uint64_t edges, std::uint32_t segments_per_edge,
                          std::span<const BurstRequest> dropped) {
    DropMask m(edges, segments_per_edge);
    for (const auto& b : dropped) m.mark_dropped(b.tag);
    return m;
}

}  // namespace lignn
