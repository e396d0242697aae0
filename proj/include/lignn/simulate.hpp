#pragma once

#include <lignn/access.hpp>
#include <lignn/dram.hpp>
#include <lignn/error.hpp>
#include <lignn/filter.hpp>
#include <lignn/graph.hpp>
#include <lignn/merger.hpp>

#include <array>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lignn {

/// One rung of the LG-{A,B,R,S,T} ladder.
struct VariantConfig {
    std::string name;
    TriggerPolicy trigger = TriggerPolicy::none;
    bool burst_filter = false;
    FilterMode filter_mode = FilterMode::element_mask;
    bool row_filter = false;
    LgtDims lgt{};
    bool merge = false;

    friend bool operator==(const VariantConfig&, const VariantConfig&) = default;
};

inline const std::vector<std::string>& variant_names() {
    static const std::vector<std::string> names{"LG-A", "LG-B", "LG-R", "LG-S", "LG-T"};
    return names;
}

/// Table parameters per variant. "Custom" triggers fire every n features.
inline VariantConfig variant(std::string_view name) {
    if (name == "LG-A") return {"LG-A", TriggerPolicy::none, true, FilterMode::element_mask, false, {}, false};
    if (name == "LG-B") return {"LG-B", TriggerPolicy::none, true, FilterMode::burst, false, {}, false};
    if (name == "LG-R") return {"LG-R", TriggerPolicy::per_feature, false, FilterMode::burst, true, {16, 16}, false};
    if (name == "LG-S") return {"LG-S", TriggerPolicy::every_n_features, false, FilterMode::burst, true, {64, 32}, false};
    if (name == "LG-T") return {"LG-T", TriggerPolicy::every_n_features, false, FilterMode::burst, true, {64, 32}, true};
    throw ConfigError("unknown variant '" + std::string(name) + "' (supported: LG-A, LG-B, LG-R, LG-S, LG-T)");
}

/// Workload and mechanism knobs shared by every cell of an experiment.
struct WorkloadParams {
    FeatureLayout layout;
    std::size_t cache_capacity = 4096;  // "Capacity", whole features; 0 disables the cache
    std::size_t access = 8;             // "Access": issue units interleaved at the memory port
    std::size_t custom_trigger_n = 16;  // features per firing for custom triggers
    bool burst_filter_with_row = false; // apply B in LG-R/S/T as well
    double theta = 0.5;
    Criteria criteria = Criteria::longest;
    std::uint64_t channel_slack = 0;
    std::uint64_t channel_window = 0;
    std::uint64_t batch = 0;
    std::optional<LgtDims> lgt_override;
    RecTableConfig rec{1024, 32, EvictionPolicy::longest};  // max_depth is "Range"
    std::uint64_t seed = 7;
};

/// Round-robin issue window: up to `window` units are in flight and the memory
/// port takes one burst from each in turn. A window of 1 is plain stream order.
class Issuer {
public:
    using Serve = std::function<void(const BurstRequest&)>;

    Issuer(std::size_t window, Serve serve) : window_(window == 0 ? 1 : window), serve_(std::move(serve)) {}

    void submit(std::span<const BurstRequest> unit) {
        if (unit.empty()) return;
        if (window_ == 1) {
            for (const auto& b : unit) serve_(b);
            return;
        }
        while (active_.size() >= window_) step();
        active_.push_back({std::vector<BurstRequest>(unit.begin(), unit.end()), 0});
    }

    void drain() {
        while (!active_.empty()) step();
    }

private:
    struct Unit {
        std::vector<BurstRequest> bursts;
        std::size_t next;
    };

    void step() {
        if (cursor_ >= active_.size()) cursor_ = 0;
        auto& u = active_[cursor_];
        serve_(u.bursts[u.next++]);
        if (u.next == u.bursts.size()) {
            active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(cursor_));
        } else {
            ++cursor_;
        }
    }

    std::size_t window_;
    Serve serve_;
    std::deque<Unit> active_;
    std::size_t cursor_ = 0;
};

struct CellResult {
    std::string variant;
    std::string standard;
    double alpha = 0;
    std::uint64_t requests = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t desired_bytes = 0;
    std::uint64_t actual_bursts = 0;
    std::uint64_t actual_bytes = 0;
    DramCounters dram;
    AccessBreakdown breakdown;
    FilterStats filter;
    std::uint64_t merge_emissions = 0;
    double final_delta = 0;
};

struct CellHooks {
    std::function<void(const TraceRecord&)> trace;
    std::function<void(const BurstRequest&, DropReason)> dropped;
};

/// Full memory path for one (variant, alpha, standard) cell:
/// trace -> LRU cache -> [REC merger] -> burst expansion, B, LGT -> issue window -> DRAM.
/// alpha = 0 disables the dropout machinery, leaving the merger (LG-T) as the only active mechanism.
inline CellResult run_cell(std::span<const FeatureReadRequest> trace, const VariantConfig& v, double alpha,
                           const DramPreset& dram, const WorkloadParams& w, const CellHooks& hooks = {}) {
    w.layout.validate(dram.config);
    const auto& cfg = dram.config;
    const std::uint32_t elements = static_cast<std::uint32_t>(cfg.bytes_per_burst() / w.layout.element_size);
    const std::uint64_t bursts_per_feature = w.layout.feature_bytes() / cfg.bytes_per_burst();

    LocalityFilterConfig fc;
    fc.filter = BurstFilter{alpha, elements, v.filter_mode, w.theta, w.seed};
    fc.seed = w.seed;
    fc.criteria = w.criteria;
    fc.channel_slack = w.channel_slack;
    fc.channel_window = w.channel_window;
    fc.batch = w.batch;
    const bool dropout = alpha > 0.0;
    fc.use_lgt = dropout && v.trigger != TriggerPolicy::none;
    fc.burst_filter = dropout && (v.row_filter ? w.burst_filter_with_row : v.burst_filter);
    fc.row_dropout = dropout && v.row_filter;
    fc.alpha = alpha;
    fc.trigger = v.trigger;
    fc.trigger_parameter = v.trigger == TriggerPolicy::every_n_features ? w.custom_trigger_n : 1;
    fc.dims = w.lgt_override.value_or(v.lgt);
    if (fc.row_dropout && alpha >= 1.0) {
        // Row dropout is defined on (0, 1); at 1 every burst goes.
        fc.use_lgt = false;
        fc.row_dropout = false;
        fc.burst_filter = true;
        fc.filter.mode = FilterMode::burst;
    }

    CellResult res;
    res.variant = v.name;
    res.standard = cfg.standard;
    res.alpha = alpha;
    res.requests = trace.size();

    DramModel model(cfg, dram.mapping);
    Issuer issuer(w.access, [&](const BurstRequest& b) {
        const bool opened = model.serve(b);
        auto cls = opened ? AccessClass::new_session : AccessClass::merge;
        ++(opened ? res.breakdown.new_session : res.breakdown.merge);
        if (hooks.trace) hooks.trace({b.tag.seq, b.tag.dst, b.tag.src, b.address, cls});
    });

    struct Sink {
        Issuer& issuer;
        const CellHooks& hooks;
        void kept(std::span<const BurstRequest> batch) { issuer.submit(batch); }
        void dropped(const BurstRequest& b, DropReason why) {
            if (hooks.dropped) hooks.dropped(b, why);
        }
    } sink{issuer, hooks};

    LocalityFilter filter(fc, cfg, dram.mapping);
    auto to_filter = [&](const FeatureReadRequest& r) { filter.push(r, sink); };

    std::optional<Merger> merger;
    if (v.merge) merger.emplace(RecHasher(w.layout, dram.mapping), w.rec);

    LruCache cache(w.cache_capacity);
    for (const auto& r : trace) {
        if (cache.access(r.src)) {
            ++res.cache_hits;
            res.breakdown.hit += bursts_per_feature;
            if (hooks.trace) hooks.trace({r.seq, r.dst, r.src, r.range.start, AccessClass::hit});
            continue;
        }
        if (merger) {
            merger->push(r, to_filter);
        } else {
            to_filter(r);
        }
    }
    if (merger) {
        merger->flush(to_filter);
        res.merge_emissions = merger->emissions().size();
    }
    filter.finish(sink);
    issuer.drain();

    res.dram = model.counters();
    res.filter = filter.stats();
    res.final_delta = filter.state().delta;
    res.actual_bursts = res.dram.bursts_served;
    res.actual_bytes = res.actual_bursts * cfg.bytes_per_burst();
    res.desired_bytes = res.filter.kept_elements * w.layout.element_size;
    return res;
}

}  // namespace lignn
