#include <lignn/access.hpp>
#include <lignn/filter.hpp>
#include <lignn/graph.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>
#include <vector>

using namespace lignn;

namespace {

BurstRequest on_channel(std::uint64_t channel, std::uint64_t seq = 0) {
    BurstRequest b;
    b.vector.channel = channel;
    b.tag.seq = seq;
    return b;
}

void fill(LocalityGroupTable& t, Address key, std::size_t n, std::uint64_t channel = 0) {
    for (std::size_t i = 0; i < n; ++i) t.push(key, on_channel(channel, key * 100 + i));
}

std::vector<FeatureReadRequest> uniform_trace(std::uint64_t edges, std::uint64_t seed) {
    const auto g = synth_graph({SynthKind::uniform, 1u << 14, edges, 0, 0, 0, seed});
    return gen_trace(g, FeatureLayout{});
}

LocalityFilterConfig row_config(double alpha, LgtDims dims, TriggerPolicy trig, std::size_t n) {
    LocalityFilterConfig c;
    c.burst_filter = false;
    c.use_lgt = true;
    c.row_dropout = true;
    c.alpha = alpha;
    c.trigger = trig;
    c.trigger_parameter = n;
    c.dims = dims;
    c.seed = 7;
    return c;
}

}  // namespace

TEST(BurstFilter, ElementMaskKeptFraction) {
    BurstFilter f{0.5, 8, FilterMode::element_mask, 0.5, 7};
    std::uint64_t kept = 0, total = 0;
    for (std::uint64_t seq = 0; seq < 3125; ++seq) {
        for (std::uint32_t s = 0; s < 32; ++s) {
            ++total;
            if (!f.decide({seq, 0, 0, s}).drop) ++kept;
        }
    }
    const double expected = 1.0 - std::pow(0.5, 8);  // 0.99609375
    EXPECT_NEAR(static_cast<double>(kept) / static_cast<double>(total), expected, 0.01 * expected);
}

TEST(BurstFilter, BurstModeDropsAtAlpha) {
    BurstFilter f{0.3, 8, FilterMode::burst, 0.5, 1};
    std::uint64_t dropped = 0;
    for (std::uint64_t i = 0; i < 100000; ++i) dropped += f.decide({i, 0, 0, 0}).drop;
    EXPECT_NEAR(static_cast<double>(dropped) / 1e5, 0.3, 0.01);
}

TEST(BurstFilter, KeptElementsAreCounted) {
    BurstFilter f{0.5, 8, FilterMode::effective_ratio, 0.5, 3};
    for (std::uint64_t i = 0; i < 1000; ++i) {
        const auto d = f.decide({i, 0, 0, 1});
        if (d.drop) {
            EXPECT_EQ(d.kept_elements, 0u);
        } else {
            EXPECT_GE(d.kept_elements, 4u);
        }
    }
    EXPECT_THROW((BurstFilter{1.5, 8, FilterMode::burst, 0.5, 0}.validate()), ConfigError);
}

TEST(LocalityFilter, IdentityAtZeroDroprate) {
    const auto p = preset("HBM");
    LocalityFilterConfig c;
    c.filter = BurstFilter{0.0, 8, FilterMode::element_mask, 0.5, 7};
    c.use_lgt = false;
    LocalityFilter f(c, p.config, p.mapping);
    CollectingSink sink;
    const auto trace = uniform_trace(200, 1);
    std::vector<BurstRequest> expect;
    for (const auto& r : trace) {
        auto bs = bursts_for_request(r, p.mapping, p.config);
        for (auto& b : bs) b.kept_elements = 8;
        expect.insert(expect.end(), bs.begin(), bs.end());
        f.push(r, sink);
    }
    f.finish(sink);
    EXPECT_EQ(sink.kept_bursts(), expect);
    EXPECT_TRUE(sink.dropped_bursts.empty());
}

TEST(LocalityFilter, SameRowFeaturesShareEntries) {
    // Features 0 and 1 lie in the same 8 KB row class; each spans the four
    // channels, so the table holds four rows with both features' bursts in order.
    const auto p = preset("HBM");
    auto c = row_config(0.5, {16, 32}, TriggerPolicy::every_n_features, 100);
    LocalityFilter f(c, p.config, p.mapping);
    CollectingSink sink;
    const FeatureLayout l;
    f.push({0, 9, 0, feature_range(0, l)}, sink);
    f.push({1, 9, 1, feature_range(1, l)}, sink);
    ASSERT_EQ(f.table().size(), 4u);
    for (const auto& e : f.table().entries()) {
        ASSERT_EQ(e.queue.size(), 16u);
        for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(e.queue[i].tag.seq, i < 8 ? 0u : 1u);
        for (std::size_t i = 1; i < 16; ++i) {
            if (i != 8) {
                EXPECT_LT(e.queue[i - 1].address, e.queue[i].address);
            }
        }
    }
}

TEST(OrderingOutput, FreshStateKeepsFirst) {
    LocalityGroupTable t({16, 16});
    fill(t, 1, 1);
    fill(t, 2, 1);
    fill(t, 3, 1);
    RowDropoutState s;
    s.alpha = 0.9;
    const auto out = ordering_output(t, 1, s);
    EXPECT_EQ(out.k, 1u);
    EXPECT_EQ(out.d, 0u);
}

TEST(OrderingOutput, WorkedExample) {
    LocalityGroupTable t({16, 16});
    fill(t, 1, 4);
    fill(t, 2, 1);
    RowDropoutState s;
    s.alpha = 0.5;
    const auto out = ordering_output(t, 100, s);
    EXPECT_EQ(out.k, 4u);
    EXPECT_EQ(out.d, 1u);
    EXPECT_DOUBLE_EQ(s.delta, 1.5);
    EXPECT_TRUE(t.empty());
}

TEST(OrderingOutput, ZeroDroprateDropsNothing) {
    LocalityGroupTable t({16, 16});
    for (Address k = 0; k < 10; ++k) fill(t, k, 1 + k % 4);
    RowDropoutState s;
    s.alpha = 0.0;
    const auto out = ordering_output(t, 1000, s);
    EXPECT_EQ(out.d, 0u);
    EXPECT_EQ(s.delta, 0.0);
}

TEST(OrderingOutput, QueuesMoveWhole) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        LocalityGroupTable t({64, 32});
        std::uint64_t total = 0;
        for (Address k = 0; k < 40; ++k) {
            const auto n = 1 + counter_hash(seed, 2, k) % 20;
            fill(t, k, n);
            total += n;
        }
        RowDropoutState s;
        s.alpha = 0.3 + 0.01 * static_cast<double>(seed);
        s.ties = TieBreaker(seed);
        const auto out = ordering_output(t, 1u << 20, s);
        EXPECT_EQ(out.k + out.d, total);
        std::set<Address> kept_keys, dropped_keys;
        for (const auto& b : out.kept) kept_keys.insert(b.tag.seq / 100);
        for (const auto& b : out.dropped) dropped_keys.insert(b.tag.seq / 100);
        for (auto k : kept_keys) EXPECT_FALSE(dropped_keys.contains(k)) << "queue " << k << " split";
    }
}

TEST(SelectExtreme, Shortest) {
    LocalityGroupTable t({16, 16});
    fill(t, 1, 3);
    fill(t, 2, 3);
    fill(t, 3, 1);
    TieBreaker ties(1);
    EXPECT_EQ(t.entries()[select_extreme(t, Extreme::shortest, ties)].key, 3u);
}

TEST(SelectExtreme, TieFrequency) {
    LocalityGroupTable t({16, 16});
    fill(t, 1, 2);
    fill(t, 2, 2);
    {
        TieBreaker a(5), b(5);
        EXPECT_EQ(select_extreme(t, Extreme::longest, a), select_extreme(t, Extreme::longest, b));
    }
    int first = 0;
    constexpr int trials = 10000;
    for (int seed = 0; seed < trials; ++seed) {
        TieBreaker ties(static_cast<std::uint64_t>(seed));
        first += select_extreme(t, Extreme::longest, ties) == 0;
    }
    EXPECT_NEAR(first / static_cast<double>(trials), 0.5, 0.03);
}

TEST(SelectExtreme, TieFrequencyAmongThree) {
    LocalityGroupTable t({16, 16});
    for (Address k = 0; k < 3; ++k) fill(t, k, 2);
    std::map<std::size_t, int> picks;
    for (int seed = 0; seed < 9000; ++seed) {
        TieBreaker ties(static_cast<std::uint64_t>(seed));
        ++picks[select_extreme(t, Extreme::longest, ties)];
    }
    for (auto [i, n] : picks) EXPECT_NEAR(n / 9000.0, 1.0 / 3, 0.03) << i;
}

TEST(SelectKeep, ChannelBalanceSkipsOverQuotaChannel) {
    LocalityGroupTable t({16, 16});
    fill(t, 1, 5, 0);
    fill(t, 2, 2, 1);
    fill(t, 3, 3, 1);
    RowDropoutState s;
    s.criteria = Criteria::channel_balance;
    s.channels = 2;
    s.note_kept(0, 10);  // channel 0 ahead of its half share
    ASSERT_TRUE(s.over_quota(0));
    EXPECT_EQ(t.entries()[select_keep(t, s)].key, 3u);
    s.criteria = Criteria::longest;
    EXPECT_EQ(t.entries()[select_keep(t, s)].key, 1u);
}

TEST(RowDropout, LongRunConvergence) {
    // 31250 features x 32 bursts = 10^6 bursts.
    const auto p = preset("HBM");
    const auto trace = uniform_trace(31250, 2);
    for (auto [dims, trig, n] : {std::tuple{LgtDims{16, 16}, TriggerPolicy::per_feature, std::size_t{1}},
                                 std::tuple{LgtDims{64, 32}, TriggerPolicy::every_n_features, std::size_t{16}}}) {
        LocalityFilter f(row_config(0.5, dims, trig, n), p.config, p.mapping);
        CollectingSink sink;
        for (const auto& r : trace) f.push(r, sink);
        f.finish(sink);
        const auto& st = f.stats();
        EXPECT_EQ(st.entered, 1000000u);
        EXPECT_EQ(st.kept + st.dropped(), st.entered);
        EXPECT_EQ(st.row_kept + st.row_dropped + st.residual_kept + st.forced_bursts, st.grouped);
        EXPECT_GE(st.row_drop_fraction(), 0.49);
        EXPECT_LE(st.row_drop_fraction(), 0.51);
    }
}

TEST(RowDropout, Deterministic) {
    const auto p = preset("DDR4");
    const auto trace = uniform_trace(3000, 3);
    auto run = [&] {
        LocalityFilter f(row_config(0.4, {64, 32}, TriggerPolicy::every_n_features, 16), p.config, p.mapping);
        CollectingSink sink;
        for (const auto& r : trace) f.push(r, sink);
        f.finish(sink);
        return std::tuple{sink.kept_bursts(), sink.dropped_bursts, f.delta_history()};
    };
    EXPECT_EQ(run(), run());
}

TEST(RowDropout, OverflowForcesOutput) {
    const auto p = preset("HBM");
    auto c = row_config(0.5, {2, 4}, TriggerPolicy::every_n_features, 1000);
    c.trigger_guard = false;
    LocalityFilter f(c, p.config, p.mapping);
    CollectingSink sink;
    for (const auto& r : uniform_trace(50, 4)) f.push(r, sink);
    f.finish(sink);
    EXPECT_GT(f.stats().forced_outputs, 0u);
    EXPECT_EQ(f.stats().kept + f.stats().dropped(), f.stats().entered);
}

TEST(Trigger, Policies) {
    Trigger per(TriggerPolicy::per_feature, 1, {16, 16});
    EXPECT_FALSE(per.notify({1, 1, 1, false}));
    EXPECT_TRUE(per.notify({1, 2, 2, true}));
    Trigger every(TriggerPolicy::every_n_features, 3, {16, 16});
    EXPECT_FALSE(every.notify({1, 1, 1, true}));
    EXPECT_FALSE(every.notify({1, 1, 1, true}));
    EXPECT_TRUE(every.notify({1, 1, 1, true}));
    Trigger guard(TriggerPolicy::none, 1, {4, 4});
    EXPECT_FALSE(guard.notify({3, 3, 9, false}));
    EXPECT_TRUE(guard.notify({4, 1, 9, false}));
    EXPECT_TRUE(guard.notify({1, 4, 9, false}));
    EXPECT_THROW(Trigger(TriggerPolicy::every_n_features, 0, {4, 4}), ConfigError);
}

TEST(DropMask, AllTrueAtZeroDroprate) {
    const auto m = emit_mask(100, 32, {});
    EXPECT_EQ(m.size(), 3200u);
    EXPECT_EQ(m.false_count(), 0u);
    std::ostringstream os;
    m.write(os);
    const auto s = os.str();
    ASSERT_EQ(s.size(), 8u + 400u);
    EXPECT_EQ(static_cast<unsigned char>(s[0]), 3200 % 256);
    EXPECT_EQ(static_cast<unsigned char>(s[1]), 3200 / 256);
    for (std::size_t i = 8; i < s.size(); ++i) EXPECT_EQ(static_cast<unsigned char>(s[i]), 0xff);
}

TEST(DropMask, FalseCountMatchesDropped) {
    const auto p = preset("HBM");
    const auto trace = uniform_trace(2000, 6);
    LocalityFilter f(row_config(0.5, {16, 16}, TriggerPolicy::per_feature, 1), p.config, p.mapping);
    CollectingSink sink;
    for (const auto& r : trace) f.push(r, sink);
    f.finish(sink);
    const auto m = emit_mask(trace.size(), 32, sink.dropped_bursts);
    EXPECT_EQ(m.size(), trace.size() * 32);
    EXPECT_EQ(m.false_count(), f.stats().dropped());
    for (const auto& b : sink.kept_bursts()) EXPECT_TRUE(m.kept(b.tag.seq, b.tag.segment));
}

TEST(Names, RoundTrip) {
    for (auto m : {FilterMode::element_mask, FilterMode::effective_ratio, FilterMode::burst}) {
        EXPECT_EQ(parse_filter_mode(to_string(m)), m);
    }
    for (auto c : {Criteria::longest, Criteria::channel_balance, Criteria::any}) EXPECT_EQ(parse_criteria(to_string(c)), c);
    EXPECT_THROW(parse_criteria("shortest"), ConfigError);
}
