#include <lignn/access.hpp>
#include <lignn/graph.hpp>

#include <gtest/gtest.h>

#include <set>
#include <sstream>
#include <vector>

using namespace lignn;

TEST(FeatureRange, LayoutFormula) {
    FeatureLayout l;
    l.feature_length = 256;
    EXPECT_EQ(feature_range(0, l), (ByteRange{0, 1024}));
    EXPECT_EQ(feature_range(3, l), (ByteRange{3072, 4096}));
    l.base = 8192;
    l.alignment_kb = 8;
    l.feature_length = 64;
    EXPECT_EQ(feature_range(10, l), (ByteRange{10752, 11008}));
}

TEST(FeatureLayout, Validation) {
    const auto hbm = preset("HBM").config;
    FeatureLayout l;
    EXPECT_NO_THROW(l.validate(hbm));
    l.base = 1000;
    EXPECT_THROW(l.validate(hbm), AlignmentError);
    l.base = 0;
    l.feature_length = 3;  // 12 B, not a burst multiple
    EXPECT_THROW(l.validate(hbm), AlignmentError);
}

TEST(BurstsForRange, Counts) {
    const auto hbm = preset("HBM");
    EXPECT_EQ(bursts_for_range({0, 1024}, hbm.mapping, hbm.config).size(), 32u);
    const auto ddr4 = preset("DDR4");
    const auto one = bursts_for_range({64, 128}, ddr4.mapping, ddr4.config);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one[0].address, 64u);
    EXPECT_THROW(bursts_for_range({16, 80}, ddr4.mapping, ddr4.config), AlignmentError);
}

TEST(BurstsForRange, ContiguousPartition) {
    const auto p = preset("GDDR5");
    const ByteRange r{4096 * 3, 4096 * 3 + 2048};
    const auto bursts = bursts_for_range(r, p.mapping, p.config, BurstTag{5, 1, 2, 0});
    Address next = r.start;
    for (std::uint32_t i = 0; i < bursts.size(); ++i) {
        EXPECT_EQ(bursts[i].address, next);
        EXPECT_EQ(p.mapping.recompose(bursts[i].vector), next);
        EXPECT_EQ(bursts[i].tag.segment, i);
        EXPECT_EQ(bursts[i].tag.seq, 5u);
        next += p.config.bytes_per_burst();
    }
    EXPECT_EQ(next, r.end);
}

TEST(GenTrace, DestinationOrder) {
    std::istringstream is("0 1\n1 2\n0 2\n");
    const auto g = load_edge_list(is, EdgeFormat::text, 3);
    const auto t = gen_trace(g, FeatureLayout{});
    ASSERT_EQ(t.size(), 3u);
    EXPECT_EQ(t[0].src, 0u);
    EXPECT_EQ(t[0].dst, 1u);
    EXPECT_EQ(t[1].src, 1u);
    EXPECT_EQ(t[2].src, 0u);
    for (std::uint64_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i].seq, i);
}

TEST(GenTrace, CardinalityAndDesiredBytes) {
    const auto g = synth_graph({SynthKind::uniform, 1000, 5000, 0, 0, 0, 3});
    const FeatureLayout l;
    const auto t = gen_trace(g, l);
    EXPECT_EQ(t.size(), 5000u);
    std::uint64_t bytes = 0;
    for (const auto& r : t) bytes += r.range.size();
    EXPECT_EQ(bytes, 5000u * 256 * 4);
}

TEST(LruCache, CapacityTwo) {
    LruCache c(2);
    EXPECT_FALSE(c.access(10));
    EXPECT_FALSE(c.access(11));
    EXPECT_TRUE(c.access(10));
}

TEST(LruCache, CapacityOne) {
    LruCache c(1);
    EXPECT_FALSE(c.access(10));
    EXPECT_FALSE(c.access(11));
    EXPECT_FALSE(c.access(10));
}

TEST(LruCache, EvictsLeastRecentlyUsed) {
    LruCache c(2);
    c.access(1);
    c.access(2);
    c.access(1);
    c.access(3);  // evicts 2
    EXPECT_TRUE(c.contains(1));
    EXPECT_FALSE(c.contains(2));
    EXPECT_EQ(c.residents(), (std::vector<VertexId>{3, 1}));
}

TEST(LruCache, DisabledAtZero) {
    LruCache c(0);
    EXPECT_FALSE(c.access(1));
    EXPECT_FALSE(c.access(1));
    EXPECT_EQ(c.size(), 0u);
}

TEST(CacheFilter, MissesNeverGrowWithCapacity) {
    const auto g = synth_graph({SynthKind::rmat, 2048, 20000, 0.57, 0.19, 0.19, 4});
    const auto t = gen_trace(g, FeatureLayout{});
    std::size_t prev = t.size() + 1;
    for (std::size_t cap : {0, 1, 4, 16, 64, 256, 1024, 4096}) {
        LruCache c(cap);
        const auto r = cache_filter(t, c);
        EXPECT_LE(r.misses.size(), prev) << cap;
        EXPECT_EQ(r.misses.size() + r.hits, t.size());
        prev = r.misses.size();
    }
}

TEST(CacheFilter, MissStreamKeepsOrderAndFlags) {
    const auto g = synth_graph({SynthKind::uniform, 64, 500, 0, 0, 0, 8});
    const auto t = gen_trace(g, FeatureLayout{});
    LruCache c(16);
    const auto r = cache_filter(t, c);
    std::vector<FeatureReadRequest> expect;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!r.hit[i]) expect.push_back(t[i]);
    }
    EXPECT_EQ(r.misses, expect);
}

TEST(TraceCsv, Row) {
    std::ostringstream os;
    write_trace_csv_header(os);
    write_trace_csv_row(os, {3, 1, 2, 2048, AccessClass::merge});
    EXPECT_EQ(os.str(), "seq,dst,src,address,class\n3,1,2,2048,merge\n");
}
