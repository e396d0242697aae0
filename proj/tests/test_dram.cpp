#include <lignn/dram.hpp>
#include <lignn/rng.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <vector>

using namespace lignn;

namespace {

DramConfig two_bank_config() {
    DramConfig c;
    c.standard = "toy";
    c.channels = 1;
    c.banks_per_channel = 2;
    c.rows_per_bank = 16;
    c.columns_per_row = 8;
    c.column_size_bits = 64;
    c.burst_length = 2;
    return c;
}

AddressVector at(std::uint64_t bank, std::uint64_t row, std::uint64_t column = 0) {
    AddressVector v;
    v.bank = bank;
    v.row = row;
    v.column = column;
    return v;
}

std::vector<BurstRequest> random_stream(const DramPreset& p, std::uint64_t seed, std::size_t n,
                                        std::uint64_t span_bytes) {
    const auto bpb = p.config.bytes_per_burst();
    std::vector<BurstRequest> out;
    for (std::size_t i = 0; i < n; ++i) {
        BurstRequest b;
        b.address = counter_hash(seed, 1, i) % (span_bytes / bpb) * bpb;
        b.vector = p.mapping.decompose(b.address);
        out.push_back(b);
    }
    return out;
}

}  // namespace

TEST(Decompose, ZeroAddress) {
    const auto p = preset("HBM");
    const auto v = p.mapping.decompose(0);
    EXPECT_EQ(v.channel, 0u);
    EXPECT_EQ(v.bank, 0u);
    EXPECT_EQ(v.row, 0u);
    EXPECT_EQ(v.column, 0u);
    EXPECT_EQ(v.burst_offset, 0u);
}

TEST(Decompose, KilobyteFeaturesShareRowsInGroupsOfEight) {
    const auto p = preset("HBM");
    for (std::uint64_t v = 0; v < 16; ++v) {
        for (std::uint64_t u = 0; u < 16; ++u) {
            const bool same = p.mapping.row_key(p.mapping.decompose(1024 * v)) ==
                              p.mapping.row_key(p.mapping.decompose(1024 * u));
            EXPECT_EQ(same, (v >> 3) == (u >> 3)) << v << " vs " << u;
        }
    }
}

TEST(Decompose, RoundTrip) {
    for (const auto& name : supported_standards()) {
        const auto p = preset(name);
        for (std::uint64_t i = 0; i < 10000; ++i) {
            const Address a = counter_hash(17, 0, i) & p.mapping.capacity_mask();
            EXPECT_EQ(p.mapping.recompose(p.mapping.decompose(a)), a) << name;
        }
    }
}

TEST(Decompose, FieldOrderParsing) {
    const auto order = parse_field_order("burst,channel,column,bank,row");
    EXPECT_EQ(order, std::vector<Field>(default_field_order.begin(), default_field_order.end()));
    const auto cfg = preset("HBM").config;
    EXPECT_THROW(AddressMapping(cfg, parse_field_order("burst,channel,column,row")), ConfigError);
    EXPECT_THROW(AddressMapping(cfg, parse_field_order("burst,channel,column,bank,bank")), ConfigError);
    EXPECT_THROW(parse_field_order("burst,chan,column,bank,row"), ConfigError);
}

TEST(Service, SameRowIsOneSession) {
    DramModel m(two_bank_config(), AddressMapping(two_bank_config(), default_field_order));
    EXPECT_TRUE(m.serve(at(0, 3, 0)));
    EXPECT_FALSE(m.serve(at(0, 3, 1)));
    const auto c = m.counters();
    EXPECT_EQ(c.row_activations, 1u);
    EXPECT_EQ(c.session_sizes, (std::map<std::uint64_t, std::uint64_t>{{2, 1}}));
}

TEST(Service, DifferentRowsAreTwoSessions) {
    DramModel m(two_bank_config(), AddressMapping(two_bank_config(), default_field_order));
    m.serve(at(0, 3));
    m.serve(at(0, 4));
    const auto c = m.counters();
    EXPECT_EQ(c.row_activations, 2u);
    EXPECT_EQ(c.session_sizes, (std::map<std::uint64_t, std::uint64_t>{{1, 2}}));
}

TEST(Service, SixBurstHandTrace) {
    // tRCD = tRP = tCL = 14, burst = 1. Open rows after each step:
    //  1 b0:r0  idle     14+14+1     = 29  {b0:r0}
    //  2 b0:r0  hit      14+1        = 15  {b0:r0 x2}
    //  3 b1:r5  idle     29                {b1:r5}
    //  4 b0:r1  conflict 14+14+14+1  = 43  closes b0 session of 2
    //  5 b1:r5  hit      15                {b1:r5 x2}
    //  6 b0:r0  conflict 43                closes b0 session of 1
    // End: b0 open with 1, b1 open with 2 -> sessions {1:2, 2:2}.
    DramModel m(two_bank_config(), AddressMapping(two_bank_config(), default_field_order));
    const std::vector<AddressVector> trace{at(0, 0), at(0, 0, 1), at(1, 5), at(0, 1), at(1, 5, 2), at(0, 0)};
    const std::vector<bool> opened{true, false, true, true, false, true};
    for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_EQ(m.serve(trace[i]), opened[i]) << i;
    const auto c = m.counters();
    EXPECT_EQ(c.bursts_served, 6u);
    EXPECT_EQ(c.row_activations, 4u);
    EXPECT_EQ(c.cycles, 174u);
    EXPECT_EQ(c.session_sizes, (std::map<std::uint64_t, std::uint64_t>{{1, 2}, {2, 2}}));
}

TEST(Service, ChannelsRunInParallel) {
    auto cfg = two_bank_config();
    cfg.channels = 2;
    DramModel m(cfg, AddressMapping(cfg, default_field_order));
    auto a = at(0, 0);
    auto b = at(0, 0);
    b.channel = 1;
    m.serve(a);
    m.serve(b);
    const auto c = m.counters();
    EXPECT_EQ(c.channel_cycles, (std::vector<std::uint64_t>{29, 29}));
    EXPECT_EQ(c.cycles, 29u);
}

TEST(Service, ExtentViolation) {
    DramModel m(two_bank_config(), AddressMapping(two_bank_config(), default_field_order));
    EXPECT_THROW(m.serve(at(2, 0)), ConfigError);
    EXPECT_THROW(m.serve(at(0, 16)), ConfigError);
    EXPECT_THROW(m.serve(at(0, 0, 4)), ConfigError);
}

TEST(Preset, BurstAndRowSizes) {
    EXPECT_EQ(preset("HBM").config.bytes_per_burst(), 32u);
    EXPECT_EQ(preset("DDR4").config.bytes_per_burst(), 64u);
    EXPECT_EQ(preset("GDDR5").config.row_bytes(), 4096u);
    const auto hbm = preset("HBM").config;
    EXPECT_EQ(hbm.columns_per_row, 128u);
    EXPECT_EQ(hbm.column_size_bits, 128u);
    EXPECT_EQ(hbm.burst_length, 2u);
    EXPECT_EQ(hbm.timing.burst_cycles, 1u);
    EXPECT_EQ(preset("DDR4").config.timing.burst_cycles, 4u);
}

TEST(Preset, UnknownNameListsSupported) {
    try {
        preset("SDRAM");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("HBM"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("GDDR5"), std::string::npos);
    }
}

TEST(ServiceProperties, ActivationsBoundedByBursts) {
    const auto p = preset("DDR4");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto s = random_stream(p, seed, 2000, 1u << 20);
        const auto c = service(s, p.config, p.mapping);
        EXPECT_LE(c.row_activations, c.bursts_served);
        std::uint64_t total = 0, sessions = 0;
        for (auto [size, n] : c.session_sizes) {
            total += size * n;
            sessions += n;
        }
        EXPECT_EQ(total, c.bursts_served);
        EXPECT_EQ(sessions, c.row_activations);
        EXPECT_EQ(c.row_activations == c.bursts_served, c.session_sizes.size() == 1 && c.sessions_of_size(1) > 0);
    }
}

TEST(ServiceProperties, PerChannelSplitKeepsActivations) {
    const auto p = preset("HBM");
    const auto s = random_stream(p, 4, 5000, 1u << 22);
    const auto whole = service(s, p.config, p.mapping);
    std::uint64_t split = 0;
    for (std::uint64_t ch = 0; ch < p.config.channels; ++ch) {
        std::vector<BurstRequest> part;
        std::copy_if(s.begin(), s.end(), std::back_inserter(part),
                     [&](const BurstRequest& b) { return b.vector.channel == ch; });
        split += service(part, p.config, p.mapping).row_activations;
    }
    EXPECT_EQ(split, whole.row_activations);
}

TEST(ServiceProperties, GroupingSameRowNeverAddsActivations) {
    const auto p = preset("GDDR5");
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto s = random_stream(p, seed, 3000, 1u << 21);
        const auto before = service(s, p.config, p.mapping).row_activations;
        std::stable_sort(s.begin(), s.end(), [&](const BurstRequest& a, const BurstRequest& b) {
            return p.mapping.row_key(a.address) < p.mapping.row_key(b.address);
        });
        EXPECT_LE(service(s, p.config, p.mapping).row_activations, before);
    }
}

TEST(ServiceProperties, CyclesMonotoneUnderAppend) {
    const auto p = preset("HBM");
    const auto s = random_stream(p, 9, 1000, 1u << 20);
    DramModel m(p.config, p.mapping);
    std::uint64_t prev = 0;
    for (const auto& b : s) {
        m.serve(b);
        const auto now = m.counters().cycles;
        EXPECT_GE(now, prev);
        prev = now;
    }
}
