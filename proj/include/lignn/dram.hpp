#pragma once

#include <lignn/error.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lignn {

using Address = std::uint64_t;

struct DramTiming {
    std::uint32_t tRCD = 14;
    std::uint32_t tRP = 14;
    std::uint32_t tCL = 14;
    std::uint32_t burst_cycles = 1;

    friend bool operator==(const DramTiming&, const DramTiming&) = default;
};

/// Geometry and timing of one DRAM standard. A "column" here is one
/// column_size_bits wide word; a burst moves burst_length consecutive columns.
struct DramConfig {
    std::string standard;
    std::uint32_t channels = 1;
    std::uint32_t banks_per_channel = 1;
    std::uint32_t rows_per_bank = 1u << 14;
    std::uint32_t columns_per_row = 128;
    std::uint32_t column_size_bits = 128;
    std::uint32_t burst_length = 2;
    DramTiming timing;
    std::uint32_t clock_mhz = 500;

    std::uint64_t bytes_per_burst() const { return std::uint64_t{column_size_bits} / 8 * burst_length; }
    std::uint64_t row_bytes() const { return std::uint64_t{columns_per_row} * column_size_bits / 8; }
    std::uint64_t bursts_per_row() const { return columns_per_row / burst_length; }
    std::uint64_t capacity_bytes() const {
        return row_bytes() * rows_per_bank * banks_per_channel * channels;
    }

    void validate() const {
        auto pow2 = [](std::uint64_t x) { return x > 0 && std::has_single_bit(x); };
        if (!pow2(channels) || !pow2(banks_per_channel) || !pow2(rows_per_bank)) {
            throw ConfigError(standard + ": channel, bank and row counts must be powers of two");
        }
        if (!pow2(columns_per_row) || !pow2(burst_length) || columns_per_row % burst_length != 0) {
            throw ConfigError(standard + ": columns per row and burst length must be powers of two, "
                                         "with the burst length dividing the row");
        }
        if (column_size_bits % 8 != 0 || !pow2(bytes_per_burst())) {
            throw ConfigError(standard + ": bytes per burst must be a positive power of two");
        }
    }

    friend bool operator==(const DramConfig&, const DramConfig&) = default;
};

enum class Field : std::uint8_t { burst_offset, channel, bank, column, row };

inline constexpr std::array<Field, 5> all_fields{Field::burst_offset, Field::channel, Field::bank,
                                                 Field::column, Field::row};

inline std::string_view to_string(Field f) {
    switch (f) {
        case Field::burst_offset: return "burst";
        case Field::channel: return "channel";
        case Field::bank: return "bank";
        case Field::column: return "column";
        case Field::row: return "row";
    }
    return "?";
}

inline Field parse_field(std::string_view s) {
    for (auto f : all_fields) {
        if (to_string(f) == s) return f;
    }
    throw ConfigError("unknown address field '" + std::string(s) + "'");
}

/// Channel/bank/row/column coordinates of one byte address. `column` counts
/// bursts within the row (extent bursts_per_row), `burst_offset` counts bytes.
struct AddressVector {
    std::uint64_t channel = 0;
    std::uint64_t bank = 0;
    std::uint64_t row = 0;
    std::uint64_t column = 0;
    std::uint64_t burst_offset = 0;

    std::uint64_t get(Field f) const {
        switch (f) {
            case Field::burst_offset: return burst_offset;
            case Field::channel: return channel;
            case Field::bank: return bank;
            case Field::column: return column;
            case Field::row: return row;
        }
        return 0;
    }

    void set(Field f, std::uint64_t v) {
        switch (f) {
            case Field::burst_offset: burst_offset = v; break;
            case Field::channel: channel = v; break;
            case Field::bank: bank = v; break;
            case Field::column: column = v; break;
            case Field::row: row = v; break;
        }
    }

    friend bool operator==(const AddressVector&, const AddressVector&) = default;
};

/// Contiguous bit fields, lowest first. Every address bit below the top of the
/// row field belongs to exactly one field.
class AddressMapping {
public:
    struct Slice {
        Field field;
        unsigned shift;
        unsigned width;
    };

    AddressMapping() = default;

    /// `order` lists the five fields from least to most significant.
    AddressMapping(const DramConfig& cfg, std::span<const Field> order) {
        cfg.validate();
        if (order.size() != all_fields.size()) throw ConfigError("address mapping must name all five fields");
        unsigned shift = 0;
        for (auto f : order) {
            for (const auto& s : slices_) {
                if (s.field == f) throw ConfigError("address field '" + std::string(to_string(f)) + "' repeated");
            }
            const unsigned width = std::countr_zero(extent_of(cfg, f));
            slices_.push_back({f, shift, width});
            shift += width;
        }
        total_bits_ = shift;
        for (const auto& s : slices_) {
            if (s.field == Field::burst_offset || s.field == Field::column) in_row_mask_ |= mask(s);
        }
    }

    static std::uint64_t extent_of(const DramConfig& cfg, Field f) {
        switch (f) {
            case Field::burst_offset: return cfg.bytes_per_burst();
            case Field::channel: return cfg.channels;
            case Field::bank: return cfg.banks_per_channel;
            case Field::column: return cfg.bursts_per_row();
            case Field::row: return cfg.rows_per_bank;
        }
        return 1;
    }

    AddressVector decompose(Address a) const {
        AddressVector v;
        for (const auto& s : slices_) v.set(s.field, (a >> s.shift) & ((std::uint64_t{1} << s.width) - 1));
        return v;
    }

    Address recompose(const AddressVector& v) const {
        Address a = 0;
        for (const auto& s : slices_) a |= v.get(s.field) << s.shift;
        return a;
    }

    /// Identifier of the physical row (channel, bank, row) holding `a`: the
    /// address with its column and burst-offset bits cleared.
    Address row_key(Address a) const { return a & ~in_row_mask_ & capacity_mask(); }

    Address row_key(const AddressVector& v) const {
        auto w = v;
        w.column = 0;
        w.burst_offset = 0;
        return recompose(w);
    }

    const Slice& slice(Field f) const {
        for (const auto& s : slices_) {
            if (s.field == f) return s;
        }
        throw ConfigError("address mapping is empty");
    }

    std::span<const Slice> slices() const { return slices_; }
    unsigned total_bits() const { return total_bits_; }
    std::uint64_t capacity_mask() const {
        return total_bits_ >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << total_bits_) - 1;
    }

    /// Low-to-high field names joined by ',' (the config-file spelling).
    std::string describe() const {
        std::string out;
        for (const auto& s : slices_) {
            if (!out.empty()) out += ',';
            out += to_string(s.field);
        }
        return out;
    }

private:
    static std::uint64_t mask(const Slice& s) { return ((std::uint64_t{1} << s.width) - 1) << s.shift; }

    std::vector<Slice> slices_;
    unsigned total_bits_ = 0;
    std::uint64_t in_row_mask_ = 0;
};

/// Default order: burst offset, channel interleave, column, bank, row.
inline constexpr std::array<Field, 5> default_field_order{Field::burst_offset, Field::channel, Field::column,
                                                          Field::bank, Field::row};

inline std::vector<Field> parse_field_order(std::string_view spec) {
    std::vector<Field> out;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        auto end = spec.find(',', pos);
        if (end == std::string_view::npos) end = spec.size();
        auto tok = spec.substr(pos, end - pos);
        while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
        while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
        out.push_back(parse_field(tok));
        pos = end + 1;
    }
    return out;
}

struct DramPreset {
    DramConfig config;
    AddressMapping mapping;
};

inline const std::vector<std::string>& supported_standards() {
    static const std::vector<std::string> names{"DDR3", "DDR4", "GDDR5", "GDDR6", "LPDDR4", "LPDDR5", "HBM", "HBM2"};
    return names;
}

/// Geometry from the common-standard table; timing uses the uniform default
/// (tRCD = tRP = tCL = 14, burst_cycles = burst_length / 2).
inline DramPreset preset(std::string_view standard) {
    struct Row {
        std::string_view name;
        std::uint32_t clock_mhz, columns_per_row, column_bits, burst, channels, banks;
    };
    static constexpr std::array<Row, 8> table{{
        {"DDR3", 400, 1024, 64, 8, 2, 8},
        {"DDR4", 1600, 1024, 64, 8, 2, 16},
        {"GDDR5", 1750, 1024, 32, 8, 4, 16},
        {"GDDR6", 2500, 1024, 32, 16, 4, 16},
        {"LPDDR4", 1600, 1024, 64, 16, 2, 8},
        {"LPDDR5", 2750, 1024, 64, 16, 2, 16},
        {"HBM", 500, 128, 128, 2, 4, 16},
        {"HBM2", 1000, 64, 128, 2, 8, 16},
    }};
    for (const auto& r : table) {
        if (r.name != standard) continue;
        DramConfig cfg;
        cfg.standard = std::string(r.name);
        cfg.clock_mhz = r.clock_mhz;
        cfg.columns_per_row = r.columns_per_row;
        cfg.column_size_bits = r.column_bits;
        cfg.burst_length = r.burst;
        cfg.channels = r.channels;
        cfg.banks_per_channel = r.banks;
        cfg.timing.burst_cycles = std::max<std::uint32_t>(1, r.burst / 2);
        return {cfg, AddressMapping(cfg, default_field_order)};
    }
    std::string names;
    for (const auto& n : supported_standards()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown DRAM standard '" + std::string(standard) + "' (supported: " + names + ")");
}

/// Originating (edge, destination, source, burst segment) of a burst.
struct BurstTag {
    std::uint64_t seq = 0;
    std::uint32_t dst = 0;
    std::uint32_t src = 0;
    std::uint32_t segment = 0;

    friend bool operator==(const BurstTag&, const BurstTag&) = default;
};

/// One minimal DRAM transaction: a burst-aligned address and its coordinates.
struct BurstRequest {
    Address address = 0;
    AddressVector vector;
    BurstTag tag;
    std::uint32_t kept_elements = 0;  // unmasked elements carried by this burst
    bool droppable = true;

    friend bool operator==(const BurstRequest&, const BurstRequest&) = default;
};

struct DramCounters {
    std::uint64_t bursts_served = 0;
    std::uint64_t row_activations = 0;
    std::map<std::uint64_t, std::uint64_t> session_sizes;  // bursts per session -> sessions
    std::uint64_t cycles = 0;
    std::vector<std::uint64_t> channel_cycles;

    std::uint64_t sessions_of_size(std::uint64_t n) const {
        auto it = session_sizes.find(n);
        return it == session_sizes.end() ? 0 : it->second;
    }

    friend bool operator==(const DramCounters&, const DramCounters&) = default;
};

/// Open-page, in-order DRAM model. Each bank keeps its last row open; commands
/// of one channel are serialized, channels run in parallel.
class DramModel {
public:
    DramModel(DramConfig cfg, AddressMapping mapping) : cfg_(std::move(cfg)), mapping_(std::move(mapping)) {
        cfg_.validate();
        banks_.resize(std::size_t{cfg_.channels} * cfg_.banks_per_channel);
        channel_cycles_.assign(cfg_.channels, 0);
    }

    /// Services one burst; returns true if it opened a new row session.
    bool serve(const AddressVector& v) {
        if (v.channel >= cfg_.channels || v.bank >= cfg_.banks_per_channel || v.row >= cfg_.rows_per_bank ||
            v.column >= cfg_.bursts_per_row() || v.burst_offset >= cfg_.bytes_per_burst()) {
            throw ConfigError("address vector exceeds the configured " + cfg_.standard + " geometry");
        }
        auto& bank = banks_[v.channel * cfg_.banks_per_channel + v.bank];
        const auto& t = cfg_.timing;
        std::uint64_t cost = std::uint64_t{t.tCL} + t.burst_cycles;
        bool opened = false;
        if (!bank.open_row || *bank.open_row != v.row) {
            if (bank.open_row) {
                cost += t.tRP;
                close_session(bank);
            }
            cost += t.tRCD;
            bank.open_row = v.row;
            ++activations_;
            opened = true;
        }
        ++bank.session;
        ++served_;
        channel_cycles_[v.channel] += cost;
        return opened;
    }

    bool serve(const BurstRequest& b) { return serve(b.vector); }

    /// Snapshot; sessions still open are counted as if closed now.
    DramCounters counters() const {
        DramCounters c;
        c.bursts_served = served_;
        c.row_activations = activations_;
        c.session_sizes = sessions_;
        for (const auto& b : banks_) {
            if (b.session > 0) ++c.session_sizes[b.session];
        }
        c.channel_cycles = channel_cycles_;
        c.cycles = channel_cycles_.empty() ? 0 : *std::max_element(channel_cycles_.begin(), channel_cycles_.end());
        return c;
    }

    const DramConfig& config() const { return cfg_; }
    const AddressMapping& mapping() const { return mapping_; }

private:
    struct Bank {
        std::optional<std::uint64_t> open_row;
        std::uint64_t session = 0;
    };

    void close_session(Bank& b) {
        if (b.session > 0) ++sessions_[b.session];
        b.session = 0;
    }

    DramConfig cfg_;
    AddressMapping mapping_;
    std::vector<Bank> banks_;
    std::vector<std::uint64_t> channel_cycles_;
    std::map<std::uint64_t, std::uint64_t> sessions_;
    std::uint64_t served_ = 0;
    std::uint64_t activations_ = 0;
};

inline DramCounters service(std::span<const BurstRequest> stream, const DramConfig& cfg,
                            const AddressMapping& mapping) {
    DramModel model(cfg, mapping);
    for (const auto& b : stream) model.serve(b);
    return model.counters();
}

inline void write_counters_csv_header(std::ostream& os) {
    os << "label,bursts_served,row_activations,cycles\n";
}

inline void write_counters_csv_row(std::ostream& os, std::string_view label, const DramCounters& c) {
    os << label << ',' << c.bursts_served << ',' << c.row_activations << ',' << c.cycles << '\n';
}

}  // namespace lignn
