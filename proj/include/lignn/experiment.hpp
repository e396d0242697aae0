#pragma once

#include <lignn/access.hpp>
#include <lignn/analytic.hpp>
#include <lignn/dram.hpp>
#include <lignn/error.hpp>
#include <lignn/filter.hpp>
#include <lignn/graph.hpp>
#include <lignn/merger.hpp>
#include <lignn/simulate.hpp>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace lignn {

namespace detail {

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) {
        auto b = cur.find_first_not_of(" \t");
        auto e = cur.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, e - b + 1));
    }
    return out;
}

inline std::string join(const std::vector<std::string>& v, std::string_view sep = ",") {
    std::string out;
    for (const auto& s : v) {
        if (!out.empty()) out += sep;
        out += s;
    }
    return out;
}

inline double snap(double x) { return std::round(x * 1e9) / 1e9; }

}  // namespace detail

/// "a,b,c" or "start:stop:step" (inclusive), e.g. "0:1:0.1" for the eleven-point sweep.
inline std::vector<double> parse_alphas(const std::string& spec) {
    std::vector<double> out;
    if (spec.find(':') != std::string::npos) {
        auto parts = detail::split_list(spec, ':');
        if (parts.size() != 3) throw ConfigError("droprate range must be start:stop:step");
        const double lo = std::stod(parts[0]), hi = std::stod(parts[1]), step = std::stod(parts[2]);
        if (step <= 0 || hi < lo) throw ConfigError("droprate range must ascend with a positive step");
        const auto n = static_cast<std::int64_t>(std::floor((hi - lo) / step + 1e-9));
        for (std::int64_t i = 0; i <= n; ++i) out.push_back(detail::snap(lo + static_cast<double>(i) * step));
    } else {
        for (const auto& s : detail::split_list(spec)) out.push_back(detail::snap(std::stod(s)));
    }
    for (double a : out) {
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("droprate " + std::to_string(a) + " outside [0, 1]");
    }
    return out;
}

struct DramOverrides {
    std::optional<std::uint32_t> channels, banks, rows, tRCD, tRP, tCL, burst_cycles;
    std::optional<std::string> mapping;
};

inline DramPreset apply_overrides(DramPreset p, const DramOverrides& o) {
    auto& c = p.config;
    if (o.channels) c.channels = *o.channels;
    if (o.banks) c.banks_per_channel = *o.banks;
    if (o.rows) c.rows_per_bank = *o.rows;
    if (o.tRCD) c.timing.tRCD = *o.tRCD;
    if (o.tRP) c.timing.tRP = *o.tRP;
    if (o.tCL) c.timing.tCL = *o.tCL;
    if (o.burst_cycles) c.timing.burst_cycles = *o.burst_cycles;
    const auto order = o.mapping ? parse_field_order(*o.mapping) : parse_field_order(p.mapping.describe());
    p.mapping = AddressMapping(c, order);
    return p;
}

struct GraphSource {
    std::string kind = "rmat";  // rmat | uniform | file
    SynthParams synth{};
    std::string path;
    EdgeFormat format = EdgeFormat::text;
    std::optional<std::uint64_t> vertices;
};

struct ExperimentConfig {
    GraphSource graph;
    WorkloadParams workload;
    std::vector<std::string> variants = variant_names();
    std::vector<double> alphas = parse_alphas("0:1:0.1");
    std::vector<std::string> standards{"HBM"};
    DramOverrides dram;
    std::map<std::string, DramOverrides> dram_per_standard;
    std::size_t jobs = 1;
    bool dump_trace = false;
    bool dump_mask = false;
    bool dump_emissions = false;

    DramPreset dram_for(const std::string& standard) const {
        auto p = apply_overrides(preset(standard), dram);
        if (auto it = dram_per_standard.find(standard); it != dram_per_standard.end()) {
            p = apply_overrides(p, it->second);
        }
        return p;
    }

    void validate() const {
        for (const auto& v : variants) variant(v);
        for (const auto& s : standards) dram_for(s).config.validate();
        if (variants.empty() || alphas.empty() || standards.empty()) {
            throw ConfigError("experiment needs at least one variant, droprate and standard");
        }
        if (graph.kind == "file" && graph.path.empty()) throw ConfigError("graph source 'file' needs a path");
        if (graph.kind != "file" && graph.kind != "rmat" && graph.kind != "uniform") {
            throw ConfigError("unknown graph source '" + graph.kind + "'");
        }
    }
};

namespace detail {

using boost::property_tree::ptree;

// Present keys must parse; get<T> throws ptree_bad_data where get_optional would hide it.
template <typename T>
void read(const ptree& pt, const std::string& key, T& out) {
    if (pt.get_child_optional(key)) out = pt.get<T>(key);
}

template <typename T>
void read(const ptree& pt, const std::string& key, std::optional<T>& out) {
    if (pt.get_child_optional(key)) out = pt.get<T>(key);
}

inline LgtDims parse_dims(const std::string& s) {
    const auto x = s.find('x');
    if (x == std::string::npos) throw ConfigError("LGT size must be written ENTRIESxDEPTH");
    return {std::stoul(s.substr(0, x)), std::stoul(s.substr(x + 1))};
}

inline DramOverrides read_dram(const ptree& pt) {
    DramOverrides o;
    read(pt, "channels", o.channels);
    read(pt, "banks", o.banks);
    read(pt, "rows", o.rows);
    read(pt, "tRCD", o.tRCD);
    read(pt, "tRP", o.tRP);
    read(pt, "tCL", o.tCL);
    read(pt, "burst_cycles", o.burst_cycles);
    read(pt, "mapping", o.mapping);
    return o;
}

inline void write_dram(std::ostream& os, const std::string& section, const DramOverrides& o) {
    os << '[' << section << "]\n";
    auto put = [&](const char* k, const auto& v) {
        if (v) os << k << " = " << *v << '\n';
    };
    put("channels", o.channels);
    put("banks", o.banks);
    put("rows", o.rows);
    put("tRCD", o.tRCD);
    put("tRP", o.tRP);
    put("tCL", o.tCL);
    put("burst_cycles", o.burst_cycles);
    put("mapping", o.mapping);
    os << '\n';
}

}  // namespace detail

/// Reads an INI-style experiment description. Unknown sections are ignored;
/// missing keys keep their defaults. Sections: [experiment] [graph] [layout]
/// [cache] [issue] [filter] [merger] [dram] [dram.<STANDARD>] [output].
inline ExperimentConfig load_config(std::istream& is) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    using detail::read;
    try {
        if (auto s = pt.get_child_optional("experiment")) {
            if (auto v = s->get_optional<std::string>("variants")) c.variants = detail::split_list(*v);
            if (auto v = s->get_optional<std::string>("alphas")) c.alphas = parse_alphas(*v);
            if (auto v = s->get_optional<std::string>("standards")) c.standards = detail::split_list(*v);
            read(*s, "seed", c.workload.seed);
            read(*s, "jobs", c.jobs);
        }
        if (auto s = pt.get_child_optional("graph")) {
            read(*s, "source", c.graph.kind);
            read(*s, "vertices", c.graph.synth.num_vertices);
            read(*s, "edges", c.graph.synth.num_edges);
            read(*s, "a", c.graph.synth.a);
            read(*s, "b", c.graph.synth.b);
            read(*s, "c", c.graph.synth.c);
            read(*s, "seed", c.graph.synth.seed);
            read(*s, "path", c.graph.path);
            if (auto v = s->get_optional<std::string>("format")) {
                if (*v != "text" && *v != "binary") throw ConfigError("graph format must be text or binary");
                c.graph.format = *v == "text" ? EdgeFormat::text : EdgeFormat::binary;
            }
            if (c.graph.kind == "file") read(*s, "vertices", c.graph.vertices);
            c.graph.synth.kind = c.graph.kind == "uniform" ? SynthKind::uniform : SynthKind::rmat;
        }
        if (auto s = pt.get_child_optional("layout")) {
            read(*s, "base", c.workload.layout.base);
            read(*s, "alignment_kb", c.workload.layout.alignment_kb);
            read(*s, "feature_length", c.workload.layout.feature_length);
            read(*s, "element_size", c.workload.layout.element_size);
        }
        if (auto s = pt.get_child_optional("cache")) read(*s, "capacity", c.workload.cache_capacity);
        if (auto s = pt.get_child_optional("issue")) read(*s, "access", c.workload.access);
        if (auto s = pt.get_child_optional("filter")) {
            read(*s, "custom_trigger_n", c.workload.custom_trigger_n);
            read(*s, "burst_filter_with_row", c.workload.burst_filter_with_row);
            read(*s, "theta", c.workload.theta);
            if (auto v = s->get_optional<std::string>("criteria")) c.workload.criteria = parse_criteria(*v);
            read(*s, "channel_slack", c.workload.channel_slack);
            read(*s, "channel_window", c.workload.channel_window);
            read(*s, "batch", c.workload.batch);
            if (auto v = s->get_optional<std::string>("lgt_size")) c.workload.lgt_override = detail::parse_dims(*v);
        }
        if (auto s = pt.get_child_optional("merger")) {
            read(*s, "entries", c.workload.rec.max_entries);
            read(*s, "range", c.workload.rec.max_depth);
            if (auto v = s->get_optional<std::string>("policy")) c.workload.rec.policy = parse_eviction_policy(*v);
        }
        if (auto s = pt.get_child_optional("dram")) c.dram = detail::read_dram(*s);
        for (const auto& [name, sub] : pt) {
            if (name.starts_with("dram.")) c.dram_per_standard[name.substr(5)] = detail::read_dram(sub);
        }
        if (auto s = pt.get_child_optional("output")) {
            read(*s, "trace", c.dump_trace);
            read(*s, "mask", c.dump_mask);
            read(*s, "emissions", c.dump_emissions);
        }
    } catch (const boost::property_tree::ptree_bad_data& e) {
        throw ConfigError(std::string("config: bad value: ") + e.what());
    } catch (const std::invalid_argument&) {
        throw ConfigError("config: malformed number");
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    return load_config(is);
}

/// Writes a fully resolved config; loading it back reproduces the experiment.
inline void write_config(std::ostream& os, const ExperimentConfig& c) {
    const auto& w = c.workload;
    std::vector<std::string> alphas;
    for (double a : c.alphas) alphas.push_back(fmt::format("{}", a));
    os << "[experiment]\n"
       << "variants = " << detail::join(c.variants) << '\n'
       << "alphas = " << detail::join(alphas) << '\n'
       << "standards = " << detail::join(c.standards) << '\n'
       << "seed = " << w.seed << "\n\n";
    os << "[graph]\nsource = " << c.graph.kind << '\n';
    if (c.graph.kind == "file") {
        os << "path = " << c.graph.path << "\nformat = " << (c.graph.format == EdgeFormat::text ? "text" : "binary")
           << '\n';
        if (c.graph.vertices) os << "vertices = " << *c.graph.vertices << '\n';
    } else {
        os << "vertices = " << c.graph.synth.num_vertices << "\nedges = " << c.graph.synth.num_edges << '\n'
           << fmt::format("a = {}\nb = {}\nc = {}\n", c.graph.synth.a, c.graph.synth.b, c.graph.synth.c)
           << "seed = " << c.graph.synth.seed << '\n';
    }
    os << "\n[layout]\nbase = " << w.layout.base << "\nalignment_kb = " << w.layout.alignment_kb
       << "\nfeature_length = " << w.layout.feature_length << "\nelement_size = " << w.layout.element_size
       << "\n\n[cache]\ncapacity = " << w.cache_capacity << "\n\n[issue]\naccess = " << w.access
       << "\n\n[filter]\ncustom_trigger_n = " << w.custom_trigger_n
       << "\nburst_filter_with_row = " << (w.burst_filter_with_row ? "true" : "false")
       << fmt::format("\ntheta = {}", w.theta) << "\ncriteria = " << to_string(w.criteria)
       << "\nchannel_slack = " << w.channel_slack << "\nchannel_window = " << w.channel_window
       << "\nbatch = " << w.batch << '\n';
    if (w.lgt_override) os << "lgt_size = " << w.lgt_override->entries << 'x' << w.lgt_override->depth << '\n';
    os << "\n[merger]\nentries = " << w.rec.max_entries << "\nrange = " << w.rec.max_depth
       << "\npolicy = " << to_string(w.rec.policy) << "\n\n";
    detail::write_dram(os, "dram", c.dram);
    for (const auto& [name, o] : c.dram_per_standard) detail::write_dram(os, "dram." + name, o);
    os << "[output]\ntrace = " << (c.dump_trace ? "true" : "false") << "\nmask = " << (c.dump_mask ? "true" : "false")
       << "\nemissions = " << (c.dump_emissions ? "true" : "false") << '\n';
}

/// Standalone DRAM description: [dram] standard = NAME plus optional overrides.
inline DramPreset load_dram_config(std::istream& is) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(is, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("dram config: ") + e.what());
    }
    auto s = pt.get_child_optional("dram");
    if (!s) throw ConfigError("dram config needs a [dram] section");
    auto name = s->get_optional<std::string>("standard");
    if (!name) throw ConfigError("dram config needs 'standard'");
    return apply_overrides(preset(*name), detail::read_dram(*s));
}

inline Graph load_graph(const GraphSource& src) {
    if (src.kind != "file") return synth_graph(src.synth);
    std::ifstream is(src.path, src.format == EdgeFormat::binary ? std::ios::binary : std::ios::in);
    if (!is) throw ConfigError("cannot open graph file " + src.path);
    return load_edge_list(is, src.format, src.vertices);
}

struct ExperimentReport {
    ExperimentConfig config;
    GraphStats graph;
    std::vector<CellResult> baselines;  // one per standard
    std::vector<CellResult> cells;      // standards x variants x alphas

    const CellResult& baseline(const std::string& standard) const {
        for (const auto& b : baselines) {
            if (b.standard == standard) return b;
        }
        throw ConfigError("no baseline for standard " + standard);
    }

    const CellResult* find(const std::string& variant, const std::string& standard, double alpha) const {
        for (const auto& c : cells) {
            if (c.variant == variant && c.standard == standard && std::abs(c.alpha - alpha) < 1e-9) return &c;
        }
        return nullptr;
    }
};

namespace detail {

template <typename F>
void parallel_for(std::size_t n, std::size_t jobs, F&& f) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (std::size_t t = 0; t < jobs; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace detail

/// Runs every (standard, variant, alpha) cell plus one non-dropout baseline per
/// standard (alpha = 0, no filter, no merge). Cells are independent; results are
/// assembled in a fixed order so the report does not depend on `jobs`.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg, const Graph& g) {
    cfg.validate();
    ExperimentReport rep;
    rep.config = cfg;
    rep.graph = stats(g);
    const auto trace = gen_trace(g, cfg.workload.layout);

    struct Job {
        std::string variant;
        std::string standard;
        double alpha;
        bool baseline;
    };
    std::vector<Job> jobs;
    for (const auto& s : cfg.standards) jobs.push_back({"LG-A", s, 0.0, true});
    for (const auto& s : cfg.standards) {
        for (const auto& v : cfg.variants) {
            for (double a : cfg.alphas) jobs.push_back({v, s, a, false});
        }
    }
    std::vector<CellResult> results(jobs.size());
    detail::parallel_for(jobs.size(), cfg.jobs, [&](std::size_t i) {
        const auto& j = jobs[i];
        results[i] = run_cell(trace, variant(j.variant), j.alpha, cfg.dram_for(j.standard), cfg.workload);
        if (j.baseline) results[i].variant = "baseline";
    });
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        (jobs[i].baseline ? rep.baselines : rep.cells).push_back(std::move(results[i]));
    }
    return rep;
}

inline double ratio(double num, double den) { return den == 0 ? 0.0 : num / den; }

inline void write_cells_csv(std::ostream& os, const ExperimentReport& rep) {
    os << "variant,standard,alpha,cycles,desired_bytes,actual_bursts,actual_bytes,row_activations,"
          "hit,new,merge,filtered_bursts,row_dropped_bursts,forced_outputs,criteria_misses,"
          "speedup,norm_cycles,norm_desired,norm_actual,norm_activations\n";
    auto row = [&](const CellResult& c) {
        const auto& b = rep.baseline(c.standard);
        os << fmt::format("{},{},{:.2f},{},{},{},{},{},{},{},{},{},{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n",
                          c.variant, c.standard, c.alpha, c.dram.cycles, c.desired_bytes, c.actual_bursts,
                          c.actual_bytes, c.dram.row_activations, c.breakdown.hit, c.breakdown.new_session,
                          c.breakdown.merge, c.filter.filtered, c.filter.row_dropped, c.filter.forced_outputs,
                          c.filter.criteria_misses, ratio(b.dram.cycles, c.dram.cycles),
                          ratio(c.dram.cycles, b.dram.cycles), ratio(c.desired_bytes, b.desired_bytes),
                          ratio(c.actual_bursts, b.actual_bursts), ratio(c.dram.row_activations, b.dram.row_activations));
    };
    for (const auto& b : rep.baselines) row(b);
    for (const auto& c : rep.cells) row(c);
}

inline void write_sessions_csv(std::ostream& os, const ExperimentReport& rep) {
    os << "variant,standard,alpha,session_size,sessions\n";
    auto rows = [&](const CellResult& c) {
        for (const auto& [size, count] : c.dram.session_sizes) {
            os << fmt::format("{},{},{:.2f},{},{}\n", c.variant, c.standard, c.alpha, size, count);
        }
    };
    for (const auto& b : rep.baselines) rows(b);
    for (const auto& c : rep.cells) rows(c);
}

/// Closed-form curves for overlay: normalized actual/desired access of
/// element-wise dropout, the inefficiency ratio and the row-skip bound.
inline void write_model_csv(std::ostream& os, const ExperimentReport& rep) {
    os << "standard,alpha,model_norm_actual,model_norm_desired,inefficiency_ratio,row_inefficiency_ratio,"
          "row_skip_bound\n";
    for (const auto& s : rep.config.standards) {
        const auto cfg = rep.config.dram_for(s).config;
        const auto& layout = rep.config.workload.layout;
        analytic::ModelParams p;
        p.Q = 1;
        p.C = static_cast<double>(layout.feature_bytes()) / (cfg.column_size_bits / 8.0);
        p.N = cfg.columns_per_row;
        p.M = cfg.burst_length;
        p.K = static_cast<double>(cfg.bytes_per_burst() / layout.element_size);
        for (double a : rep.config.alphas) {
            p.alpha = a;
            const auto est = analytic::expected_actual_bursts(p);
            os << fmt::format("{},{:.2f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6e}\n", s, a, est.actual / p.C,
                              est.desired / p.C, analytic::inefficiency_ratio(a, static_cast<std::uint32_t>(p.K)).value,
                              analytic::row_inefficiency_ratio(p).value, analytic::row_skip_probability(p).value);
        }
    }
}

/// Cross-component fixture: row class of every vertex below `count`.
inline void write_row_class_fixture(std::ostream& os, const DramPreset& dram, const FeatureLayout& layout,
                                    std::uint32_t count) {
    const RecHasher h(layout, dram.mapping);
    os << "# standard=" << dram.config.standard << " mapping=" << dram.mapping.describe()
       << " base=" << layout.base << " alignment_kb=" << layout.alignment_kb
       << " feature_length=" << layout.feature_length << " element_size=" << layout.element_size << '\n';
    os << "vertex,row_class\n";
    for (std::uint32_t v = 0; v < count; ++v) os << v << ',' << h.row_hash(v) << '\n';
}

struct WrittenFiles {
    std::vector<std::filesystem::path> files;
};

/// Writes cells.csv, sessions.csv, model.csv, manifest.ini and the row-class fixture.
inline WrittenFiles write_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    WrittenFiles out;
    auto emit = [&](const std::string& name, auto&& writer) {
        const auto path = dir / name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw ConfigError("cannot write " + path.string());
        writer(os);
        out.files.push_back(path);
    };
    emit("cells.csv", [&](std::ostream& os) { write_cells_csv(os, rep); });
    emit("sessions.csv", [&](std::ostream& os) { write_sessions_csv(os, rep); });
    emit("model.csv", [&](std::ostream& os) { write_model_csv(os, rep); });
    emit("manifest.ini", [&](std::ostream& os) {
        os << fmt::format("; graph: |V|={} |E|={} density={:.9g}", rep.graph.num_vertices, rep.graph.num_edges,
                          rep.graph.density);
        if (rep.graph.xi_arith) os << fmt::format(" xi_arith={:.6g}", *rep.graph.xi_arith);
        if (rep.graph.xi_geom) os << fmt::format(" xi_geom={:.6g}", *rep.graph.xi_geom);
        os << '\n';
        write_config(os, rep.config);
    });
    emit("row_classes.csv", [&](std::ostream& os) {
        write_row_class_fixture(os, rep.config.dram_for(rep.config.standards.front()), rep.config.workload.layout,
                                static_cast<std::uint32_t>(std::min<std::uint64_t>(1024, rep.graph.num_vertices)));
    });
    return out;
}

/// Per-cell artifacts: burst trace, drop mask over (edge, segment) and the
/// merger emission log. Only the files whose flag is set are written.
inline WrittenFiles dump_cell(const ExperimentConfig& cfg, const Graph& g, const std::string& variant_name,
                              double alpha, const std::string& standard, const std::filesystem::path& dir,
                              bool trace_csv = true, bool mask = true, bool emissions = true) {
    std::filesystem::create_directories(dir);
    const auto trace = gen_trace(g, cfg.workload.layout);
    const auto dram = cfg.dram_for(standard);
    const auto v = variant(variant_name);
    const auto stem = fmt::format("{}_{}_{:.2f}", v.name, standard, alpha);
    WrittenFiles out;

    std::ofstream trace_os;
    if (trace_csv) {
        out.files.push_back(dir / (stem + "_trace.csv"));
        trace_os.open(out.files.back(), std::ios::binary);
        write_trace_csv_header(trace_os);
    }
    const auto segments = static_cast<std::uint32_t>(cfg.workload.layout.feature_bytes() / dram.config.bytes_per_burst());
    DropMask drop_mask(trace.size(), segments);
    CellHooks hooks;
    if (trace_csv) hooks.trace = [&](const TraceRecord& r) { write_trace_csv_row(trace_os, r); };
    if (mask) hooks.dropped = [&](const BurstRequest& b, DropReason) { drop_mask.mark_dropped(b.tag); };
    run_cell(trace, v, alpha, dram, cfg.workload, hooks);
    if (mask) {
        out.files.push_back(dir / (stem + "_mask.bin"));
        std::ofstream os(out.files.back(), std::ios::binary);
        drop_mask.write(os);
    }
    if (emissions && v.merge) {
        LruCache cache(cfg.workload.cache_capacity);
        const auto misses = cache_filter(trace, cache).misses;
        std::vector<Emission> log;
        merge_stream(misses, RecHasher(cfg.workload.layout, dram.mapping), cfg.workload.rec, &log);
        out.files.push_back(dir / (stem + "_emissions.csv"));
        std::ofstream os(out.files.back(), std::ios::binary);
        write_emission_log(os, log);
    }
    return out;
}

// ---- reading reports back ------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ConfigError("CSV has no column '" + name + "'");
    }
};

inline CsvTable read_csv(std::istream& is) {
    CsvTable t;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (t.header.empty()) {
            t.header = std::move(cells);
        } else {
            if (cells.size() != t.header.size()) throw ParseError("CSV row width differs from header", t.rows.size() + 2);
            t.rows.push_back(std::move(cells));
        }
    }
    return t;
}

inline CsvTable read_csv_file(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw ConfigError("cannot open " + p.string());
    return read_csv(is);
}

/// Metrics of one cells.csv row needed for comparisons and charts.
struct CellRow {
    std::string variant;
    std::string standard;
    double alpha = 0;
    double cycles = 0;
    double actual_bursts = 0;
    double row_activations = 0;
    double hit = 0, new_session = 0, merge = 0;
    double norm_cycles = 0, norm_actual = 0, norm_activations = 0, speedup = 0;
};

inline std::vector<CellRow> cell_rows(const CsvTable& t) {
    std::vector<CellRow> out;
    const auto cv = t.column("variant"), cs = t.column("standard"), ca = t.column("alpha"), cc = t.column("cycles"),
               cb = t.column("actual_bursts"), cr = t.column("row_activations"), ch = t.column("hit"),
               cn = t.column("new"), cm = t.column("merge"), nc = t.column("norm_cycles"), na = t.column("norm_actual"),
               nr = t.column("norm_activations"), sp = t.column("speedup");
    for (const auto& r : t.rows) {
        out.push_back({r[cv], r[cs], std::stod(r[ca]), std::stod(r[cc]), std::stod(r[cb]), std::stod(r[cr]),
                       std::stod(r[ch]), std::stod(r[cn]), std::stod(r[cm]), std::stod(r[nc]), std::stod(r[na]),
                       std::stod(r[nr]), std::stod(r[sp])});
    }
    return out;
}

struct ComparisonRow {
    std::string variant_a, variant_b, standard;
    double alpha = 0;
    double speedup = 1;               // cycles(a) / cycles(b)
    double access_reduction = 0;      // 1 - actual(b) / actual(a)
    double activation_reduction = 0;  // 1 - activations(b) / activations(a)
};

/// Pairs rows of `a` and `b` on (standard, alpha) and, unless variants are
/// pinned, on variant. Every key of one side must exist on the other.
inline std::vector<ComparisonRow> compare(const std::vector<CellRow>& a, const std::vector<CellRow>& b,
                                          const std::optional<std::string>& variant_a = std::nullopt,
                                          const std::optional<std::string>& variant_b = std::nullopt) {
    auto select = [](const std::vector<CellRow>& rows, const std::optional<std::string>& v) {
        std::vector<const CellRow*> out;
        for (const auto& r : rows) {
            if (!v || r.variant == *v) out.push_back(&r);
        }
        return out;
    };
    const auto sa = select(a, variant_a), sb = select(b, variant_b);
    const bool pinned = variant_a.has_value() || variant_b.has_value();
    auto key = [&](const CellRow& r) {
        return (pinned ? std::string() : r.variant) + '|' + r.standard + '|' + fmt::format("{:.2f}", r.alpha);
    };
    std::map<std::string, const CellRow*> index_b;
    for (auto* r : sb) index_b[key(*r)] = r;
    if (sa.size() != sb.size()) throw ConfigError("comparison axes differ: " + std::to_string(sa.size()) + " vs " +
                                                  std::to_string(sb.size()) + " rows");
    std::vector<ComparisonRow> out;
    for (auto* ra : sa) {
        auto it = index_b.find(key(*ra));
        if (it == index_b.end()) throw ConfigError("comparison axes differ at " + key(*ra));
        const auto& rb = *it->second;
        out.push_back({ra->variant, rb.variant, ra->standard, ra->alpha, ratio(ra->cycles, rb.cycles),
                       1.0 - ratio(rb.actual_bursts, ra->actual_bursts),
                       1.0 - ratio(rb.row_activations, ra->row_activations)});
    }
    return out;
}

inline void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
    os << "variant_a,variant_b,standard,alpha,speedup,access_reduction,activation_reduction\n";
    for (const auto& r : rows) {
        os << fmt::format("{},{},{},{:.2f},{:.6f},{:.6f},{:.6f}\n", r.variant_a, r.variant_b, r.standard, r.alpha,
                          r.speedup, r.access_reduction, r.activation_reduction);
    }
}

}  // namespace lignn
