// lignn_sim: run droprate sweeps, compare reports, draw charts, emit fixtures.

#include <lignn/lignn.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::vector<std::string> variants;
    std::vector<std::string> alphas;
    std::vector<std::string> standards;
    std::optional<std::size_t> jobs;
};

void add_overrides(CLI::App* app, Overrides& o) {
    app->add_option("--seed", o.seed, "RNG seed for dropout draws");
    app->add_option("--variant", o.variants, "variant(s): LG-A LG-B LG-R LG-S LG-T");
    app->add_option("--alpha", o.alphas, "droprate(s), list or start:stop:step");
    app->add_option("--standard", o.standards, "DRAM standard(s)");
    app->add_option("--jobs", o.jobs, "worker threads");
}

lignn::ExperimentConfig resolve(const std::string& config, const Overrides& o) {
    auto cfg = config.empty() ? lignn::ExperimentConfig{} : lignn::load_config_file(config);
    if (o.seed) cfg.workload.seed = *o.seed;
    if (!o.variants.empty()) cfg.variants = o.variants;
    if (!o.alphas.empty()) {
        cfg.alphas.clear();
        for (const auto& a : o.alphas) {
            for (double x : lignn::parse_alphas(a)) cfg.alphas.push_back(x);
        }
    }
    if (!o.standards.empty()) cfg.standards = o.standards;
    if (o.jobs) cfg.jobs = *o.jobs;
    cfg.validate();
    return cfg;
}

void print_summary(const lignn::ExperimentReport& rep) {
    fmt::print("graph: |V|={} |E|={}\n", rep.graph.num_vertices, rep.graph.num_edges);
    fmt::print("{:<6} {:<7} {:>5} {:>12} {:>12} {:>12} {:>8}\n", "var", "std", "alpha", "cycles", "bursts",
               "activations", "speedup");
    auto line = [&](const lignn::CellResult& c) {
        const auto& b = rep.baseline(c.standard);
        fmt::print("{:<6} {:<7} {:>5.2f} {:>12} {:>12} {:>12} {:>8.3f}\n", c.variant == "baseline" ? "base" : c.variant,
                   c.standard, c.alpha, c.dram.cycles, c.actual_bursts, c.dram.row_activations,
                   lignn::ratio(b.dram.cycles, c.dram.cycles));
    };
    for (const auto& b : rep.baselines) line(b);
    for (const auto& c : rep.cells) line(c);
}

void write_svg(const fs::path& p, auto&& writer) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw lignn::ConfigError("cannot write " + p.string());
    writer(os);
    std::cout << p.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LiGNN locality-aware dropout and merge DRAM-trace simulator"};
    app.require_subcommand(1);

    std::string config;
    std::string out_dir = "results";
    Overrides ov;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "run a sweep and write cells.csv, sessions.csv, model.csv, manifest.ini");
    run->add_option("--config", config, "experiment INI (a manifest.ini reruns a previous report)")
        ->check(CLI::ExistingFile);
    run->add_option("--out-dir", out_dir, "report directory");
    run->add_flag("--quiet", quiet, "do not print the summary table");
    add_overrides(run, ov);

    std::string cmp_a, cmp_b, cmp_out;
    std::optional<std::string> var_a, var_b;
    auto* cmp = app.add_subcommand("compare", "ratio table of two cells.csv files (a over b)");
    cmp->add_option("a", cmp_a, "cells.csv of the reference")->required()->check(CLI::ExistingFile);
    cmp->add_option("b", cmp_b, "cells.csv of the candidate")->required()->check(CLI::ExistingFile);
    cmp->add_option("--variant-a", var_a, "pin the reference variant");
    cmp->add_option("--variant-b", var_b, "pin the candidate variant");
    cmp->add_option("--out", cmp_out, "write the table here instead of stdout");

    std::string plot_dir;
    auto* plt = app.add_subcommand("plot", "SVG charts from a report directory");
    plt->add_option("report", plot_dir, "directory holding cells.csv and sessions.csv")
        ->required()
        ->check(CLI::ExistingDirectory);

    std::string fx_standard = "HBM", fx_out;
    std::uint32_t fx_count = 1024;
    auto* fx = app.add_subcommand("fixture", "row class of vertices 0..count-1");
    fx->add_option("--config", config, "experiment INI for layout and DRAM overrides")->check(CLI::ExistingFile);
    fx->add_option("--standard", fx_standard, "DRAM standard");
    fx->add_option("--count", fx_count, "number of vertices");
    fx->add_option("--out", fx_out, "output file (default stdout)");

    std::string dump_variant = "LG-T", dump_standard = "HBM";
    double dump_alpha = 0.5;
    auto* dump = app.add_subcommand("dump", "burst trace, drop mask and emission log of one cell");
    dump->add_option("--config", config, "experiment INI")->check(CLI::ExistingFile);
    dump->add_option("--out-dir", out_dir, "output directory");
    dump->add_option("--variant", dump_variant, "variant");
    dump->add_option("--alpha", dump_alpha, "droprate")->check(CLI::Range(0.0, 1.0));
    dump->add_option("--standard", dump_standard, "DRAM standard");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = resolve(config, ov);
            const auto g = lignn::load_graph(cfg.graph);
            const auto rep = lignn::run_experiment(cfg, g);
            for (const auto& f : lignn::write_report(rep, out_dir).files) std::cout << f.string() << '\n';
            if (cfg.dump_trace || cfg.dump_mask || cfg.dump_emissions) {
                for (const auto& s : cfg.standards) {
                    for (const auto& v : cfg.variants) {
                        for (double a : cfg.alphas) {
                            const auto files = lignn::dump_cell(cfg, g, v, a, s, fs::path(out_dir) / "cells", cfg.dump_trace,
                                                                cfg.dump_mask, cfg.dump_emissions);
                            for (const auto& f : files.files) std::cout << f.string() << '\n';
                        }
                    }
                }
            }
            if (!quiet) print_summary(rep);
        } else if (*cmp) {
            const auto a = lignn::cell_rows(lignn::read_csv_file(cmp_a));
            const auto b = lignn::cell_rows(lignn::read_csv_file(cmp_b));
            const auto rows = lignn::compare(a, b, var_a, var_b);
            if (cmp_out.empty()) {
                lignn::write_comparison_csv(std::cout, rows);
            } else {
                std::ofstream os(cmp_out, std::ios::binary);
                lignn::write_comparison_csv(os, rows);
            }
        } else if (*plt) {
            const fs::path dir = plot_dir;
            const auto rows = lignn::cell_rows(lignn::read_csv_file(dir / "cells.csv"));
            const auto sessions = lignn::read_csv_file(dir / "sessions.csv");
            std::vector<std::string> standards;
            for (const auto& r : rows) {
                if (std::find(standards.begin(), standards.end(), r.standard) == standards.end()) {
                    standards.push_back(r.standard);
                }
            }
            using lignn::plot::Metric;
            for (const auto& s : standards) {
                for (auto [m, name] : {std::pair{Metric::cycles, "cycles"}, std::pair{Metric::actual, "access"},
                                       std::pair{Metric::activations, "activations"}}) {
                    write_svg(dir / fmt::format("{}_{}.svg", name, s), [&](std::ostream& os) {
                        lignn::plot::write_line_chart(os, lignn::plot::sweep_chart(rows, s, m));
                    });
                }
                write_svg(dir / fmt::format("breakdown_{}.svg", s), [&](std::ostream& os) {
                    lignn::plot::write_bar_chart(os, "Access breakdown (" + s + ")", {"hit", "new", "merge"},
                                                 lignn::plot::breakdown_bars(rows, s));
                });
                write_svg(dir / fmt::format("sessions_{}.svg", s), [&](std::ostream& os) {
                    lignn::plot::write_bar_chart(os, "Baseline session sizes (" + s + ")", {"sessions"},
                                                 lignn::plot::session_histogram(sessions, "baseline", s, 0.0));
                });
            }
        } else if (*fx) {
            const auto cfg = config.empty() ? lignn::ExperimentConfig{} : lignn::load_config_file(config);
            const auto dram = cfg.dram_for(fx_standard);
            if (fx_out.empty()) {
                lignn::write_row_class_fixture(std::cout, dram, cfg.workload.layout, fx_count);
            } else {
                std::ofstream os(fx_out, std::ios::binary);
                lignn::write_row_class_fixture(os, dram, cfg.workload.layout, fx_count);
            }
        } else if (*dump) {
            const auto cfg = config.empty() ? lignn::ExperimentConfig{} : lignn::load_config_file(config);
            const auto g = lignn::load_graph(cfg.graph);
            for (const auto& f : lignn::dump_cell(cfg, g, dump_variant, dump_alpha, dump_standard, out_dir).files) {
                std::cout << f.string() << '\n';
            }
        }
    } catch (const lignn::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
