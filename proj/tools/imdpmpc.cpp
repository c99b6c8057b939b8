// Command-line front end: abstract, synthesize, simulate, sweep, export-imdp.
#include "imdpmpc/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace imdpmpc;
namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    int threads = 1;
    std::string controller;
    std::vector<std::string> eps;
    std::string trace;
    bool trajectories = false;
};

BenchmarkConfig load(const Options& o) {
    BenchmarkConfig cfg = load_config(o.config);
    if (!o.out.empty()) cfg.output_dir = o.out;
    if (o.seed) cfg.base_seed = *o.seed;
    if (!o.controller.empty()) cfg.controller = controller_kind_from_string(o.controller);
    return cfg;
}

fs::path out_dir(const BenchmarkConfig& cfg) {
    fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

Vec parse_eps(const std::string& s, int n_u) {
    std::vector<double> vals;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ';')) vals.push_back(std::stod(item));
    if (vals.size() == 1) return Vec::Constant(n_u, vals[0]);
    if (static_cast<int>(vals.size()) != n_u) throw std::runtime_error("--eps '" + s + "': wrong number of entries");
    Vec v(n_u);
    for (int i = 0; i < n_u; ++i) v[i] = vals[static_cast<std::size_t>(i)];
    return v;
}

int cmd_abstract(const Options& o, bool stats_only_export) {
    const BenchmarkConfig cfg = load(o);
    const auto b = build_benchmark(cfg, {o.threads, false, false});
    const fs::path dir = out_dir(cfg);
    {
        auto os = open_out(dir / "imdp.txt");
        b->imdp.write(os);
    }
    if (stats_only_export) {
        std::cout << "wrote " << (dir / "imdp.txt").string() << '\n';
        return 0;
    }
    std::printf("states %zu (interior %zu + outside)\nactions %zu\nrows %zu\ntransitions %zu\nT_abs %.3f s\n",
                b->imdp.num_states(), b->partition->num_cells(), b->imdp.num_actions(), b->imdp.num_rows(),
                b->imdp.num_transitions(), b->t_abstraction);
    return 0;
}

int cmd_synthesize(const Options& o) {
    const BenchmarkConfig cfg = load(o);
    std::unique_ptr<Benchmark> b;
    try {
        b = build_benchmark(cfg, {o.threads, true, false});
    } catch (const NonConvergence& e) {
        std::fprintf(stderr, "error: %s (residual %.3g)\n", e.what(), e.residual);
        return 3;
    }
    const fs::path dir = out_dir(cfg);
    {
        auto os = open_out(dir / "values.csv");
        write_values_csv(os, b->synthesis.values, b->synthesis.policy);
    }
    {
        auto os = open_out(dir / "heatmap.csv");
        write_heatmap_csv(os, b->synthesis.values, *b->partition);
    }
    const std::size_t s0 = b->imdp.initial_state();
    std::printf("lambda %.6f\nv_hi %.6f\ninitial_cell %zu\niterations %d\nresidual %.3g\nT_abs %.3f s\nT_syn %.3f s\n",
                b->lambda(), b->synthesis.values.v_hi[s0], s0, b->synthesis.values.iterations,
                b->synthesis.values.residual, b->t_abstraction, b->t_synthesis);
    return 0;
}

int cmd_simulate(const Options& o) {
    const BenchmarkConfig cfg = load(o);
    const auto b = build_benchmark(cfg, {o.threads, true, true});
    Controller c = b->controller(cfg.controller);
    std::ofstream trace;
    if (!o.trace.empty()) {
        trace.open(o.trace);
        c.options.trace = &trace;
    }
    // One thread while tracing keeps the JSON lines whole.
    const int threads = o.trace.empty() ? o.threads : 1;
    const auto s = monte_carlo(c, cfg.model.initial_state, cfg.n_runs, cfg.base_seed, cfg.max_steps, threads);
    const fs::path dir = out_dir(cfg);
    {
        auto os = open_out(dir / "summary.csv");
        write_summary_csv(os, s);
    }
    {
        auto os = open_out(dir / "episodes.csv");
        write_episodes_csv(os, s);
    }
    if (o.trajectories) {
        auto os = open_out(dir / "trajectories.csv");
        write_trajectories_csv(os, s);
    }
    {
        auto os = open_out(dir / "timings.txt");
        os << "T_abs " << b->t_abstraction << "\nT_syn " << b->t_synthesis << "\nT_mpc_step " << s.mpc_step_time
           << "\n";
    }
    std::printf("controller %s\nlambda %.6f\nsat %.4f (%d/%d, %d timeouts)\nE[J] %.4f (std %.4f)\nE[J_state] %.4f\n"
                "E[J_input] %.4f\nE[J | sat] %.4f\nmean fallback %.4f\nT_mpc_step %.6f s\n",
                to_string(cfg.controller), b->lambda(), s.sat_frequency, s.sat_count, s.n_runs, s.timeout_count,
                s.j_total.mean, s.j_total.std, s.j_state.mean, s.j_input.mean, s.j_total_sat.mean, s.mean_fallback,
                s.mpc_step_time);
    return 0;
}

int cmd_sweep(const Options& o) {
    const BenchmarkConfig cfg = load(o);
    std::vector<Vec> eps = cfg.sweep_epsilons;
    if (!o.eps.empty()) {
        eps.clear();
        for (const auto& e : o.eps) eps.push_back(parse_eps(e, cfg.model.n_u));
    }
    if (eps.empty()) eps.push_back(cfg.epsilon);
    const auto rows = epsilon_sweep(cfg, eps, o.threads);
    const fs::path dir = out_dir(cfg);
    {
        auto os = open_out(dir / "sweep.csv");
        write_sweep_csv(os, rows);
    }
    {
        auto os = open_out(dir / "sweep_timings.csv");
        write_sweep_timings_csv(os, rows);
    }
    std::printf("%-14s %10s %8s %10s %10s %10s %10s %10s %10s\n", "epsilon", "area", "lambda", "E[J]", "E[J_st]",
                "E[J_in]", "sat", "T_abs", "T_mpc");
    for (const auto& r : rows) {
        if (!r.error.empty()) {
            std::printf("%-14s error: %s\n", format_epsilon(r.epsilon).c_str(), r.error.c_str());
            continue;
        }
        char mpc[32] = "--";
        if (r.controller == ControllerKind::Mpc) std::snprintf(mpc, sizeof mpc, "%.4f", r.summary.mpc_step_time);
        std::printf("%-14s %10.4f %8.4f %10.3f %10.3f %10.3f %10.3f %10.2f %10s\n", format_epsilon(r.epsilon).c_str(),
                    r.area, r.lambda, r.summary.j_total.mean, r.summary.j_state.mean, r.summary.j_input.mean,
                    r.summary.sat_frequency, r.t_abstraction, mpc);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interval-MDP abstraction, robust synthesis and certified MPC"};
    app.require_subcommand(1);
    Options o;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "benchmark YAML")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output directory (overrides output_dir)");
        sub->add_option("--seed", o.seed, "base seed (overrides simulation.base_seed)");
        sub->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--controller", o.controller, "vanilla | mpc")->check(CLI::IsMember({"vanilla", "mpc"}));
    };
    auto* abstract = app.add_subcommand("abstract", "build the IMDP, write imdp.txt and print its size");
    auto* synth = app.add_subcommand("synthesize", "robust value iteration; values.csv, heatmap.csv, lambda");
    auto* sim = app.add_subcommand("simulate", "Monte Carlo closed loop; summary.csv, episodes.csv");
    auto* sweep = app.add_subcommand("sweep", "epsilon sweep; sweep.csv, sweep_timings.csv");
    auto* exp = app.add_subcommand("export-imdp", "write imdp.txt only");
    for (auto* s : {abstract, synth, sim, sweep, exp}) common(s);
    sim->add_option("--trace", o.trace, "MIQP trace (JSON lines)");
    sim->add_flag("--trajectories", o.trajectories, "also write trajectories.csv");
    sweep->add_option("--eps", o.eps, "radius, 'a' or 'a;b' (repeatable; overrides sweep.epsilons)");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*abstract) return cmd_abstract(o, false);
        if (*exp) return cmd_abstract(o, true);
        if (*synth) return cmd_synthesize(o);
        if (*sim) return cmd_simulate(o);
        if (*sweep) return cmd_sweep(o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "%s: %s\n", o.config.c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
