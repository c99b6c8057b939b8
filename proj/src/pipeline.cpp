#include "imdpmpc/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>

namespace imdpmpc {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

MpcContext Benchmark::context() const {
    MpcContext ctx;
    ctx.model = &config.model;
    ctx.partition = partition.get();
    ctx.actions = &actions;
    ctx.policy = &synthesis.policy;
    ctx.pwa = pwa.empty() ? nullptr : &pwa;
    ctx.Q = config.Q;
    ctx.R = config.R;
    ctx.horizon = config.horizon;
    return ctx;
}

Controller Benchmark::controller(ControllerKind kind) const {
    Controller c;
    c.kind = kind;
    c.ctx = context();
    return c;
}

std::unique_ptr<Benchmark> build_benchmark(const BenchmarkConfig& config, const BuildOptions& options) {
    auto b = std::make_unique<Benchmark>();
    b->config = config;
    b->partition = std::make_unique<Partition>(b->config.model, config.partition_counts);
    b->actions = make_action_set(b->config.model, config.action_counts, config.epsilon);

    auto t0 = std::chrono::steady_clock::now();
    AbstractionOptions ao;
    ao.prune_threshold = config.prune_threshold;
    ao.window_sigmas = config.window_sigmas;
    ao.threads = options.threads;
    b->imdp = build_imdp(b->config.model, *b->partition, b->actions, ao);
    b->t_abstraction = seconds_since(t0);
    if (!options.synthesize) return b;

    t0 = std::chrono::steady_clock::now();
    SynthesisOptions so;
    so.tol = config.synthesis_tol;
    so.max_iters = config.synthesis_max_iters;
    so.threads = options.threads;
    b->synthesis = robust_value_iteration(b->imdp, so);
    b->t_synthesis = seconds_since(t0);
    if (options.pwa) {
        b->pwa = pwa_table(b->config.model, *b->partition, b->actions, b->synthesis.policy, options.threads);
    }
    return b;
}

double ball_area(const Vec& epsilon) { return (2.0 * epsilon).prod(); }

std::string format_epsilon(const Vec& epsilon) {
    std::string s;
    for (Eigen::Index i = 0; i < epsilon.size(); ++i) {
        if (i) s += ';';
        s += num(epsilon[i]);
    }
    return s;
}

std::vector<SweepRow> epsilon_sweep(const BenchmarkConfig& config, const std::vector<Vec>& epsilons, int threads) {
    if (epsilons.empty()) throw ContractViolation("epsilon_sweep: empty epsilon list");
    std::vector<SweepRow> rows;
    for (const Vec& eps : epsilons) {
        SweepRow row;
        row.epsilon = eps;
        row.area = ball_area(eps);
        row.controller = eps.isZero() ? ControllerKind::Vanilla : ControllerKind::Mpc;
        try {
            const auto b = build_benchmark(with_epsilon(config, eps), {threads, true, true});
            row.lambda = b->lambda();
            row.t_abstraction = b->t_abstraction;
            row.t_synthesis = b->t_synthesis;
            row.summary = monte_carlo(b->controller(row.controller), config.model.initial_state, config.n_runs,
                                      config.base_seed, config.max_steps, threads);
            row.summary.episodes.clear();
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "epsilon,area,lambda,controller,sat_frequency,timeouts,E_J,E_J_state,E_J_input,std_J,E_J_sat,mean_fallback,"
          "error\n";
    for (const auto& r : rows) {
        os << format_epsilon(r.epsilon) << ',' << num(r.area) << ',';
        if (!r.error.empty()) {
            std::string msg = r.error;
            for (char& c : msg) {
                if (c == ',' || c == '\n' || c == '"') c = ' ';
            }
            os << ",,,,,,,,,," << msg << '\n';
            continue;
        }
        const auto& s = r.summary;
        os << num(r.lambda) << ',' << to_string(r.controller) << ',' << num(s.sat_frequency) << ',' << s.timeout_count
           << ',' << num(s.j_total.mean) << ',' << num(s.j_state.mean) << ',' << num(s.j_input.mean) << ','
           << num(s.j_total.std) << ',' << num(s.j_total_sat.mean) << ',' << num(s.mean_fallback) << ",\n";
    }
}

void write_sweep_timings_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "epsilon,T_abs,T_syn,T_mpc_step\n";
    for (const auto& r : rows) {
        os << format_epsilon(r.epsilon) << ',' << num(r.t_abstraction) << ',' << num(r.t_synthesis) << ',';
        if (r.error.empty() && r.controller == ControllerKind::Mpc) os << num(r.summary.mpc_step_time);
        os << '\n';
    }
}

} // namespace imdpmpc
