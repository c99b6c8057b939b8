// Acceptance run: one PASS/FAIL line per criterion. Builds every benchmark
// from the shipped configs, so expect tens of minutes on one core.
#include "imdpmpc/pipeline.hpp"

#include "../tests/fixtures.hpp"
#include "../tests/oracles.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <climits>
#include <cstdint>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace imdpmpc;

namespace {

struct Verdict {
    int id;
    std::string status; // PASS / FAIL / WARN
    std::string detail;
};

std::vector<Verdict> verdicts;

void log(const std::string& s) {
    std::cerr << s << std::endl;
}

void record(int id, bool pass, const std::string& detail, bool warn = false) {
    verdicts.push_back({id, pass ? (warn ? "WARN" : "PASS") : "FAIL", detail});
    log("  -> criterion " + std::to_string(id) + " " + verdicts.back().status);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string short_eps(const Vec& e) {
    std::string s;
    for (int i = 0; i < e.size(); ++i) s += fmt(i ? ";%g" : "%g", e[i]);
    return s;
}

double now() {
    using namespace std::chrono;
    return duration<double>(steady_clock::now().time_since_epoch()).count();
}

// ---- property checks on small instances ----

void criterion7() {
    std::mt19937_64 rng(1007);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double worst_gap = 0.0;
    int infeasible = 0;
    for (int t = 0; t < 1000; ++t) {
        const std::size_t n = 1 + rng() % 4;
        std::vector<std::uint32_t> targets(n);
        for (std::uint32_t i = 0; i < n; ++i) targets[i] = i;
        const auto row = oracle::random_row(rng, targets, 0.5);
        std::vector<double> v(n);
        for (auto& x : v) x = U(rng);
        for (Direction dir : {Direction::Min, Direction::Max}) {
            const auto sol = worst_case_expectation(row, v, dir);
            worst_gap = std::max(worst_gap, std::abs(sol.value - oracle::vertex_optimum(row, v, dir)));
            double mass = 0.0;
            bool ok = true;
            for (std::size_t i = 0; i < n; ++i) {
                ok = ok && sol.distribution[i] >= row[i].lo && sol.distribution[i] <= row[i].hi;
                mass += sol.distribution[i];
            }
            if (!ok || std::abs(mass - 1.0) > 1e-12) ++infeasible;
        }
    }
    record(7, worst_gap < 1e-12 && infeasible == 0,
           fmt("2000 solves, max gap %.2e, infeasible distributions %d", worst_gap, infeasible));
}

void criterion8() {
    std::mt19937_64 rng(1008);
    SynthesisOptions opt;
    opt.tol = 1e-12;
    opt.max_iters = 1000000;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 3 + rng() % 3;
        const auto m = oracle::random_imdp(rng, n);
        const auto res = robust_value_iteration(m.imdp, opt);
        std::vector<double> best(n, -1.0);
        std::vector<std::uint32_t> policy(n, 0);
        while (true) {
            const auto v = oracle::brute_policy_value(m, policy, Direction::Min);
            for (std::size_t s = 0; s < n; ++s) best[s] = std::max(best[s], v[s]);
            std::size_t d = 2;
            while (d < n && ++policy[d] == 2) policy[d++] = 0;
            if (d == n) break;
        }
        for (std::size_t s = 0; s < n; ++s) worst = std::max(worst, std::abs(res.values.v_lo[s] - best[s]));
    }
    record(8, worst < 1e-6, fmt("100 IMDPs, max |v_lo - oracle| %.2e", worst));
}

void criterion11() {
    const fixture::Coarse c(0.5);
    const Mat Q = Mat::Identity(2, 2);
    const auto ctx = c.ctx(Q, Mat::Identity(1, 1), 3);
    std::mt19937_64 rng(1011);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    int solved = 0, fallback = 0, bad = 0;
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        Vec x{{U(rng), U(rng)}};
        while (c.part.is_terminal(c.part.locate(x))) x = Vec{{U(rng), U(rng)}};
        const Vec r = target_point(c.part, x);
        const auto inst = build_miqp(ctx, x, r);
        const auto sol = solve_miqp(inst);
        std::set<std::vector<std::size_t>> seqs;
        std::vector<std::size_t> prefix{c.part.locate(x)};
        fixture::grid_sequences(c, x, 3, prefix, seqs);
        if (sol.status == MpcStatus::Optimal) seqs.insert(sol.cells);
        double best = 1e300;
        for (const auto& s : seqs) {
            const auto o = fixture::exact_sequence(c, x, r, s, Q, 1.0);
            if (o.feasible) best = std::min(best, o.cost);
        }
        if (best == 1e300) {
            if (sol.status != MpcStatus::InfeasibleFallback) ++bad;
            ++fallback;
            continue;
        }
        if (sol.status != MpcStatus::Optimal) {
            ++bad;
            continue;
        }
        worst = std::max(worst, std::abs(sol.cost - best) / std::max(1.0, best));
        // predicted states sit in the cells the binaries select
        std::vector<Vec> xs{x};
        xs.insert(xs.end(), sol.predicted_states.begin(), sol.predicted_states.end());
        bool consistent = inst.satisfies(inst.assignment(sol.cells, xs, sol.predicted_inputs));
        for (std::size_t j = 0; j < sol.cells.size() && j < xs.size(); ++j)
            consistent = consistent && c.part.cell_box(sol.cells[j]).contains(xs[j], 1e-9);
        if (!consistent) ++bad;
        ++solved;
    }
    record(11, worst < 1e-4 && bad == 0,
           fmt("100 states: %d optimal, %d infeasible (oracle agrees), max rel gap %.2e, inconsistent %d", solved,
               fallback, worst, bad));
}

void criterion14() {
    std::mt19937_64 rng(1014);
    double worst = 0.0;
    for (const auto& m : {make_double_integrator(), make_mountain_car(), make_dubins()}) {
        for (int t = 0; t < 1000; ++t) {
            Vec x(m.n_x), u(m.n_u);
            for (int i = 0; i < m.n_x; ++i)
                x[i] = std::uniform_real_distribution<double>(m.state_box.lo(i), m.state_box.hi(i))(rng);
            for (int i = 0; i < m.n_u; ++i)
                u[i] = std::uniform_real_distribution<double>(m.input_box.lo(i), m.input_box.hi(i))(rng);
            const auto lin = linearize(m, x, u);
            const auto fd = finite_difference_jacobians(m, x, u);
            const double sa = std::max(1.0, lin.A.cwiseAbs().maxCoeff());
            const double sb = std::max(1e-3, lin.B.cwiseAbs().maxCoeff());
            worst = std::max(worst, (lin.A - fd.A).cwiseAbs().maxCoeff() / sa);
            worst = std::max(worst, (lin.B - fd.B).cwiseAbs().maxCoeff() / sb);
        }
    }
    record(14, worst < 1e-5, fmt("3000 points over 3 benchmarks, max rel error %.2e", worst));
}

// ---- checks against one built benchmark ----

// Landing frequencies at random (x, u) in cell x ball against the stored row.
struct Soundness {
    int checks = 0;
    int violations = 0;
};

Soundness transition_soundness(const Benchmark& b, std::uint64_t seed) {
    const auto& m = b.model();
    const auto& part = *b.partition;
    std::mt19937_64 rng(seed);
    Soundness out;
    constexpr int kDraws = 10000;
    std::uint64_t stream = 0;
    for (int t = 0; t < 50; ++t) {
        std::size_t s;
        do s = rng() % part.num_cells();
        while (part.is_terminal(s));
        const std::size_t a = rng() % b.actions.size();
        std::size_t r = b.imdp.row_begin(s);
        while (b.imdp.row_action(r) != a) ++r;
        const auto row = b.imdp.row(r);
        const Box cell = part.cell_box(s);
        const Box& ball = b.actions.balls[a];
        auto sample = [&](const Box& box) {
            Vec v(box.dim());
            for (int i = 0; i < box.dim(); ++i)
                v[i] = std::uniform_real_distribution<double>(box.lo(i), box.hi(i))(rng);
            return v;
        };
        // target: where one draw from the pair actually lands, if it survived pruning
        const Transition* target = nullptr;
        for (int k = 0; k < 20 && !target; ++k) {
            NoiseStream ns(seed, 1u << 30 | stream++);
            const std::size_t s2 = part.locate(step(m, sample(cell), sample(ball), sample_noise(m, ns)));
            for (const auto& e : row)
                if (e.target == s2) target = &e;
        }
        if (!target) continue;
        for (int p = 0; p < 20; ++p) {
            const Vec x = sample(cell), u = sample(ball);
            NoiseStream ns(seed, stream++);
            int hits = 0;
            for (int k = 0; k < kDraws; ++k)
                if (part.locate(step(m, x, u, sample_noise(m, ns))) == target->target) ++hits;
            const double f = static_cast<double>(hits) / kDraws;
            const double se_lo = std::sqrt(target->lo * (1 - target->lo) / kDraws);
            const double se_hi = std::sqrt(target->hi * (1 - target->hi) / kDraws);
            ++out.checks;
            if (f < target->lo - 3 * se_lo || f > target->hi + 3 * se_hi) ++out.violations;
        }
    }
    return out;
}

struct Nesting {
    std::size_t compared = 0;
    std::size_t violations = 0;
    double worst_outside = 0.0;
    double worst_value = 0.0;
};

// small is built with a radius contained in big's.
void compare_nesting(const Benchmark& small, const Benchmark& big, Nesting& n) {
    const auto& A = small.imdp;
    const auto& B = big.imdp;
    const std::size_t outside = small.partition->outside();
    for (std::size_t s = 0; s < A.num_states(); ++s) {
        for (std::size_t ra = A.row_begin(s); ra < A.row_end(s); ++ra) {
            std::size_t rb = B.row_begin(s);
            while (rb < B.row_end(s) && B.row_action(rb) != A.row_action(ra)) ++rb;
            if (rb == B.row_end(s)) {
                ++n.violations;
                continue;
            }
            std::map<std::uint32_t, Transition> bigrow;
            for (const auto& e : B.row(rb)) bigrow[e.target] = e;
            for (const auto& e : A.row(ra)) {
                ++n.compared;
                const auto it = bigrow.find(e.target);
                if (e.target == outside) {
                    // the outside bound also carries pruned mass; no entry means [0, 0]
                    const Transition o = it == bigrow.end() ? Transition{e.target, 0.0, 0.0} : it->second;
                    n.worst_outside = std::max({n.worst_outside, o.lo - e.lo, e.hi - o.hi});
                    continue;
                }
                if (it == bigrow.end()) {
                    ++n.violations;
                    continue;
                }
                if (it->second.lo > e.lo + 1e-12 || it->second.hi < e.hi - 1e-12) ++n.violations;
            }
        }
    }
    const auto& va = small.synthesis.values.v_lo;
    const auto& vb = big.synthesis.values.v_lo;
    for (std::size_t s = 0; s < va.size(); ++s) n.worst_value = std::max(n.worst_value, vb[s] - va[s]);
}

// ---- simulation rows ----

struct SimRow {
    std::string bench;
    std::string eps;
    std::string controller;
    int horizon = 0;
    double lambda = 0.0;
    MonteCarloSummary mc;
};

std::vector<SimRow> rows;
int contract_events = 0;
int out_of_ball = 0;
int fallback_steps = 0;

// Every applied input is re-checked against the certified set.
void audit_inputs(const Benchmark& b, const Controller& c, const MonteCarloSummary& s) {
    for (const auto& ep : s.episodes) {
        fallback_steps += ep.fallback_count;
        for (std::size_t k = 0; k < ep.inputs.size(); ++k) {
            const std::size_t cell = b.partition->locate(ep.states[k]);
            if (cell == b.partition->outside()) {
                ++out_of_ball;
                continue;
            }
            if (c.kind == ControllerKind::Vanilla) {
                if (ep.inputs[k] != b.actions.centers[b.synthesis.policy.action[cell]]) ++out_of_ball;
            } else if (!region_input_box(c.ctx, cell).contains(ep.inputs[k])) {
                ++out_of_ball;
            }
        }
    }
}

const MonteCarloSummary* simulate(const Benchmark& b, ControllerKind kind, int horizon) {
    Controller c = b.controller(kind);
    c.ctx.horizon = horizon;
    const auto& cfg = b.config;
    const double t0 = now();
    try {
        SimRow row{cfg.name, short_eps(cfg.epsilon), to_string(kind), horizon, b.lambda(), {}};
        row.mc = monte_carlo(c, cfg.model.initial_state, cfg.n_runs, cfg.base_seed, cfg.max_steps, 1);
        audit_inputs(b, c, row.mc);
        rows.push_back(std::move(row));
    } catch (const ContractViolation& e) {
        ++contract_events;
        log(std::string("ContractViolation: ") + e.what());
        return nullptr;
    }
    const auto& m = rows.back().mc;
    log(fmt("  sim %s eps=%s %s N=%d: sat %.2f E[J] %.2f (%.0f s)", cfg.name.c_str(), rows.back().eps.c_str(),
            to_string(kind), horizon, m.sat_frequency, m.j_total.mean, now() - t0));
    return &rows.back().mc;
}

// MPC at zero radius against vanilla under shared noise.
bool zero_radius_identical(const Benchmark& b, int& episodes) {
    const auto& cfg = b.config;
    const auto v = b.controller(ControllerKind::Vanilla);
    const auto m = b.controller(ControllerKind::Mpc);
    bool same = true;
    for (int i = 0; i < 10; ++i) {
        NoiseStream s1(cfg.base_seed, static_cast<std::uint64_t>(i)), s2(cfg.base_seed, static_cast<std::uint64_t>(i));
        try {
            const auto a = run_episode(v, cfg.model.initial_state, cfg.max_steps, s1);
            const auto c = run_episode(m, cfg.model.initial_state, cfg.max_steps, s2);
            same = same && a.states == c.states && a.inputs == c.inputs && a.sat == c.sat;
        } catch (const ContractViolation& e) {
            ++contract_events;
            same = false;
        }
        ++episodes;
    }
    return same;
}

std::unique_ptr<Benchmark> build(const BenchmarkConfig& base, const Vec& eps) {
    const double t0 = now();
    auto b = build_benchmark(with_epsilon(base, eps), {1, true, true});
    log(fmt("  built %s eps=%s: lambda %.6f, T_abs %.1f s, T_syn %.1f s (%.0f s total)", base.name.c_str(),
            short_eps(eps).c_str(), b->lambda(), b->t_abstraction, b->t_synthesis, now() - t0));
    return b;
}

double reduction(const MonteCarloSummary& base, const MonteCarloSummary& v) {
    return 1.0 - v.j_total.mean / base.j_total.mean;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance run"};
    std::string config_dir = IMDPMPC_SOURCE_DIR "/configs";
    std::string report_path = "acceptance_report.txt";
    bool skip_big = false;
    app.add_option("--configs", config_dir, "directory with the benchmark configs");
    app.add_option("--report", report_path, "where to write the PASS/FAIL lines");
    app.add_flag("--properties-only", skip_big, "only the property checks (7, 8, 11, 14)");
    CLI11_PARSE(app, argc, argv);

    const double t_start = now();
    log("property checks");
    criterion7();
    criterion8();
    criterion11();
    criterion14();

    if (!skip_big) {
        Nesting nest;
        std::vector<Soundness> sound;
        bool values_ok = true;
        std::vector<std::string> nest_detail;
        auto finish_nesting = [&](const std::string& name, const Nesting& n) {
            nest_detail.push_back(fmt("%s: %zu entries, %zu violations, outside slack %.1e, max v_lo increase %.1e",
                                      name.c_str(), n.compared, n.violations, n.worst_outside, n.worst_value));
            values_ok = values_ok && n.violations == 0 && n.worst_outside <= 1e-6 && n.worst_value <= 1e-5;
        };
        int eq_episodes = 0;
        bool eq_ok = true;

        // double integrator
        log("double integrator");
        const auto di_cfg = load_config(config_dir + "/double_integrator.yaml");
        std::vector<double> di_lambda;
        std::size_t di_base = SIZE_MAX;
        double di_time0 = 0.0;
        double di_lambda0 = 0.0;
        {
            Nesting n;
            std::unique_ptr<Benchmark> prev;
            for (double e : {0.0, 0.1, 0.3, 0.5}) {
                auto b = build(di_cfg, Vec::Constant(1, e));
                di_lambda.push_back(b->lambda());
                if (e == 0.0) {
                    di_time0 = b->t_abstraction + b->t_synthesis;
                    di_lambda0 = b->lambda();
                    eq_ok = zero_radius_identical(*b, eq_episodes) && eq_ok;
                    if (simulate(*b, ControllerKind::Vanilla, 3)) di_base = rows.size() - 1;
                } else {
                    simulate(*b, ControllerKind::Mpc, 3);
                }
                if (e == 0.5) {
                    sound.push_back(transition_soundness(*b, 9001));
                    const auto* n5 = simulate(*b, ControllerKind::Mpc, 5);
                    if (n5 && di_base != SIZE_MAX) {
                        const auto& base = rows[di_base].mc;
                        const double red = reduction(base, *n5);
                        const bool lower_input = n5->j_input.mean < base.j_input.mean;
                        record(3, red >= 0.05 && lower_input,
                               fmt("E[J] %.2f -> %.2f (%.1f%% reduction), E[J_input] %.2f -> %.2f", base.j_total.mean,
                                   n5->j_total.mean, 100 * red, base.j_input.mean, n5->j_input.mean));
                    } else {
                        record(3, false, "simulation raised a contract violation");
                    }
                }
                if (prev) compare_nesting(*prev, *b, n);
                prev = std::move(b);
            }
            finish_nesting("double_integrator", n);
        }
        record(1, di_lambda0 >= 0.97 && di_time0 < 60.0,
               fmt("lambda %.6f, abstraction + synthesis %.2f s", di_lambda0, di_time0));
        {
            bool mono = true;
            for (std::size_t i = 1; i < di_lambda.size(); ++i) mono = mono && di_lambda[i] <= di_lambda[i - 1];
            record(2, mono && di_lambda[1] >= 0.95 && di_lambda[3] >= 0.80,
                   fmt("lambda %.6f %.6f %.6f %.6f", di_lambda[0], di_lambda[1], di_lambda[2], di_lambda[3]));
        }

        // mountain car
        log("mountain car");
        const auto mc_cfg = load_config(config_dir + "/mountain_car.yaml");
        {
            Nesting n;
            auto b0 = build(mc_cfg, Vec::Constant(1, 0.0));
            eq_ok = zero_radius_identical(*b0, eq_episodes) && eq_ok;
            const bool have_base = simulate(*b0, ControllerKind::Vanilla, mc_cfg.horizon) != nullptr;
            const std::size_t base_row = rows.size() - 1;
            auto b1 = build(mc_cfg, Vec::Constant(1, 0.1));
            compare_nesting(*b0, *b1, n);
            b0.reset();
            sound.push_back(transition_soundness(*b1, 9002));
            const auto* m1 = simulate(*b1, ControllerKind::Mpc, mc_cfg.horizon);
            if (m1 && have_base) {
                const auto& base = rows[base_row].mc;
                const double red = reduction(base, *m1);
                record(4, red >= 0.25 && b1->lambda() >= 0.90 && b1->t_abstraction < 1800.0,
                       fmt("E[J] %.2f -> %.2f (%.1f%% reduction), lambda %.6f, T_abs %.1f s", base.j_total.mean,
                           m1->j_total.mean, 100 * red, b1->lambda(), b1->t_abstraction));
            } else {
                record(4, false, "simulation raised a contract violation");
            }
            finish_nesting("mountain_car", n);
        }

        // dubins
        log("dubins");
        const auto du_cfg = load_config(config_dir + "/dubins.yaml");
        {
            Nesting n;
            std::unique_ptr<Benchmark> prev;
            std::map<std::string, double> lam;
            for (const Vec& e : du_cfg.sweep_epsilons) {
                auto b = build(du_cfg, e);
                lam[short_eps(e)] = b->lambda();
                if (e.isZero()) {
                    eq_ok = zero_radius_identical(*b, eq_episodes) && eq_ok;
                    simulate(*b, ControllerKind::Vanilla, du_cfg.horizon);
                } else {
                    simulate(*b, ControllerKind::Mpc, du_cfg.horizon);
                }
                if (e == du_cfg.epsilon) sound.push_back(transition_soundness(*b, 9003));
                if (prev) compare_nesting(*prev, *b, n);
                prev = std::move(b);
            }
            finish_nesting("dubins", n);
            const double a = lam.at("0.15;0.3"), c = lam.at("0.2;0.4");
            record(5, a >= 0.95 && c <= 0.6, fmt("lambda([0.15,0.3]) %.6f, lambda([0.2,0.4]) %.6f", a, c));
        }

        record(6, eq_ok, fmt("%d episodes over 3 benchmarks, trajectories %s", eq_episodes,
                             eq_ok ? "bit-identical" : "differ"));
        {
            int checks = 0, bad = 0;
            std::string d;
            const char* names[] = {"double_integrator", "mountain_car", "dubins"};
            for (std::size_t i = 0; i < sound.size(); ++i) {
                checks += sound[i].checks;
                bad += sound[i].violations;
                d += fmt("%s%s %d/%d", i ? ", " : "", names[i], sound[i].checks - sound[i].violations, sound[i].checks);
            }
            record(9, bad == 0 && sound.size() == 3, "points within bounds: " + d);
        }
        {
            std::string d;
            for (const auto& s : nest_detail) d += (d.empty() ? "" : "; ") + s;
            record(10, values_ok, d);
        }
        record(12, contract_events == 0 && out_of_ball == 0,
               fmt("%zu simulation rows + %d equivalence episodes: %d ContractViolation, %d inputs outside the "
                   "certified set, %d fallback steps",
                   rows.size(), eq_episodes, contract_events, out_of_ball, fallback_steps));
        {
            int warn = 0, fail = 0;
            std::string d;
            for (const auto& r : rows) {
                const int n = r.mc.n_runs;
                const double se = std::sqrt(r.lambda * (1 - r.lambda) / n);
                const double gap = r.lambda - r.mc.sat_frequency;
                const char* tag = "ok";
                if (gap > 5 * se) ++fail, tag = "FAIL";
                else if (gap > 3 * se) ++warn, tag = "WARN";
                d += fmt("%s%s eps=%s %s N=%d: sat %.2f lambda %.4f %s", d.empty() ? "" : "; ", r.bench.c_str(),
                         r.eps.c_str(), r.controller.c_str(), r.horizon, r.mc.sat_frequency, r.lambda, tag);
            }
            record(13, fail == 0, d, warn > 0);
        }
    }

    std::sort(verdicts.begin(), verdicts.end(), [](const Verdict& a, const Verdict& b) { return a.id < b.id; });
    std::ostringstream out;
    int failed_quant = 0, failed_prop = 0;
    for (const auto& v : verdicts) {
        out << "criterion " << v.id << ": " << v.status << "  " << v.detail << '\n';
        if (v.status == "FAIL") (v.id <= 5 ? failed_quant : failed_prop)++;
    }
    out << fmt("total %.0f s\n", now() - t_start);
    std::cout << out.str();
    std::ofstream(report_path) << out.str();
    // Quantitative targets (1-5) are reported; correctness properties gate the exit code.
    return failed_prop == 0 ? 0 : 1;
}
