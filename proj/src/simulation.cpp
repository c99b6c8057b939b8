#include "imdpmpc/simulation.hpp"

#include "imdpmpc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace imdpmpc {

const char* to_string(ControllerKind kind) { return kind == ControllerKind::Vanilla ? "vanilla" : "mpc"; }

ControllerKind controller_kind_from_string(const std::string& name) {
    if (name == "vanilla") return ControllerKind::Vanilla;
    if (name == "mpc") return ControllerKind::Mpc;
    throw ContractViolation("unknown controller '" + name + "' (expected vanilla or mpc)");
}

const char* to_string(SatStatus status) {
    switch (status) {
    case SatStatus::True: return "true";
    case SatStatus::False: return "false";
    case SatStatus::Timeout: return "timeout";
    }
    return "?";
}

ControlOutput compute_input(const Controller& controller, const Vec& x) {
    const MpcContext& ctx = controller.ctx;
    ControlOutput out;
    if (controller.kind == ControllerKind::Vanilla) {
        const std::size_t cell = ctx.partition->locate(x);
        out.u = ctx.actions->centers.at(ctx.policy->action.at(cell));
        return out;
    }
    const MpcSolution sol = mpc_control(ctx, x, controller.options);
    out.u = sol.u0;
    out.fallback = sol.status == MpcStatus::InfeasibleFallback;
    out.solve_time = sol.solve_time;
    return out;
}

namespace {

double quad(const Vec& v, const Mat& W) { return v.dot(W * v); }

Vec state_error(const Partition& part, const Vec& r, const Vec& x) {
    Vec e = r - x;
    for (int d : part.wrap_dims()) e[d] = wrap_angle(e[d]);
    return e;
}

} // namespace

EpisodeRecord run_episode(const Controller& controller, const Vec& x0, int max_steps, NoiseStream& stream) {
    const MpcContext& ctx = controller.ctx;
    if (!ctx.model || !ctx.partition || !ctx.actions || !ctx.policy) {
        throw ContractViolation("run_episode: incomplete controller");
    }
    if (controller.kind == ControllerKind::Mpc && !ctx.pwa) {
        throw ContractViolation("run_episode: MPC controller without a PWA table");
    }
    const SystemModel& model = *ctx.model;
    const Partition& part = *ctx.partition;
    require_dim(x0, model.n_x, "run_episode x0");

    EpisodeRecord rec;
    Vec x = x0;
    rec.states.push_back(x);
    for (int k = 0;; ++k) {
        const std::size_t cell = part.locate(x);
        if (cell == part.outside() || part.is_unsafe(cell)) {
            rec.sat = SatStatus::False;
            break;
        }
        if (part.is_goal(cell)) {
            rec.sat = SatStatus::True;
            break;
        }
        if (k == max_steps) {
            rec.sat = SatStatus::Timeout;
            break;
        }
        const Vec r = target_point(part, x);
        const ControlOutput c = compute_input(controller, x);
        const Box& certified = interface_set(*ctx.actions, ctx.policy->action.at(cell));
        if (!certified.contains(c.u)) {
            throw ContractViolation("run_episode: input outside the certified set at step " + std::to_string(k));
        }
        if (controller.kind == ControllerKind::Mpc) {
            rec.mpc_time += c.solve_time;
            ++rec.mpc_steps;
        }
        if (c.fallback) ++rec.fallback_count;

        rec.inputs.push_back(c.u);
        x = step(model, x, c.u, sample_noise(model, stream));
        rec.states.push_back(x);
        // Same pairing as the MPC stage cost: u_k with x_{k+1}, both against r_k.
        rec.j_state += quad(state_error(part, r, x), ctx.Q);
        rec.j_input += quad(c.u, ctx.R);
        ++rec.steps;
    }
    rec.j_total = rec.j_state + rec.j_input;
    return rec;
}

Moments moments(const std::vector<double>& xs) {
    Moments m;
    m.count = static_cast<int>(xs.size());
    if (xs.empty()) return m;
    double sum = 0.0;
    for (double v : xs) sum += v;
    m.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double v : xs) ss += (v - m.mean) * (v - m.mean);
        m.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return m;
}

MonteCarloSummary monte_carlo(const Controller& controller, const Vec& x0, int n_runs, std::uint64_t base_seed,
                              int max_steps, int threads) {
    if (n_runs < 1) throw ContractViolation("monte_carlo: n_runs must be >= 1");
    MonteCarloSummary s;
    s.n_runs = n_runs;
    s.episodes.resize(static_cast<std::size_t>(n_runs));
    parallel_for(0, static_cast<std::size_t>(n_runs), threads, [&](std::size_t i) {
        NoiseStream stream(base_seed, i);
        s.episodes[i] = run_episode(controller, x0, max_steps, stream);
    });

    std::vector<double> jt, js, ji, jt_sat, js_sat, ji_sat;
    double fallback = 0.0, mpc_time = 0.0;
    for (const auto& e : s.episodes) {
        jt.push_back(e.j_total);
        js.push_back(e.j_state);
        ji.push_back(e.j_input);
        if (e.sat == SatStatus::True) {
            ++s.sat_count;
            jt_sat.push_back(e.j_total);
            js_sat.push_back(e.j_state);
            ji_sat.push_back(e.j_input);
        }
        if (e.sat == SatStatus::Timeout) ++s.timeout_count;
        fallback += e.fallback_count;
        mpc_time += e.mpc_time;
        s.mpc_steps += e.mpc_steps;
    }
    s.sat_frequency = static_cast<double>(s.sat_count) / n_runs;
    s.j_total = moments(jt);
    s.j_state = moments(js);
    s.j_input = moments(ji);
    s.j_total_sat = moments(jt_sat);
    s.j_state_sat = moments(js_sat);
    s.j_input_sat = moments(ji_sat);
    s.mean_fallback = fallback / n_runs;
    s.mpc_step_time = s.mpc_steps > 0 ? mpc_time / s.mpc_steps : 0.0;
    return s;
}

namespace {

void put(std::ostream& os, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << buf;
}

} // namespace

void write_episodes_csv(std::ostream& os, const MonteCarloSummary& summary) {
    os << "episode,sat,steps,j_state,j_input,j_total,fallback_count\n";
    for (std::size_t i = 0; i < summary.episodes.size(); ++i) {
        const auto& e = summary.episodes[i];
        os << i << ',' << to_string(e.sat) << ',' << e.steps << ',';
        put(os, e.j_state);
        os << ',';
        put(os, e.j_input);
        os << ',';
        put(os, e.j_total);
        os << ',' << e.fallback_count << '\n';
    }
}

void write_trajectories_csv(std::ostream& os, const MonteCarloSummary& summary) {
    if (summary.episodes.empty()) return;
    const auto nx = summary.episodes.front().states.front().size();
    Eigen::Index nu = 0;
    for (const auto& e : summary.episodes) {
        if (!e.inputs.empty()) nu = e.inputs.front().size();
    }
    os << "episode,k";
    for (Eigen::Index d = 0; d < nx; ++d) os << ",x" << d;
    for (Eigen::Index d = 0; d < nu; ++d) os << ",u" << d;
    os << '\n';
    for (std::size_t i = 0; i < summary.episodes.size(); ++i) {
        const auto& e = summary.episodes[i];
        for (std::size_t k = 0; k < e.states.size(); ++k) {
            os << i << ',' << k;
            for (Eigen::Index d = 0; d < nx; ++d) {
                os << ',';
                put(os, e.states[k][d]);
            }
            for (Eigen::Index d = 0; d < nu; ++d) {
                os << ',';
                if (k < e.inputs.size()) put(os, e.inputs[k][d]);
            }
            os << '\n';
        }
    }
}

void write_summary_csv(std::ostream& os, const MonteCarloSummary& s) {
    os << "key,value\n";
    auto row = [&](const char* key, double v) {
        os << key << ',';
        put(os, v);
        os << '\n';
    };
    row("n_runs", s.n_runs);
    row("sat_count", s.sat_count);
    row("timeout_count", s.timeout_count);
    row("sat_frequency", s.sat_frequency);
    row("mean_j_total", s.j_total.mean);
    row("std_j_total", s.j_total.std);
    row("mean_j_state", s.j_state.mean);
    row("std_j_state", s.j_state.std);
    row("mean_j_input", s.j_input.mean);
    row("std_j_input", s.j_input.std);
    row("mean_j_total_sat", s.j_total_sat.mean);
    row("std_j_total_sat", s.j_total_sat.std);
    row("mean_j_state_sat", s.j_state_sat.mean);
    row("mean_j_input_sat", s.j_input_sat.mean);
    row("mean_fallback", s.mean_fallback);
    row("mpc_steps", s.mpc_steps);
}

double satisfaction_margin(double lambda, int n, double z) {
    const double l = std::clamp(lambda, 0.0, 1.0);
    return l - z * std::sqrt(l * (1.0 - l) / n);
}

} // namespace imdpmpc
