#pragma once

#include "imdpmpc/mpc.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace imdpmpc {

enum class ControllerKind { Vanilla, Mpc };
const char* to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(const std::string& name);

enum class SatStatus { True, False, Timeout };
const char* to_string(SatStatus status);

/// Vanilla applies the action input u_a of sigma*(cell); Mpc solves the MIQP and
/// keeps the first input (always inside the certified ball).
struct Controller {
    ControllerKind kind = ControllerKind::Vanilla;
    MpcContext ctx;
    MiqpOptions options;
};

struct ControlOutput {
    Vec u;
    bool fallback = false;
    double solve_time = 0.0; // MPC only
};

ControlOutput compute_input(const Controller& controller, const Vec& x);

struct EpisodeRecord {
    std::vector<Vec> states; // x_0 .. x_steps
    std::vector<Vec> inputs; // u_0 .. u_{steps-1}
    SatStatus sat = SatStatus::Timeout;
    int steps = 0;
    double j_state = 0.0;
    double j_input = 0.0;
    double j_total = 0.0;
    int fallback_count = 0;
    double mpc_time = 0.0; // summed over MPC solves
    int mpc_steps = 0;
};

/// Closed loop: terminal checks, locate, target, input, noise, step.
/// Throws ContractViolation when an input leaves the certified set.
EpisodeRecord run_episode(const Controller& controller, const Vec& x0, int max_steps, NoiseStream& stream);

struct Moments {
    double mean = 0.0;
    double std = 0.0; // sample std (n - 1); 0 for n < 2
    int count = 0;
};
Moments moments(const std::vector<double>& xs);

struct MonteCarloSummary {
    int n_runs = 0;
    int sat_count = 0;
    int timeout_count = 0;
    double sat_frequency = 0.0;
    Moments j_total, j_state, j_input;             // all runs
    Moments j_total_sat, j_state_sat, j_input_sat; // satisfying runs only
    double mean_fallback = 0.0;
    double mpc_step_time = 0.0; // seconds per MPC step; 0 for vanilla
    int mpc_steps = 0;
    std::vector<EpisodeRecord> episodes;
};

/// Episode i draws its noise from NoiseStream(base_seed, i), so variants
/// run with the same base_seed see the same noise sequences.
MonteCarloSummary monte_carlo(const Controller& controller, const Vec& x0, int n_runs, std::uint64_t base_seed,
                              int max_steps, int threads = 1);

/// episode,sat,steps,j_state,j_input,j_total,fallback_count
void write_episodes_csv(std::ostream& os, const MonteCarloSummary& summary);
/// episode,k,x...,u... (the final state has empty inputs)
void write_trajectories_csv(std::ostream& os, const MonteCarloSummary& summary);
/// key,value rows without timings
void write_summary_csv(std::ostream& os, const MonteCarloSummary& summary);

/// Lower confidence margin lambda - z * sqrt(lambda (1 - lambda) / n).
double satisfaction_margin(double lambda, int n, double z);

} // namespace imdpmpc
