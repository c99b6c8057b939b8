#pragma once

#include "imdpmpc/config.hpp"
#include "imdpmpc/pwa.hpp"
#include "imdpmpc/simulation.hpp"
#include "imdpmpc/synthesis.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace imdpmpc {

/// Everything built offline for one config. Held by unique_ptr: the
/// controllers keep pointers into it.
struct Benchmark {
    BenchmarkConfig config;
    std::unique_ptr<Partition> partition;
    ActionSet actions;
    Imdp imdp;
    SynthesisResult synthesis;
    std::vector<AffineModel> pwa; // empty unless requested
    double t_abstraction = 0.0;
    double t_synthesis = 0.0;

    const SystemModel& model() const { return config.model; }
    double lambda() const { return synthesis.policy.lambda; }
    MpcContext context() const;
    Controller controller(ControllerKind kind) const;
};

struct BuildOptions {
    int threads = 1;
    bool synthesize = true;
    bool pwa = true;
};

std::unique_ptr<Benchmark> build_benchmark(const BenchmarkConfig& config, const BuildOptions& options = {});

/// Product of the full ball widths (before clipping).
double ball_area(const Vec& epsilon);

struct SweepRow {
    Vec epsilon;
    double area = 0.0;
    double lambda = 0.0;
    ControllerKind controller = ControllerKind::Vanilla;
    MonteCarloSummary summary;
    double t_abstraction = 0.0;
    double t_synthesis = 0.0;
    std::string error; // nonempty when the row failed
};

/// Per epsilon: rebuild, synthesize, simulate. The zero radius runs the
/// vanilla policy, every other radius the MPC. A failing row is recorded
/// and the sweep continues.
std::vector<SweepRow> epsilon_sweep(const BenchmarkConfig& config, const std::vector<Vec>& epsilons,
                                    int threads = 1);

/// Deterministic columns only:
/// epsilon,area,lambda,controller,sat_frequency,timeouts,E_J,E_J_state,E_J_input,std_J,E_J_sat,mean_fallback,error
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows);
/// epsilon,T_abs,T_syn,T_mpc_step (T_mpc_step empty for the vanilla rows)
void write_sweep_timings_csv(std::ostream& os, const std::vector<SweepRow>& rows);

/// Radius as "a;b" (one entry per input dimension).
std::string format_epsilon(const Vec& epsilon);

} // namespace imdpmpc
