#pragma once

#include "imdpmpc/abstraction.hpp"

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace imdpmpc {

class NonConvergence : public std::runtime_error {
public:
    NonConvergence(const std::string& what, double residual) : std::runtime_error(what), residual(residual) {}
    double residual;
};

enum class Direction { Min, Max };

struct InnerSolution {
    double value = 0.0;
    std::vector<double> distribution; // aligned with the transition list
};

/// Solves min/max sum_i p_i v(t_i) over { p : lo <= p <= hi, sum p = 1 } by
/// the sort-based greedy. Throws InfeasibleAmbiguitySet when the set is empty.
InnerSolution worst_case_expectation(std::span<const Transition> row, std::span<const double> values,
                                     Direction direction);

/// Value only, by weighted selection instead of a full sort (expected linear
/// time). Assumes a nonempty ambiguity set.
double worst_case_value(std::span<const Transition> row, std::span<const double> values, Direction direction);

struct ValueBounds {
    std::vector<double> v_lo;
    std::vector<double> v_hi;
    int iterations = 0;
    double residual = 0.0;
};

struct RobustPolicy {
    std::vector<std::uint32_t> action; // action id per state
    double lambda = 0.0;
};

struct SynthesisOptions {
    double tol = 1e-6;
    int max_iters = 10000;
    int threads = 1;
};

struct SynthesisResult {
    ValueBounds values;
    RobustPolicy policy;
};

/// Robust value iteration for reach-avoid from V0 = goal indicator with
/// Gauss-Jacobi sweeps. v_lo / v_hi are the values of the optimal policy under
/// the minimizing / maximizing adversary. Throws NonConvergence.
SynthesisResult robust_value_iteration(const Imdp& imdp, const SynthesisOptions& options = {});

/// Value of a fixed stationary policy (one action id per state) under the
/// given adversary, iterated from the goal indicator. Throws NonConvergence.
std::vector<double> evaluate_policy(const Imdp& imdp, const std::vector<std::uint32_t>& action, Direction direction,
                                    const SynthesisOptions& options = {}, int* iterations = nullptr);

/// State -> admissible input box, piecewise constant over cells.
class PermissivePolicy {
public:
    PermissivePolicy(const Partition& partition, const ActionSet& actions, const RobustPolicy& policy);

    std::uint32_t action(const Vec& x) const;
    const Box& operator()(const Vec& x) const;

private:
    const Partition* partition_;
    const ActionSet* actions_;
    const RobustPolicy* policy_;
};

inline PermissivePolicy permissive_policy(const ActionSet& actions, const RobustPolicy& policy,
                                          const Partition& partition) {
    return PermissivePolicy(partition, actions, policy);
}

/// v_lo over the grid: counts[0] x counts[1] matrices, one per combination of
/// the remaining dimensions (row-major).
std::vector<Mat> heatmap(const ValueBounds& values, const Partition& partition);

/// state,v_lo,v_hi,action
void write_values_csv(std::ostream& os, const ValueBounds& values, const RobustPolicy& policy);
/// layer,i,j,x,y,v_lo (cell centers of the first two dimensions)
void write_heatmap_csv(std::ostream& os, const ValueBounds& values, const Partition& partition);

} // namespace imdpmpc
