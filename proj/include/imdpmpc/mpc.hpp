#pragma once

#include "imdpmpc/pwa.hpp"
#include "imdpmpc/qp.hpp"

#include <iosfwd>
#include <map>
#include <vector>

namespace imdpmpc {

/// Center of the goal cell nearest to x (angular distance on wrapped
/// dimensions), ties to the lowest index.
Vec target_point(const Partition& partition, const Vec& x);

/// Per-cell data of the MLD program: cell bounds (m_s, M_s), admissible
/// input bounds (m_a, M_a) and the affine prediction model.
struct RegionData {
    Box cell;
    Box input;
    AffineModel model;
};

/// One feasible-point candidate for the mixed-integer program, indexed by
/// prediction step j = 0..N and candidate position i.
struct MiqpAssignment {
    std::vector<Vec> x;                      // N + 1 states
    std::vector<Vec> u;                      // N inputs
    std::vector<std::vector<double>> delta;  // (N + 1) x |candidates|
    std::vector<std::vector<Vec>> z;         // (N + 1) x |candidates|
};

struct MiqpInstance {
    int horizon = 1;
    Vec x0;
    Vec reference;
    Mat Q;
    Mat R;
    std::size_t start_cell = 0;
    std::vector<std::size_t> candidate_cells; // sorted, contains start_cell
    std::map<std::size_t, RegionData> regions;

    const RegionData& region(std::size_t cell) const { return regions.at(cell); }
    double cost(const std::vector<Vec>& x, const std::vector<Vec>& u) const;

    /// Audits the big-M / exactly-one / input-coupling / dynamics constraints.
    bool satisfies(const MiqpAssignment& a, double tol = 1e-6) const;

    /// Assignment induced by a cell sequence and the states/inputs it carries.
    MiqpAssignment assignment(const std::vector<std::size_t>& cells, const std::vector<Vec>& x,
                              const std::vector<Vec>& u) const;
};

struct MpcContext {
    const SystemModel* model = nullptr;
    const Partition* partition = nullptr;
    const ActionSet* actions = nullptr;
    const RobustPolicy* policy = nullptr;
    const std::vector<AffineModel>* pwa = nullptr;
    Mat Q;
    Mat R;
    int horizon = 3;
};

/// Admissible inputs while in `cell`: the ball of the policy action, or the
/// whole input box in goal cells.
Box region_input_box(const MpcContext& ctx, std::size_t cell);

/// Cells whose boxes meet the one-step image of `from` under the cell's
/// model and input bounds; unsafe and outside cells are dropped.
std::vector<std::size_t> successor_cells(const MpcContext& ctx, std::size_t cell, const Box& from);

MiqpInstance build_miqp(const MpcContext& ctx, const Vec& x, const Vec& reference);

enum class MpcStatus { Optimal, InfeasibleFallback };
const char* to_string(MpcStatus status);

struct MpcSolution {
    Vec u0;
    std::vector<Vec> predicted_states; // x_{1..N}
    std::vector<Vec> predicted_inputs; // u_{0..N-1}
    std::vector<std::size_t> cells;    // c_0..c_N
    double cost = 0.0;
    MpcStatus status = MpcStatus::Optimal;
    double solve_time = 0.0;
    long explored_sequences = 0;
    long qp_solves = 0;
};

struct MiqpOptions {
    double state_tol = 1e-6;
    std::ostream* trace = nullptr; // one JSON object per solve
};

/// Exact branch and bound over cell sequences (depth first, children ordered
/// by their prefix QP value, pruned against the incumbent).
MpcSolution solve_miqp(const MiqpInstance& instance, const MiqpOptions& options = {});

/// Condensed QP of one cell prefix c_0..c_j (j >= 1): inputs u_0..u_{j-1}
/// bounded by the cells' input boxes, x_i in box(c_i) for i = 1..j.
struct SequenceQp {
    QpResult qp;
    std::vector<Vec> x; // x_0..x_j
    std::vector<Vec> u;
    double cost = 0.0;
    bool feasible = false;
};
SequenceQp solve_sequence(const MiqpInstance& instance, const std::vector<std::size_t>& cells,
                          double state_tol = 1e-6);

/// Build, solve and enforce the certified-input contract (u0 is clamped into
/// the policy ball; the action input u_a is used when no sequence is feasible).
MpcSolution mpc_control(const MpcContext& ctx, const Vec& x, const MiqpOptions& options = {});

} // namespace imdpmpc
