#pragma once

#include "imdpmpc/dynamics.hpp"
#include "imdpmpc/partition.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

namespace imdpmpc {

class InfeasibleAmbiguitySet : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Abstract actions: L-infinity balls of a common radius around a uniform
/// grid of input centers, clipped to the input box.
struct ActionSet {
    std::vector<Vec> centers;
    Vec radius;
    std::vector<Box> balls;

    std::size_t size() const { return centers.size(); }
};

/// counts[j] centers per input dimension, spanning the input box end to end
/// (a single center sits at the box midpoint).
ActionSet make_action_set(const SystemModel& model, const std::vector<int>& counts, const Vec& radius);

/// B(u_a, eps) intersected with the input box. Independent of the state.
inline const Box& interface_set(const ActionSet& actions, std::size_t a) { return actions.balls.at(a); }

struct ProbabilityInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Bounds on the probability that mean + w lands in `target` along one
/// dimension, over all means in `mean` (w ~ N(0, sigma^2); sigma = 0 is a
/// noise-free dimension using half-open cell semantics with `closed_top`
/// marking the topmost cell). Wrapped dimensions measure circular distance.
ProbabilityInterval dimension_factor(Interval mean, Interval target, double sigma, bool wrapped, bool closed_top);

/// Interval [P_lo, P_hi] for (cell s, ball, target cell), target may be the
/// outside cell.
ProbabilityInterval transition_interval(const SystemModel& model, const Partition& partition, std::size_t s,
                                        const Box& ball, std::size_t target);

struct Transition {
    std::uint32_t target;
    double lo;
    double hi;
};

/// Finite IMDP with interval transitions in a compressed row layout: states
/// own a contiguous block of rows (enabled actions), rows own a contiguous
/// block of transitions.
class Imdp {
public:
    Imdp() = default;
    Imdp(std::size_t num_states, std::size_t num_actions, std::vector<Label> labels, std::size_t initial_state);

    /// Appends a row to the state currently being filled; states are filled
    /// in index order and closed by finish_state().
    void add_row(std::uint32_t action, std::span<const Transition> transitions);
    void finish_state();

    std::size_t num_states() const { return labels_.size(); }
    std::size_t num_actions() const { return num_actions_; }
    std::size_t num_rows() const { return row_action_.size(); }
    std::size_t num_transitions() const { return entries_.size(); }
    std::size_t initial_state() const { return initial_state_; }
    Label label(std::size_t s) const { return labels_[s]; }
    const std::vector<Label>& labels() const { return labels_; }

    std::size_t row_begin(std::size_t s) const { return state_begin_[s]; }
    std::size_t row_end(std::size_t s) const { return state_begin_[s + 1]; }
    std::uint32_t row_action(std::size_t row) const { return row_action_[row]; }
    std::span<const Transition> row(std::size_t r) const {
        return {entries_.data() + row_offset_[r], entries_.data() + row_offset_[r + 1]};
    }
    /// Transitions of (s, action id); empty span when the action is not enabled.
    std::span<const Transition> transitions(std::size_t s, std::uint32_t action) const;

    /// Checks interval validity and nonempty ambiguity sets; throws
    /// InfeasibleAmbiguitySet or ContractViolation.
    void validate(double tol = 1e-9) const;

    /// Explicit-state text export: header lines, one `label` line per
    /// non-neutral state, then `s a s' p_lo p_hi` per transition with 17
    /// significant digits.
    void write(std::ostream& os) const;

private:
    std::size_t num_actions_ = 0;
    std::size_t initial_state_ = 0;
    std::vector<Label> labels_;
    std::vector<std::size_t> state_begin_{0};
    std::vector<std::uint32_t> row_action_;
    std::vector<std::size_t> row_offset_{0};
    std::vector<Transition> entries_;
};

struct AbstractionOptions {
    /// Targets whose upper bound falls below this are dropped; their mass is
    /// credited to the outside cell's upper bound.
    double prune_threshold = 1e-8;
    /// Candidate targets: cells within this many noise std of the mean image.
    double window_sigmas = 6.0;
    int threads = 1;
};

Imdp build_imdp(const SystemModel& model, const Partition& partition, const ActionSet& actions,
                const AbstractionOptions& options = {});

const char* to_string(Label label);

} // namespace imdpmpc
