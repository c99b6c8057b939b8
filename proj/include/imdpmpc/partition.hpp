#pragma once

#include "imdpmpc/dynamics.hpp"

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace imdpmpc {

class LabelAlignmentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Label : std::uint8_t { Neutral, Goal, Unsafe };

/// Uniform rectangular grid over the state box plus one absorbing cell for
/// everything outside it. Cells are half-open [lo, hi) except the topmost
/// cell of each dimension, which is closed. Linear indices are row-major
/// (last dimension fastest).
class Partition {
public:
    /// Throws LabelAlignmentError when a goal/unsafe boundary falls strictly
    /// inside a cell.
    Partition(const SystemModel& model, std::vector<int> counts);

    int dim() const { return static_cast<int>(counts_.size()); }
    std::size_t num_cells() const { return num_cells_; }
    std::size_t num_states() const { return num_cells_ + 1; }
    std::size_t outside() const { return num_cells_; }
    const std::vector<int>& counts() const { return counts_; }
    const std::vector<double>& edges(int d) const { return edges_[d]; }
    const Box& state_box() const { return state_box_; }

    std::size_t locate(const Vec& x) const;
    /// Index of x along dimension d, or -1 when outside.
    int locate_dim(int d, double x) const;

    std::pair<Vec, Vec> cell_bounds(std::size_t i) const;
    Box cell_box(std::size_t i) const;
    Vec cell_center(std::size_t i) const;

    std::vector<int> multi_index(std::size_t i) const;
    std::size_t linear_index(const std::vector<int>& idx) const;
    std::size_t stride(int d) const { return strides_[d]; }

    Label label(std::size_t i) const { return labels_[i]; }
    bool is_goal(std::size_t i) const { return labels_[i] == Label::Goal; }
    bool is_unsafe(std::size_t i) const { return labels_[i] == Label::Unsafe; }
    bool is_terminal(std::size_t i) const { return labels_[i] != Label::Neutral; }
    const std::vector<std::size_t>& goal_cells() const { return goal_cells_; }
    std::vector<std::size_t> unsafe_cells() const;

    const std::vector<int>& wrap_dims() const { return wrap_dims_; }

private:
    std::vector<int> counts_;
    std::vector<std::vector<double>> edges_;
    std::vector<std::size_t> strides_;
    std::size_t num_cells_ = 0;
    Box state_box_;
    std::vector<Label> labels_;
    std::vector<std::size_t> goal_cells_;
    std::vector<int> wrap_dims_;
};

inline Partition build_partition(const SystemModel& model, std::vector<int> counts) {
    return Partition(model, std::move(counts));
}

} // namespace imdpmpc
