#include "imdpmpc/partition.hpp"

#include <algorithm>
#include <cmath>

namespace imdpmpc {

namespace {

// Index of the edge that coincides with v, or -1.
int aligned_edge(const std::vector<double>& edges, double v) {
    const double span = edges.back() - edges.front();
    const double tol = 1e-9 * std::max(1.0, span);
    for (std::size_t k = 0; k < edges.size(); ++k) {
        if (std::abs(edges[k] - v) <= tol) {
            return static_cast<int>(k);
        }
    }
    return -1;
}

// Range of cells [first, last) covered by [lo, hi] (already clipped to the
// state box); throws when the interval is not edge-aligned.
std::pair<int, int> aligned_range(const std::vector<double>& edges, double lo, double hi, int dim,
                                  const char* what) {
    const int a = aligned_edge(edges, lo);
    const int b = aligned_edge(edges, hi);
    if (a < 0 || b < 0) {
        throw LabelAlignmentError(std::string(what) + " boundary in dimension " + std::to_string(dim) +
                                  " falls strictly inside a partition cell");
    }
    return {a, b};
}

} // namespace

Partition::Partition(const SystemModel& model, std::vector<int> counts)
    : counts_(std::move(counts)), state_box_(model.state_box), wrap_dims_(model.wrap_dims) {
    if (static_cast<int>(counts_.size()) != model.n_x) {
        throw ContractViolation("build_partition: need one count per state dimension");
    }
    num_cells_ = 1;
    for (int c : counts_) {
        if (c < 1) {
            throw ContractViolation("build_partition: counts must be >= 1");
        }
        num_cells_ *= static_cast<std::size_t>(c);
    }
    const int n = dim();
    edges_.resize(n);
    strides_.assign(n, 1);
    for (int d = n - 2; d >= 0; --d) {
        strides_[d] = strides_[d + 1] * static_cast<std::size_t>(counts_[d + 1]);
    }
    for (int d = 0; d < n; ++d) {
        const double lo = state_box_.lo(d);
        const double hi = state_box_.hi(d);
        auto& e = edges_[d];
        e.resize(counts_[d] + 1);
        for (int k = 0; k <= counts_[d]; ++k) {
            e[k] = lo + (hi - lo) * static_cast<double>(k) / counts_[d];
        }
        e.front() = lo;
        e.back() = hi;
    }

    labels_.assign(num_cells_ + 1, Label::Neutral);
    labels_[num_cells_] = Label::Unsafe;

    auto mark = [&](const Box& box, Label label, const char* what) {
        const auto clipped = box.intersect(state_box_);
        if (!clipped) {
            return;
        }
        std::vector<std::pair<int, int>> ranges(n);
        for (int d = 0; d < n; ++d) {
            ranges[d] = aligned_range(edges_[d], clipped->lo(d), clipped->hi(d), d, what);
            if (ranges[d].first == ranges[d].second) {
                return; // zero-volume after clipping
            }
        }
        std::vector<int> idx(n);
        for (int d = 0; d < n; ++d) idx[d] = ranges[d].first;
        while (true) {
            const std::size_t i = linear_index(idx);
            if (labels_[i] != Label::Neutral && labels_[i] != label) {
                throw LabelAlignmentError("cell " + std::to_string(i) + " is both goal and unsafe");
            }
            labels_[i] = label;
            int d = n - 1;
            while (d >= 0) {
                if (++idx[d] < ranges[d].second) break;
                idx[d] = ranges[d].first;
                --d;
            }
            if (d < 0) break;
        }
    };
    for (const auto& u : model.unsafe_boxes) {
        mark(u, Label::Unsafe, "unsafe");
    }
    mark(model.goal_box, Label::Goal, "goal");
    for (std::size_t i = 0; i < num_cells_; ++i) {
        if (labels_[i] == Label::Goal) goal_cells_.push_back(i);
    }
}

int Partition::locate_dim(int d, double x) const {
    const auto& e = edges_[d];
    if (!(x >= e.front() && x <= e.back())) {
        return -1;
    }
    const int n = counts_[d];
    int k = static_cast<int>(std::floor((x - e.front()) / (e.back() - e.front()) * n));
    k = std::clamp(k, 0, n - 1);
    while (k > 0 && x < e[k]) --k;
    while (k < n - 1 && x >= e[k + 1]) ++k;
    return k;
}

std::size_t Partition::locate(const Vec& x) const {
    require_dim(x, dim(), "locate");
    std::size_t idx = 0;
    for (int d = 0; d < dim(); ++d) {
        const int k = locate_dim(d, x[d]);
        if (k < 0) {
            return outside();
        }
        idx += strides_[d] * static_cast<std::size_t>(k);
    }
    return idx;
}

std::vector<int> Partition::multi_index(std::size_t i) const {
    std::vector<int> idx(dim());
    for (int d = 0; d < dim(); ++d) {
        idx[d] = static_cast<int>(i / strides_[d]);
        i %= strides_[d];
    }
    return idx;
}

std::size_t Partition::linear_index(const std::vector<int>& idx) const {
    std::size_t i = 0;
    for (int d = 0; d < dim(); ++d) i += strides_[d] * static_cast<std::size_t>(idx[d]);
    return i;
}

std::pair<Vec, Vec> Partition::cell_bounds(std::size_t i) const {
    if (i >= num_cells_) {
        throw ContractViolation("cell_bounds: the outside cell is unbounded");
    }
    const auto idx = multi_index(i);
    Vec lo(dim()), hi(dim());
    for (int d = 0; d < dim(); ++d) {
        lo[d] = edges_[d][idx[d]];
        hi[d] = edges_[d][idx[d] + 1];
    }
    return {lo, hi};
}

Box Partition::cell_box(std::size_t i) const {
    auto [lo, hi] = cell_bounds(i);
    return Box(std::move(lo), std::move(hi));
}

Vec Partition::cell_center(std::size_t i) const {
    const auto [lo, hi] = cell_bounds(i);
    return 0.5 * (lo + hi);
}

std::vector<std::size_t> Partition::unsafe_cells() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i <= num_cells_; ++i) {
        if (labels_[i] == Label::Unsafe) out.push_back(i);
    }
    return out;
}

} // namespace imdpmpc
