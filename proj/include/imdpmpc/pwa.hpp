#pragma once

#include "imdpmpc/abstraction.hpp"
#include "imdpmpc/synthesis.hpp"

#include <vector>

namespace imdpmpc {

/// x' ~= A x + B u + c, valid on one partition cell.
struct AffineModel {
    Mat A;
    Mat B;
    Vec c;
    std::size_t validity_cell = 0;

    Vec predict(const Vec& x, const Vec& u) const { return A * x + B * u + c; }
};

/// First-order expansion of the noise-free map at (x_bar, u_bar). Wrapped
/// dimensions use the unwrapped chart around x_bar.
AffineModel linearize(const SystemModel& model, const Vec& x_bar, const Vec& u_bar);

/// One model per interior cell, expanded at (cell center, input u_a of the
/// policy action in that cell).
std::vector<AffineModel> pwa_table(const SystemModel& model, const Partition& partition, const ActionSet& actions,
                                   const RobustPolicy& policy, int threads = 1);

/// Central finite-difference Jacobians of the unwrapped noise-free map.
Jacobians finite_difference_jacobians(const SystemModel& model, const Vec& x, const Vec& u, double h = 1e-6);

} // namespace imdpmpc
