#pragma once

#include "imdpmpc/box.hpp"

namespace imdpmpc {

struct QpResult {
    Vec x;
    double value = 0.0;
    bool feasible = false;
    int iterations = 0;
};

struct BoxQpOptions {
    double tol = 1e-8; // projected-gradient norm
    int max_iters = 10000;
};

/// min 1/2 x'Hx + g'x  s.t.  lo <= x <= hi, by accelerated projected gradient
/// with step 1/L (L from power iteration). H must be PSD.
QpResult solve_box_qp(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi, const BoxQpOptions& options = {});

/// min 1/2 x'Hx + g'x  s.t.  A x <= b, lo <= x <= hi, solved exactly by the
/// Goldfarb-Idnani dual active-set method. Variables with lo == hi are
/// eliminated first; H restricted to the free variables must be PD (a tiny
/// ridge is added otherwise). feasible = false when the constraints are
/// inconsistent.
QpResult solve_qp(const Mat& H, const Vec& g, const Mat& A, const Vec& b, const Vec& lo, const Vec& hi);

/// Largest eigenvalue of a PSD matrix by power iteration.
double power_iteration(const Mat& H, int iters = 200);

} // namespace imdpmpc
