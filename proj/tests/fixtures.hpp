#pragma once
// Small synthesized systems shared by the controller and simulation tests.

#include "imdpmpc/mpc.hpp"
#include "imdpmpc/synthesis.hpp"

#include <cmath>
#include <set>
#include <vector>

namespace fixture {

using namespace imdpmpc;

// Double integrator on [-10,10]^2 with a 5 x 5 grid; goal is the middle cell.
struct Coarse {
    SystemModel model;
    Partition part;
    ActionSet actions;
    SynthesisResult syn;
    std::vector<AffineModel> pwa;

    explicit Coarse(double eps, double noise = std::sqrt(0.15))
        : model(make_affine("coarse", Mat{{1.0, 1.0}, {0.0, 1.0}}, Mat{{0.5}, {1.0}}, Vec::Zero(2),
                            Box(Vec{{-10.0, -10.0}}, Vec{{10.0, 10.0}}), Box(Vec{{-5.0}}, Vec{{5.0}}),
                            Vec::Constant(2, noise), Box(Vec{{-2.0, -2.0}}, Vec{{2.0, 2.0}}), {},
                            Vec{{-8.0, 0.0}})),
          part(model, {5, 5}),
          actions(make_action_set(model, {21}, Vec::Constant(1, eps))) {
        syn = robust_value_iteration(build_imdp(model, part, actions));
        pwa = pwa_table(model, part, actions, syn.policy);
    }

    MpcContext ctx(Mat Q, Mat R, int N) const {
        MpcContext c;
        c.model = &model;
        c.partition = &part;
        c.actions = &actions;
        c.policy = &syn.policy;
        c.pwa = &pwa;
        c.Q = std::move(Q);
        c.R = std::move(R);
        c.horizon = N;
        return c;
    }

    // Admissible input interval in a cell, rebuilt from the policy.
    std::pair<double, double> input_range(std::size_t cell) const {
        if (part.is_goal(cell)) return {-5.0, 5.0};
        const double c = actions.centers[syn.policy.action[cell]][0];
        const double e = actions.radius[0];
        return {std::max(-5.0, c - e), std::min(5.0, c + e)};
    }
};

// Exact minimum of the tracking cost along a fixed cell sequence, by
// enumerating working sets of the input-bound and state-box constraints.
struct SeqOracle {
    bool feasible = false;
    double cost = 0.0;
};

inline SeqOracle exact_sequence(const Coarse& c, const Vec& x0, const Vec& r, const std::vector<std::size_t>& cells,
                         const Mat& Q, double R) {
    const int N = static_cast<int>(cells.size()) - 1;
    const Mat A{{1.0, 1.0}, {0.0, 1.0}};
    const Vec B{{0.5, 1.0}};
    // x_j = F_j + G_j u
    std::vector<Vec> F(N + 1);
    std::vector<Mat> G(N + 1);
    F[0] = x0;
    G[0] = Mat::Zero(2, N);
    for (int j = 0; j < N; ++j) {
        F[j + 1] = A * F[j];
        G[j + 1] = A * G[j];
        G[j + 1].col(j) += B;
    }
    Mat H = R * Mat::Identity(N, N);
    Vec g = Vec::Zero(N);
    double k0 = 0.0;
    for (int j = 1; j <= N; ++j) {
        H += G[j].transpose() * Q * G[j];
        g += G[j].transpose() * Q * (F[j] - r);
        k0 += (F[j] - r).dot(Q * (F[j] - r));
    }
    // constraints C u <= d
    std::vector<Vec> Cr;
    std::vector<double> d;
    for (int j = 0; j < N; ++j) {
        const auto [lo, hi] = c.input_range(cells[j]);
        Vec e = Vec::Zero(N);
        e[j] = 1.0;
        Cr.push_back(e);
        d.push_back(hi);
        Cr.push_back(-e);
        d.push_back(-lo);
    }
    for (int j = 1; j <= N; ++j) {
        const Box b = c.part.cell_box(cells[j]);
        for (int k = 0; k < 2; ++k) {
            Cr.push_back(G[j].row(k).transpose());
            d.push_back(b.hi(k) - F[j][k]);
            Cr.push_back(-G[j].row(k).transpose());
            d.push_back(F[j][k] - b.lo(k));
        }
    }
    const int m = static_cast<int>(Cr.size());
    SeqOracle out;
    out.cost = 1e300;
    std::vector<int> w;
    // working sets of size 0..N
    auto visit = [&](auto&& self, int start) -> void {
        const int k = static_cast<int>(w.size());
        Mat K = Mat::Zero(N + k, N + k);
        Vec rhs(N + k);
        K.topLeftCorner(N, N) = H;
        rhs.head(N) = -g;
        for (int i = 0; i < k; ++i) {
            K.block(0, N + i, N, 1) = Cr[w[i]];
            K.block(N + i, 0, 1, N) = Cr[w[i]].transpose();
            rhs[N + i] = d[w[i]];
        }
        Eigen::FullPivLU<Mat> lu(K);
        if (lu.rank() == N + k) {
            const Vec u = lu.solve(rhs).head(N);
            bool ok = true;
            for (int i = 0; i < m && ok; ++i) ok = Cr[i].dot(u) <= d[i] + 1e-9;
            if (ok) {
                out.feasible = true;
                out.cost = std::min(out.cost, u.dot(H * u) + 2 * g.dot(u) + k0);
            }
        }
        if (k == N) return;
        for (int i = start; i < m; ++i) {
            w.push_back(i);
            self(self, i + 1);
            w.pop_back();
        }
    };
    visit(visit, 0);
    return out;
}

// Cell sequences realized by a dense grid of inputs, recursively.
inline void grid_sequences(const Coarse& c, const Vec& x, int N, std::vector<std::size_t>& prefix,
                    std::set<std::vector<std::size_t>>& out) {
    if (static_cast<int>(prefix.size()) == N + 1) {
        out.insert(prefix);
        return;
    }
    const auto [lo, hi] = c.input_range(prefix.back());
    const Mat A{{1.0, 1.0}, {0.0, 1.0}};
    const Vec B{{0.5, 1.0}};
    for (int k = 0; k <= 20; ++k) {
        const double u = lo + (hi - lo) * k / 20.0;
        const Vec y = A * x + B * u;
        const std::size_t cell = c.part.locate(y);
        if (cell == c.part.outside() || c.part.is_unsafe(cell)) continue;
        prefix.push_back(cell);
        grid_sequences(c, y, N, prefix, out);
        prefix.pop_back();
    }
}

} // namespace fixture
