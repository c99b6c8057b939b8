#include "imdpmpc/pwa.hpp"
#include "imdpmpc/qp.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace imdpmpc;

namespace {

Mat random_pd(std::mt19937_64& rng, int n, double ridge) {
    std::normal_distribution<double> N(0.0, 1.0);
    Mat M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = N(rng);
    return M * M.transpose() + ridge * Mat::Identity(n, n);
}

double objective(const Mat& H, const Vec& g, const Vec& x) { return 0.5 * x.dot(H * x) + g.dot(x); }

// Every lower / upper / free pattern: fix the bound coordinates, solve the
// free block in closed form, keep the best feasible point.
double box_enumeration(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi) {
    const int n = static_cast<int>(g.size());
    int total = 1;
    for (int i = 0; i < n; ++i) total *= 3;
    double best = 1e300;
    for (int code = 0; code < total; ++code) {
        Vec x = Vec::Zero(n);
        std::vector<int> freev;
        int c = code;
        for (int i = 0; i < n; ++i, c /= 3) {
            if (c % 3 == 0) x[i] = lo[i];
            else if (c % 3 == 1) x[i] = hi[i];
            else freev.push_back(i);
        }
        const int m = static_cast<int>(freev.size());
        if (m > 0) {
            Mat Hf(m, m);
            Vec rhs(m);
            for (int a = 0; a < m; ++a) {
                rhs[a] = -g[freev[a]];
                for (int i = 0; i < n; ++i) {
                    if (std::find(freev.begin(), freev.end(), i) == freev.end()) rhs[a] -= H(freev[a], i) * x[i];
                }
                for (int b = 0; b < m; ++b) Hf(a, b) = H(freev[a], freev[b]);
            }
            const Vec xf = Hf.fullPivLu().solve(rhs);
            for (int a = 0; a < m; ++a) x[freev[a]] = xf[a];
        }
        if (((x - lo).array() < -1e-12).any() || ((x - hi).array() > 1e-12).any()) continue;
        best = std::min(best, objective(H, g, x));
    }
    return best;
}

// Enumerate working sets of size <= n among the rows of [A; I; -I], solve
// the equality-constrained KKT system, keep the best feasible point.
double kkt_enumeration(const Mat& H, const Vec& g, const Mat& A, const Vec& b, const Vec& lo, const Vec& hi,
                       bool& any_feasible) {
    const int n = static_cast<int>(g.size());
    Mat C(A.rows() + 2 * n, n);
    Vec d(A.rows() + 2 * n);
    C << A, Mat::Identity(n, n), -Mat::Identity(n, n);
    d << b, hi, -lo;
    const int m = static_cast<int>(C.rows());
    double best = 1e300;
    any_feasible = false;
    for (long mask = 0; mask < (1L << m); ++mask) {
        std::vector<int> w;
        for (int i = 0; i < m; ++i)
            if (mask >> i & 1) w.push_back(i);
        if (static_cast<int>(w.size()) > n) continue;
        const int k = static_cast<int>(w.size());
        Mat K = Mat::Zero(n + k, n + k);
        Vec r(n + k);
        K.topLeftCorner(n, n) = H;
        r.head(n) = -g;
        for (int j = 0; j < k; ++j) {
            K.block(n + j, 0, 1, n) = C.row(w[j]);
            K.block(0, n + j, n, 1) = C.row(w[j]).transpose();
            r[n + j] = d[w[j]];
        }
        Eigen::FullPivLU<Mat> lu(K);
        if (lu.rank() < n + k) continue;
        const Vec sol = lu.solve(r);
        const Vec x = sol.head(n);
        if (((C * x - d).array() > 1e-9).any()) continue;
        any_feasible = true;
        best = std::min(best, objective(H, g, x));
    }
    return best;
}

} // namespace

TEST_CASE("box QP closed-form examples") {
    for (int n : {1, 3, 6}) {
        const Mat H = Mat::Identity(n, n);
        const Vec lo = Vec::Constant(n, -1.0), hi = Vec::Constant(n, 1.0);
        const auto a = solve_box_qp(H, Vec::Zero(n), lo, hi);
        CHECK(a.x.norm() < 1e-12);
        CHECK(a.value == doctest::Approx(0.0));
        const auto b = solve_box_qp(H, Vec::Constant(n, -2.0), lo, hi);
        CHECK((b.x - Vec::Ones(n)).norm() < 1e-10);
        CHECK(b.value == doctest::Approx(-1.5 * n));
        CHECK(b.feasible);
    }
}

TEST_CASE("box QP matches 3^6 active-set enumeration") {
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    for (int t = 0; t < 200; ++t) {
        // every fourth Hessian is only semidefinite
        Mat H = random_pd(rng, 6, 0.05);
        if (t % 4 == 0) {
            Eigen::SelfAdjointEigenSolver<Mat> es(H);
            Vec ev = es.eigenvalues();
            ev[0] = 0.0;
            H = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
            H = 0.5 * (H + H.transpose());
        }
        Vec g(6), lo(6), hi(6);
        for (int i = 0; i < 6; ++i) {
            g[i] = U(rng) * 3;
            lo[i] = U(rng);
            hi[i] = lo[i] + std::abs(U(rng));
        }
        if (t % 10 == 0) hi[2] = lo[2]; // a fixed coordinate
        const auto r = solve_box_qp(H, g, lo, hi);
        const double ref = box_enumeration(H, g, lo, hi);
        CAPTURE(t);
        CHECK(r.value - ref < 1e-7);
        CHECK(r.value - ref > -1e-7);
        CHECK(((r.x - lo).array() >= 0.0).all());
        CHECK(((r.x - hi).array() <= 0.0).all());
    }
}

TEST_CASE("dual active-set QP matches KKT enumeration") {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    int feasible = 0, infeasible = 0;
    for (int t = 0; t < 300; ++t) {
        const int n = 3;
        const Mat H = random_pd(rng, n, 0.1);
        Vec g(n), lo(n), hi(n);
        for (int i = 0; i < n; ++i) {
            g[i] = U(rng) * 4;
            lo[i] = -1.0 - std::abs(U(rng));
            hi[i] = 1.0 + std::abs(U(rng));
        }
        Mat A(3, n);
        Vec b(3);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < n; ++j) A(i, j) = U(rng);
            b[i] = U(rng);
        }
        const auto r = solve_qp(H, g, A, b, lo, hi);
        bool ref_feasible = false;
        const double ref = kkt_enumeration(H, g, A, b, lo, hi, ref_feasible);
        CAPTURE(t);
        CHECK(r.feasible == ref_feasible);
        if (ref_feasible) {
            ++feasible;
            CHECK(std::abs(r.value - ref) < 1e-8 * (1.0 + std::abs(ref)));
            CHECK(((A * r.x - b).array() <= 1e-8).all());
        } else {
            ++infeasible;
        }
    }
    CHECK(feasible > 100);
    CHECK(infeasible > 0);
}

TEST_CASE("fixed variables are eliminated") {
    const Mat H = Mat::Identity(2, 2);
    const Vec g{{-1.0, -1.0}};
    const Mat A = Mat::Zero(0, 2);
    const Vec b(0);
    const auto r = solve_qp(H, g, A, b, Vec{{0.3, -5.0}}, Vec{{0.3, 5.0}});
    CHECK(r.feasible);
    CHECK(r.x[0] == 0.3);
    CHECK(r.x[1] == doctest::Approx(1.0));
}

TEST_CASE("power iteration finds the top eigenvalue") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 20; ++t) {
        const Mat H = random_pd(rng, 8, 0.0);
        const double ref = Eigen::SelfAdjointEigenSolver<Mat>(H).eigenvalues().maxCoeff();
        const double L = power_iteration(H);
        CHECK(L >= ref * (1 - 1e-6));
        CHECK(L <= ref * 1.05); // may overestimate slightly, never much
    }
}

TEST_CASE("linearization is exact on affine models") {
    const auto m = make_double_integrator();
    const auto a = linearize(m, Vec{{3.0, -2.0}}, Vec{{1.5}});
    CHECK(a.A == Mat{{1.0, 1.0}, {0.0, 1.0}});
    CHECK(a.B == Mat{{0.5}, {1.0}});
    CHECK(a.c.norm() == 0.0);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> U(-20.0, 20.0);
    for (int i = 0; i < 100; ++i) {
        const Vec x{{U(rng), U(rng)}};
        const Vec u{{U(rng) / 4}};
        CHECK((a.predict(x, u) - deterministic_mean(m, x, u)).norm() < 1e-12);
    }
}

TEST_CASE("linearization matches finite differences on every benchmark") {
    std::mt19937_64 rng(6);
    for (const auto& m : {make_double_integrator(), make_mountain_car(), make_dubins()}) {
        CAPTURE(m.name);
        for (int t = 0; t < 1000; ++t) {
            Vec x(m.n_x), u(m.n_u);
            for (int i = 0; i < m.n_x; ++i)
                x[i] = std::uniform_real_distribution<double>(m.state_box.lo(i), m.state_box.hi(i))(rng);
            for (int i = 0; i < m.n_u; ++i)
                u[i] = std::uniform_real_distribution<double>(m.input_box.lo(i), m.input_box.hi(i))(rng);
            const auto lin = linearize(m, x, u);
            const auto fd = finite_difference_jacobians(m, x, u);
            const double sa = std::max(1.0, lin.A.cwiseAbs().maxCoeff());
            const double sb = std::max(1e-3, lin.B.cwiseAbs().maxCoeff());
            CHECK((lin.A - fd.A).cwiseAbs().maxCoeff() / sa < 1e-5);
            CHECK((lin.B - fd.B).cwiseAbs().maxCoeff() / sb < 1e-5);
            // Taylor identity at the expansion point (angles unwrapped)
            const Vec y = deterministic_mean(m, x, u);
            Vec p = lin.predict(x, u);
            for (int d : m.wrap_dims) p[d] = wrap_angle(p[d]);
            CHECK((p - y).norm() < 1e-9);
        }
    }
    // dx'/dtheta and dy'/dtheta at theta = 0, speed 1
    const auto d = linearize(make_dubins(), Vec{{0.0, 0.0, 0.0}}, Vec{{0.0, 1.0}});
    CHECK(d.A(0, 2) == doctest::Approx(0.0));
    CHECK(d.A(1, 2) == doctest::Approx(1.0));
}

TEST_CASE("PWA table: one model per cell, shared on affine systems") {
    const auto m = make_double_integrator();
    const Partition part(m, {21, 21});
    const auto actions = make_action_set(m, {21}, Vec::Constant(1, 0.5));
    RobustPolicy pol;
    pol.action.assign(part.num_states(), 3);
    const auto table = pwa_table(m, part, actions, pol);
    REQUIRE(table.size() == part.num_cells());
    for (std::size_t i = 0; i < table.size(); ++i) {
        CHECK(table[i].A == table[0].A);
        CHECK(table[i].B == table[0].B);
        CHECK(table[i].c == table[0].c);
        CHECK(table[i].validity_cell == i);
    }
}
