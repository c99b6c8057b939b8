#include "imdpmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace imdpmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi) {
    const auto n = g.size();
    if (H.rows() != n || H.cols() != n || lo.size() != n || hi.size() != n) {
        throw ContractViolation("qp: dimension mismatch");
    }
    if ((lo.array() > hi.array()).any()) {
        throw ContractViolation("qp: lower bound above upper bound");
    }
}

double objective(const Mat& H, const Vec& g, const Vec& x) { return 0.5 * x.dot(H * x) + g.dot(x); }

// Givens helpers in the form used by the Goldfarb-Idnani updates.
struct Givens {
    double c;
    double s;
};

Givens make_givens(double& a, double& b) {
    const double h = std::hypot(a, b);
    if (h == 0.0) return {1.0, 0.0};
    double c = a / h;
    double s = b / h;
    b = 0.0;
    if (c < 0.0) {
        c = -c;
        s = -s;
        a = -h;
    } else {
        a = h;
    }
    return {c, s};
}

// (t1, t2) <- (c t1 + s t2, xny (t1 + new t1) - t2) with xny = s / (1 + c).
void apply_givens(const Givens& gv, double& t1, double& t2) {
    const double xny = gv.s / (1.0 + gv.c);
    const double a = t1;
    const double b = t2;
    t1 = a * gv.c + b * gv.s;
    t2 = xny * (a + t1) - b;
}

class DualActiveSet {
public:
    // Constraints in the form C' x + c0 >= 0.
    DualActiveSet(const Mat& G, const Vec& a, const Mat& C, const Vec& c0) : G_(G), a_(a), C_(C), c0_(c0) {}

    QpResult solve() {
        const auto n = a_.size();
        QpResult out;
        Eigen::LLT<Mat> llt(G_);
        if (llt.info() != Eigen::Success) {
            throw ContractViolation("solve_qp: Hessian is not positive definite");
        }
        const Mat L = llt.matrixL();
        J_ = L.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(n, n));
        R_ = Mat::Zero(n, n);
        x_ = -llt.solve(a_);
        q_ = 0;
        active_.clear();
        u_.resize(0);
        const auto m = C_.cols();
        const double scale = 1.0 + (m > 0 ? C_.cwiseAbs().maxCoeff() : 0.0);
        const double feas_tol = 1e-11 * scale * (1.0 + x_.cwiseAbs().maxCoeff());
        for (int outer = 0; outer < 10 * static_cast<int>(m + n) + 100; ++outer) {
            ++out.iterations;
            Eigen::Index p = -1;
            double worst = 0.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (std::find(active_.begin(), active_.end(), i) != active_.end()) continue;
                const double s = C_.col(i).dot(x_) + c0_[i];
                if (s < worst) {
                    worst = s;
                    p = i;
                }
            }
            if (p < 0 || worst >= -feas_tol) {
                out.feasible = true;
                out.x = x_;
                return out;
            }
            if (!add_violated(p)) {
                out.feasible = false;
                out.x = x_;
                return out;
            }
        }
        out.feasible = false;
        out.x = x_;
        return out;
    }

private:
    // Steps 2-3 of the method for the violated constraint p; false when the
    // problem is infeasible.
    bool add_violated(Eigen::Index p) {
        const auto n = a_.size();
        const Vec np = C_.col(p);
        Vec u_plus(q_ + 1);
        u_plus << u_, 0.0;
        for (int inner = 0; inner < 10 * static_cast<int>(n + C_.cols()) + 100; ++inner) {
            const Vec d = J_.transpose() * np;
            const Vec z = J_.rightCols(n - q_) * d.tail(n - q_);
            Vec r(q_);
            if (q_ > 0) r = R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
            double t1 = kInf;
            int k = -1;
            for (int j = 0; j < q_; ++j) {
                if (r[j] > 0.0) {
                    const double ratio = u_plus[j] / r[j];
                    if (ratio < t1) {
                        t1 = ratio;
                        k = j;
                    }
                }
            }
            double t2 = kInf;
            const double zn = z.dot(np);
            if (z.norm() > 1e-14 && zn > 0.0) {
                t2 = -(np.dot(x_) + c0_[p]) / zn;
            }
            const double t = std::min(t1, t2);
            if (t == kInf) return false;
            if (t2 == kInf) {
                u_plus.head(q_) -= t * r;
                u_plus[q_] += t;
                drop(k, u_plus);
                continue;
            }
            x_ += t * z;
            u_plus.head(q_) -= t * r;
            u_plus[q_] += t;
            if (t == t2) {
                add(d, p);
                u_ = u_plus;
                return true;
            }
            drop(k, u_plus);
        }
        return false;
    }

    void add(Vec d, Eigen::Index p) {
        const auto n = a_.size();
        for (Eigen::Index j = n - 1; j > q_; --j) {
            const Givens gv = make_givens(d[j - 1], d[j]);
            if (gv.s == 0.0 && gv.c == 1.0) continue;
            for (Eigen::Index k = 0; k < n; ++k) apply_givens(gv, J_(k, j - 1), J_(k, j));
        }
        R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
        active_.push_back(p);
        ++q_;
    }

    // Removes the l-th active constraint (also from u_plus, whose last entry
    // belongs to the constraint being added).
    void drop(int l, Vec& u_plus) {
        const auto n = a_.size();
        for (int j = l; j < q_ - 1; ++j) R_.col(j).head(q_) = R_.col(j + 1).head(q_);
        R_.col(q_ - 1).setZero();
        for (int j = l; j < q_ - 1; ++j) {
            const Givens gv = make_givens(R_(j, j), R_(j + 1, j));
            if (gv.s == 0.0 && gv.c == 1.0) continue;
            for (int k = j + 1; k < q_ - 1; ++k) apply_givens(gv, R_(j, k), R_(j + 1, k));
            for (Eigen::Index k = 0; k < n; ++k) apply_givens(gv, J_(k, j), J_(k, j + 1));
        }
        R_.row(q_ - 1).setZero();
        active_.erase(active_.begin() + l);
        Vec shrunk(u_plus.size() - 1);
        for (Eigen::Index i = 0, o = 0; i < u_plus.size(); ++i) {
            if (i != l) shrunk[o++] = u_plus[i];
        }
        u_plus = shrunk;
        Vec u_shrunk(q_ - 1);
        for (int i = 0, o = 0; i < q_; ++i) {
            if (i != l) u_shrunk[o++] = u_[i];
        }
        u_ = u_shrunk;
        --q_;
    }

    const Mat& G_;
    const Vec& a_;
    const Mat& C_;
    const Vec& c0_;
    Mat J_;
    Mat R_;
    Vec x_;
    Vec u_;
    int q_ = 0;
    std::vector<Eigen::Index> active_;
};

} // namespace

double power_iteration(const Mat& H, int iters) {
    const auto n = H.rows();
    if (n == 0) return 0.0;
    Vec v = Vec::Ones(n) / std::sqrt(static_cast<double>(n));
    double lambda = 0.0;
    for (int i = 0; i < iters; ++i) {
        Vec w = H * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        lambda = v.dot(w);
        v = w / norm;
    }
    return std::max(lambda, (H * v).norm());
}

QpResult solve_box_qp(const Mat& H, const Vec& g, const Vec& lo, const Vec& hi, const BoxQpOptions& options) {
    check_problem(H, g, lo, hi);
    const auto n = g.size();
    QpResult out;
    out.feasible = true;
    auto project = [&](const Vec& v) { return v.cwiseMax(lo).cwiseMin(hi); };
    const double L = 1.05 * power_iteration(H);
    if (L <= 1e-300) {
        // Linear objective: each coordinate sits at the bound opposing its gradient.
        out.x = Vec(n);
        for (Eigen::Index i = 0; i < n; ++i) out.x[i] = g[i] > 0.0 ? lo[i] : (g[i] < 0.0 ? hi[i] : project(Vec::Zero(n))[i]);
        out.value = objective(H, g, out.x);
        return out;
    }
    auto pg_norm = [&](const Vec& v) { return (v - project(v - (H * v + g))).norm(); };
    Vec x = project(Vec::Zero(n));
    Vec y = x;
    double t = 1.0;
    for (int it = 1; it <= options.max_iters; ++it) {
        out.iterations = it;
        // Every few steps, guess the active set from x and solve the free block exactly.
        if (it % 8 == 0) {
            const Vec grad = H * x + g;
            std::vector<Eigen::Index> free;
            for (Eigen::Index i = 0; i < n; ++i) {
                const bool at_lo = x[i] <= lo[i] && grad[i] >= 0.0;
                const bool at_hi = x[i] >= hi[i] && grad[i] <= 0.0;
                if (!at_lo && !at_hi) free.push_back(i);
            }
            if (!free.empty()) {
                const auto nf = static_cast<Eigen::Index>(free.size());
                Mat Hf(nf, nf);
                Vec rhs(nf);
                for (Eigen::Index a = 0; a < nf; ++a) {
                    rhs[a] = -grad[free[a]];
                    for (Eigen::Index b = 0; b < nf; ++b) Hf(a, b) = H(free[a], free[b]);
                }
                Eigen::LDLT<Mat> ldlt(Hf);
                if (ldlt.info() == Eigen::Success) {
                    const Vec d = ldlt.solve(rhs);
                    Vec cand = x;
                    for (Eigen::Index a = 0; a < nf; ++a) cand[free[a]] += d[a];
                    cand = project(cand);
                    if (pg_norm(cand) < options.tol) {
                        x = cand;
                        break;
                    }
                }
            }
        }
        const Vec grad_y = H * y + g;
        const Vec x_next = project(y - grad_y / L);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        // Restart the momentum when the objective would increase.
        if (objective(H, g, x_next) > objective(H, g, x)) {
            y = x;
            t = 1.0;
            continue;
        }
        y = x_next + ((t - 1.0) / t_next) * (x_next - x);
        x = x_next;
        t = t_next;
        if (pg_norm(x) < options.tol) break;
    }
    out.x = x;
    out.value = objective(H, g, x);
    return out;
}

QpResult solve_qp(const Mat& H, const Vec& g, const Mat& A, const Vec& b, const Vec& lo, const Vec& hi) {
    check_problem(H, g, lo, hi);
    const auto n = g.size();
    if (A.cols() != n || A.rows() != b.size()) {
        throw ContractViolation("solve_qp: constraint dimension mismatch");
    }
    std::vector<Eigen::Index> free;
    Vec x_fixed = Vec::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (lo[i] == hi[i]) {
            x_fixed[i] = lo[i];
        } else {
            free.push_back(i);
        }
    }
    const auto nf = static_cast<Eigen::Index>(free.size());
    QpResult out;
    if (nf == 0) {
        out.x = x_fixed;
        out.value = objective(H, g, out.x);
        out.feasible = ((A * out.x - b).array() <= 1e-9 * (1.0 + b.cwiseAbs().array())).all();
        return out;
    }
    Mat Hf(nf, nf);
    Vec gf(nf);
    Mat Af(A.rows(), nf);
    for (Eigen::Index i = 0; i < nf; ++i) {
        gf[i] = g[free[i]] + H.row(free[i]).dot(x_fixed);
        Af.col(i) = A.col(free[i]);
        for (Eigen::Index j = 0; j < nf; ++j) Hf(i, j) = H(free[i], free[j]);
    }
    const Vec bf = b - A * x_fixed;
    Eigen::LLT<Mat> check(Hf);
    if (check.info() != Eigen::Success) {
        Hf.diagonal().array() += 1e-10 * (1.0 + Hf.diagonal().cwiseAbs().maxCoeff());
    }
    // C' x + c0 >= 0 with C = [-Af' , I, -I] restricted to finite bounds.
    std::vector<Vec> cols;
    std::vector<double> offs;
    for (Eigen::Index r = 0; r < Af.rows(); ++r) {
        cols.push_back(-Af.row(r).transpose());
        offs.push_back(bf[r]);
    }
    for (Eigen::Index i = 0; i < nf; ++i) {
        const double l = lo[free[i]];
        const double h = hi[free[i]];
        if (std::isfinite(l)) {
            cols.push_back(Vec::Unit(nf, i));
            offs.push_back(-l);
        }
        if (std::isfinite(h)) {
            cols.push_back(-Vec::Unit(nf, i));
            offs.push_back(h);
        }
    }
    Mat C(nf, static_cast<Eigen::Index>(cols.size()));
    Vec c0(static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        C.col(k) = cols[k];
        c0[k] = offs[k];
    }
    DualActiveSet solver(Hf, gf, C, c0);
    const QpResult r = solver.solve();
    out.feasible = r.feasible;
    out.iterations = r.iterations;
    out.x = x_fixed;
    for (Eigen::Index i = 0; i < nf; ++i) out.x[free[i]] = std::clamp(r.x[i], lo[free[i]], hi[free[i]]);
    out.value = objective(H, g, out.x);
    return out;
}

} // namespace imdpmpc
