#include "imdpmpc/mpc.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

namespace imdpmpc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Interval image of A * from + B * input + c.
Box affine_image(const AffineModel& m, const Box& from, const Box& input) {
    const auto n = m.A.rows();
    Vec lo = m.c;
    Vec hi = m.c;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < m.A.cols(); ++j) {
            const double a = m.A(i, j);
            lo[i] += a >= 0 ? a * from.lo(j) : a * from.hi(j);
            hi[i] += a >= 0 ? a * from.hi(j) : a * from.lo(j);
        }
        for (Eigen::Index j = 0; j < m.B.cols(); ++j) {
            const double b = m.B(i, j);
            lo[i] += b >= 0 ? b * input.lo(j) : b * input.hi(j);
            hi[i] += b >= 0 ? b * input.hi(j) : b * input.lo(j);
        }
    }
    return Box(lo, hi);
}

std::vector<double> to_vector(const Vec& v) { return {v.data(), v.data() + v.size()}; }

} // namespace

Vec target_point(const Partition& partition, const Vec& x) {
    const auto& goals = partition.goal_cells();
    if (goals.empty()) {
        throw ContractViolation("target_point: no goal cells");
    }
    require_dim(x, partition.dim(), "target_point");
    double best = kInf;
    std::size_t arg = goals.front();
    for (std::size_t c : goals) {
        const Vec center = partition.cell_center(c);
        double d2 = 0.0;
        for (int d = 0; d < partition.dim(); ++d) {
            double diff = x[d] - center[d];
            if (std::find(partition.wrap_dims().begin(), partition.wrap_dims().end(), d) !=
                partition.wrap_dims().end()) {
                diff = wrap_angle(diff);
            }
            d2 += diff * diff;
        }
        if (d2 < best) {
            best = d2;
            arg = c;
        }
    }
    return partition.cell_center(arg);
}

Box region_input_box(const MpcContext& ctx, std::size_t cell) {
    if (ctx.partition->is_goal(cell)) return ctx.model->input_box;
    return interface_set(*ctx.actions, ctx.policy->action.at(cell));
}

std::vector<std::size_t> successor_cells(const MpcContext& ctx, std::size_t cell, const Box& from) {
    const Partition& part = *ctx.partition;
    const auto image = affine_image((*ctx.pwa).at(cell), from, region_input_box(ctx, cell)).intersect(part.state_box());
    if (!image) return {};
    const int n = part.dim();
    std::vector<int> first(n), last(n);
    for (int d = 0; d < n; ++d) {
        const auto& e = part.edges(d);
        // Closed cells: k with e[k] <= hi and e[k+1] >= lo.
        first[d] = static_cast<int>(std::lower_bound(e.begin() + 1, e.end(), image->lo(d)) - e.begin()) - 1;
        last[d] = static_cast<int>(std::upper_bound(e.begin(), e.end() - 1, image->hi(d)) - e.begin()) - 1;
        first[d] = std::clamp(first[d], 0, part.counts()[d] - 1);
        last[d] = std::clamp(last[d], 0, part.counts()[d] - 1);
    }
    std::vector<std::size_t> out;
    std::vector<int> idx = first;
    while (true) {
        const std::size_t c = part.linear_index(idx);
        if (!part.is_unsafe(c)) out.push_back(c);
        int d = n - 1;
        while (d >= 0) {
            if (++idx[d] <= last[d]) break;
            idx[d] = first[d];
            --d;
        }
        if (d < 0) break;
    }
    return out;
}

MiqpInstance build_miqp(const MpcContext& ctx, const Vec& x, const Vec& reference) {
    if (!ctx.model || !ctx.partition || !ctx.actions || !ctx.policy || !ctx.pwa) {
        throw ContractViolation("build_miqp: incomplete context");
    }
    if (ctx.horizon < 1) throw ContractViolation("build_miqp: horizon must be >= 1");
    const Partition& part = *ctx.partition;
    const std::size_t start = part.locate(x);
    if (start == part.outside() || part.is_terminal(start)) {
        throw ContractViolation("build_miqp: state is not in a neutral cell");
    }
    MiqpInstance inst;
    inst.horizon = ctx.horizon;
    inst.x0 = x;
    inst.reference = reference;
    inst.Q = ctx.Q;
    inst.R = ctx.R;
    inst.start_cell = start;

    std::set<std::size_t> all{start};
    std::set<std::size_t> level;
    for (std::size_t c : successor_cells(ctx, start, Box::point(x))) level.insert(c);
    for (int j = 1; j <= ctx.horizon; ++j) {
        all.insert(level.begin(), level.end());
        if (j == ctx.horizon) break;
        std::set<std::size_t> next;
        for (std::size_t c : level) {
            for (std::size_t s : successor_cells(ctx, c, part.cell_box(c))) next.insert(s);
        }
        level.swap(next);
    }
    inst.candidate_cells.assign(all.begin(), all.end());
    for (std::size_t c : inst.candidate_cells) {
        inst.regions.emplace(c, RegionData{part.cell_box(c), region_input_box(ctx, c), (*ctx.pwa).at(c)});
    }
    return inst;
}

double MiqpInstance::cost(const std::vector<Vec>& x, const std::vector<Vec>& u) const {
    double j = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) {
        const Vec e = reference - x[i];
        j += e.dot(Q * e);
    }
    for (const auto& ui : u) j += ui.dot(R * ui);
    return j;
}

MiqpAssignment MiqpInstance::assignment(const std::vector<std::size_t>& cells, const std::vector<Vec>& x,
                                        const std::vector<Vec>& u) const {
    MiqpAssignment a;
    a.x = x;
    a.u = u;
    const auto K = candidate_cells.size();
    const auto n = x0.size();
    for (std::size_t j = 0; j < x.size(); ++j) {
        std::vector<double> delta(K, 0.0);
        std::vector<Vec> z(K, Vec::Zero(n));
        for (std::size_t i = 0; i < K; ++i) {
            if (candidate_cells[i] == cells.at(j)) {
                delta[i] = 1.0;
                z[i] = x[j];
            }
        }
        a.delta.push_back(std::move(delta));
        a.z.push_back(std::move(z));
    }
    return a;
}

bool MiqpInstance::satisfies(const MiqpAssignment& a, double tol) const {
    const auto N = static_cast<std::size_t>(horizon);
    const auto K = candidate_cells.size();
    if (a.x.size() != N + 1 || a.u.size() != N || a.delta.size() != N + 1 || a.z.size() != N + 1) return false;
    if ((a.x[0] - x0).cwiseAbs().maxCoeff() > tol) return false;
    // global big-M bounds: hull of the candidate cells
    Vec glo = regions.at(candidate_cells.front()).cell.lo();
    Vec ghi = regions.at(candidate_cells.front()).cell.hi();
    for (std::size_t c : candidate_cells) {
        glo = glo.cwiseMin(regions.at(c).cell.lo());
        ghi = ghi.cwiseMax(regions.at(c).cell.hi());
    }
    std::vector<std::size_t> selected(N + 1);
    for (std::size_t j = 0; j <= N; ++j) {
        if (a.delta[j].size() != K || a.z[j].size() != K) return false;
        double sum = 0.0;
        int ones = 0;
        Vec zsum = Vec::Zero(x0.size());
        for (std::size_t i = 0; i < K; ++i) {
            const double d = a.delta[j][i];
            if (std::abs(d) > tol && std::abs(d - 1.0) > tol) return false; // binary
            sum += d;
            if (d > 0.5) {
                ++ones;
                selected[j] = candidate_cells[i];
            }
            const Box& cell = regions.at(candidate_cells[i]).cell;
            const Vec& z = a.z[j][i];
            // m_i d <= z <= M_i d ;  x - M (1 - d) <= z <= x - m (1 - d)
            if (((cell.lo() * d - z).array() > tol).any()) return false;
            if (((z - cell.hi() * d).array() > tol).any()) return false;
            if (((a.x[j] - ghi * (1.0 - d) - z).array() > tol).any()) return false;
            if (((z - a.x[j] + glo * (1.0 - d)).array() > tol).any()) return false;
            zsum += z;
        }
        if (std::abs(sum - 1.0) > tol || ones != 1) return false;
        if ((zsum - a.x[j]).cwiseAbs().maxCoeff() > tol) return false;
    }
    if (selected[0] != start_cell) return false;
    for (std::size_t j = 0; j < N; ++j) {
        const RegionData& reg = regions.at(selected[j]);
        // sum_i m_a^i d^i <= u <= sum_i M_a^i d^i
        if (!reg.input.contains(a.u[j], tol)) return false;
        if ((reg.model.predict(a.x[j], a.u[j]) - a.x[j + 1]).cwiseAbs().maxCoeff() > tol) return false;
    }
    return true;
}

const char* to_string(MpcStatus status) {
    return status == MpcStatus::Optimal ? "optimal" : "infeasible_fallback";
}

SequenceQp solve_sequence(const MiqpInstance& inst, const std::vector<std::size_t>& cells, double state_tol) {
    if (cells.size() < 2 || cells.front() != inst.start_cell) {
        throw ContractViolation("solve_sequence: need c_0 = start cell and at least one step");
    }
    const auto j = cells.size() - 1;
    const auto nx = inst.x0.size();
    const auto nu = inst.R.rows();
    const auto nv = static_cast<Eigen::Index>(j) * nu;
    std::vector<Vec> F(j + 1);
    std::vector<Mat> G(j + 1);
    F[0] = inst.x0;
    G[0] = Mat::Zero(nx, nv);
    Vec lo(nv), hi(nv);
    for (std::size_t i = 0; i < j; ++i) {
        const RegionData& reg = inst.region(cells[i]);
        F[i + 1] = reg.model.A * F[i] + reg.model.c;
        G[i + 1] = reg.model.A * G[i];
        G[i + 1].middleCols(static_cast<Eigen::Index>(i) * nu, nu) += reg.model.B;
        lo.segment(static_cast<Eigen::Index>(i) * nu, nu) = reg.input.lo();
        hi.segment(static_cast<Eigen::Index>(i) * nu, nu) = reg.input.hi();
    }
    Mat H = Mat::Zero(nv, nv);
    Vec g = Vec::Zero(nv);
    for (std::size_t i = 1; i <= j; ++i) {
        H += G[i].transpose() * inst.Q * G[i];
        g += G[i].transpose() * (inst.Q * (F[i] - inst.reference));
        H.block(static_cast<Eigen::Index>(i - 1) * nu, static_cast<Eigen::Index>(i - 1) * nu, nu, nu) += inst.R;
    }
    H = 2.0 * H;
    g = 2.0 * g;
    H = 0.5 * (H + H.transpose());

    auto states_of = [&](const Vec& U) {
        std::vector<Vec> x(j + 1);
        for (std::size_t i = 0; i <= j; ++i) x[i] = F[i] + G[i] * U;
        return x;
    };
    auto violation = [&](const std::vector<Vec>& x) {
        double v = 0.0;
        for (std::size_t i = 1; i <= j; ++i) {
            const Box& cell = inst.region(cells[i]).cell;
            v = std::max(v, (cell.lo() - x[i]).maxCoeff());
            v = std::max(v, (x[i] - cell.hi()).maxCoeff());
        }
        return v;
    };
    auto inputs_of = [&](const Vec& U) {
        std::vector<Vec> u(j);
        for (std::size_t i = 0; i < j; ++i) u[i] = U.segment(static_cast<Eigen::Index>(i) * nu, nu);
        return u;
    };

    SequenceQp out;
    out.qp = solve_box_qp(H, g, lo, hi);
    auto x = states_of(out.qp.x);
    if (violation(x) > state_tol) {
        Mat A(2 * nx * static_cast<Eigen::Index>(j), nv);
        Vec b(2 * nx * static_cast<Eigen::Index>(j));
        for (std::size_t i = 1; i <= j; ++i) {
            const Box& cell = inst.region(cells[i]).cell;
            const auto r = 2 * nx * static_cast<Eigen::Index>(i - 1);
            A.middleRows(r, nx) = G[i];
            b.segment(r, nx) = cell.hi() - F[i];
            A.middleRows(r + nx, nx) = -G[i];
            b.segment(r + nx, nx) = F[i] - cell.lo();
        }
        out.qp = solve_qp(H, g, A, b, lo, hi);
        if (!out.qp.feasible) return out;
        x = states_of(out.qp.x);
        if (violation(x) > state_tol) return out;
    }
    out.feasible = true;
    out.x = std::move(x);
    out.u = inputs_of(out.qp.x);
    out.cost = inst.cost(out.x, out.u);
    return out;
}

namespace {

class BranchAndBound {
public:
    BranchAndBound(const MiqpInstance& inst, const MiqpOptions& options) : inst_(inst), options_(options) {}

    MpcSolution run() {
        std::vector<std::size_t> prefix{inst_.start_cell};
        dfs(prefix);
        MpcSolution sol;
        sol.explored_sequences = leaves_;
        sol.qp_solves = qp_solves_;
        if (best_cost_ == kInf) {
            sol.status = MpcStatus::InfeasibleFallback;
            sol.u0 = inst_.region(inst_.start_cell).input.center();
            sol.cells = {inst_.start_cell};
            return sol;
        }
        sol.status = MpcStatus::Optimal;
        sol.cost = best_cost_;
        sol.cells = best_cells_;
        sol.predicted_states.assign(best_.x.begin() + 1, best_.x.end());
        sol.predicted_inputs = best_.u;
        sol.u0 = best_.u.front();
        return sol;
    }

private:
    std::vector<std::size_t> children(const std::vector<std::size_t>& prefix) const {
        const std::size_t c = prefix.back();
        const RegionData& reg = inst_.region(c);
        const Box from = prefix.size() == 1 ? Box::point(inst_.x0) : reg.cell;
        const Box image = affine_image(reg.model, from, reg.input);
        std::vector<std::size_t> out;
        for (std::size_t cand : inst_.candidate_cells) {
            if (inst_.region(cand).cell.intersects(image)) out.push_back(cand);
        }
        return out;
    }

    void dfs(std::vector<std::size_t>& prefix) {
        const int depth = static_cast<int>(prefix.size()) - 1;
        struct Child {
            double bound;
            std::size_t cell;
            SequenceQp qp;
        };
        std::vector<Child> kids;
        for (std::size_t c : children(prefix)) {
            prefix.push_back(c);
            SequenceQp sq = solve_sequence(inst_, prefix, options_.state_tol);
            prefix.pop_back();
            ++qp_solves_;
            if (depth + 1 == inst_.horizon) ++leaves_;
            if (!sq.feasible || sq.cost >= best_cost_) continue;
            kids.push_back({sq.cost, c, std::move(sq)});
        }
        std::stable_sort(kids.begin(), kids.end(), [](const Child& a, const Child& b) {
            return a.bound < b.bound || (a.bound == b.bound && a.cell < b.cell);
        });
        for (auto& k : kids) {
            if (k.bound >= best_cost_) break;
            prefix.push_back(k.cell);
            if (depth + 1 == inst_.horizon) {
                best_cost_ = k.bound;
                best_ = std::move(k.qp);
                best_cells_ = prefix;
            } else {
                dfs(prefix);
            }
            prefix.pop_back();
        }
    }

    const MiqpInstance& inst_;
    const MiqpOptions& options_;
    double best_cost_ = kInf;
    SequenceQp best_;
    std::vector<std::size_t> best_cells_;
    long leaves_ = 0;
    long qp_solves_ = 0;
};

} // namespace

MpcSolution solve_miqp(const MiqpInstance& instance, const MiqpOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    BranchAndBound bb(instance, options);
    MpcSolution sol = bb.run();
    sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (options.trace) {
        nlohmann::json j;
        j["x0"] = to_vector(instance.x0);
        j["reference"] = to_vector(instance.reference);
        j["candidates"] = instance.candidate_cells.size();
        j["qp_solves"] = sol.qp_solves;
        j["sequences"] = sol.explored_sequences;
        j["status"] = to_string(sol.status);
        j["cost"] = sol.status == MpcStatus::Optimal ? nlohmann::json(sol.cost) : nlohmann::json();
        j["cells"] = sol.cells;
        j["u0"] = to_vector(sol.u0);
        *options.trace << j.dump() << '\n';
    }
    return sol;
}

MpcSolution mpc_control(const MpcContext& ctx, const Vec& x, const MiqpOptions& options) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t cell = ctx.partition->locate(x);
    const Box& ball = interface_set(*ctx.actions, ctx.policy->action.at(cell));
    MpcSolution sol;
    const MiqpInstance inst = build_miqp(ctx, x, target_point(*ctx.partition, x));
    sol = solve_miqp(inst, options);
    if (sol.status == MpcStatus::InfeasibleFallback) {
        sol.u0 = ctx.actions->centers.at(ctx.policy->action.at(cell));
    }
    sol.u0 = ball.clamp(sol.u0);
    sol.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return sol;
}

} // namespace imdpmpc
