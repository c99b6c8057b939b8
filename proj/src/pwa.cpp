#include "imdpmpc/pwa.hpp"

#include "imdpmpc/parallel.hpp"

namespace imdpmpc {

namespace {

// Noise-free successor on the chart centered at x (no jump across the seam).
Vec unwrapped_mean(const SystemModel& model, const Vec& x, const Vec& u) {
    Vec f = deterministic_mean(model, x, u);
    for (int d : model.wrap_dims) f[d] = x[d] + wrap_angle(f[d] - x[d]);
    return f;
}

} // namespace

AffineModel linearize(const SystemModel& model, const Vec& x_bar, const Vec& u_bar) {
    require_dim(x_bar, model.n_x, "linearize: state");
    require_dim(u_bar, model.n_u, "linearize: input");
    const Jacobians J = mean_jacobians(model, x_bar, u_bar);
    AffineModel out;
    out.A = J.A;
    out.B = J.B;
    out.c = unwrapped_mean(model, x_bar, u_bar) - J.A * x_bar - J.B * u_bar;
    return out;
}

std::vector<AffineModel> pwa_table(const SystemModel& model, const Partition& partition, const ActionSet& actions,
                                   const RobustPolicy& policy, int threads) {
    if (policy.action.size() != partition.num_states()) {
        throw ContractViolation("pwa_table: policy does not match the partition");
    }
    std::vector<AffineModel> table(partition.num_cells());
    parallel_for(0, partition.num_cells(), threads, [&](std::size_t s) {
        table[s] = linearize(model, partition.cell_center(s), actions.centers.at(policy.action[s]));
        table[s].validity_cell = s;
    });
    return table;
}

Jacobians finite_difference_jacobians(const SystemModel& model, const Vec& x, const Vec& u, double h) {
    Jacobians J{Mat(model.n_x, model.n_x), Mat(model.n_x, model.n_u)};
    for (int j = 0; j < model.n_x; ++j) {
        Vec xp = x, xm = x;
        xp[j] += h;
        xm[j] -= h;
        J.A.col(j) = (unwrapped_mean(model, xp, u) - unwrapped_mean(model, xm, u)) / (2.0 * h);
    }
    for (int j = 0; j < model.n_u; ++j) {
        Vec up = u, um = u;
        up[j] += h;
        um[j] -= h;
        J.B.col(j) = (unwrapped_mean(model, x, up) - unwrapped_mean(model, x, um)) / (2.0 * h);
    }
    return J;
}

} // namespace imdpmpc
