#include "imdpmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace imdpmpc {

namespace {

constexpr double kPi = std::numbers::pi;

Interval wrap_interval(Interval a) {
    if (a.width() >= 2.0 * kPi) {
        return {-kPi, kPi};
    }
    // Shift the interval so that its lower end sits in [-pi, pi).
    const double shift = wrap_angle(a.lo) - a.lo;
    Interval s{a.lo + shift, a.hi + shift};
    if (s.hi > kPi) {
        return {-kPi, kPi}; // crosses the seam
    }
    return s;
}

} // namespace

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::Affine:
        return "affine";
    case ModelKind::DoubleIntegrator:
        return "double_integrator";
    case ModelKind::MountainCar:
        return "mountain_car";
    case ModelKind::Dubins:
        return "dubins";
    }
    return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "affine") return ModelKind::Affine;
    if (name == "double_integrator") return ModelKind::DoubleIntegrator;
    if (name == "mountain_car") return ModelKind::MountainCar;
    if (name == "dubins") return ModelKind::Dubins;
    throw ContractViolation("unknown model kind '" + name + "'");
}

double SystemModel::param(const std::string& key) const {
    const auto it = params.find(key);
    if (it == params.end()) {
        throw ContractViolation("model '" + name + "' has no parameter '" + key + "'");
    }
    return it->second;
}

double SystemModel::param_or(const std::string& key, double fallback) const {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

bool SystemModel::is_wrapped(int dim) const {
    return std::find(wrap_dims.begin(), wrap_dims.end(), dim) != wrap_dims.end();
}

void SystemModel::validate() const {
    if (n_x <= 0 || n_u <= 0) {
        throw ContractViolation("model '" + name + "': dimensions must be positive");
    }
    if (state_box.dim() != n_x || input_box.dim() != n_u || noise_std.size() != n_x) {
        throw ContractViolation("model '" + name + "': box/noise dimensions inconsistent");
    }
    if ((noise_std.array() < 0.0).any()) {
        throw ContractViolation("model '" + name + "': negative noise std");
    }
    if (goal_box.dim() != n_x || !state_box.contains(goal_box)) {
        throw ContractViolation("model '" + name + "': goal box must lie inside the state box");
    }
    for (const auto& u : unsafe_boxes) {
        if (u.dim() != n_x) {
            throw ContractViolation("model '" + name + "': unsafe box dimension mismatch");
        }
    }
    for (int d : wrap_dims) {
        if (d < 0 || d >= n_x || state_box.lo(d) != -kPi || state_box.hi(d) != kPi) {
            throw ContractViolation("model '" + name + "': wrapped dimension " + std::to_string(d) +
                                    " must span exactly [-pi, pi]");
        }
    }
    if (initial_state.size() != n_x) {
        throw ContractViolation("model '" + name + "': initial state dimension mismatch");
    }
    if (kind == ModelKind::Affine || kind == ModelKind::DoubleIntegrator) {
        if (A.rows() != n_x || A.cols() != n_x || B.rows() != n_x || B.cols() != n_u || c.size() != n_x) {
            throw ContractViolation("model '" + name + "': affine matrices have wrong shape");
        }
    }
    if (kind == ModelKind::MountainCar && (n_x != 2 || n_u != 1)) {
        throw ContractViolation("mountain car needs n_x = 2, n_u = 1");
    }
    if (kind == ModelKind::Dubins && (n_x != 3 || n_u != 2)) {
        throw ContractViolation("Dubins car needs n_x = 3, n_u = 2");
    }
}

double wrap_angle(double a) {
    constexpr double two_pi = 2.0 * kPi;
    double r = a - two_pi * std::floor((a + kPi) / two_pi);
    if (r >= kPi) r -= two_pi; // rounding at the seam
    if (r < -kPi) r = -kPi;
    return r;
}

Vec step(const SystemModel& m, const Vec& x, const Vec& u, const Vec& w) {
    require_dim(x, m.n_x, "step: state");
    require_dim(u, m.n_u, "step: input");
    require_dim(w, m.n_x, "step: noise");
    Vec next(m.n_x);
    switch (m.kind) {
    case ModelKind::Affine:
    case ModelKind::DoubleIntegrator:
        next = m.A * x + m.B * u + m.c + w;
        break;
    case ModelKind::MountainCar: {
        const double tau = m.param("tau");
        const double P = m.param("P");
        const double g = m.param("g");
        const double k = m.param_or("k", 1.0);
        const double p = x[0];
        const double v = x[1];
        const double v_next = v + tau * (P * u[0] - g * std::cos(k * p)) + w[1];
        next[1] = v_next;
        next[0] = p + tau * (v_next - w[1]) + w[0];
        break;
    }
    case ModelKind::Dubins: {
        const double tau = m.param("tau");
        const double alpha = m.param("alpha");
        const double th = x[2];
        next[0] = x[0] + tau * u[1] * std::cos(th);
        next[1] = x[1] + tau * u[1] * std::sin(th);
        next[2] = th + tau * alpha * u[0] + w[2];
        break;
    }
    }
    for (int d : m.wrap_dims) {
        next[d] = wrap_angle(next[d]);
    }
    return next;
}

Vec deterministic_mean(const SystemModel& m, const Vec& x, const Vec& u) {
    return step(m, x, u, Vec::Zero(m.n_x));
}

Vec sample_noise(const SystemModel& m, NoiseStream& stream) {
    Vec w = Vec::Zero(m.n_x);
    for (int i = 0; i < m.n_x; ++i) {
        if (m.noise_std[i] > 0.0) {
            w[i] = m.noise_std[i] * stream.normal();
        }
    }
    return w;
}

Box mean_image_bounds(const SystemModel& m, const Box& cell, const Box& ball) {
    if (cell.dim() != m.n_x || ball.dim() != m.n_u) {
        throw ContractViolation("mean_image_bounds: dimension mismatch");
    }
    Box out(Vec::Zero(m.n_x), Vec::Zero(m.n_x));
    switch (m.kind) {
    case ModelKind::Affine:
    case ModelKind::DoubleIntegrator:
        for (int i = 0; i < m.n_x; ++i) {
            Interval acc{m.c[i], m.c[i]};
            for (int j = 0; j < m.n_x; ++j) acc = acc + m.A(i, j) * cell[j];
            for (int j = 0; j < m.n_u; ++j) acc = acc + m.B(i, j) * ball[j];
            out.set(i, acc);
        }
        break;
    case ModelKind::MountainCar: {
        const double tau = m.param("tau");
        const double P = m.param("P");
        const double g = m.param("g");
        const double k = m.param_or("k", 1.0);
        const Interval p = cell[0];
        const Interval v = cell[1];
        const Interval u = ball[0];
        // v' = v + tau (P u - g cos kp)
        const Interval v_next = v + tau * P * u + (-tau * g) * cos(k * p);
        // p' = p - tau^2 g cos kp + tau v + tau^2 P u; the first two terms form
        // a map with derivative 1 + tau^2 g k sin kp > 0, evaluated at the ends.
        auto h = [&](double q) { return q - tau * tau * g * std::cos(k * q); };
        Interval p_next{h(p.lo), h(p.hi)};
        if (1.0 - tau * tau * g * std::abs(k) <= 0.0) {
            p_next = p + (-tau * tau * g) * cos(k * p);
        }
        p_next = p_next + tau * v + tau * tau * P * u;
        out.set(0, p_next);
        out.set(1, v_next);
        break;
    }
    case ModelKind::Dubins: {
        const double tau = m.param("tau");
        const double alpha = m.param("alpha");
        const Interval th = cell[2];
        const Interval speed = ball[1];
        out.set(0, cell[0] + tau * (speed * cos(th)));
        out.set(1, cell[1] + tau * (speed * sin(th)));
        out.set(2, th + tau * alpha * ball[0]);
        break;
    }
    }
    for (int d : m.wrap_dims) {
        out.set(d, wrap_interval(out[d]));
    }
    return out;
}

Jacobians mean_jacobians(const SystemModel& m, const Vec& x, const Vec& u) {
    require_dim(x, m.n_x, "mean_jacobians: state");
    require_dim(u, m.n_u, "mean_jacobians: input");
    Jacobians J{Mat::Zero(m.n_x, m.n_x), Mat::Zero(m.n_x, m.n_u)};
    switch (m.kind) {
    case ModelKind::Affine:
    case ModelKind::DoubleIntegrator:
        J.A = m.A;
        J.B = m.B;
        break;
    case ModelKind::MountainCar: {
        const double tau = m.param("tau");
        const double P = m.param("P");
        const double g = m.param("g");
        const double k = m.param_or("k", 1.0);
        const double s = k * std::sin(k * x[0]);
        J.A << 1.0 + tau * tau * g * s, tau, tau * g * s, 1.0;
        J.B << tau * tau * P, tau * P;
        break;
    }
    case ModelKind::Dubins: {
        const double tau = m.param("tau");
        const double alpha = m.param("alpha");
        const double c = std::cos(x[2]);
        const double s = std::sin(x[2]);
        J.A << 1.0, 0.0, -tau * u[1] * s, 0.0, 1.0, tau * u[1] * c, 0.0, 0.0, 1.0;
        J.B << 0.0, tau * c, 0.0, tau * s, tau * alpha, 0.0;
        break;
    }
    }
    return J;
}

SystemModel make_affine(std::string name, Mat A, Mat B, Vec c, Box state_box, Box input_box, Vec noise_std,
                        Box goal_box, std::vector<Box> unsafe_boxes, Vec initial_state) {
    SystemModel m;
    m.name = std::move(name);
    m.kind = ModelKind::Affine;
    m.n_x = static_cast<int>(A.rows());
    m.n_u = static_cast<int>(B.cols());
    m.A = std::move(A);
    m.B = std::move(B);
    m.c = std::move(c);
    m.state_box = std::move(state_box);
    m.input_box = std::move(input_box);
    m.noise_std = std::move(noise_std);
    m.goal_box = std::move(goal_box);
    m.unsafe_boxes = std::move(unsafe_boxes);
    m.initial_state = std::move(initial_state);
    m.validate();
    return m;
}

SystemModel make_double_integrator() {
    SystemModel m;
    m.name = "double_integrator";
    m.kind = ModelKind::DoubleIntegrator;
    m.n_x = 2;
    m.n_u = 1;
    const double tau = 1.0;
    m.params = {{"tau", tau}};
    m.A = Mat{{1.0, tau}, {0.0, 1.0}};
    m.B = Mat{{0.5 * tau * tau}, {tau}};
    m.c = Vec::Zero(2);
    m.state_box = Box(Vec{{-21.0, -21.0}}, Vec{{21.0, 21.0}});
    m.input_box = Box(Vec{{-5.0}}, Vec{{5.0}});
    // Covariance 0.15 I.
    m.noise_std = Vec::Constant(2, std::sqrt(0.15));
    // Cells of the 21 x 21 grid whose centers lie in [-4, 4] x [-2, 2].
    m.goal_box = Box(Vec{{-5.0, -3.0}}, Vec{{5.0, 3.0}});
    m.initial_state = Vec{{0.0, -8.0}};
    m.validate();
    return m;
}

SystemModel make_mountain_car() {
    SystemModel m;
    m.name = "mountain_car";
    m.kind = ModelKind::MountainCar;
    m.n_x = 2;
    m.n_u = 1;
    // k = 3 as in the reference Gym environment; with k = 1 the slope never
    // lets the car climb to the goal.
    m.params = {{"tau", 2.0}, {"P", 0.0015}, {"g", 0.0025}, {"k", 3.0}};
    m.state_box = Box(Vec{{-1.2, -0.07}}, Vec{{0.6, 0.07}});
    m.input_box = Box(Vec{{-1.0}}, Vec{{1.0}});
    m.noise_std = Vec{{0.005, 0.0005}};
    m.goal_box = Box(Vec{{0.45, -0.07}}, Vec{{0.6, 0.07}});
    m.initial_state = Vec{{-0.5, 0.0}};
    m.validate();
    return m;
}

SystemModel make_dubins() {
    SystemModel m;
    m.name = "dubins";
    m.kind = ModelKind::Dubins;
    m.n_x = 3;
    m.n_u = 2;
    m.params = {{"tau", 1.0}, {"alpha", 0.85}};
    m.state_box = Box(Vec{{-10.0, -10.0, -kPi}}, Vec{{10.0, 10.0, kPi}});
    m.input_box = Box(Vec{{-0.5 * kPi, -3.0}}, Vec{{0.5 * kPi, 3.0}});
    m.noise_std = Vec{{0.0, 0.0, 0.1}};
    m.wrap_dims = {2};
    m.goal_box = Box(Vec{{-10.0, 5.0, -kPi}}, Vec{{-5.0, 10.0, kPi}});
    m.unsafe_boxes = {
        Box(Vec{{-10.0, -2.0, -kPi}}, Vec{{-6.0, 0.0, kPi}}),
        Box(Vec{{2.0, -2.0, -kPi}}, Vec{{10.0, 0.0, kPi}}),
    };
    m.initial_state = Vec{{6.0, -7.0, 0.5 * kPi}};
    m.validate();
    return m;
}

} // namespace imdpmpc
