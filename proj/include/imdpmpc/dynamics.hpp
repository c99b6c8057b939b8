#pragma once

#include "imdpmpc/box.hpp"
#include "imdpmpc/rng.hpp"

#include <map>
#include <string>
#include <vector>

namespace imdpmpc {

enum class ModelKind {
    Affine,           // x' = A x + B u + c + w
    DoubleIntegrator, // affine, built from tau
    MountainCar,
    Dubins,
};

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// A discrete-time stochastic system x' = f(x, u, w) with additive diagonal
/// Gaussian noise and a reach-avoid specification attached.
///
/// The noise vector has the state dimension; dimensions with zero standard
/// deviation are noise-free and always draw 0.
struct SystemModel {
    std::string name;
    ModelKind kind = ModelKind::Affine;
    int n_x = 0;
    int n_u = 0;
    Box state_box;
    Box input_box;
    Vec noise_std;
    std::map<std::string, double> params;
    std::vector<int> wrap_dims;
    Box goal_box;
    std::vector<Box> unsafe_boxes;
    Vec initial_state;

    // Affine kinds only.
    Mat A;
    Mat B;
    Vec c;

    double param(const std::string& key) const;
    double param_or(const std::string& key, double fallback) const;
    bool is_wrapped(int dim) const;

    /// Checks the structural invariants; throws ContractViolation.
    void validate() const;
};

/// Wraps an angle to [-pi, pi).
double wrap_angle(double a);

Vec step(const SystemModel& model, const Vec& x, const Vec& u, const Vec& w);
Vec deterministic_mean(const SystemModel& model, const Vec& x, const Vec& u);
Vec sample_noise(const SystemModel& model, NoiseStream& stream);

/// Sound box enclosure of { f(x, u, 0) : x in cell, u in ball } by interval
/// arithmetic. Wrapped dimensions fall back to [-pi, pi] when the image
/// crosses the seam.
Box mean_image_bounds(const SystemModel& model, const Box& cell, const Box& ball);

/// Analytic Jacobians of the noise-free map (angles on the unwrapped chart).
struct Jacobians {
    Mat A; // df/dx
    Mat B; // df/du
};
Jacobians mean_jacobians(const SystemModel& model, const Vec& x, const Vec& u);

// Benchmark instances used throughout the experiments.
SystemModel make_double_integrator();
SystemModel make_mountain_car();
SystemModel make_dubins();
SystemModel make_affine(std::string name, Mat A, Mat B, Vec c, Box state_box, Box input_box, Vec noise_std,
                        Box goal_box, std::vector<Box> unsafe_boxes, Vec initial_state);

} // namespace imdpmpc
