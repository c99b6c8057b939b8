#pragma once

#include "imdpmpc/dynamics.hpp"
#include "imdpmpc/simulation.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace imdpmpc {

/// Parse or validation failure; `line` is 1-based (0 when unknown).
class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& msg, int line, int column = 0);
    int line;
    int column;
};

struct BenchmarkConfig {
    std::string name;
    SystemModel model;

    std::vector<int> partition_counts;
    std::vector<int> action_counts;
    Vec epsilon;

    double synthesis_tol = 1e-6;
    int synthesis_max_iters = 10000;

    double prune_threshold = 1e-8;
    double window_sigmas = 6.0;

    int horizon = 3;
    Mat Q;
    Mat R;

    int n_runs = 100;
    std::uint64_t base_seed = 1;
    int max_steps = 150;
    ControllerKind controller = ControllerKind::Mpc;

    std::vector<Vec> sweep_epsilons;
    std::string output_dir = "out";
};

/// Parses YAML text. Unknown keys, wrong types and failed cross-checks raise
/// ConfigError pointing at the offending node. "pi" and "-pi" are accepted
/// wherever a number is.
BenchmarkConfig parse_config(const std::string& text);
BenchmarkConfig load_config(const std::string& path);

/// Canonical YAML; parse_config(serialize_config(c)) reproduces c.
std::string serialize_config(const BenchmarkConfig& config);

/// Same config with the radius replaced (dimension checked).
BenchmarkConfig with_epsilon(const BenchmarkConfig& config, const Vec& epsilon);

} // namespace imdpmpc
