#include "imdpmpc/config.hpp"

#include "imdpmpc/partition.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace imdpmpc {

ConfigError::ConfigError(const std::string& msg, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line(line), column(column) {}

namespace {

constexpr double kPi = std::numbers::pi;

[[noreturn]] void fail(const YAML::Node& node, const std::string& msg) {
    const YAML::Mark mark = node.Mark();
    if (mark.is_null()) throw ConfigError(msg, 0);
    throw ConfigError(msg, mark.line + 1, mark.column + 1);
}

void check_keys(const YAML::Node& node, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!node.IsMap()) fail(node, where + " must be a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) fail(kv.first, "unknown key '" + key + "' in " + where);
    }
}

YAML::Node need(const YAML::Node& map, const char* key, const std::string& where) {
    YAML::Node n = map[key];
    if (!n) fail(map, "missing key '" + std::string(key) + "' in " + where);
    return n;
}

double as_double(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) fail(n, what + " must be a number");
    const auto& s = n.Scalar();
    if (s == "pi") return kPi;
    if (s == "-pi") return -kPi;
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(n, what + ": '" + s + "' is not a number");
    return v;
}

long long as_integer(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) fail(n, what + " must be an integer");
    const auto& s = n.Scalar();
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) fail(n, what + ": '" + s + "' is not an integer");
    return v;
}

int as_int(const YAML::Node& n, const std::string& what, long long min) {
    const long long v = as_integer(n, what);
    if (v < min || v > 1000000000) fail(n, what + " must be >= " + std::to_string(min));
    return static_cast<int>(v);
}

std::string as_string(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) fail(n, what + " must be a string");
    return n.Scalar();
}

Vec as_vec(const YAML::Node& n, const std::string& what, Eigen::Index size = -1) {
    if (!n.IsSequence()) fail(n, what + " must be a list of numbers");
    if (size >= 0 && static_cast<Eigen::Index>(n.size()) != size) {
        fail(n, what + " must have " + std::to_string(size) + " entries, got " + std::to_string(n.size()));
    }
    Vec v(static_cast<Eigen::Index>(n.size()));
    for (std::size_t i = 0; i < n.size(); ++i) v[static_cast<Eigen::Index>(i)] = as_double(n[i], what);
    return v;
}

// Scalar broadcasts to every dimension.
Vec as_radius(const YAML::Node& n, const std::string& what, Eigen::Index size) {
    Vec v = n.IsScalar() ? Vec::Constant(size, as_double(n, what)) : as_vec(n, what, size);
    if ((v.array() < 0.0).any()) fail(n, what + " must be >= 0");
    return v;
}

std::vector<int> as_counts(const YAML::Node& n, const std::string& what, std::size_t size) {
    if (!n.IsSequence() || n.size() != size) {
        fail(n, what + " must be a list of " + std::to_string(size) + " positive integers");
    }
    std::vector<int> out;
    for (std::size_t i = 0; i < n.size(); ++i) out.push_back(as_int(n[i], what, 1));
    return out;
}

Box as_box(const YAML::Node& n, const std::string& what, Eigen::Index size = -1) {
    check_keys(n, {"lo", "hi"}, what);
    const Vec lo = as_vec(need(n, "lo", what), what + ".lo", size);
    const Vec hi = as_vec(need(n, "hi", what), what + ".hi", lo.size());
    if ((lo.array() > hi.array()).any()) fail(n, what + ": lo exceeds hi");
    return Box(lo, hi);
}

Mat as_matrix(const YAML::Node& n, const std::string& what, Eigen::Index rows, Eigen::Index cols) {
    if (!n.IsSequence() || static_cast<Eigen::Index>(n.size()) != rows) {
        fail(n, what + " must be a " + std::to_string(rows) + " x " + std::to_string(cols) + " matrix");
    }
    Mat M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) M.row(r) = as_vec(n[static_cast<std::size_t>(r)], what, cols).transpose();
    return M;
}

// Either the diagonal as a flat list or the full matrix.
Mat as_weight(const YAML::Node& n, const std::string& what, Eigen::Index size) {
    Mat W;
    if (n.IsSequence() && n.size() > 0 && n[0].IsSequence()) {
        W = as_matrix(n, what, size, size);
    } else {
        W = as_vec(n, what, size).asDiagonal();
    }
    if ((W - W.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + W.cwiseAbs().maxCoeff())) {
        fail(n, what + " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat> eig(W);
    if (eig.eigenvalues().minCoeff() < -1e-12 * (1.0 + W.cwiseAbs().maxCoeff())) {
        fail(n, what + " must be positive semidefinite");
    }
    return W;
}

void parse_model(const YAML::Node& n, BenchmarkConfig& cfg) {
    check_keys(n, {"kind", "params", "state_box", "input_box", "noise_std", "wrap_dims", "A", "B", "c"}, "model");
    SystemModel& m = cfg.model;
    m.name = cfg.name;
    const YAML::Node kind = need(n, "kind", "model");
    try {
        m.kind = model_kind_from_string(as_string(kind, "model.kind"));
    } catch (const ContractViolation& e) {
        fail(kind, e.what());
    }
    if (const YAML::Node p = n["params"]) {
        if (!p.IsMap()) fail(p, "model.params must be a mapping");
        for (const auto& kv : p) {
            const auto key = kv.first.as<std::string>();
            m.params[key] = as_double(kv.second, "model.params." + key);
        }
    }
    m.state_box = as_box(need(n, "state_box", "model"), "model.state_box");
    m.input_box = as_box(need(n, "input_box", "model"), "model.input_box");
    m.n_x = static_cast<int>(m.state_box.dim());
    m.n_u = static_cast<int>(m.input_box.dim());
    const YAML::Node noise = need(n, "noise_std", "model");
    m.noise_std = as_vec(noise, "model.noise_std", m.n_x);
    if ((m.noise_std.array() < 0.0).any()) fail(noise, "model.noise_std must be >= 0");
    if (const YAML::Node w = n["wrap_dims"]) {
        if (!w.IsSequence()) fail(w, "model.wrap_dims must be a list");
        std::set<int> seen;
        for (std::size_t i = 0; i < w.size(); ++i) {
            const int d = as_int(w[i], "model.wrap_dims", 0);
            if (d >= m.n_x || !seen.insert(d).second) fail(w[i], "model.wrap_dims: bad dimension " + std::to_string(d));
            m.wrap_dims.push_back(d);
        }
    }
    const bool affine = m.kind == ModelKind::Affine;
    for (const char* key : {"A", "B", "c"}) {
        if (n[key] && !affine) fail(n[key], std::string("model.") + key + " is only allowed for kind affine");
    }
    if (affine) {
        m.A = as_matrix(need(n, "A", "model"), "model.A", m.n_x, m.n_x);
        m.B = as_matrix(need(n, "B", "model"), "model.B", m.n_x, m.n_u);
        m.c = n["c"] ? as_vec(n["c"], "model.c", m.n_x) : Vec::Zero(m.n_x);
    } else if (m.kind == ModelKind::DoubleIntegrator) {
        if (m.n_x != 2 || m.n_u != 1) fail(n, "double_integrator needs a 2-d state box and a 1-d input box");
        double tau = 0.0;
        try {
            tau = m.param("tau");
        } catch (const ContractViolation& e) {
            fail(n, e.what());
        }
        m.A = Mat{{1.0, tau}, {0.0, 1.0}};
        m.B = Mat{{0.5 * tau * tau}, {tau}};
        m.c = Vec::Zero(2);
    }
    const char* required[3][3] = {{"tau", nullptr, nullptr}, {"tau", "P", "g"}, {"tau", "alpha", nullptr}};
    const int row = m.kind == ModelKind::DoubleIntegrator ? 0 : m.kind == ModelKind::MountainCar ? 1
                  : m.kind == ModelKind::Dubins         ? 2
                                                        : -1;
    if (row >= 0) {
        for (const char* key : required[row]) {
            if (key && !m.params.count(key)) fail(n, std::string("model.params.") + key + " is required");
        }
    }
}

void parse_spec(const YAML::Node& n, BenchmarkConfig& cfg) {
    check_keys(n, {"goal_box", "unsafe_boxes", "initial_state"}, "spec");
    SystemModel& m = cfg.model;
    m.goal_box = as_box(need(n, "goal_box", "spec"), "spec.goal_box", m.n_x);
    if (const YAML::Node u = n["unsafe_boxes"]) {
        if (!u.IsSequence()) fail(u, "spec.unsafe_boxes must be a list");
        for (std::size_t i = 0; i < u.size(); ++i) m.unsafe_boxes.push_back(as_box(u[i], "spec.unsafe_boxes", m.n_x));
    }
    m.initial_state = as_vec(need(n, "initial_state", "spec"), "spec.initial_state", m.n_x);
}

} // namespace

BenchmarkConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(e.msg, e.mark.is_null() ? 0 : e.mark.line + 1, e.mark.is_null() ? 0 : e.mark.column + 1);
    }
    if (!root || !root.IsMap()) throw ConfigError("config must be a mapping", 1);
    check_keys(root, {"name", "model", "spec", "partition", "actions", "synthesis", "abstraction", "mpc", "simulation",
                      "sweep", "output_dir"},
               "config");
    BenchmarkConfig cfg;
    cfg.name = as_string(need(root, "name", "config"), "name");
    const YAML::Node model = need(root, "model", "config");
    parse_model(model, cfg);
    const YAML::Node spec = need(root, "spec", "config");
    parse_spec(spec, cfg);
    const auto nx = static_cast<std::size_t>(cfg.model.n_x);
    const auto nu = static_cast<std::size_t>(cfg.model.n_u);

    const YAML::Node part = need(root, "partition", "config");
    check_keys(part, {"counts"}, "partition");
    cfg.partition_counts = as_counts(need(part, "counts", "partition"), "partition.counts", nx);

    const YAML::Node act = need(root, "actions", "config");
    check_keys(act, {"counts", "epsilon"}, "actions");
    cfg.action_counts = as_counts(need(act, "counts", "actions"), "actions.counts", nu);
    cfg.epsilon = as_radius(need(act, "epsilon", "actions"), "actions.epsilon", cfg.model.n_u);

    if (const YAML::Node s = root["synthesis"]) {
        check_keys(s, {"tol", "max_iters"}, "synthesis");
        if (s["tol"]) {
            cfg.synthesis_tol = as_double(s["tol"], "synthesis.tol");
            if (!(cfg.synthesis_tol > 0.0)) fail(s["tol"], "synthesis.tol must be > 0");
        }
        if (s["max_iters"]) cfg.synthesis_max_iters = as_int(s["max_iters"], "synthesis.max_iters", 1);
    }
    if (const YAML::Node a = root["abstraction"]) {
        check_keys(a, {"prune_threshold", "window_sigmas"}, "abstraction");
        if (a["prune_threshold"]) {
            cfg.prune_threshold = as_double(a["prune_threshold"], "abstraction.prune_threshold");
            if (!(cfg.prune_threshold >= 0.0 && cfg.prune_threshold < 1.0)) {
                fail(a["prune_threshold"], "abstraction.prune_threshold must lie in [0, 1)");
            }
        }
        if (a["window_sigmas"]) {
            cfg.window_sigmas = as_double(a["window_sigmas"], "abstraction.window_sigmas");
            if (!(cfg.window_sigmas > 0.0)) fail(a["window_sigmas"], "abstraction.window_sigmas must be > 0");
        }
    }

    const YAML::Node mpc = need(root, "mpc", "config");
    check_keys(mpc, {"horizon", "Q", "R"}, "mpc");
    cfg.horizon = as_int(need(mpc, "horizon", "mpc"), "mpc.horizon", 1);
    cfg.Q = as_weight(need(mpc, "Q", "mpc"), "mpc.Q", cfg.model.n_x);
    cfg.R = as_weight(need(mpc, "R", "mpc"), "mpc.R", cfg.model.n_u);

    const YAML::Node sim = need(root, "simulation", "config");
    check_keys(sim, {"n_runs", "base_seed", "max_steps", "controller"}, "simulation");
    cfg.n_runs = as_int(need(sim, "n_runs", "simulation"), "simulation.n_runs", 1);
    {
        const YAML::Node seed = need(sim, "base_seed", "simulation");
        if (!seed.IsScalar()) fail(seed, "simulation.base_seed must be an unsigned integer");
        const auto& s = seed.Scalar();
        const auto res = std::from_chars(s.data(), s.data() + s.size(), cfg.base_seed);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
            fail(seed, "simulation.base_seed: '" + s + "' is not an unsigned integer");
        }
    }
    if (sim["max_steps"]) cfg.max_steps = as_int(sim["max_steps"], "simulation.max_steps", 0);
    if (const YAML::Node c = sim["controller"]) {
        try {
            cfg.controller = controller_kind_from_string(as_string(c, "simulation.controller"));
        } catch (const ContractViolation& e) {
            fail(c, e.what());
        }
    }

    if (const YAML::Node sw = root["sweep"]) {
        check_keys(sw, {"epsilons"}, "sweep");
        const YAML::Node eps = need(sw, "epsilons", "sweep");
        if (!eps.IsSequence() || eps.size() == 0) fail(eps, "sweep.epsilons must be a nonempty list");
        for (std::size_t i = 0; i < eps.size(); ++i) {
            cfg.sweep_epsilons.push_back(as_radius(eps[i], "sweep.epsilons", cfg.model.n_u));
        }
    }
    if (const YAML::Node out = root["output_dir"]) cfg.output_dir = as_string(out, "output_dir");

    try {
        cfg.model.validate();
    } catch (const ContractViolation& e) {
        fail(model, e.what());
    }
    try {
        Partition check(cfg.model, cfg.partition_counts);
        const std::size_t s0 = check.locate(cfg.model.initial_state);
        if (s0 == check.outside()) fail(spec["initial_state"], "spec.initial_state lies outside the state box");
    } catch (const LabelAlignmentError& e) {
        fail(spec, e.what());
    }
    return cfg;
}

BenchmarkConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'", 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

namespace {

std::string num(double v) {
    if (v == kPi) return "pi";
    if (v == -kPi) return "-pi";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void emit_vec(YAML::Emitter& out, const Vec& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << num(v[i]);
    out << YAML::EndSeq;
}

void emit_box(YAML::Emitter& out, const Box& b) {
    out << YAML::BeginMap;
    out << YAML::Key << "lo" << YAML::Value;
    emit_vec(out, b.lo());
    out << YAML::Key << "hi" << YAML::Value;
    emit_vec(out, b.hi());
    out << YAML::EndMap;
}

void emit_matrix(YAML::Emitter& out, const Mat& M) {
    out << YAML::BeginSeq;
    for (Eigen::Index r = 0; r < M.rows(); ++r) emit_vec(out, M.row(r).transpose());
    out << YAML::EndSeq;
}

void emit_weight(YAML::Emitter& out, const Mat& W) {
    const Mat D = W.diagonal().asDiagonal();
    if (W == D) {
        emit_vec(out, W.diagonal());
    } else {
        emit_matrix(out, W);
    }
}

template <class T>
void emit_ints(YAML::Emitter& out, const std::vector<T>& v) {
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& x : v) out << x;
    out << YAML::EndSeq;
}

} // namespace

std::string serialize_config(const BenchmarkConfig& c) {
    const SystemModel& m = c.model;
    YAML::Emitter out;
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << c.name;

    out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << to_string(m.kind);
    if (!m.params.empty()) {
        out << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
        for (const auto& [k, v] : m.params) out << YAML::Key << k << YAML::Value << num(v);
        out << YAML::EndMap;
    }
    out << YAML::Key << "state_box" << YAML::Value;
    emit_box(out, m.state_box);
    out << YAML::Key << "input_box" << YAML::Value;
    emit_box(out, m.input_box);
    out << YAML::Key << "noise_std" << YAML::Value;
    emit_vec(out, m.noise_std);
    out << YAML::Key << "wrap_dims" << YAML::Value;
    emit_ints(out, m.wrap_dims);
    if (m.kind == ModelKind::Affine) {
        out << YAML::Key << "A" << YAML::Value;
        emit_matrix(out, m.A);
        out << YAML::Key << "B" << YAML::Value;
        emit_matrix(out, m.B);
        out << YAML::Key << "c" << YAML::Value;
        emit_vec(out, m.c);
    }
    out << YAML::EndMap;

    out << YAML::Key << "spec" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "goal_box" << YAML::Value;
    emit_box(out, m.goal_box);
    out << YAML::Key << "unsafe_boxes" << YAML::Value << YAML::BeginSeq;
    for (const auto& b : m.unsafe_boxes) emit_box(out, b);
    out << YAML::EndSeq;
    out << YAML::Key << "initial_state" << YAML::Value;
    emit_vec(out, m.initial_state);
    out << YAML::EndMap;

    out << YAML::Key << "partition" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "counts" << YAML::Value;
    emit_ints(out, c.partition_counts);
    out << YAML::EndMap;

    out << YAML::Key << "actions" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "counts" << YAML::Value;
    emit_ints(out, c.action_counts);
    out << YAML::Key << "epsilon" << YAML::Value;
    emit_vec(out, c.epsilon);
    out << YAML::EndMap;

    out << YAML::Key << "synthesis" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "tol" << YAML::Value << num(c.synthesis_tol);
    out << YAML::Key << "max_iters" << YAML::Value << c.synthesis_max_iters;
    out << YAML::EndMap;

    out << YAML::Key << "abstraction" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "prune_threshold" << YAML::Value << num(c.prune_threshold);
    out << YAML::Key << "window_sigmas" << YAML::Value << num(c.window_sigmas);
    out << YAML::EndMap;

    out << YAML::Key << "mpc" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "horizon" << YAML::Value << c.horizon;
    out << YAML::Key << "Q" << YAML::Value;
    emit_weight(out, c.Q);
    out << YAML::Key << "R" << YAML::Value;
    emit_weight(out, c.R);
    out << YAML::EndMap;

    out << YAML::Key << "simulation" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "n_runs" << YAML::Value << c.n_runs;
    out << YAML::Key << "base_seed" << YAML::Value << c.base_seed;
    out << YAML::Key << "max_steps" << YAML::Value << c.max_steps;
    out << YAML::Key << "controller" << YAML::Value << to_string(c.controller);
    out << YAML::EndMap;

    if (!c.sweep_epsilons.empty()) {
        out << YAML::Key << "sweep" << YAML::Value << YAML::BeginMap;
        out << YAML::Key << "epsilons" << YAML::Value << YAML::BeginSeq;
        for (const auto& e : c.sweep_epsilons) emit_vec(out, e);
        out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::Key << "output_dir" << YAML::Value << c.output_dir;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

BenchmarkConfig with_epsilon(const BenchmarkConfig& config, const Vec& epsilon) {
    if (epsilon.size() != config.model.n_u || (epsilon.array() < 0.0).any()) {
        throw ConfigError("epsilon must have one nonnegative entry per input dimension", 0);
    }
    BenchmarkConfig out = config;
    out.epsilon = epsilon;
    return out;
}

} // namespace imdpmpc
