#include "imdpmpc/pipeline.hpp"

#include <doctest.h>

#include <numbers>
#include <sstream>

using namespace imdpmpc;

namespace {

const std::string kDir = IMDPMPC_SOURCE_DIR;

// Coarse double integrator as YAML; `extra` is spliced in at the top level.
std::string coarse_yaml(const std::string& extra = "") {
    return R"(name: coarse
model:
  kind: double_integrator
  params: {tau: 1}
  state_box: {lo: [-10, -10], hi: [10, 10]}
  input_box: {lo: [-5], hi: [5]}
  noise_std: [0.3872983346207417, 0.3872983346207417]
spec:
  goal_box: {lo: [-2, -2], hi: [2, 2]}
  initial_state: [-8, 0]
partition:
  counts: [5, 5]
actions:
  counts: [21]
  epsilon: 0.5
mpc:
  horizon: 2
  Q: [1, 1]
  R: [1]
simulation:
  n_runs: 6
  base_seed: 3
  max_steps: 60
)" + extra;
}

int error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line;
    }
    return -1;
}

} // namespace

TEST_CASE("shipped configs parse and describe the benchmarks") {
    const auto di = load_config(kDir + "/configs/double_integrator.yaml");
    CHECK(di.model.kind == ModelKind::DoubleIntegrator);
    CHECK(di.model.A == make_double_integrator().A);
    CHECK(di.model.B == make_double_integrator().B);
    CHECK(di.model.goal_box == make_double_integrator().goal_box);
    CHECK(di.epsilon == Vec::Constant(1, 0.5));
    CHECK(di.sweep_epsilons.size() == 4);

    const auto mc = load_config(kDir + "/configs/mountain_car.yaml");
    CHECK(mc.partition_counts == std::vector<int>{360, 140});
    CHECK(mc.model.param("k") == 3.0);

    const auto db = load_config(kDir + "/configs/dubins.yaml");
    CHECK(db.model.state_box.hi(2) == std::numbers::pi);
    CHECK(db.model.state_box.lo(2) == -std::numbers::pi);
    CHECK(db.model.wrap_dims == std::vector<int>{2});
    CHECK(db.epsilon == Vec{{0.15, 0.3}});
    CHECK(db.model.unsafe_boxes.size() == 2);
}

TEST_CASE("shipped double integrator abstraction has 442 states and 21 actions") {
    const auto cfg = load_config(kDir + "/configs/double_integrator.yaml");
    const auto b = build_benchmark(cfg, {1, false, false});
    CHECK(b->imdp.num_states() == 442);
    CHECK(b->imdp.num_actions() == 21);
    CHECK(b->imdp.initial_state() == b->partition->locate(Vec{{0.0, -8.0}}));
}

TEST_CASE("serialization round trip") {
    for (const char* f : {"double_integrator", "mountain_car", "dubins"}) {
        const auto a = load_config(kDir + "/configs/" + f + ".yaml");
        const std::string text = serialize_config(a);
        const auto b = parse_config(text);
        CHECK(serialize_config(b) == text);
        CHECK(b.model.state_box == a.model.state_box);
        CHECK(b.model.noise_std == a.model.noise_std);
        CHECK(b.Q == a.Q);
        CHECK(b.base_seed == a.base_seed);
        CHECK(b.sweep_epsilons.size() == a.sweep_epsilons.size());
    }
}

TEST_CASE("config errors point at the offending line") {
    CHECK(error_line(coarse_yaml("colour: blue\n")) == 24);
    std::string bad = coarse_yaml();
    bad.replace(bad.find("epsilon: 0.5"), 12, "epsilon: -0.5");
    CHECK(error_line(bad) == 15);
    std::string typo = coarse_yaml();
    typo.replace(typo.find("  horizon"), 9, "  horizn");
    CHECK(error_line(typo) == 17);
    std::string misaligned = coarse_yaml();
    misaligned.replace(misaligned.find("lo: [-2, -2]"), 12, "lo: [-3, -2]");
    CHECK(error_line(misaligned) > 0);
    std::string outside = coarse_yaml();
    outside.replace(outside.find("[-8, 0]"), 7, "[-12, 0]");
    CHECK(error_line(outside) == 10);
    CHECK(error_line("name: [") > 0);
    CHECK_THROWS_AS(load_config(kDir + "/configs/missing.yaml"), ConfigError);
}

TEST_CASE("weights must be symmetric positive semidefinite") {
    std::string q = coarse_yaml();
    q.replace(q.find("Q: [1, 1]"), 9, "Q: [[1, 2], [2, 1]]");
    CHECK(error_line(q) > 0);
    std::string ok = coarse_yaml();
    ok.replace(ok.find("Q: [1, 1]"), 9, "Q: [[2, 1], [1, 2]]");
    CHECK(parse_config(ok).Q == Mat{{2.0, 1.0}, {1.0, 2.0}});
}

TEST_CASE("scalar radius is broadcast; with_epsilon checks the dimension") {
    const auto cfg = load_config(kDir + "/configs/dubins.yaml");
    CHECK(with_epsilon(cfg, Vec{{0.1, 0.2}}).epsilon == Vec{{0.1, 0.2}});
    CHECK_THROWS(with_epsilon(cfg, Vec::Constant(1, 0.1)));
    CHECK(parse_config(coarse_yaml()).epsilon == Vec::Constant(1, 0.5));
}

TEST_CASE("single-radius sweep equals a direct simulation") {
    const auto cfg = parse_config(coarse_yaml());
    const auto rows = epsilon_sweep(cfg, {cfg.epsilon});
    REQUIRE(rows.size() == 1);
    REQUIRE(rows[0].error.empty());
    const auto b = build_benchmark(cfg);
    const auto s = monte_carlo(b->controller(ControllerKind::Mpc), cfg.model.initial_state, cfg.n_runs,
                               cfg.base_seed, cfg.max_steps);
    CHECK(rows[0].lambda == b->lambda());
    CHECK(rows[0].summary.j_total.mean == s.j_total.mean);
    CHECK(rows[0].summary.sat_count == s.sat_count);
}

TEST_CASE("sweep: lambda falls with the radius, failures become rows") {
    const auto cfg = parse_config(coarse_yaml());
    const auto rows = epsilon_sweep(cfg, {Vec::Constant(1, 0.0), Vec::Constant(1, 0.3), Vec::Constant(1, 0.6),
                                          Vec::Constant(2, 0.1)});
    REQUIRE(rows.size() == 4);
    CHECK(rows[0].controller == ControllerKind::Vanilla);
    CHECK(rows[1].controller == ControllerKind::Mpc);
    CHECK(rows[0].lambda >= rows[1].lambda);
    CHECK(rows[1].lambda >= rows[2].lambda);
    CHECK(rows[3].error.size() > 0);
    CHECK(ball_area(Vec{{0.15, 0.3}}) == doctest::Approx(0.18));
    std::ostringstream a, t;
    write_sweep_csv(a, rows);
    write_sweep_timings_csv(t, rows);
    std::istringstream in(a.str());
    std::string header, line;
    std::getline(in, header);
    CHECK(header ==
          "epsilon,area,lambda,controller,sat_frequency,timeouts,E_J,E_J_state,E_J_input,std_J,E_J_sat,mean_fallback,error");
    int n = 0;
    while (std::getline(in, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 12);
        ++n;
    }
    CHECK(n == 4);
    CHECK(t.str().rfind("epsilon,T_abs,T_syn,T_mpc_step\n0,", 0) == 0);
}
