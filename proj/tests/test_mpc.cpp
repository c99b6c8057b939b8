#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

using namespace imdpmpc;
using fixture::Coarse;
using fixture::exact_sequence;
using fixture::grid_sequences;

namespace {

constexpr double kPi = std::numbers::pi;

} // namespace

TEST_CASE("target point: nearest goal center, ties to the lower index") {
    const auto m = make_double_integrator();
    const Partition p(m, {21, 21});
    CHECK(target_point(p, Vec{{10.0, 0.0}}) == Vec{{4.0, 0.0}});
    CHECK(target_point(p, Vec{{1.2, 0.3}}) == Vec{{2.0, 0.0}}); // inside a goal cell
    CHECK(target_point(p, Vec{{0.0, 1.0}}) == Vec{{0.0, 0.0}}); // equidistant to (0,0) and (0,2)
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> U(-21.0, 21.0);
    for (int t = 0; t < 500; ++t) {
        const Vec x{{U(rng), U(rng)}};
        double best = 1e300;
        Vec arg;
        for (std::size_t i = 0; i < p.num_cells(); ++i) {
            if (!p.is_goal(i)) continue;
            const double d = (p.cell_center(i) - x).squaredNorm();
            if (d < best) best = d, arg = p.cell_center(i);
        }
        CHECK(target_point(p, x) == arg);
    }
}

TEST_CASE("target point measures headings on the circle") {
    const auto m = make_dubins();
    const Partition p(m, {20, 20, 11});
    const double w = 2 * kPi / 11;
    const Vec r = target_point(p, Vec{{-7.2, 7.3, -3.1}});
    CHECK(r[0] == doctest::Approx(-7.5));
    CHECK(r[1] == doctest::Approx(7.5));
    CHECK(r[2] == doctest::Approx(-kPi + 0.5 * w));
    const Vec s = target_point(p, Vec{{-7.2, 7.3, 3.1}});
    CHECK(s[2] == doctest::Approx(kPi - 0.5 * w));
}

TEST_CASE("MIQP matches sequence enumeration with exact per-sequence QPs") {
    const Coarse c(0.5);
    const Mat Q = Mat::Identity(2, 2);
    const auto ctx = c.ctx(Q, Mat::Identity(1, 1), 3);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> U(-10.0, 10.0);
    int solved = 0, fallback = 0;
    for (int t = 0; t < 100; ++t) {
        Vec x{{U(rng), U(rng)}};
        while (c.part.is_terminal(c.part.locate(x))) x = Vec{{U(rng), U(rng)}};
        const Vec r = target_point(c.part, x);
        const auto inst = build_miqp(ctx, x, r);
        const auto sol = solve_miqp(inst);

        std::set<std::vector<std::size_t>> seqs;
        std::vector<std::size_t> prefix{c.part.locate(x)};
        grid_sequences(c, x, 3, prefix, seqs);
        if (sol.status == MpcStatus::Optimal) seqs.insert(sol.cells);
        double best = 1e300;
        for (const auto& s : seqs) {
            const auto o = exact_sequence(c, x, r, s, Q, 1.0);
            if (o.feasible) best = std::min(best, o.cost);
        }
        CAPTURE(t);
        if (best == 1e300) {
            CHECK(sol.status == MpcStatus::InfeasibleFallback);
            ++fallback;
            continue;
        }
        REQUIRE(sol.status == MpcStatus::Optimal);
        CHECK(std::abs(sol.cost - best) <= 1e-6 * std::max(1.0, best));
        // the returned plan is a feasible point of the mixed-integer program
        std::vector<Vec> xs{x};
        xs.insert(xs.end(), sol.predicted_states.begin(), sol.predicted_states.end());
        const auto a = inst.assignment(sol.cells, xs, sol.predicted_inputs);
        CHECK(inst.satisfies(a));
        CHECK(inst.cost(xs, sol.predicted_inputs) == doctest::Approx(sol.cost));
        ++solved;
    }
    CHECK(solved > 70);
}

TEST_CASE("big-M audit rejects split or inconsistent assignments") {
    const Coarse c(0.5);
    const auto ctx = c.ctx(Mat::Identity(2, 2), Mat::Identity(1, 1), 2);
    const Vec x{{-8.0, 1.0}};
    const auto inst = build_miqp(ctx, x, target_point(c.part, x));
    const auto sol = solve_miqp(inst);
    REQUIRE(sol.status == MpcStatus::Optimal);
    std::vector<Vec> xs{x};
    xs.insert(xs.end(), sol.predicted_states.begin(), sol.predicted_states.end());
    const auto good = inst.assignment(sol.cells, xs, sol.predicted_inputs);
    REQUIRE(inst.satisfies(good));

    REQUIRE(inst.candidate_cells.size() >= 2);
    auto split = good;
    std::size_t on = 0;
    while (split.delta[1][on] < 0.5) ++on;
    const std::size_t other = on == 0 ? 1 : 0;
    split.delta[1][on] = 0.5;
    split.delta[1][other] = 0.5;
    split.z[1][on] = 0.5 * xs[1];
    split.z[1][other] = 0.5 * xs[1];
    CHECK_FALSE(inst.satisfies(split));

    auto two = good;
    two.delta[1][other] = 1.0;
    CHECK_FALSE(inst.satisfies(two));

    auto bad_z = good;
    bad_z.z[1][on] += Vec::Constant(2, 0.1);
    CHECK_FALSE(inst.satisfies(bad_z));

    auto bad_u = good;
    bad_u.u[0][0] += 1.0; // leaves the ball of width 1
    CHECK_FALSE(inst.satisfies(bad_u));

    auto wrong_cell = good;
    wrong_cell.x[1] += Vec::Constant(2, 5.0);
    CHECK_FALSE(inst.satisfies(wrong_cell));
}

TEST_CASE("random feasible points of the program satisfy the audit") {
    const Coarse c(0.5);
    const auto ctx = c.ctx(Mat::Identity(2, 2), Mat::Identity(1, 1), 3);
    std::mt19937_64 rng(12);
    int audited = 0;
    for (int t = 0; t < 200; ++t) {
        const Vec x{{std::uniform_real_distribution<double>(-10, 10)(rng),
                     std::uniform_real_distribution<double>(-10, 10)(rng)}};
        const std::size_t s = c.part.locate(x);
        if (c.part.is_terminal(s)) continue;
        const auto inst = build_miqp(ctx, x, target_point(c.part, x));
        std::vector<Vec> xs{x}, us;
        std::vector<std::size_t> cells{s};
        bool ok = true;
        for (int j = 0; j < 3 && ok; ++j) {
            const auto [lo, hi] = c.input_range(cells.back());
            const Vec u{{std::uniform_real_distribution<double>(lo, hi)(rng)}};
            const Vec y = Mat{{1.0, 1.0}, {0.0, 1.0}} * xs.back() + Vec{{0.5, 1.0}} * u[0];
            const std::size_t cell = c.part.locate(y);
            ok = cell != c.part.outside();
            us.push_back(u);
            xs.push_back(y);
            cells.push_back(cell);
        }
        if (!ok) continue;
        // every realized sequence must be among the candidate cells
        for (std::size_t cell : cells) {
            CHECK(std::binary_search(inst.candidate_cells.begin(), inst.candidate_cells.end(), cell));
        }
        CHECK(inst.satisfies(inst.assignment(cells, xs, us)));
        ++audited;
    }
    CHECK(audited > 50);
}

TEST_CASE("one-step program: candidates are the start cell and its successors") {
    const Coarse c(0.5);
    const auto ctx = c.ctx(Mat::Identity(2, 2), Mat::Identity(1, 1), 1);
    const Vec x{{-8.0, 3.0}};
    const auto inst = build_miqp(ctx, x, target_point(c.part, x));
    std::set<std::size_t> expect{c.part.locate(x)};
    const auto [lo, hi] = c.input_range(c.part.locate(x));
    for (int k = 0; k <= 1000; ++k) {
        const double u = lo + (hi - lo) * k / 1000.0;
        const Vec y = Mat{{1.0, 1.0}, {0.0, 1.0}} * x + Vec{{0.5, 1.0}} * u;
        expect.insert(c.part.locate(y));
    }
    CHECK(std::set<std::size_t>(inst.candidate_cells.begin(), inst.candidate_cells.end()) == expect);
    const auto sol = solve_miqp(inst);
    CHECK(sol.predicted_inputs.size() == 1);
    CHECK(sol.predicted_states.size() == 1);
}

TEST_CASE("zero radius: the applied input is the policy input for any weights") {
    const Coarse c(0.0);
    std::mt19937_64 rng(21);
    for (const auto& [Q, R] : std::vector<std::pair<Mat, Mat>>{{Mat::Identity(2, 2), Mat::Identity(1, 1)},
                                                                {10 * Mat::Identity(2, 2), 0.01 * Mat::Identity(1, 1)},
                                                                {Mat::Zero(2, 2), Mat::Identity(1, 1)}}) {
        const auto ctx = c.ctx(Q, R, 3);
        for (int t = 0; t < 30; ++t) {
            const Vec x{{std::uniform_real_distribution<double>(-10, 10)(rng),
                         std::uniform_real_distribution<double>(-10, 10)(rng)}};
            const std::size_t s = c.part.locate(x);
            if (c.part.is_terminal(s)) continue;
            const auto sol = mpc_control(ctx, x);
            CHECK(sol.u0[0] == c.actions.centers[c.syn.policy.action[s]][0]);
        }
    }
}

TEST_CASE("no state weight: inputs are the minimum-norm points of their boxes") {
    // two overlapping regions that cover the plane, so no state bound binds
    MiqpInstance inst;
    inst.horizon = 3;
    inst.x0 = Vec{{0.0, 0.0}};
    inst.reference = Vec{{5.0, 5.0}};
    inst.Q = Mat::Zero(2, 2);
    inst.R = Mat::Identity(1, 1);
    inst.start_cell = 0;
    inst.candidate_cells = {0, 1};
    const AffineModel di{Mat{{1.0, 1.0}, {0.0, 1.0}}, Mat{{0.5}, {1.0}}, Vec::Zero(2), 0};
    const Box plane(Vec::Constant(2, -1e3), Vec::Constant(2, 1e3));
    inst.regions.emplace(0, RegionData{plane, Box(Vec{{1.0}}, Vec{{2.0}}), di});
    inst.regions.emplace(1, RegionData{plane, Box(Vec{{-3.0}}, Vec{{-0.5}}), di});
    const auto sol = solve_miqp(inst);
    REQUIRE(sol.status == MpcStatus::Optimal);
    CHECK(sol.predicted_inputs[0][0] == doctest::Approx(1.0));
    CHECK(sol.predicted_inputs[1][0] == doctest::Approx(-0.5));
    CHECK(sol.predicted_inputs[2][0] == doctest::Approx(-0.5));
    CHECK(sol.cost == doctest::Approx(1.5));
}

TEST_CASE("no state weight on the coarse grid agrees with the exact oracle") {
    const Coarse c(0.5);
    const Mat Q = Mat::Zero(2, 2);
    const auto ctx = c.ctx(Q, Mat::Identity(1, 1), 3);
    std::mt19937_64 rng(22);
    int checked = 0;
    for (int t = 0; t < 40; ++t) {
        const Vec x{{std::uniform_real_distribution<double>(-10, 10)(rng),
                     std::uniform_real_distribution<double>(-10, 10)(rng)}};
        if (c.part.is_terminal(c.part.locate(x))) continue;
        const Vec r = target_point(c.part, x);
        const auto sol = solve_miqp(build_miqp(ctx, x, r));
        if (sol.status != MpcStatus::Optimal) continue;
        std::set<std::vector<std::size_t>> seqs{sol.cells};
        std::vector<std::size_t> prefix{c.part.locate(x)};
        grid_sequences(c, x, 3, prefix, seqs);
        double best = 1e300;
        for (const auto& s : seqs) {
            const auto o = exact_sequence(c, x, r, s, Q, 1.0);
            if (o.feasible) best = std::min(best, o.cost);
        }
        CHECK(std::abs(sol.cost - best) <= 1e-6 * std::max(1.0, best));
        ++checked;
    }
    CHECK(checked > 20);
}

TEST_CASE("applied input always lies in the certified ball") {
    const Coarse c(0.5);
    const auto ctx = c.ctx(Mat::Identity(2, 2), Mat::Identity(1, 1), 3);
    std::mt19937_64 rng(23);
    for (int t = 0; t < 100; ++t) {
        const Vec x{{std::uniform_real_distribution<double>(-10, 10)(rng),
                     std::uniform_real_distribution<double>(-10, 10)(rng)}};
        const std::size_t s = c.part.locate(x);
        if (c.part.is_terminal(s)) continue;
        const auto sol = mpc_control(ctx, x);
        CHECK(c.actions.balls[c.syn.policy.action[s]].contains(sol.u0));
        if (sol.status == MpcStatus::InfeasibleFallback) {
            CHECK(sol.u0 == c.actions.centers[c.syn.policy.action[s]]);
        }
    }
}

TEST_CASE("starting outside a neutral cell is a contract violation") {
    const Coarse c(0.5);
    const auto ctx = c.ctx(Mat::Identity(2, 2), Mat::Identity(1, 1), 3);
    CHECK_THROWS_AS(build_miqp(ctx, Vec{{0.0, 0.0}}, Vec{{0.0, 0.0}}), ContractViolation);
    CHECK_THROWS_AS(build_miqp(ctx, Vec{{11.0, 0.0}}, Vec{{0.0, 0.0}}), ContractViolation);
}
