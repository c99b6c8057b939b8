#include "imdpmpc/synthesis.hpp"

#include "imdpmpc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace imdpmpc {

namespace {

constexpr double kMassTol = 1e-9;
constexpr std::size_t kChunk = 512;

struct ValueMass {
    double v;
    double w;
};

double greedy_fill(std::vector<ValueMass>& items, double budget);
double fast_worst_case_value(std::span<const Transition> row, std::span<const double> values, Direction direction,
                             std::vector<ValueMass>& items);

void sort_targets(std::span<const Transition> row, std::span<const double> values, Direction direction,
                  std::vector<std::uint32_t>& order) {
    order.resize(row.size());
    std::iota(order.begin(), order.end(), 0u);
    if (direction == Direction::Min) {
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = values[row[a].target];
            const double vb = values[row[b].target];
            return va < vb || (va == vb && a < b);
        });
    } else {
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = values[row[a].target];
            const double vb = values[row[b].target];
            return va > vb || (va == vb && a < b);
        });
    }
}

// One synchronous sweep. When `fixed` is non-null only that action is backed
// up; otherwise the best action is written to `argmax`.
double sweep(const Imdp& imdp, const std::vector<double>& v, std::vector<double>& next, Direction direction,
             const std::vector<std::uint32_t>* fixed, std::vector<std::uint32_t>* argmax, int threads) {
    const std::size_t S = imdp.num_states();
    const std::size_t chunks = (S + kChunk - 1) / kChunk;
    std::vector<double> chunk_residual(chunks, 0.0);
    parallel_for(0, chunks, threads, [&](std::size_t c) {
        thread_local std::vector<ValueMass> items;
        double res = 0.0;
        const std::size_t end = std::min(S, (c + 1) * kChunk);
        for (std::size_t s = c * kChunk; s < end; ++s) {
            double best = 0.0;
            std::uint32_t arg = 0;
            if (fixed) {
                const auto row = imdp.transitions(s, (*fixed)[s]);
                if (row.empty()) {
                    throw ContractViolation("evaluate_policy: action not enabled at state " + std::to_string(s));
                }
                best = fast_worst_case_value(row, v, direction, items);
                arg = (*fixed)[s];
            } else {
                bool first = true;
                for (std::size_t r = imdp.row_begin(s); r < imdp.row_end(s); ++r) {
                    const double q = fast_worst_case_value(imdp.row(r), v, direction, items);
                    if (first || q > best) {
                        best = q;
                        arg = imdp.row_action(r);
                        first = false;
                    }
                }
            }
            next[s] = best;
            if (argmax) (*argmax)[s] = arg;
            res = std::max(res, std::abs(best - v[s]));
        }
        chunk_residual[c] = res;
    });
    return chunks == 0 ? 0.0 : *std::max_element(chunk_residual.begin(), chunk_residual.end());
}

std::vector<double> goal_indicator(const Imdp& imdp) {
    std::vector<double> v(imdp.num_states(), 0.0);
    for (std::size_t s = 0; s < v.size(); ++s) {
        if (imdp.label(s) == Label::Goal) v[s] = 1.0;
    }
    return v;
}

} // namespace

namespace {

double greedy_fill(std::vector<ValueMass>& items, double budget) {
    // Weighted selection: pour `budget` into the smallest values first.
    double acc = 0.0;
    std::size_t lo = 0;
    std::size_t hi = items.size();
    while (budget > 0.0 && lo < hi) {
        if (hi - lo <= 16) {
            std::sort(items.begin() + lo, items.begin() + hi,
                      [](const ValueMass& a, const ValueMass& b) { return a.v < b.v; });
            for (std::size_t i = lo; i < hi && budget > 0.0; ++i) {
                const double take = std::min(items[i].w, budget);
                acc += take * items[i].v;
                budget -= take;
            }
            break;
        }
        const double a = items[lo].v;
        const double b = items[lo + (hi - lo) / 2].v;
        const double c = items[hi - 1].v;
        const double pivot = std::max(std::min(a, b), std::min(std::max(a, b), c));
        // Three-way partition: [lo, lt) < pivot, [lt, gt) == pivot, [gt, hi) > pivot.
        std::size_t lt = lo;
        std::size_t gt = hi;
        std::size_t i = lo;
        while (i < gt) {
            if (items[i].v < pivot) {
                std::swap(items[i++], items[lt++]);
            } else if (items[i].v > pivot) {
                std::swap(items[i], items[--gt]);
            } else {
                ++i;
            }
        }
        double w_less = 0.0;
        double vw_less = 0.0;
        for (std::size_t k = lo; k < lt; ++k) {
            w_less += items[k].w;
            vw_less += items[k].w * items[k].v;
        }
        if (w_less >= budget) {
            hi = lt;
            continue;
        }
        acc += vw_less;
        budget -= w_less;
        double w_eq = 0.0;
        for (std::size_t k = lt; k < gt; ++k) w_eq += items[k].w;
        const double take = std::min(w_eq, budget);
        acc += take * pivot;
        budget -= take;
        lo = gt;
    }
    return acc;
}

double fast_worst_case_value(std::span<const Transition> row, std::span<const double> values, Direction direction,
                             std::vector<ValueMass>& items) {
    const double sign = direction == Direction::Min ? 1.0 : -1.0;
    double budget = 1.0;
    double value = 0.0;
    double vmin = 2.0;
    double vmax = -2.0;
    items.clear();
    for (const auto& t : row) {
        const double v = values[t.target];
        budget -= t.lo;
        value += t.lo * v;
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
        if (t.hi > t.lo) items.push_back({sign * v, t.hi - t.lo});
    }
    if (budget <= 0.0) return value;
    if (vmin == vmax) return value + budget * vmin;
    return value + sign * greedy_fill(items, budget);
}

} // namespace

double worst_case_value(std::span<const Transition> row, std::span<const double> values, Direction direction) {
    thread_local std::vector<ValueMass> items;
    return fast_worst_case_value(row, values, direction, items);
}

InnerSolution worst_case_expectation(std::span<const Transition> row, std::span<const double> values,
                                     Direction direction) {
    double sum_lo = 0.0;
    double sum_hi = 0.0;
    for (const auto& t : row) {
        if (t.target >= values.size()) {
            throw ContractViolation("worst_case_expectation: target without a value");
        }
        if (t.lo < 0.0 || t.lo > t.hi) {
            throw ContractViolation("worst_case_expectation: invalid interval");
        }
        sum_lo += t.lo;
        sum_hi += t.hi;
    }
    if (sum_lo > 1.0 + kMassTol || sum_hi < 1.0 - kMassTol) {
        throw InfeasibleAmbiguitySet("worst_case_expectation: interval masses cannot sum to 1");
    }
    InnerSolution out;
    out.distribution.resize(row.size());
    double budget = 1.0 - sum_lo;
    for (std::size_t i = 0; i < row.size(); ++i) out.distribution[i] = row[i].lo;
    std::vector<std::uint32_t> order;
    sort_targets(row, values, direction, order);
    for (std::uint32_t i : order) {
        if (budget <= 0.0) break;
        const double room = row[i].hi - row[i].lo;
        if (room <= budget) {
            out.distribution[i] = row[i].hi; // lo + room can round past hi
            budget -= room;
        } else {
            out.distribution[i] += budget;
            budget = 0.0;
        }
    }
    for (std::size_t i = 0; i < row.size(); ++i) out.value += out.distribution[i] * values[row[i].target];
    return out;
}

std::vector<double> evaluate_policy(const Imdp& imdp, const std::vector<std::uint32_t>& action, Direction direction,
                                    const SynthesisOptions& options, int* iterations) {
    if (action.size() != imdp.num_states()) {
        throw ContractViolation("evaluate_policy: one action per state required");
    }
    std::vector<double> v = goal_indicator(imdp);
    std::vector<double> next(v.size());
    double residual = 0.0;
    for (int it = 1; it <= options.max_iters; ++it) {
        residual = sweep(imdp, v, next, direction, &action, nullptr, options.threads);
        v.swap(next);
        if (residual < options.tol) {
            if (iterations) *iterations = it;
            return v;
        }
    }
    throw NonConvergence("policy evaluation did not converge in " + std::to_string(options.max_iters) +
                             " iterations (residual " + std::to_string(residual) + ")",
                         residual);
}

SynthesisResult robust_value_iteration(const Imdp& imdp, const SynthesisOptions& options) {
    if (imdp.num_states() == 0) {
        throw ContractViolation("robust_value_iteration: empty IMDP");
    }
    std::vector<double> v = goal_indicator(imdp);
    std::vector<double> next(v.size());
    std::vector<std::uint32_t> argmax(v.size(), 0);
    SynthesisResult out;
    double residual = 0.0;
    int it = 0;
    bool converged = false;
    while (it < options.max_iters) {
        ++it;
        residual = sweep(imdp, v, next, Direction::Min, nullptr, &argmax, options.threads);
        v.swap(next);
        if (residual < options.tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw NonConvergence("robust value iteration did not converge in " + std::to_string(options.max_iters) +
                                 " iterations (residual " + std::to_string(residual) + ")",
                             residual);
    }
    out.policy.action = std::move(argmax);
    out.values.iterations = it;
    out.values.residual = residual;
    out.values.v_lo = evaluate_policy(imdp, out.policy.action, Direction::Min, options);
    out.values.v_hi = evaluate_policy(imdp, out.policy.action, Direction::Max, options);
    for (std::size_t s = 0; s < v.size(); ++s) {
        // Both evaluations approach their fixed points from below; keep the
        // sandwich exact when they are within tolerance of each other.
        out.values.v_hi[s] = std::max(out.values.v_hi[s], out.values.v_lo[s]);
    }
    out.policy.lambda = out.values.v_lo[imdp.initial_state()];
    return out;
}

PermissivePolicy::PermissivePolicy(const Partition& partition, const ActionSet& actions, const RobustPolicy& policy)
    : partition_(&partition), actions_(&actions), policy_(&policy) {
    if (policy.action.size() != partition.num_states()) {
        throw ContractViolation("permissive_policy: policy does not match the partition");
    }
}

std::uint32_t PermissivePolicy::action(const Vec& x) const { return policy_->action[partition_->locate(x)]; }

const Box& PermissivePolicy::operator()(const Vec& x) const { return interface_set(*actions_, action(x)); }

std::vector<Mat> heatmap(const ValueBounds& values, const Partition& partition) {
    if (partition.dim() < 2) {
        throw ContractViolation("heatmap: need at least two state dimensions");
    }
    const int n0 = partition.counts()[0];
    const int n1 = partition.counts()[1];
    std::size_t layers = 1;
    for (int d = 2; d < partition.dim(); ++d) layers *= partition.counts()[d];
    std::vector<Mat> out(layers, Mat::Zero(n0, n1));
    for (std::size_t s = 0; s < partition.num_cells(); ++s) {
        const auto idx = partition.multi_index(s);
        std::size_t layer = 0;
        for (int d = 2; d < partition.dim(); ++d) layer = layer * partition.counts()[d] + idx[d];
        out[layer](idx[0], idx[1]) = values.v_lo[s];
    }
    return out;
}

void write_values_csv(std::ostream& os, const ValueBounds& values, const RobustPolicy& policy) {
    os << "state,v_lo,v_hi,action\n";
    char buf[128];
    for (std::size_t s = 0; s < values.v_lo.size(); ++s) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%u\n", s, values.v_lo[s], values.v_hi[s], policy.action[s]);
        os << buf;
    }
}

void write_heatmap_csv(std::ostream& os, const ValueBounds& values, const Partition& partition) {
    const auto maps = heatmap(values, partition);
    const auto& e0 = partition.edges(0);
    const auto& e1 = partition.edges(1);
    os << "layer,i,j,x,y,v_lo\n";
    char buf[160];
    for (std::size_t l = 0; l < maps.size(); ++l) {
        for (Eigen::Index i = 0; i < maps[l].rows(); ++i) {
            for (Eigen::Index j = 0; j < maps[l].cols(); ++j) {
                std::snprintf(buf, sizeof buf, "%zu,%ld,%ld,%.17g,%.17g,%.17g\n", l, static_cast<long>(i),
                              static_cast<long>(j), 0.5 * (e0[i] + e0[i + 1]), 0.5 * (e1[j] + e1[j + 1]),
                              maps[l](i, j));
                os << buf;
            }
        }
    }
}

} // namespace imdpmpc
