#include "imdpmpc/abstraction.hpp"

#include "imdpmpc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

namespace imdpmpc {

namespace {

constexpr double kPi = std::numbers::pi;

// P(z1 < Z < z2) for a standard normal Z, computed on the tail that keeps
// precision.
double normal_mass(double z1, double z2) {
    if (!(z2 > z1)) return 0.0;
    constexpr double r = std::numbers::sqrt2 / 2.0;
    if (z1 >= 0.0) return 0.5 * (std::erfc(z1 * r) - std::erfc(z2 * r));
    if (z2 <= 0.0) return 0.5 * (std::erfc(-z2 * r) - std::erfc(-z1 * r));
    return 1.0 - 0.5 * std::erfc(-z1 * r) - 0.5 * std::erfc(z2 * r);
}

// Upper bound on the standard normal tail mass beyond `k` std on both sides.
double two_sided_tail(double k) { return std::erfc(k / std::numbers::sqrt2); }

// Probability that a wrapped N(m, sigma^2) lands in the arc of half-width h
// whose center is at circular distance d from m.
double wrapped_mass(double d, double h, double sigma) {
    double p = 0.0;
    for (int k = -2; k <= 2; ++k) {
        const double shift = 2.0 * kPi * k - d;
        p += normal_mass((shift - h) / sigma, (shift + h) / sigma);
    }
    return std::min(p, 1.0);
}

// Range of circular distances from c over the interval `m`.
std::pair<double, double> circular_distance_range(Interval m, double c) {
    if (m.width() >= 2.0 * kPi) return {0.0, kPi};
    const double a = wrap_angle(m.lo - c); // in [-pi, pi)
    const double b = a + m.width();        // < a + 2 pi
    const bool has_zero = (a <= 0.0 && b >= 0.0) || b >= 2.0 * kPi;
    const bool has_pi = b >= kPi;
    const double da = std::abs(a);
    const double db = std::abs(wrap_angle(b));
    return {has_zero ? 0.0 : std::min(da, db), has_pi ? kPi : std::max(da, db)};
}

} // namespace

const char* to_string(Label label) {
    switch (label) {
    case Label::Neutral:
        return "neutral";
    case Label::Goal:
        return "goal";
    case Label::Unsafe:
        return "unsafe";
    }
    return "?";
}

ActionSet make_action_set(const SystemModel& model, const std::vector<int>& counts, const Vec& radius) {
    if (static_cast<int>(counts.size()) != model.n_u) {
        throw ContractViolation("make_action_set: need one count per input dimension");
    }
    require_dim(radius, model.n_u, "make_action_set: radius");
    if ((radius.array() < 0.0).any()) {
        throw ContractViolation("make_action_set: radius must be non-negative");
    }
    std::vector<std::vector<double>> axes(model.n_u);
    std::size_t total = 1;
    for (int j = 0; j < model.n_u; ++j) {
        if (counts[j] < 1) throw ContractViolation("make_action_set: counts must be >= 1");
        const double lo = model.input_box.lo(j);
        const double hi = model.input_box.hi(j);
        if (counts[j] == 1) {
            axes[j] = {0.5 * (lo + hi)};
        } else {
            for (int k = 0; k < counts[j]; ++k) {
                axes[j].push_back(k == counts[j] - 1 ? hi : lo + (hi - lo) * k / (counts[j] - 1));
            }
        }
        total *= axes[j].size();
    }
    ActionSet out;
    out.radius = radius;
    std::vector<int> idx(model.n_u, 0);
    for (std::size_t n = 0; n < total; ++n) {
        Vec c(model.n_u);
        for (int j = 0; j < model.n_u; ++j) c[j] = axes[j][idx[j]];
        const Box ball = *Box(c - radius, c + radius).intersect(model.input_box);
        out.centers.push_back(c);
        out.balls.push_back(ball);
        for (int j = model.n_u - 1; j >= 0; --j) {
            if (++idx[j] < counts[j]) break;
            idx[j] = 0;
        }
    }
    return out;
}

ProbabilityInterval dimension_factor(Interval mean, Interval target, double sigma, bool wrapped, bool closed_top) {
    if (sigma <= 0.0) {
        const bool inside_hi = closed_top ? mean.hi <= target.hi : mean.hi < target.hi;
        const bool touch_hi = closed_top ? mean.lo <= target.hi : mean.lo < target.hi;
        const double lo = (mean.lo >= target.lo && inside_hi) ? 1.0 : 0.0;
        const double hi = (mean.hi >= target.lo && touch_hi) ? 1.0 : 0.0;
        return {lo, hi};
    }
    if (wrapped) {
        const double h = 0.5 * target.width();
        const auto [dmin, dmax] = circular_distance_range(mean, target.mid());
        return {wrapped_mass(dmax, h, sigma), wrapped_mass(dmin, h, sigma)};
    }
    const double mid = target.mid();
    const double best = std::clamp(mid, mean.lo, mean.hi);
    const double worst = (mid - mean.lo >= mean.hi - mid) ? mean.lo : mean.hi;
    auto mass_at = [&](double m) { return normal_mass((target.lo - m) / sigma, (target.hi - m) / sigma); };
    return {mass_at(worst), mass_at(best)};
}

namespace {

// Bounds on the probability of staying inside the state box along dimension d.
ProbabilityInterval inside_factor(const SystemModel& model, Interval mean, int d) {
    if (model.is_wrapped(d)) return {1.0, 1.0};
    return dimension_factor(mean, model.state_box[d], model.noise_std[d], false, true);
}

} // namespace

ProbabilityInterval transition_interval(const SystemModel& model, const Partition& partition, std::size_t s,
                                        const Box& ball, std::size_t target) {
    if (s >= partition.num_cells()) {
        throw ContractViolation("transition_interval: source must be an interior cell");
    }
    const Box image = mean_image_bounds(model, partition.cell_box(s), ball);
    if (target == partition.outside()) {
        double stay_lo = 1.0;
        double stay_hi = 1.0;
        for (int d = 0; d < model.n_x; ++d) {
            const auto f = inside_factor(model, image[d], d);
            stay_lo *= f.lo;
            stay_hi *= f.hi;
        }
        return {std::max(0.0, 1.0 - stay_hi), std::min(1.0, 1.0 - stay_lo)};
    }
    const auto idx = partition.multi_index(target);
    ProbabilityInterval p{1.0, 1.0};
    for (int d = 0; d < model.n_x; ++d) {
        const auto& e = partition.edges(d);
        const Interval t{e[idx[d]], e[idx[d] + 1]};
        const bool top = idx[d] == partition.counts()[d] - 1;
        const auto f = dimension_factor(image[d], t, model.noise_std[d], model.is_wrapped(d), top);
        p.lo *= f.lo;
        p.hi *= f.hi;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Imdp storage

Imdp::Imdp(std::size_t num_states, std::size_t num_actions, std::vector<Label> labels, std::size_t initial_state)
    : num_actions_(num_actions), initial_state_(initial_state), labels_(std::move(labels)) {
    if (labels_.size() != num_states) {
        throw ContractViolation("Imdp: one label per state required");
    }
    if (initial_state_ >= num_states) {
        throw ContractViolation("Imdp: initial state out of range");
    }
    state_begin_.reserve(num_states + 1);
}

void Imdp::add_row(std::uint32_t action, std::span<const Transition> transitions) {
    if (state_begin_.size() > labels_.size()) {
        throw ContractViolation("Imdp::add_row: all states already finished");
    }
    row_action_.push_back(action);
    entries_.insert(entries_.end(), transitions.begin(), transitions.end());
    row_offset_.push_back(entries_.size());
}

void Imdp::finish_state() {
    if (state_begin_.size() > labels_.size()) {
        throw ContractViolation("Imdp::finish_state: too many states");
    }
    state_begin_.push_back(row_action_.size());
}

std::span<const Transition> Imdp::transitions(std::size_t s, std::uint32_t action) const {
    for (std::size_t r = row_begin(s); r < row_end(s); ++r) {
        if (row_action_[r] == action) return row(r);
    }
    return {};
}

void Imdp::validate(double tol) const {
    if (state_begin_.size() != labels_.size() + 1) {
        throw ContractViolation("Imdp: not every state has been finished");
    }
    for (std::size_t s = 0; s < num_states(); ++s) {
        if (row_begin(s) == row_end(s)) {
            throw ContractViolation("Imdp: state " + std::to_string(s) + " has no enabled action");
        }
        for (std::size_t r = row_begin(s); r < row_end(s); ++r) {
            double sum_lo = 0.0;
            double sum_hi = 0.0;
            for (const auto& t : row(r)) {
                if (t.target >= num_states()) {
                    throw ContractViolation("Imdp: transition target out of range");
                }
                if (!(t.lo >= 0.0 && t.lo <= t.hi + tol && t.hi <= 1.0 + tol)) {
                    throw ContractViolation("Imdp: invalid interval at state " + std::to_string(s));
                }
                sum_lo += t.lo;
                sum_hi += t.hi;
            }
            if (sum_lo > 1.0 + tol || sum_hi < 1.0 - tol) {
                throw InfeasibleAmbiguitySet("Imdp: empty ambiguity set at state " + std::to_string(s) +
                                             ", action " + std::to_string(row_action_[r]) +
                                             " (sum lo = " + std::to_string(sum_lo) +
                                             ", sum hi = " + std::to_string(sum_hi) + ")");
            }
        }
    }
}

void Imdp::write(std::ostream& os) const {
    os << "imdp 1\n";
    os << "states " << num_states() << '\n';
    os << "actions " << num_actions() << '\n';
    os << "initial " << initial_state() << '\n';
    os << "transitions " << num_transitions() << '\n';
    for (std::size_t s = 0; s < num_states(); ++s) {
        if (labels_[s] != Label::Neutral) {
            os << "label " << s << ' ' << to_string(labels_[s]) << '\n';
        }
    }
    char buf[96];
    for (std::size_t s = 0; s < num_states(); ++s) {
        for (std::size_t r = row_begin(s); r < row_end(s); ++r) {
            for (const auto& t : row(r)) {
                std::snprintf(buf, sizeof buf, "%zu %u %u %.17g %.17g\n", s, row_action_[r], t.target, t.lo, t.hi);
                os << buf;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Construction

namespace {

struct DimCandidates {
    int first = 0;
    std::vector<ProbabilityInterval> factors; // one per candidate index first + k
};

class RowBuilder {
public:
    RowBuilder(const SystemModel& model, const Partition& partition, const AbstractionOptions& options)
        : model_(model), partition_(partition), options_(options), dims_(model.n_x) {}

    // Fills `out` with the transitions of (cell s, ball).
    void build(std::size_t s, const Box& ball, std::vector<Transition>& out) {
        out.clear();
        const Box image = mean_image_bounds(model_, partition_.cell_box(s), ball);
        const int n = model_.n_x;
        double tail = 0.0;
        bool empty = false;
        for (int d = 0; d < n; ++d) {
            const double sigma = model_.noise_std[d];
            const bool wrapped = model_.is_wrapped(d);
            const auto& e = partition_.edges(d);
            const int count = partition_.counts()[d];
            auto& dc = dims_[d];
            dc.factors.clear();
            int first = 0;
            int last = count - 1;
            if (!wrapped) {
                const double pad = options_.window_sigmas * sigma;
                const double lo = std::max(image.lo(d) - pad, e.front());
                const double hi = std::min(image.hi(d) + pad, e.back());
                if (lo > hi) {
                    empty = true;
                    continue;
                }
                first = partition_.locate_dim(d, lo);
                last = partition_.locate_dim(d, hi);
                if (sigma > 0.0) tail += two_sided_tail(options_.window_sigmas);
            }
            dc.first = first;
            for (int k = first; k <= last; ++k) {
                dc.factors.push_back(
                    dimension_factor(image[d], {e[k], e[k + 1]}, sigma, wrapped, k == count - 1));
            }
        }

        double residual = tail;
        if (!empty) {
            enumerate(0, 0, 1.0, 1.0, out, residual);
        }

        double stay_lo = 1.0;
        double stay_hi = 1.0;
        for (int d = 0; d < n; ++d) {
            const auto f = inside_factor(model_, image[d], d);
            stay_lo *= f.lo;
            stay_hi *= f.hi;
        }
        const double out_lo = std::max(0.0, 1.0 - stay_hi);
        const double out_hi = std::min(1.0, 1.0 - stay_lo + residual);
        if (out_hi > 0.0) {
            out.push_back({static_cast<std::uint32_t>(partition_.outside()), out_lo, out_hi});
        }
    }

private:
    void enumerate(int d, std::size_t base, double lo, double hi, std::vector<Transition>& out, double& residual) {
        const auto& dc = dims_[d];
        for (std::size_t k = 0; k < dc.factors.size(); ++k) {
            const double h = hi * dc.factors[k].hi;
            const std::size_t idx = base + partition_.stride(d) * static_cast<std::size_t>(dc.first + k);
            if (h < options_.prune_threshold) {
                // Everything below this prefix is pruned too (factors <= 1).
                residual += h;
                continue;
            }
            const double l = lo * dc.factors[k].lo;
            if (d + 1 == model_.n_x) {
                out.push_back({static_cast<std::uint32_t>(idx), l, h});
            } else {
                enumerate(d + 1, idx, l, h, out, residual);
            }
        }
    }

    const SystemModel& model_;
    const Partition& partition_;
    const AbstractionOptions& options_;
    std::vector<DimCandidates> dims_;
};

} // namespace

Imdp build_imdp(const SystemModel& model, const Partition& partition, const ActionSet& actions,
                const AbstractionOptions& options) {
    if (actions.size() == 0) {
        throw ContractViolation("build_imdp: empty action set");
    }
    const std::size_t S = partition.num_states();
    const std::size_t init = partition.locate(model.initial_state);
    std::vector<Label> labels(S);
    for (std::size_t s = 0; s < S; ++s) labels[s] = partition.label(s);
    Imdp imdp(S, actions.size(), std::move(labels), init);

    const std::size_t M = actions.size();
    const int threads = std::max(1, options.threads);
    const std::size_t wave = static_cast<std::size_t>(threads) * 32;
    std::vector<std::vector<std::vector<Transition>>> rows(wave);
    std::vector<RowBuilder> builders(threads, RowBuilder(model, partition, options));

    for (std::size_t start = 0; start < S; start += wave) {
        const std::size_t stop = std::min(S, start + wave);
        // Each worker owns a contiguous slice so builders are not shared.
        const std::size_t per = (stop - start + threads - 1) / threads;
        parallel_for(0, static_cast<std::size_t>(threads), threads, [&](std::size_t t) {
            const std::size_t b = start + t * per;
            const std::size_t e = std::min(stop, b + per);
            for (std::size_t s = b; s < e; ++s) {
                auto& state_rows = rows[s - start];
                if (partition.is_terminal(s)) {
                    state_rows.assign(1, {});
                    continue;
                }
                state_rows.resize(M);
                for (std::size_t a = 0; a < M; ++a) builders[t].build(s, actions.balls[a], state_rows[a]);
            }
        });
        for (std::size_t s = start; s < stop; ++s) {
            auto& state_rows = rows[s - start];
            if (partition.is_terminal(s)) {
                const Transition self{static_cast<std::uint32_t>(s), 1.0, 1.0};
                imdp.add_row(0, std::span<const Transition>(&self, 1));
            } else {
                for (std::size_t a = 0; a < M; ++a) imdp.add_row(static_cast<std::uint32_t>(a), state_rows[a]);
            }
            imdp.finish_state();
            for (auto& r : state_rows) std::vector<Transition>().swap(r);
        }
    }
    imdp.validate();
    return imdp;
}

} // namespace imdpmpc
