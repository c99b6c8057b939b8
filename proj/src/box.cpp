#include "imdpmpc/box.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace imdpmpc {

Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }

Interval operator+(Interval a, double b) { return {a.lo + b, a.hi + b}; }

Interval operator*(double s, Interval a) {
    return s >= 0 ? Interval{s * a.lo, s * a.hi} : Interval{s * a.hi, s * a.lo};
}

Interval operator*(Interval a, Interval b) {
    const double c[4] = {a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi};
    return {*std::min_element(c, c + 4), *std::max_element(c, c + 4)};
}

Interval hull(Interval a, Interval b) { return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)}; }

namespace {

// True if some angle t0 + 2*pi*k lies in [lo, hi].
bool contains_periodic(double lo, double hi, double t0) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double k = std::ceil((lo - t0) / two_pi);
    return t0 + k * two_pi <= hi;
}

} // namespace

Interval cos(Interval a) {
    if (a.width() >= 2.0 * std::numbers::pi) {
        return {-1.0, 1.0};
    }
    const double c0 = std::cos(a.lo);
    const double c1 = std::cos(a.hi);
    // one ulp outward: libm is not correctly rounded
    Interval r{std::max(-1.0, std::nextafter(std::min(c0, c1), -2.0)),
               std::min(1.0, std::nextafter(std::max(c0, c1), 2.0))};
    if (contains_periodic(a.lo, a.hi, 0.0)) {
        r.hi = 1.0;
    }
    if (contains_periodic(a.lo, a.hi, std::numbers::pi)) {
        r.lo = -1.0;
    }
    return r;
}

Interval sin(Interval a) {
    if (a.width() >= 2.0 * std::numbers::pi) {
        return {-1.0, 1.0};
    }
    const double s0 = std::sin(a.lo);
    const double s1 = std::sin(a.hi);
    // one ulp outward: libm is not correctly rounded
    Interval r{std::max(-1.0, std::nextafter(std::min(s0, s1), -2.0)),
               std::min(1.0, std::nextafter(std::max(s0, s1), 2.0))};
    if (contains_periodic(a.lo, a.hi, 0.5 * std::numbers::pi)) {
        r.hi = 1.0;
    }
    if (contains_periodic(a.lo, a.hi, -0.5 * std::numbers::pi)) {
        r.lo = -1.0;
    }
    return r;
}

Box::Box(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size()) {
        throw ContractViolation("Box: lo/hi dimension mismatch");
    }
    for (Eigen::Index i = 0; i < lo_.size(); ++i) {
        if (!(lo_[i] <= hi_[i])) {
            throw ContractViolation("Box: lo > hi in dimension " + std::to_string(i));
        }
    }
}

bool Box::contains(const Vec& x, double tol) const {
    if (x.size() != dim()) {
        return false;
    }
    for (Eigen::Index i = 0; i < dim(); ++i) {
        if (x[i] < lo_[i] - tol || x[i] > hi_[i] + tol) {
            return false;
        }
    }
    return true;
}

bool Box::contains(const Box& other, double tol) const {
    return contains(other.lo_, tol) && contains(other.hi_, tol);
}

bool Box::intersects(const Box& other) const {
    for (Eigen::Index i = 0; i < dim(); ++i) {
        if (other.hi_[i] < lo_[i] || other.lo_[i] > hi_[i]) {
            return false;
        }
    }
    return true;
}

std::optional<Box> Box::intersect(const Box& other) const {
    if (!intersects(other)) {
        return std::nullopt;
    }
    return Box(lo_.cwiseMax(other.lo_), hi_.cwiseMin(other.hi_));
}

Vec Box::clamp(const Vec& x) const { return x.cwiseMax(lo_).cwiseMin(hi_); }

void Box::set(Eigen::Index i, Interval iv) {
    if (!(iv.lo <= iv.hi)) {
        throw ContractViolation("Box::set: inverted interval");
    }
    lo_[i] = iv.lo;
    hi_[i] = iv.hi;
}

std::string Box::to_string() const {
    std::ostringstream os;
    for (Eigen::Index i = 0; i < dim(); ++i) {
        os << (i ? " x " : "") << '[' << lo_[i] << ", " << hi_[i] << ']';
    }
    return os.str();
}

void require_dim(const Vec& v, Eigen::Index n, const char* what) {
    if (v.size() != n) {
        throw ContractViolation(std::string(what) + ": expected dimension " + std::to_string(n) +
                                ", got " + std::to_string(v.size()));
    }
}

} // namespace imdpmpc
