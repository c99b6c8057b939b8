#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace imdpmpc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Raised when a caller breaks a documented precondition (dimension
/// mismatch, inverted bounds, input outside the certified set, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Closed scalar interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool contains(double v) const { return lo <= v && v <= hi; }
};

Interval operator+(Interval a, Interval b);
Interval operator+(Interval a, double b);
Interval operator*(double s, Interval a);
/// Four-corner product.
Interval operator*(Interval a, Interval b);
Interval cos(Interval a);
Interval sin(Interval a);
Interval hull(Interval a, Interval b);

/// Axis-aligned box, lo <= hi element-wise.
class Box {
public:
    Box() = default;
    Box(Vec lo, Vec hi);

    static Box point(const Vec& p) { return Box(p, p); }

    Eigen::Index dim() const { return lo_.size(); }
    const Vec& lo() const { return lo_; }
    const Vec& hi() const { return hi_; }
    double lo(Eigen::Index i) const { return lo_[i]; }
    double hi(Eigen::Index i) const { return hi_[i]; }
    Interval operator[](Eigen::Index i) const { return {lo_[i], hi_[i]}; }

    Vec center() const { return 0.5 * (lo_ + hi_); }
    Vec width() const { return hi_ - lo_; }
    double volume() const { return width().prod(); }

    bool contains(const Vec& x, double tol = 0.0) const;
    bool contains(const Box& other, double tol = 0.0) const;
    bool intersects(const Box& other) const;
    std::optional<Box> intersect(const Box& other) const;
    Vec clamp(const Vec& x) const;

    void set(Eigen::Index i, Interval iv);

    bool operator==(const Box& other) const { return lo_ == other.lo_ && hi_ == other.hi_; }

    std::string to_string() const;

private:
    Vec lo_;
    Vec hi_;
};

void require_dim(const Vec& v, Eigen::Index n, const char* what);

} // namespace imdpmpc
