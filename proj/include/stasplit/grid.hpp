#pragma once

#include <Eigen/Dense>

#include <complex>
#include <cstddef>

#include "errors.hpp"

namespace stasplit {

using Complex = std::complex<double>;

// Uniform grid including both end points.
struct Grid1D {
    double x_min = 0.0;
    double x_max = 0.0;
    Eigen::Index n_points = 0;

    Grid1D() = default;
    Grid1D(double lo, double hi, Eigen::Index n);

    double spacing() const { return (x_max - x_min) / static_cast<double>(n_points - 1); }
    double x(Eigen::Index i) const { return x_min + static_cast<double>(i) * spacing(); }
    Eigen::VectorXd points() const;
    bool symmetric() const;
};

inline Grid1D::Grid1D(double lo, double hi, Eigen::Index n) : x_min(lo), x_max(hi), n_points(n) {
    if (!(hi > lo))
        throw ConfigError("grid: x_max must exceed x_min");
    if (n < 64 || (n & (n - 1)) != 0)
        throw ConfigError("grid: n_points must be a power of two >= 64");
}

inline Eigen::VectorXd Grid1D::points() const {
    return Eigen::VectorXd::LinSpaced(n_points, x_min, x_max);
}

inline bool Grid1D::symmetric() const {
    return std::abs(x_min + x_max) <= 1e-12 * (x_max - x_min);
}

// Grid inner products, sum(conj(a) b) dx.
template <typename DerivedA, typename DerivedB>
auto grid_dot(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, double dx) {
    return a.dot(b) * dx;
}

template <typename Derived>
double grid_norm2(const Eigen::MatrixBase<Derived>& a, double dx) {
    return a.squaredNorm() * dx;
}

template <typename Derived>
void grid_normalize(Eigen::MatrixBase<Derived>& a, double dx) {
    a /= std::sqrt(grid_norm2(a, dx));
}

// |<a|b>|^2 for normalized grid functions.
template <typename DerivedA, typename DerivedB>
double grid_fidelity(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b, double dx) {
    return std::norm(grid_dot(a, b, dx));
}

}  // namespace stasplit
