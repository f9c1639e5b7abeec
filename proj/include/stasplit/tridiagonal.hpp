#pragma once

#include <Eigen/Dense>

namespace stasplit {

// Real symmetric tridiagonal matrix; off(i) couples rows i and i+1.
struct SymTridiagonal {
    Eigen::VectorXd diag;
    Eigen::VectorXd off;

    Eigen::Index size() const { return diag.size(); }

    template <typename Derived>
    Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> apply(const Eigen::MatrixBase<Derived>& v) const {
        const Eigen::Index n = size();
        Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> out = diag.cwiseProduct(v);
        out.head(n - 1) += off.cwiseProduct(v.tail(n - 1));
        out.tail(n - 1) += off.cwiseProduct(v.head(n - 1));
        return out;
    }

    // Infinity norm, also the Gershgorin radius scale.
    double norm() const;
};

// Number of eigenvalues strictly below x.
Eigen::Index sturm_count(const SymTridiagonal& t, double x);

// k-th smallest eigenvalue (0-based) by bisection.
double bisect_eigenvalue(const SymTridiagonal& t, Eigen::Index k);

// Unit-norm eigenvector for a known eigenvalue, orthogonal to the columns of `lower`.
// Throws NumericalError when the residual does not reach 1e-8 ||T||.
Eigen::VectorXd inverse_iteration(const SymTridiagonal& t, double eigenvalue, const Eigen::MatrixXd& lower);

struct Eigenpair {
    double value = 0.0;
    Eigen::VectorXd vector;
};

// k-th eigenpair with the vector orthogonal to `lower` (the pairs below k).
// Rayleigh-quotient iteration certified by Sturm counts; falls back to
// bisection + inverse iteration for clustered spectra.
Eigenpair eigenpair(const SymTridiagonal& t, Eigen::Index k, const Eigen::MatrixXd& lower);

struct TridiagonalEigenpairs {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns, unit 2-norm
};

TridiagonalEigenpairs lowest_eigenpairs(const SymTridiagonal& t, int k);

}  // namespace stasplit
