#include "stasplit/tridiagonal.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

namespace {
constexpr double eps = std::numeric_limits<double>::epsilon();
}

double SymTridiagonal::norm() const {
    const Eigen::Index n = size();
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        double r = std::abs(diag(i));
        if (i > 0)
            r += std::abs(off(i - 1));
        if (i + 1 < n)
            r += std::abs(off(i));
        m = std::max(m, r);
    }
    return m;
}

namespace {

Eigen::Index sturm_count_scaled(const SymTridiagonal& t, double x, double tiny) {
    const Eigen::Index n = t.size();
    Eigen::Index count = 0;
    double q = t.diag(0) - x;
    for (Eigen::Index i = 0;; ++i) {
        if (std::abs(q) < tiny)
            q = -tiny;
        if (q < 0.0)
            ++count;
        if (i + 1 == n)
            break;
        q = t.diag(i + 1) - x - t.off(i) * t.off(i) / q;
    }
    return count;
}

}  // namespace

Eigen::Index sturm_count(const SymTridiagonal& t, double x) {
    return sturm_count_scaled(t, x, eps * std::max(t.norm(), std::numeric_limits<double>::min()));
}

double bisect_eigenvalue(const SymTridiagonal& t, Eigen::Index k) {
    const Eigen::Index n = t.size();
    if (k < 0 || k >= n)
        throw NumericalError("bisect_eigenvalue: index out of range");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (Eigen::Index i = 0; i < n; ++i) {
        double r = (i > 0 ? std::abs(t.off(i - 1)) : 0.0) + (i + 1 < n ? std::abs(t.off(i)) : 0.0);
        lo = std::min(lo, t.diag(i) - r);
        hi = std::max(hi, t.diag(i) + r);
    }
    const double scale = t.norm();
    const double tiny = eps * std::max(scale, std::numeric_limits<double>::min());
    lo -= eps * scale;
    hi += eps * scale;
    const double abs_tol = 0.5 * eps * scale;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (hi - lo <= 2.0 * eps * std::max(std::abs(lo), std::abs(hi)) + abs_tol || mid <= lo || mid >= hi)
            break;
        if (sturm_count_scaled(t, mid, tiny) > k)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

namespace {

// Gaussian elimination with partial pivoting of T - sigma I.
struct ShiftedFactor {
    std::vector<double> u0, u1, u2, l;
    std::vector<char> swapped;

    ShiftedFactor(const SymTridiagonal& t, double sigma) {
        const Eigen::Index n = t.size();
        u0.assign(n, 0.0);
        u1.assign(n, 0.0);
        u2.assign(n, 0.0);
        l.assign(n, 0.0);
        swapped.assign(n, 0);
        const double tiny = eps * std::max(t.norm(), std::numeric_limits<double>::min());
        double cd = t.diag(0) - sigma;
        double cu = n > 1 ? t.off(0) : 0.0;
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            double b = t.off(i);
            double a_next = t.diag(i + 1) - sigma;
            double b_next = i + 2 < n ? t.off(i + 1) : 0.0;
            if (std::abs(cd) >= std::abs(b)) {
                if (cd == 0.0)
                    cd = tiny;
                u0[i] = cd;
                u1[i] = cu;
                u2[i] = 0.0;
                l[i] = b / cd;
                cd = a_next - l[i] * cu;
                cu = b_next;
            } else {
                swapped[i] = 1;
                u0[i] = b;
                u1[i] = a_next;
                u2[i] = b_next;
                l[i] = cd / b;
                cd = cu - l[i] * a_next;
                cu = -l[i] * b_next;
            }
        }
        if (std::abs(cd) < tiny)
            cd = cd < 0.0 ? -tiny : tiny;
        u0[n - 1] = cd;
    }

    void solve(Eigen::VectorXd& x) const {
        const Eigen::Index n = x.size();
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            if (swapped[i])
                std::swap(x(i), x(i + 1));
            x(i + 1) -= l[i] * x(i);
        }
        x(n - 1) /= u0[n - 1];
        if (n > 1)
            x(n - 2) = (x(n - 2) - u1[n - 2] * x(n - 1)) / u0[n - 2];
        for (Eigen::Index i = n - 3; i >= 0; --i)
            x(i) = (x(i) - u1[i] * x(i + 1) - u2[i] * x(i + 2)) / u0[i];
    }
};

void orthogonalize(Eigen::VectorXd& v, const Eigen::MatrixXd& lower) {
    for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index j = 0; j < lower.cols(); ++j)
            v -= lower.col(j).dot(v) * lower.col(j);
}

}  // namespace

Eigen::VectorXd inverse_iteration(const SymTridiagonal& t, double eigenvalue, const Eigen::MatrixXd& lower) {
    const Eigen::Index n = t.size();
    const double scale = t.norm();
    ShiftedFactor f(t, eigenvalue);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = 1.0 + 0.25 * std::sin(1.7 * static_cast<double>(i) + 0.3);
    orthogonalize(v, lower);
    v.normalize();
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 8; ++it) {
        f.solve(v);
        orthogonalize(v, lower);
        double nv = v.norm();
        if (!(nv > 0.0) || !std::isfinite(nv))
            break;
        v /= nv;
        residual = (t.apply(v) - eigenvalue * v).norm();
        if (it >= 1 && residual <= 1e-11 * scale)
            return v;
    }
    if (residual <= 1e-8 * scale)
        return v;
    throw NumericalError("inverse iteration did not converge for eigenvalue " + format_number(eigenvalue) +
                         ": residual " + format_number(residual) + " vs ||T|| " + format_number(scale));
}

Eigenpair eigenpair(const SymTridiagonal& t, Eigen::Index k, const Eigen::MatrixXd& lower) {
    const Eigen::Index n = t.size();
    if (k < 0 || k >= n)
        throw NumericalError("eigenpair: index out of range");
    const double scale = t.norm();
    const double tiny = eps * std::max(scale, std::numeric_limits<double>::min());
    // Inverse iteration shifted to the bottom of the spectrum filters the
    // start vector towards level k; Rayleigh-quotient iteration then polishes.
    // The result is accepted only if Sturm counts certify index k.
    double bottom = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < n; ++i) {
        double r = (i > 0 ? std::abs(t.off(i - 1)) : 0.0) + (i + 1 < n ? std::abs(t.off(i)) : 0.0);
        bottom = std::min(bottom, t.diag(i) - r);
    }
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i)
        v(i) = 1.0 + 0.25 * std::sin(1.7 * static_cast<double>(i) + 0.3);
    orthogonalize(v, lower);
    v.normalize();
    double rho = bottom;
    double previous = std::numeric_limits<double>::infinity();
    {
        ShiftedFactor f(t, bottom - 1e-3 * scale * eps);
        for (int it = 0; it < 40; ++it) {
            f.solve(v);
            orthogonalize(v, lower);
            v.normalize();
            rho = v.dot(t.apply(v));
            if (std::abs(previous - rho) < 1e-4 * std::abs(rho - bottom))
                break;
            previous = rho;
        }
    }
    for (int it = 0; it < 30; ++it) {
        ShiftedFactor f(t, rho);
        f.solve(v);
        orthogonalize(v, lower);
        double nv = v.norm();
        if (!(nv > 0.0) || !std::isfinite(nv))
            break;
        v /= nv;
        Eigen::VectorXd tv = t.apply(v);
        rho = v.dot(tv);
        double residual = (tv - rho * v).norm();
        if (residual <= 1e-11 * scale) {
            double margin = std::max(1e3 * residual, 64.0 * tiny);
            if (sturm_count_scaled(t, rho - margin, tiny) == k && sturm_count_scaled(t, rho + margin, tiny) == k + 1)
                return {rho, v};
            break;
        }
    }
    double value = bisect_eigenvalue(t, k);
    return {value, inverse_iteration(t, value, lower)};
}

TridiagonalEigenpairs lowest_eigenpairs(const SymTridiagonal& t, int k) {
    if (k < 1 || k > t.size())
        throw NumericalError("lowest_eigenpairs: invalid count");
    TridiagonalEigenpairs out;
    out.values.resize(k);
    out.vectors.resize(t.size(), k);
    for (int j = 0; j < k; ++j) {
        auto pair = eigenpair(t, j, out.vectors.leftCols(j));
        out.values(j) = pair.value;
        out.vectors.col(j) = pair.vector;
    }
    return out;
}

}  // namespace stasplit
