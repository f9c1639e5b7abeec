#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

#include "errors.hpp"

namespace stasplit {

template <int Dim>
struct NelderMeadResult {
    Eigen::Matrix<double, Dim, 1> argmin;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
};

template <int Dim>
class NelderMeadError : public NumericalError {
public:
    NelderMeadError(const std::string& what, NelderMeadResult<Dim> best) : NumericalError(what), best(best) {}
    NelderMeadResult<Dim> best;
};

// Reflection 1, expansion 2, contraction 1/2, shrink 1/2. Stops when every
// vertex lies within tol * scale of the best one, or the value spread drops
// below tol^2.
template <int Dim, typename Cost>
NelderMeadResult<Dim> nelder_mead(Cost&& cost, const Eigen::Matrix<double, Dim, 1>& start,
                                  const Eigen::Matrix<double, Dim, 1>& scale, double tol, int max_iter) {
    using Vec = Eigen::Matrix<double, Dim, 1>;
    constexpr int n = Dim;
    std::array<Vec, n + 1> x;
    std::array<double, n + 1> f;
    int evals = 0;
    auto eval = [&](const Vec& v) {
        ++evals;
        double c = cost(v);
        return std::isnan(c) ? std::numeric_limits<double>::infinity() : c;
    };
    x[0] = start;
    f[0] = eval(start);
    if (!std::isfinite(f[0]))
        throw NumericalError("nelder_mead: cost not finite at the start point");
    for (int i = 0; i < n; ++i) {
        x[i + 1] = start;
        x[i + 1](i) += scale(i);
        f[i + 1] = eval(x[i + 1]);
    }
    std::array<int, n + 1> order;
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
        auto xs = x;
        auto fs = f;
        for (int i = 0; i <= n; ++i) {
            x[i] = xs[order[i]];
            f[i] = fs[order[i]];
        }
    };
    auto converged = [&] {
        if (f[n] - f[0] < tol * tol)
            return true;
        double diam = 0.0;
        for (int i = 1; i <= n; ++i)
            diam = std::max(diam, ((x[i] - x[0]).array() / scale.array()).abs().maxCoeff());
        return diam < tol;
    };
    sort_simplex();
    for (int it = 0; it < max_iter; ++it) {
        if (converged())
            return {x[0], f[0], it, evals};
        Vec centroid = Vec::Zero();
        for (int i = 0; i < n; ++i)
            centroid += x[i];
        centroid /= n;
        Vec xr = centroid + (centroid - x[n]);
        double fr = eval(xr);
        if (fr < f[0]) {
            Vec xe = centroid + 2.0 * (centroid - x[n]);
            double fe = eval(xe);
            if (fe < fr) {
                x[n] = xe;
                f[n] = fe;
            } else {
                x[n] = xr;
                f[n] = fr;
            }
        } else if (fr < f[n - 1]) {
            x[n] = xr;
            f[n] = fr;
        } else {
            bool outside = fr < f[n];
            Vec xc = outside ? Vec(centroid + 0.5 * (xr - centroid)) : Vec(centroid + 0.5 * (x[n] - centroid));
            double fc = eval(xc);
            if (fc < (outside ? fr : f[n])) {
                x[n] = xc;
                f[n] = fc;
            } else {
                for (int i = 1; i <= n; ++i) {
                    x[i] = x[0] + 0.5 * (x[i] - x[0]);
                    f[i] = eval(x[i]);
                }
            }
        }
        sort_simplex();
    }
    if (converged())
        return {x[0], f[0], max_iter, evals};
    throw NelderMeadError<Dim>("nelder_mead: max_iter exceeded", {x[0], f[0], max_iter, evals});
}

}  // namespace stasplit
