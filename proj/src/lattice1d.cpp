#include "stasplit/lattice1d.hpp"

#include <cmath>
#include <ostream>

#include "stasplit/csv.hpp"
#include "stasplit/errors.hpp"

namespace stasplit {

using constants::hbar;
using constants::pi;

void TrapParameters::validate() const {
    if (!(d_lattice > 0.0) || !(mass > 0.0) || !(omega >= 0.0) || !(v0 >= 0.0) || !std::isfinite(dx_offset))
        throw ConfigError("trap parameters out of range (need d_lattice > 0, mass > 0, omega >= 0, v0 >= 0)");
}

double potential(const TrapParameters& p, double x) {
    double c = std::cos(pi * (x - p.dx_offset) / p.d_lattice);
    return 0.5 * p.mass * p.omega * p.omega * x * x + p.v0 * c * c;
}

Eigen::VectorXd potential(const TrapParameters& p, const Grid1D& grid) {
    Eigen::VectorXd v(grid.n_points);
    for (Eigen::Index i = 0; i < grid.n_points; ++i)
        v(i) = potential(p, grid.x(i));
    return v;
}

double kinetic_coupling(const Grid1D& grid, double mass) {
    double h = grid.spacing();
    return hbar / (2.0 * mass * h * h);
}

SymTridiagonal hamiltonian_matrix(const Eigen::VectorXd& potential_joule, const Grid1D& grid, double mass) {
    double kin = kinetic_coupling(grid, mass);
    SymTridiagonal t;
    t.diag = potential_joule / hbar;
    t.diag.array() += 2.0 * kin;
    t.off = Eigen::VectorXd::Constant(grid.n_points - 1, -kin);
    return t;
}

SymTridiagonal hamiltonian_matrix(const TrapParameters& p, const Grid1D& grid) {
    p.validate();
    return hamiltonian_matrix(potential(p, grid), grid, p.mass);
}

namespace {

void apply_sign_convention(Eigen::MatrixXd& states, const Grid1D& grid) {
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
        Eigen::Index best = 0;
        double best_abs = -1.0;
        for (Eigen::Index i = 0; i < states.rows(); ++i) {
            if (j > 0 && grid.x(i) <= 0.0)
                continue;
            double a = std::abs(states(i, j));
            if (a > best_abs) {
                best_abs = a;
                best = i;
            }
        }
        if (states(best, j) < 0.0)
            states.col(j) *= -1.0;
    }
}

void check_edges(const Eigen::MatrixXd& states) {
    for (Eigen::Index j = 0; j < states.cols(); ++j) {
        double peak = states.col(j).cwiseAbs().maxCoeff();
        double edge = std::max(std::abs(states(0, j)), std::abs(states(states.rows() - 1, j)));
        if (edge > 1e-8 * peak)
            throw NumericalError("eigenstate " + std::to_string(j) +
                                 " not bound inside the grid (edge/peak = " + format_number(edge / peak) + ")");
    }
}

}  // namespace

SpectralDecomposition lowest_eigenpairs(const SymTridiagonal& h, const Grid1D& grid, int k) {
    if (k < 1 || k > 6)
        throw ConfigError("lowest_eigenpairs: k must be in 1..6");
    auto pairs = stasplit::lowest_eigenpairs(h, k);
    SpectralDecomposition s{pairs.values, pairs.vectors / std::sqrt(grid.spacing()), grid};
    apply_sign_convention(s.states, grid);
    check_edges(s.states);
    return s;
}

SpectralDecomposition symmetric_eigenpairs(const Eigen::VectorXd& potential_joule, const Grid1D& grid,
                                           double mass, int k) {
    if (k < 1 || k > 6)
        throw ConfigError("symmetric_eigenpairs: k must be in 1..6");
    if (!grid.symmetric())
        throw ConfigError("symmetric_eigenpairs: grid must be symmetric about 0");
    const Eigen::Index n = grid.n_points;
    const Eigen::Index m = n / 2;
    double vscale = potential_joule.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < m; ++i)
        if (std::abs(potential_joule(i) - potential_joule(n - 1 - i)) > 1e-12 * vscale)
            throw NumericalError("symmetric_eigenpairs: potential is not mirror symmetric");

    SymTridiagonal full = hamiltonian_matrix(potential_joule, grid, mass);
    SymTridiagonal half;
    half.diag = full.diag.tail(m);
    half.off = full.off.tail(m - 1);
    const double coupling = full.off(m - 1);

    SpectralDecomposition s;
    s.grid = grid;
    s.energies.resize(k);
    s.states.resize(n, k);
    Eigen::MatrixXd even_found(m, 0), odd_found(m, 0);
    for (int j = 0; j < k; ++j) {
        // in one dimension the j-th level has parity (-1)^j
        double parity = j % 2 == 0 ? 1.0 : -1.0;
        SymTridiagonal sector = half;
        sector.diag(0) += parity * coupling;
        Eigen::MatrixXd& found = j % 2 == 0 ? even_found : odd_found;
        auto pair = eigenpair(sector, j / 2, found);
        double e = pair.value;
        const Eigen::VectorXd& u = pair.vector;
        found.conservativeResize(m, found.cols() + 1);
        found.col(found.cols() - 1) = u;
        s.energies(j) = e;
        s.states.col(j).tail(m) = u;
        s.states.col(j).head(m) = parity * u.reverse();
        s.states.col(j) /= std::sqrt(2.0 * grid.spacing());
    }
    apply_sign_convention(s.states, grid);
    check_edges(s.states);
    return s;
}

void write_spectral_csv(std::ostream& out, const SpectralDecomposition& s) {
    CsvTable t;
    t.header.push_back("x");
    for (Eigen::Index j = 0; j < s.states.cols(); ++j)
        t.header.push_back("psi" + std::to_string(j));
    for (Eigen::Index i = 0; i < s.states.rows(); ++i) {
        std::vector<double> row{s.grid.x(i)};
        for (Eigen::Index j = 0; j < s.states.cols(); ++j)
            row.push_back(s.states(i, j));
        t.rows.push_back(std::move(row));
    }
    write_csv(out, t);
}

LrBasis lr_basis(const TrapParameters& params, const Grid1D& grid) {
    TrapParameters sym = params.symmetric();
    sym.validate();
    auto s = symmetric_eigenpairs(potential(sym, grid), grid, sym.mass, 2);
    LrBasis b;
    b.right = (s.states.col(0) + s.states.col(1)) / std::sqrt(2.0);
    b.left = (s.states.col(0) - s.states.col(1)) / std::sqrt(2.0);
    b.e_ground = s.energies(0);
    b.e_excited = s.energies(1);
    b.symmetric_params = sym;
    return b;
}

TwoLevelExtraction extract_two_level(const TrapParameters& full, const LrBasis& basis, const Grid1D& grid) {
    full.validate();
    const double h = grid.spacing();
    Eigen::VectorXd dv = (potential(full, grid) - potential(basis.symmetric_params, grid)) / hbar;
    double ll = (dv.array() * basis.left.array().square()).sum() * h;
    double rr = (dv.array() * basis.right.array().square()).sum() * h;
    double lr = (dv.array() * basis.left.array() * basis.right.array()).sum() * h;

    // The R and L forms differ only through eigenpair rounding; their mean,
    // 2 <g|H|e>, is returned as lambda.
    SymTridiagonal hf = hamiltonian_matrix(full, grid);
    double h_ll = basis.left.dot(hf.apply(basis.left)) * h;
    double h_rr = basis.right.dot(hf.apply(basis.right)) * h;
    Eigen::VectorXd g = (basis.right + basis.left) / std::sqrt(2.0);
    Eigen::VectorXd e = (basis.right - basis.left) / std::sqrt(2.0);

    TwoLevelExtraction out;
    out.delta = (basis.e_excited - basis.e_ground) - 2.0 * lr;
    out.shift = 0.5 * (basis.e_ground + basis.e_excited) + 0.5 * (ll + rr);
    out.lambda_right = 2.0 * (h_rr - out.shift);
    out.lambda_left = -2.0 * (h_ll - out.shift);
    out.lambda = 2.0 * g.dot(hf.apply(e)) * h;
    double scale = std::max({std::abs(out.lambda), std::abs(out.delta), 1e-300});
    if (std::abs(out.lambda_right - out.lambda_left) > 1e-6 * scale)
        throw NumericalError("two-level extraction inconsistent: lambda forms " + format_number(out.lambda_right) +
                             " vs " + format_number(out.lambda_left));
    return out;
}

}  // namespace stasplit
