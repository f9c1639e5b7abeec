#pragma once

#include <Eigen/Dense>

#include <iosfwd>

#include "constants.hpp"
#include "grid.hpp"
#include "tridiagonal.hpp"

namespace stasplit {

// V(x) = m w^2 x^2 / 2 + V0 cos^2(pi (x - dx) / d)
struct TrapParameters {
    double v0 = 0.0;     // J
    double omega = 0.0;  // rad/s
    double dx_offset = constants::lattice_offset;
    double d_lattice = constants::lattice_spacing;
    double mass = constants::mass_rb87;

    void validate() const;
    TrapParameters symmetric() const {
        TrapParameters p = *this;
        p.dx_offset = 0.0;
        return p;
    }
};

double potential(const TrapParameters& p, double x);
Eigen::VectorXd potential(const TrapParameters& p, const Grid1D& grid);

// hbar / (2 m dx^2), the kinetic hopping in rad/s
double kinetic_coupling(const Grid1D& grid, double mass);

// H/hbar with a 3-point Laplacian and Dirichlet walls, entries in rad/s.
SymTridiagonal hamiltonian_matrix(const TrapParameters& p, const Grid1D& grid);
SymTridiagonal hamiltonian_matrix(const Eigen::VectorXd& potential_joule, const Grid1D& grid, double mass);

struct SpectralDecomposition {
    Eigen::VectorXd energies;  // rad/s, ascending
    Eigen::MatrixXd states;    // columns normalized to sum |psi|^2 dx = 1
    Grid1D grid;
};

// Ground state positive at its largest entry, excited states positive at
// their largest entry on x > 0.
SpectralDecomposition lowest_eigenpairs(const SymTridiagonal& h, const Grid1D& grid, int k);

// Mirror-symmetric potential on a symmetric grid: even and odd sectors are
// solved separately, so quasi-degenerate doublets stay exactly (anti)symmetric.
SpectralDecomposition symmetric_eigenpairs(const Eigen::VectorXd& potential_joule, const Grid1D& grid,
                                           double mass, int k);

void write_spectral_csv(std::ostream& out, const SpectralDecomposition& s);

struct LrBasis {
    Eigen::VectorXd left;
    Eigen::VectorXd right;
    double e_ground = 0.0;   // rad/s
    double e_excited = 0.0;  // rad/s
    TrapParameters symmetric_params;
};

// R = (g + e)/sqrt 2, L = (g - e)/sqrt 2 of the dx_offset = 0 trap.
LrBasis lr_basis(const TrapParameters& params, const Grid1D& grid);

struct TwoLevelExtraction {
    double delta = 0.0;        // -2 <L|H|R> / hbar
    double lambda = 0.0;        // (<R|H|R> - <L|H|L>) / hbar
    double lambda_right = 0.0;  // 2 <R|H - Lambda|R> / hbar
    double lambda_left = 0.0;   // -2 <L|H - Lambda|L> / hbar
    double shift = 0.0;        // Lambda / hbar, mean of the projected 2x2 block
};

// Throws NumericalError when the two lambda forms disagree beyond 1e-6.
TwoLevelExtraction extract_two_level(const TrapParameters& full, const LrBasis& basis, const Grid1D& grid);

}  // namespace stasplit
