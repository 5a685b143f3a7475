#pragma once

// Laplacian eigenbasis on a rectangle [0,Lx]x[0,Ly], grid transforms, and
// the exact per-mode trigonometric propagators of the wave group.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "snwe/common.hpp"

namespace snwe {

enum class Boundary { Dirichlet, Neumann };

std::string to_string(Boundary bc);
Boundary boundary_from_string(const std::string& name);

struct Mode {
    int jx = 0;
    int jy = 0;
    bool operator==(const Mode&) const = default;
};

/// Ordered eigenpairs of -Laplace with Dirichlet or Neumann conditions,
/// truncated by frequency: every mode with lambda_j <= cutoff is present.
///
/// Eigenfunctions are products of L2-normalised 1-D sines (Dirichlet, indices
/// from 1) or cosines (Neumann, indices from 0). Modes are sorted by
/// eigenvalue, ties broken by (jx, jy).
class SpectralBasis {
public:
    static std::shared_ptr<const SpectralBasis> build(double lx, double ly, Boundary bc, double cutoff);

    double lx() const noexcept { return lx_; }
    double ly() const noexcept { return ly_; }
    double area() const noexcept { return lx_ * ly_; }
    Boundary bc() const noexcept { return bc_; }
    double cutoff() const noexcept { return cutoff_; }

    std::size_t size() const noexcept { return modes_.size(); }
    std::span<const Mode> modes() const noexcept { return modes_; }
    /// lambda_j^2
    std::span<const double> eigenvalues() const noexcept { return eigenvalues_; }
    /// lambda_j
    std::span<const double> frequencies() const noexcept { return frequencies_; }

    int max_jx() const noexcept { return max_jx_; }
    int max_jy() const noexcept { return max_jy_; }

    std::optional<std::size_t> index_of(Mode m) const;

    /// Value of the normalised 1-D factor with index j at x in [0, length].
    double factor(int j, double x, double length) const;
    /// e_j(x, y)
    double eigenfunction(std::size_t j, double x, double y) const;
    /// Exact sup norm of e_j over the rectangle.
    double sup_norm(std::size_t j) const;

    bool same_as(const SpectralBasis& other) const;

    nlohmann::json to_json() const;
    static std::shared_ptr<const SpectralBasis> from_json(const nlohmann::json& j);

private:
    SpectralBasis() = default;

    double lx_ = 0.0;
    double ly_ = 0.0;
    Boundary bc_ = Boundary::Dirichlet;
    double cutoff_ = 0.0;
    std::vector<Mode> modes_;
    std::vector<double> eigenvalues_;
    std::vector<double> frequencies_;
    int max_jx_ = 0;
    int max_jy_ = 0;
};

using BasisPtr = std::shared_ptr<const SpectralBasis>;

inline BasisPtr build_basis(double lx, double ly, Boundary bc, double cutoff)
{
    return SpectralBasis::build(lx, ly, bc, cutoff);
}

/// Coefficient vector of a real function in a SpectralBasis.
class SpectralField {
public:
    explicit SpectralField(BasisPtr basis);
    SpectralField(BasisPtr basis, Eigen::VectorXd coeffs);

    const SpectralBasis& basis() const noexcept { return *basis_; }
    const BasisPtr& basis_ptr() const noexcept { return basis_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(coeffs_.size()); }

    const Eigen::VectorXd& coeffs() const noexcept { return coeffs_; }
    Eigen::VectorXd& coeffs() noexcept { return coeffs_; }

    double operator[](std::size_t j) const { return coeffs_[static_cast<Eigen::Index>(j)]; }

    /// Coefficient of mode (jx, jy), zero when the mode is not in the basis.
    double coefficient(Mode m) const;

    static SpectralField single_mode(BasisPtr basis, Mode m, double value = 1.0);

    SpectralField& operator+=(const SpectralField& other);
    SpectralField& operator-=(const SpectralField& other);
    SpectralField& operator*=(double s);

private:
    BasisPtr basis_;
    Eigen::VectorXd coeffs_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

void require_same_basis(const SpectralBasis& a, const SpectralBasis& b, const char* module);

/// Tensor grid with nodes x_i = i*Lx/nx (i = 0..nx), y_k = k*Ly/ny.
struct GridSpec {
    int nx = 0;
    int ny = 0;
    bool operator==(const GridSpec&) const = default;
};

/// Smallest alias-free grid for the basis (n >= 2*max index + 2), never below
/// `minimum` nodes per direction and always even.
GridSpec default_grid(const SpectralBasis& basis, int minimum = 16);

/// Nodal values on a GridSpec over the basis rectangle, including boundary
/// nodes. Storage is (nx+1) x (ny+1).
struct PhysicalField {
    double lx = 0.0;
    double ly = 0.0;
    Boundary bc = Boundary::Dirichlet;
    GridSpec grid;
    Eigen::MatrixXd values;

    double hx() const { return lx / grid.nx; }
    double hy() const { return ly / grid.ny; }
    double x(int i) const { return i * hx(); }
    double y(int k) const { return k * hy(); }
};

/// Composite trapezoid weights on [0, length] with n intervals.
Eigen::VectorXd trapezoid_weights(int n, double length);

/// Cached 1-D eigenfunction tables for one (basis, grid) pair. Synthesis and
/// analysis are separable matrix products, exact to roundoff for
/// band-limited data on alias-free grids.
class SpectralTransform {
public:
    SpectralTransform(BasisPtr basis, GridSpec grid);

    const SpectralBasis& basis() const noexcept { return *basis_; }
    const BasisPtr& basis_ptr() const noexcept { return basis_; }
    const GridSpec& grid() const noexcept { return grid_; }

    PhysicalField synthesize(const Eigen::VectorXd& coeffs) const;
    PhysicalField synthesize(const SpectralField& u) const { return synthesize(u.coeffs()); }
    Eigen::VectorXd analyze_coeffs(const PhysicalField& f) const;
    SpectralField analyze(const PhysicalField& f) const;

    /// Trapezoid quadrature weights per node (outer product of 1-D weights).
    const Eigen::MatrixXd& weights() const noexcept { return weights_; }
    /// Table of the normalised 1-D factor j at node i: (max_j+1) x (n+1).
    const Eigen::MatrixXd& table_x() const noexcept { return phi_x_; }
    const Eigen::MatrixXd& table_y() const noexcept { return phi_y_; }

private:
    BasisPtr basis_;
    GridSpec grid_;
    Eigen::MatrixXd phi_x_;
    Eigen::MatrixXd phi_y_;
    Eigen::MatrixXd weighted_phi_x_;
    Eigen::MatrixXd weighted_phi_y_;
    Eigen::MatrixXd weights_;
};

PhysicalField synthesize(const SpectralField& u, GridSpec grid);
SpectralField analyze(const PhysicalField& f, const BasisPtr& basis);

/// Keeps the coefficients whose frequency lies in [lambda, lambda + 1).
SpectralField spectral_projector(const SpectralField& u, int lambda);

/// cos(t sqrt(A)) u
SpectralField apply_cos_group(const SpectralField& u, double t);
/// sin(t sqrt(A)) / sqrt(A) u, with multiplier t on the zero mode.
SpectralField apply_sinc_group(const SpectralField& u, double t);

/// Multiplier of the sinc group for one frequency.
inline double sinc_multiplier(double lambda, double t)
{
    return lambda > 0.0 ? std::sin(lambda * t) / lambda : t;
}

/// Complex field stored as paired real coefficient vectors.
struct ComplexField {
    SpectralField re;
    SpectralField im;
};

/// exp(i t B) u with B e_j = floor(lambda_j) e_j.
ComplexField apply_rounded_group(const SpectralField& u, double t);

/// (B - sqrt(A)) u, the fractional-part multiplier.
SpectralField rounded_minus_sqrt(const SpectralField& u);

/// The pair group S(t) acting on (u, v): exact per-mode rotation.
std::pair<SpectralField, SpectralField> pair_evolve(const SpectralField& u, const SpectralField& v, double t);

}  // namespace snwe
