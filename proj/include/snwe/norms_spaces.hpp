#pragma once

// Exponent-triple arithmetic, grid L^q norms, spectral fractional norms and
// the path norms X_T, Z_T, Y_T.

#include <Eigen/Dense>

#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "snwe/spectral_domain.hpp"
#include "snwe/trajectory.hpp"

namespace snwe {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// r for 2 <= q <= 8 (low branch) and 8 <= q <= inf (high branch).
double r_low_branch(double p, double q);
double r_high_branch(double p, double q);

/// Cluster growth exponent rho(q) on each branch.
double rho_low_branch(double q);
double rho_high_branch(double q);
double cluster_exponent(double q);

/// r(p, q) for 2 <= q <= p <= inf. Throws DomainError otherwise.
double admissible_r(double p, double q);

/// (p, q, r) with r derived from (p, q); never user-supplied.
struct ExponentTriple {
    double p = 2.0;
    double q = 2.0;
    double r = 0.0;

    static ExponentTriple admissible(double p, double q) { return {p, q, admissible_r(p, q)}; }
};

/// q > 2, 0 < r < min{1, (q-2)/2}, r != 1 - 1/q.
bool validate_pair_condition(double q, double r);

/// Trapezoid quadrature of |f|^q over the grid (grid max for q = inf).
double lq_norm(const PhysicalField& f, double q);

/// Coefficient-wise multiplier (1 + lambda_j^2)^{s/2}.
SpectralField fractional_power(const SpectralField& u, double s);
Eigen::VectorXd fractional_power(const SpectralBasis& basis, const Eigen::VectorXd& coeffs, double s);

/// ||(I + A)^{s/2} u||_{L^q}. For q = 2 the value is the coefficient
/// formula (Parseval); otherwise the synthesis on `grid` is measured.
double fractional_norm(const SpectralField& u, double s, double q, GridSpec grid);

/// ||u||_{H_A} = (sum (1 + lambda_j^2) c_j^2)^{1/2}.
double ha_norm(const SpectralField& u);
double ha_norm(const SpectralBasis& basis, const Eigen::VectorXd& coeffs);

/// L2 norm via Parseval.
double l2_norm(const SpectralField& u);

/// Reusable evaluator of the H_A and E = Dom(A_q^{(1-r)/2}) norms for one
/// basis, grid and triple.
class NormEvaluator {
public:
    NormEvaluator(BasisPtr basis, GridSpec grid, ExponentTriple triple);

    const ExponentTriple& triple() const noexcept { return triple_; }
    const SpectralTransform& transform() const noexcept { return transform_; }
    GridSpec grid() const noexcept { return transform_.grid(); }

    double ha(const Eigen::VectorXd& coeffs) const;
    double e(const Eigen::VectorXd& coeffs) const;

private:
    SpectralTransform transform_;
    ExponentTriple triple_;
    Eigen::VectorXd e_multiplier_;
    Eigen::VectorXd ha_weight_;
};

/// Running Z_t = sup_{s<=t} h(s), X_t = (int_0^t e^p)^{1/p} (trapezoid, or
/// sup for p = inf) and Y_t with Y^p = Z^p + X^p, at every node.
struct RunningNorms {
    std::vector<double> z;
    std::vector<double> x;
    std::vector<double> y;
};

RunningNorms running_norms(std::span<const double> ha_values, std::span<const double> e_values, double dt, double p);

/// Combine Z and X into Y for exponent p.
double combine_y(double z, double x, double p);

/// Evaluates and stores the running norms of `traj` in place.
void attach_running_norms(TrajectoryRecord& traj, const NormEvaluator& norms);

/// Y_T norm of a position-only trajectory difference.
double y_norm(const Eigen::MatrixXd& u, double dt, const NormEvaluator& norms);

enum class NormKind { Lq, HA, E, XT, ZT, YT };
std::string to_string(NormKind kind);

struct NormReport {
    double value = 0.0;
    NormKind kind = NormKind::Lq;
    GridSpec grid;
    double dt = 0.0;
};

struct PathNorms {
    NormReport xt;
    NormReport zt;
    NormReport yt;
};

/// X_T, Z_T, Y_T over the nodes with t_k <= T. T must be a node time.
PathNorms path_norms(const TrajectoryRecord& traj, const ExponentTriple& triple, double horizon, GridSpec grid);

struct NormCsvRow {
    std::string run_id;
    NormReport report;
    ExponentTriple triple;
    double horizon = 0.0;
};

void write_norm_csv(std::ostream& out, std::span<const NormCsvRow> rows);

}  // namespace snwe
