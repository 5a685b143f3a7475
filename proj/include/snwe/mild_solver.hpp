#pragma once

// Truncated fixed-point construction of the mild solution: cutoffs, the
// map Psi, pathwise Picard iteration, contraction budgeting, stopping times
// and the first-order pair-system cross-check.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snwe/noise.hpp"
#include "snwe/nonlinearity.hpp"
#include "snwe/norms_spaces.hpp"
#include "snwe/spectral_domain.hpp"
#include "snwe/stochastic_convolution.hpp"
#include "snwe/trajectory.hpp"

namespace snwe {

enum class CutoffShape { LinearRamp, CubicSmooth };
std::string to_string(CutoffShape shape);
CutoffShape cutoff_shape_from_string(const std::string& name);

struct CutoffParams {
    double n = 1.0;
    double M = 0.5;
    double M_prime = 0.3;
    CutoffShape shape = CutoffShape::LinearRamp;

    /// Lipschitz constant of theta on [1, 2].
    double lip() const noexcept { return shape == CutoffShape::LinearRamp ? 1.0 : 1.5; }
    void validate() const;
};

/// theta_n(x) = theta(x / n): 1 on [0, n], 0 on [2n, inf).
double cutoff_theta(double x, double n, const CutoffParams& params);
/// 1 on [0, M'], 0 on [M, inf).
double cutoff_theta_hat(double x, const CutoffParams& params);

struct SolverConfig {
    BasisPtr basis;
    double horizon = 1.0;
    std::size_t steps = 1000;
    ExponentTriple triple = ExponentTriple::admissible(4.0, 4.0);
    CutoffParams cutoffs;
    NonlinearityKind f_kind = ZeroNonlinearity{};
    NonlinearityKind g_kind = ZeroNonlinearity{};
    /// 0 disables the stochastic forcing.
    std::size_t noise_channels = 0;
    double noise_decay = 2.0;
    std::uint64_t seed = 0;
    std::size_t paths = 1;
    double tol_fp = 1e-8;
    std::size_t max_iter = 50;
    double gamma = 0.1;
    /// nx = 0 selects default_grid(basis).
    GridSpec grid{0, 0};
    /// Empty vectors mean zero data.
    Eigen::VectorXd u0;
    Eigen::VectorXd u1;

    double dt() const noexcept { return horizon / static_cast<double>(steps); }
    bool is_linear() const { return is_zero(f_kind) && (noise_channels == 0 || is_zero(g_kind)); }
    /// Throws PreconditionError listing every violated condition.
    void validate() const;
};

struct PicardDiagnostics {
    std::size_t iterations = 0;
    /// Y_T norm of successive differences u^{i+1} - u^i
    std::vector<double> differences;
    /// differences[i] / differences[i-1]
    std::vector<double> ratios;
    /// ||Psi(u*) - u*||_{Y_T}
    double residual = 0.0;
    bool converged = false;
};

struct SolveResult {
    TrajectoryRecord trajectory;
    PicardDiagnostics diagnostics;
};

enum class StoppingTrigger : std::uint8_t { HorizonEnd = 0, ZNormReachedMprime = 1, YNormReachedN = 2 };
std::string to_string(StoppingTrigger trigger);

struct StoppingReport {
    std::optional<std::size_t> tau;
    StoppingTrigger trigger = StoppingTrigger::HorizonEnd;
    double z_value = 0.0;
    double y_value = 0.0;
    double time = 0.0;
};

/// First node with Z_t >= M' or Y_t >= level. Running norms must be cached.
StoppingReport detect_stopping(const TrajectoryRecord& traj, double level, double m_prime);

class MildSolver {
public:
    explicit MildSolver(SolverConfig config);

    const SolverConfig& config() const noexcept { return config_; }
    const NormEvaluator& norms() const noexcept { return norms_; }
    const WaveKernel& kernel() const noexcept { return kernel_; }
    std::size_t nodes() const noexcept { return config_.steps + 1; }

    /// cos(t sqrt A) u0 + sinc(t) u1 with running norms attached.
    TrajectoryRecord linear_flow() const;

    /// Psi(v) on the frozen increments of `path`. With `truncated` false the
    /// cutoff factors are replaced by 1.
    TrajectoryRecord picard_step(const TrajectoryRecord& v, std::size_t path, bool truncated = true) const;

    /// Picard iteration from the linear flow (or `initial_guess`).
    SolveResult solve_truncated(std::size_t path, const TrajectoryRecord* initial_guess = nullptr) const;

    /// Causal stepping of the pair (u, u_t) by exact per-mode rotations with
    /// the forcing kicked into the velocity component.
    TrajectoryRecord pair_system(std::size_t path) const;

    /// Y_T distance between two trajectories on this solver's grid.
    double y_distance(const TrajectoryRecord& a, const TrajectoryRecord& b) const;

private:
    struct Forcing {
        /// modes x nodes, velocity kicks g_k (left-point Ito plus trapezoid drift)
        Eigen::MatrixXd kicks;
        /// modes x nodes, c_k F(v(t_k)) for the u_t endpoint term
        Eigen::MatrixXd drift;
    };
    Forcing forcing(const TrajectoryRecord& v, std::size_t path, bool truncated) const;
    void node_forcing(const Eigen::VectorXd& coeffs, double cutoff, std::size_t path, std::size_t k,
                      Eigen::Ref<Eigen::VectorXd> drift, Eigen::Ref<Eigen::VectorXd> noise) const;

    SolverConfig config_;
    GridSpec grid_;
    SpectralTransform transform_;
    NormEvaluator norms_;
    WaveKernel kernel_;
    std::optional<NoiseBasis> noise_;
    std::optional<WienerEnsemble> ensemble_;
    /// channel eigenfunctions on the grid
    std::vector<Eigen::MatrixXd> channel_values_;
};

/// Composite-trapezoid Duhamel integral
///   sum_k w_k dt sin((t_m - t_k) lambda)/lambda theta_n(Y_k) theta_hat(Z_k) F(v(t_k))
/// at node m. Requires cached running norms.
SpectralField duhamel_deterministic(const TrajectoryRecord& v, std::size_t m, const NonlinearityKind& kind,
                                    const CutoffParams& cutoffs, GridSpec grid);

/// sup_{t <= T} ||sin(t sqrt A)/sqrt A||_{L2 -> H_A}
double group_bound(const SpectralBasis& basis, double horizon);

struct BudgetConstants {
    double C_F = 0.0;
    double C_G = 0.0;
    double C_T = 0.0;
    double K_T = 0.0;
    double K = 0.0;
    double C_tilde = 0.0;

    nlohmann::json to_json() const;
};

double budget_L2(double T, const CutoffParams& cutoffs, double gamma, double p, const BudgetConstants& c);
double budget_L3(double T, const CutoffParams& cutoffs, double gamma, double p, const BudgetConstants& c);

/// Largest T = k dt <= horizon with L2 + L3 <= 1/2. Throws PreconditionError
/// when even T = dt exceeds the budget.
double contraction_budget(const CutoffParams& cutoffs, const ExponentTriple& triple, double gamma,
                          const BudgetConstants& constants, double horizon, double dt);

/// max over nodes t <= tau_n of ||u_n(t) - u_k(t)||_{H_A} for truncation
/// levels n <= k on identical increments.
double nesting_consistency(const SolverConfig& config, std::size_t path, double n, double k);

/// max_t |pair-form u(t) - Picard fixed point u(t)| over all modes.
double pair_system_crosscheck(const SolverConfig& config, std::size_t path);

/// CSV of t, the first `modes` coefficients, Z_t and Y_t.
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& traj, std::size_t modes);

}  // namespace snwe
