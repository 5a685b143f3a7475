#pragma once

// Discrete Ito integrals against the wave kernel sin((t-s) sqrt(A))/sqrt(A),
// their stopped variant, and the Monte Carlo moment estimators used for the
// Burkholder-type and stochastic Strichartz checks.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "snwe/noise.hpp"
#include "snwe/norms_spaces.hpp"
#include "snwe/spectral_domain.hpp"
#include "snwe/trajectory.hpp"

namespace snwe {

/// Per-node images xi(t_k) e_j of the (unweighted) noise channels, one
/// modes x channels matrix per grid node, plus the channel weights mu_j.
struct DiffusionProcess {
    BasisPtr basis;
    double dt = 0.0;
    std::vector<Eigen::MatrixXd> images;
    std::vector<double> weights;
    std::string provenance = "synthetic";

    std::size_t nodes() const noexcept { return images.size(); }
    std::size_t channels() const noexcept { return weights.size(); }

    /// sum_j mu_j ||xi(t_k) e_j||_{L2}^2
    double hs_norm_sq(std::size_t k) const;

    /// xi(t) e_j = fields[j] for every node.
    static DiffusionProcess constant(const NoiseBasis& noise, const std::vector<SpectralField>& fields, std::size_t steps,
                                     double dt);
    static DiffusionProcess zero(const NoiseBasis& noise, std::size_t steps, double dt);
};

/// Cos/sin tables of the wave group on a uniform time grid, and the O(nodes)
/// group-factorised kernel sums
///   U_n = sum_{k<n} sin((t_n - t_k) lambda)/lambda g_k,
///   V_n = sum_{k<n} cos((t_n - t_k) lambda) g_k,
/// with the multiplier t_n - t_k on zero modes.
class WaveKernel {
public:
    WaveKernel(BasisPtr basis, double dt, std::size_t nodes);

    const SpectralBasis& basis() const noexcept { return *basis_; }
    double dt() const noexcept { return dt_; }
    std::size_t nodes() const noexcept { return nodes_; }

    /// g is modes x nodes. V may be null.
    void accumulate(const Eigen::MatrixXd& g, Eigen::MatrixXd& U, Eigen::MatrixXd* V) const;
    /// Same sums by direct O(nodes^2) evaluation of the shifted kernel.
    void accumulate_direct(const Eigen::MatrixXd& g, Eigen::MatrixXd& U, Eigen::MatrixXd* V) const;

    /// cos(t sqrt A) u0 + sinc(t) u1 and its time derivative on every node.
    void linear_flow(const Eigen::VectorXd& u0, const Eigen::VectorXd& u1, Eigen::MatrixXd& U, Eigen::MatrixXd& V) const;

private:
    BasisPtr basis_;
    double dt_;
    std::size_t nodes_;
    Eigen::MatrixXd cos_;
    Eigen::MatrixXd sin_;
    Eigen::VectorXd lambda_;
    Eigen::VectorXd inv_lambda_;
    std::vector<Eigen::Index> zero_modes_;
};

enum class EvaluationMode { DirectKernel, GroupFactorized };
std::string to_string(EvaluationMode mode);

struct ConvolutionResult {
    TrajectoryRecord trajectory;
    EvaluationMode mode = EvaluationMode::GroupFactorized;
};

/// Left-point Ito sums b_k = sum_j sqrt(mu_j) xi(t_k) e_j dW_{k,j}, as a
/// modes x nodes matrix (last column zero). `active` limits the integrand to
/// nodes k < active.
Eigen::MatrixXd ito_increments(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                               std::size_t active);

/// u(t_n) = int_0^{t_n} sin((t_n - s) sqrt A)/sqrt A xi(s) dW(s) on the grid,
/// with its velocity.
ConvolutionResult convolve(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                           EvaluationMode mode = EvaluationMode::GroupFactorized);

/// Grid-valued stopping index. Only constructible as a deterministic
/// constant or by a first-hitting detector that scans a path forward, so
/// it never looks at increments beyond the stopping node.
class StoppingIndex {
public:
    static StoppingIndex constant(std::size_t index) { return StoppingIndex(index); }
    /// First node n with ||u(t_n)||_{H_A} >= threshold, else the last node.
    static StoppingIndex first_hitting(const TrajectoryRecord& path_values, double threshold);

    std::size_t value() const noexcept { return index_; }

private:
    explicit StoppingIndex(std::size_t index) : index_(index) {}
    std::size_t index_;
};

/// Convolution of xi 1_{[0, tau)}.
ConvolutionResult stopped_convolve(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                                   StoppingIndex tau, EvaluationMode mode = EvaluationMode::GroupFactorized);

/// max_n max_j |I(xi)(t_n ^ tau) - I_tau(xi)(t_n ^ tau)|
double stopped_identity_discrepancy(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                                    StoppingIndex tau);

struct MomentStatistics {
    double p = 2.0;
    double horizon = 0.0;
    std::size_t paths = 0;
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    /// set when the estimate is statistically fragile (few paths, p > 4)
    bool flagged = false;
    std::string note;
};

struct MomentOptions {
    std::size_t threads = 1;
    std::size_t bootstrap = 200;
    std::uint64_t bootstrap_seed = 0x5eed;
    /// first path index used from the ensemble
    std::size_t first_path = 0;
    std::size_t path_count = 0;  // 0 = all ensemble paths
};

/// E[sup_t ||u(t)||_{H_A}^p] against E[(int ||xi||_HS^2 dt)^{p/2}].
MomentStatistics burkholder_ratio(const DiffusionProcess& xi, const WienerEnsemble& ensemble, double p,
                                  const MomentOptions& options = {});

/// E[int ||u(t)||_E^p dt] against E[(int ||xi||_HS^2 dt)^{p/2}].
MomentStatistics strichartz_lp_moment(const DiffusionProcess& xi, const WienerEnsemble& ensemble,
                                      const ExponentTriple& triple, GridSpec grid, const MomentOptions& options = {});

/// Ratio of means with a percentile bootstrap interval.
MomentStatistics ratio_statistics(const std::vector<double>& lhs, const std::vector<double>& rhs, double p,
                                  const MomentOptions& options);

void write_moment_csv(std::ostream& out, const std::vector<MomentStatistics>& rows, double cutoff, std::size_t channels);

}  // namespace snwe
