#pragma once

// Verification campaigns: spectral cluster growth, homogeneous and
// inhomogeneous Strichartz ratios, stochastic moment constants, the stopped
// convolution identity, and the empirical constants ledger.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "snwe/nonlinearity.hpp"
#include "snwe/norms_spaces.hpp"
#include "snwe/spectral_domain.hpp"
#include "snwe/stochastic_convolution.hpp"

namespace snwe {

/// Exponents in JSON: a number, or the string "inf".
nlohmann::json exponent_to_json(double value);
double exponent_from_json(const nlohmann::json& j);

struct SweepSpec {
    double lx = 3.141592653589793;
    double ly = 3.141592653589793;
    Boundary bc = Boundary::Dirichlet;
    /// (p, q) pairs; r is always derived
    std::vector<std::pair<double, double>> exponents{{4.0, 4.0}};
    /// cluster exponents q
    std::vector<double> cluster_q{2.0, 4.0, 8.0, 16.0};
    int lambda_min = 4;
    int lambda_max = 40;
    /// basis cutoffs; refinement studies compare consecutive entries
    std::vector<double> cutoffs{32.0};
    /// time horizons, ascending
    std::vector<double> horizons{1.0};
    /// time nodes per unit time; raised to at least 2 * Lambda per unit time
    std::size_t steps_per_unit = 100;
    /// best-of-N random restarts
    std::size_t samples = 200;
    /// Gaussian coefficient decay exponents, cycled over samples
    std::vector<double> decays{1.0, 2.0};
    /// Monte Carlo path counts, ascending
    std::vector<std::size_t> path_counts{1000};
    std::size_t channels = 4;
    double noise_decay = 2.0;
    double p_moment = 2.0;
    double stop_threshold = 0.05;
    /// spatial refinement factor of the quadrature grid
    int grid_refine = 2;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::size_t bootstrap = 200;
    /// amplitude of the random forcing in the inhomogeneous sweep
    double forcing_scale = 1.0;

    /// Throws DomainError on empty ranges or inadmissible exponents.
    void validate() const;
    nlohmann::json to_json() const;
    static SweepSpec from_json(const nlohmann::json& j);
};

/// Quadrature grid for `basis` refined by `factor`.
GridSpec refined_grid(const SpectralBasis& basis, int factor);

// ---------------------------------------------------------------------------

struct ClusterRow {
    double q = 2.0;
    int lambda = 0;
    std::size_t modes = 0;
    double max_ratio = 0.0;
};

struct ClusterSeries {
    double q = 2.0;
    double rho = 0.0;
    double slope = 0.0;
    double tolerance = 0.15;
    /// max |ratio - 1| for q = 2, else 0
    double unit_deviation = 0.0;
    bool pass = false;
};

struct ClusterReport {
    double cutoff = 0.0;
    GridSpec grid;
    std::vector<ClusterRow> rows;
    std::vector<ClusterSeries> series;
    bool pass() const;
};

/// Best-of-N ||Pi_lambda u||_{L^q} / ||u||_{L2} over Gaussian data supported
/// in each cluster [lambda, lambda + 1), and the log-log slope per q.
ClusterReport verify_cluster(const SweepSpec& sweep);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

void write_cluster_csv(std::ostream& out, const ClusterReport& report);

// ---------------------------------------------------------------------------

struct StrichartzRow {
    ExponentTriple triple;
    double cutoff = 0.0;
    double horizon = 0.0;
    std::size_t samples = 0;
    double max_ratio = 0.0;
    double mean_ratio = 0.0;
};

struct StrichartzReport {
    bool inhomogeneous = false;
    std::vector<StrichartzRow> rows;
    /// per triple: max at the finest cutoff over max at the coarsest
    std::vector<double> refinement_factors;
    /// |numerical - closed form| of the single-mode oracles: one per triple
    /// for the homogeneous sweep, one Duhamel check for the inhomogeneous one
    std::vector<double> oracle_errors;
    /// refinement factor bound
    double stability_bound = 1.5;
    bool stable() const;
};

/// ||u||_{L^p(0,T;E)} for u(t) = cos(t sqrt A) u0 + sinc(t) u1 on a time grid
/// with `steps` intervals.
double homogeneous_lp_norm(const SpectralField& u0, const SpectralField& u1, const NormEvaluator& norms,
                           double horizon, std::size_t steps);

/// Closed form of ||cos(t sqrt A) e||_{L^p(0,T;E)} / ||e||_{H_A} for a
/// Dirichlet single mode e on [0, pi]^2 with T a whole number of periods.
double single_mode_strichartz_ratio(int jx, int jy, const ExponentTriple& triple, double periods);

/// Time nodes per unit time used by the Strichartz sweeps at `cutoff`.
std::size_t strichartz_rate(const SweepSpec& sweep, double cutoff);

StrichartzReport verify_homogeneous_strichartz(const SweepSpec& sweep);

/// Sample s carries the forcing sin(pi t / T_s) cos(omega_s t) f_s on
/// [0, T_s] with T_s = horizons[s mod H], and enters the maximum at every
/// horizon T >= T_s. All horizons share one time step, so the row maxima are
/// non-decreasing in T.
StrichartzReport verify_inhomogeneous_strichartz(const SweepSpec& sweep);

void write_strichartz_csv(std::ostream& out, const StrichartzReport& report);

// ---------------------------------------------------------------------------

struct StochasticRow {
    double cutoff = 0.0;
    std::size_t paths = 0;
    MomentStatistics K;
    MomentStatistics C_tilde;
    MomentStatistics B;
};

struct StochasticReport {
    std::vector<StochasticRow> rows;
    std::size_t channels = 0;
    bool finite() const;
    /// bootstrap intervals of consecutive rows overlap, for K and C_tilde
    bool intervals_overlap() const;
};

/// Diffusion acting as the identity on the noise channels.
DiffusionProcess identity_diffusion(const NoiseBasis& noise, std::size_t steps, double dt);

/// E[sup_t ||M_t||_{L2}^p] / E[(int ||xi||_HS^2)^{p/2}] for the martingale
/// M_t = int_0^t xi dW (no wave kernel).
MomentStatistics martingale_burkholder_ratio(const DiffusionProcess& xi, const WienerEnsemble& ensemble, double p,
                                             const MomentOptions& options);

StochasticReport verify_stochastic(const SweepSpec& sweep);
void write_stochastic_csv(std::ostream& out, const StochasticReport& report);

// ---------------------------------------------------------------------------

struct StoppedReport {
    std::size_t paths = 0;
    double max_discrepancy = 0.0;
    /// number of paths whose threshold stopping index fell before the horizon
    std::size_t triggered = 0;
};

StoppedReport verify_stopped_identity(const SweepSpec& sweep);

// ---------------------------------------------------------------------------

struct FunctionalConstants {
    double log_constant = 0.0;
    double moser_trudinger = 0.0;
    double gamma = 0.0;
    ConstantEstimate lipschitz;
};

/// Empirical log-inequality, Moser-Trudinger (alpha = 4 pi, unit H_A ball)
/// and Lipschitz constants at the first cutoff of the sweep.
FunctionalConstants estimate_functional_constants(const SweepSpec& sweep, const LipschitzBudget& budget,
                                                  const NonlinearityKind& f_kind, const NonlinearityKind& g_kind);

// ---------------------------------------------------------------------------

struct LedgerEntry {
    std::string symbol;
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::size_t samples = 0;
    double cutoff = 0.0;
    GridSpec grid;
    double dt = 0.0;
    std::size_t paths = 0;
    std::uint64_t seed = 0;
    std::string source;
    nlohmann::json parameters = nlohmann::json::object();

    bool operator==(const LedgerEntry&) const = default;
};

struct ConstantsLedger {
    std::vector<LedgerEntry> entries;

    nlohmann::json to_json() const;
    static ConstantsLedger from_json(const nlohmann::json& j);
    bool operator==(const ConstantsLedger&) const = default;
};

std::vector<LedgerEntry> ledger_entries(const ClusterReport& report, const SweepSpec& sweep);
std::vector<LedgerEntry> ledger_entries(const StrichartzReport& report, const SweepSpec& sweep);
std::vector<LedgerEntry> ledger_entries(const StochasticReport& report, const SweepSpec& sweep);
std::vector<LedgerEntry> ledger_entries(const FunctionalConstants& constants, const SweepSpec& sweep);

/// Appends every report's entries in order. Throws DomainError when no
/// report is given or an entry lacks its source or sample metadata.
ConstantsLedger build_ledger(const std::vector<std::vector<LedgerEntry>>& reports);

}  // namespace snwe
