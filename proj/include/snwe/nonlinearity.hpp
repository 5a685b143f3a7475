#pragma once

// Pointwise nonlinearity h, the Nemytskii diffusion G(u)k = (g o u) k, the
// Moser-Trudinger functional and the diagnostics behind the Lipschitz
// constants C_F, C_G.

#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "snwe/noise.hpp"
#include "snwe/norms_spaces.hpp"
#include "snwe/spectral_domain.hpp"

namespace snwe {

/// h(x) = x (e^{alpha x^2} - 1)
struct ExponentialCritical {
    double alpha = 4.0 * std::numbers::pi;
};

/// h(x) = sum_k a_k x^k with a_0 = 0.
struct Polynomial {
    std::vector<double> coefficients;
};

struct ZeroNonlinearity {};

using NonlinearityKind = std::variant<ZeroNonlinearity, ExponentialCritical, Polynomial>;

/// e^{alpha x^2} is only evaluated while alpha x^2 <= kExponentClamp.
inline constexpr double kExponentClamp = 700.0;

bool is_zero(const NonlinearityKind& kind);
double nonlinearity_value(const NonlinearityKind& kind, double x);
double nonlinearity_derivative(const NonlinearityKind& kind, double x);

nlohmann::json to_json(const NonlinearityKind& kind);
NonlinearityKind nonlinearity_from_json(const nlohmann::json& j);

/// Pointwise h(u(x)). Throws RangeError past the overflow clamp.
PhysicalField eval_F(const PhysicalField& u, const NonlinearityKind& kind);

struct NemytskiiResult {
    /// (g o u) e_j per channel, unweighted
    std::vector<PhysicalField> channels;
    /// sum_j mu_j ||(g o u) e_j||_{L2}^2
    double hs_norm_sq = 0.0;
    /// ||g o u||_{L2}^2
    double g_l2_sq = 0.0;
};

NemytskiiResult nemytskii_G(const PhysicalField& u, const NoiseBasis& noise, const NonlinearityKind& kind);

/// int_D (e^{alpha u^2} - 1) dx
double moser_trudinger_functional(const PhysicalField& u, double alpha);

/// ||u||_inf / (||u||_{H^1} [1 + log(1 + ||u||_E / ||u||_{H^1})]^{1/2}),
/// E = Dom(A_q^{(1-r)/2}). Requires the (q, r) pair condition.
double log_inequality_ratio(const SpectralField& u, double q, double r, GridSpec grid);

struct LipschitzBudget {
    double M = 0.5;
    double M_prime = 0.3;
    double gamma = 0.1;
    double C_F = 1.0;
    double C_G = 1.0;

    void validate(double p) const;
};

/// gamma = 2 pi C^2 (1 + eps) M^2
double default_gamma(double log_constant, double M, double eps = 0.1);

/// ||F(u) - F(v)||_{L2} / ([1 + ||u||_E/M + ||v||_E/M]^gamma ||u - v||_{H_A}).
/// Inputs must lie in the closed H_A ball of radius M; u = v gives 0.
double lipschitz_ratio_F(const SpectralField& u, const SpectralField& v, const LipschitzBudget& budget,
                         const NonlinearityKind& kind, const ExponentTriple& triple, GridSpec grid);

/// Same ratio with ||G(u) - G(v)||_{HS} in the numerator.
double lipschitz_ratio_G(const SpectralField& u, const SpectralField& v, const LipschitzBudget& budget,
                         const NonlinearityKind& kind, const NoiseBasis& noise, const ExponentTriple& triple,
                         GridSpec grid);

/// Random field with c_j = N(0,1) (1 + lambda_j^2)^{-decay/2}. Coefficients
/// are keyed by (seed, sample, mode index pair) so a larger basis extends the
/// same draw.
SpectralField random_field(const BasisPtr& basis, std::uint64_t seed, std::uint32_t sample, double decay);

struct ConstantEstimate {
    double M = 0.0;
    double gamma = 0.0;
    std::size_t samples = 0;
    double C_F = 0.0;
    double C_G = 0.0;
    GridSpec grid;
};

/// Running max of the F and G Lipschitz ratios over random pairs in the
/// H_A ball of radius M.
ConstantEstimate estimate_lipschitz_constants(const BasisPtr& basis, const LipschitzBudget& budget,
                                              const NonlinearityKind& f_kind, const NonlinearityKind& g_kind,
                                              const NoiseBasis& noise, const ExponentTriple& triple, GridSpec grid,
                                              std::size_t samples, std::uint64_t seed);

/// Max of log_inequality_ratio over random fields and the first basis modes.
double estimate_log_constant(const BasisPtr& basis, double q, double r, GridSpec grid, std::size_t samples,
                             std::uint64_t seed);

void write_constants_csv(std::ostream& out, const std::vector<ConstantEstimate>& rows);

}  // namespace snwe
