#include "snwe/nonlinearity.hpp"

#include <algorithm>
#include <cmath>

namespace snwe {

namespace {

constexpr const char* kModule = "nonlinearity";

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

double checked_exponent(double alpha, double x)
{
    const double a = alpha * x * x;
    if (!(a <= kExponentClamp))
        throw RangeError(kModule, "e^{alpha u^2} overflow clamp exceeded at |u| = " + format_double(std::abs(x)));
    return a;
}

}  // namespace

bool is_zero(const NonlinearityKind& kind)
{
    if (std::holds_alternative<ZeroNonlinearity>(kind)) return true;
    if (const auto* poly = std::get_if<Polynomial>(&kind))
        return std::all_of(poly->coefficients.begin(), poly->coefficients.end(), [](double c) { return c == 0.0; });
    return false;
}

double nonlinearity_value(const NonlinearityKind& kind, double x)
{
    return std::visit(overloaded{
                          [](const ZeroNonlinearity&) { return 0.0; },
                          [x](const ExponentialCritical& e) { return x * std::expm1(checked_exponent(e.alpha, x)); },
                          [x](const Polynomial& p) {
                              double acc = 0.0;
                              for (auto it = p.coefficients.rbegin(); it != p.coefficients.rend(); ++it) acc = acc * x + *it;
                              return acc;
                          },
                      },
                      kind);
}

double nonlinearity_derivative(const NonlinearityKind& kind, double x)
{
    return std::visit(overloaded{
                          [](const ZeroNonlinearity&) { return 0.0; },
                          [x](const ExponentialCritical& e) {
                              const double a = checked_exponent(e.alpha, x);
                              // (1 + 2a) e^a - 1
                              return std::expm1(a) + 2.0 * a * std::exp(a);
                          },
                          [x](const Polynomial& p) {
                              double acc = 0.0;
                              for (std::size_t k = p.coefficients.size(); k-- > 1;) acc = acc * x + static_cast<double>(k) * p.coefficients[k];
                              return acc;
                          },
                      },
                      kind);
}

nlohmann::json to_json(const NonlinearityKind& kind)
{
    return std::visit(overloaded{
                          [](const ZeroNonlinearity&) { return nlohmann::json{{"kind", "zero"}}; },
                          [](const ExponentialCritical& e) { return nlohmann::json{{"kind", "exponential"}, {"alpha", e.alpha}}; },
                          [](const Polynomial& p) { return nlohmann::json{{"kind", "polynomial"}, {"coefficients", p.coefficients}}; },
                      },
                      kind);
}

NonlinearityKind nonlinearity_from_json(const nlohmann::json& j)
{
    const std::string name = j.is_string() ? j.get<std::string>() : j.value("kind", std::string("zero"));
    if (name == "zero") return ZeroNonlinearity{};
    if (name == "exponential") {
        ExponentialCritical e;
        if (j.is_object()) e.alpha = j.value("alpha", e.alpha);
        if (!(e.alpha > 0.0)) throw DomainError(kModule, "alpha must be positive");
        return e;
    }
    if (name == "polynomial") {
        Polynomial p;
        if (j.is_object()) p.coefficients = j.value("coefficients", std::vector<double>{});
        if (!p.coefficients.empty() && p.coefficients.front() != 0.0)
            throw DomainError(kModule, "polynomial nonlinearity must vanish at 0 (constant coefficient != 0)");
        return p;
    }
    throw DomainError(kModule, "unknown nonlinearity kind '" + name + "'");
}

PhysicalField eval_F(const PhysicalField& u, const NonlinearityKind& kind)
{
    PhysicalField out = u;
    out.values = u.values.unaryExpr([&kind](double x) { return nonlinearity_value(kind, x); });
    return out;
}

NemytskiiResult nemytskii_G(const PhysicalField& u, const NoiseBasis& noise, const NonlinearityKind& kind)
{
    if (noise.channels() == 0) throw DomainError(kModule, "noise has no channels");
    const SpectralBasis& basis = *noise.basis;
    if (u.lx != basis.lx() || u.ly != basis.ly() || u.bc != basis.bc())
        throw DomainError(kModule, "field and noise live on different domains");

    const PhysicalField g = eval_F(u, kind);
    const Eigen::MatrixXd w = trapezoid_weights(u.grid.nx, u.lx) * trapezoid_weights(u.grid.ny, u.ly).transpose();
    NemytskiiResult res;
    res.g_l2_sq = (w.array() * g.values.array().square()).sum();
    for (std::size_t j = 0; j < noise.channels(); ++j) {
        const Mode m = basis.modes()[noise.mode_indices[j]];
        PhysicalField ch = g;
        for (Eigen::Index k = 0; k <= u.grid.ny; ++k) {
            const double fy = basis.factor(m.jy, u.y(static_cast<int>(k)), u.ly);
            for (Eigen::Index i = 0; i <= u.grid.nx; ++i)
                ch.values(i, k) *= basis.factor(m.jx, u.x(static_cast<int>(i)), u.lx) * fy;
        }
        res.hs_norm_sq += noise.weights[j] * (w.array() * ch.values.array().square()).sum();
        res.channels.push_back(std::move(ch));
    }
    return res;
}

double moser_trudinger_functional(const PhysicalField& u, double alpha)
{
    if (!(alpha > 0.0)) throw DomainError(kModule, "alpha must be positive");
    const Eigen::VectorXd wx = trapezoid_weights(u.grid.nx, u.lx);
    const Eigen::VectorXd wy = trapezoid_weights(u.grid.ny, u.ly);
    double acc = 0.0;
    for (Eigen::Index k = 0; k < u.values.cols(); ++k)
        for (Eigen::Index i = 0; i < u.values.rows(); ++i)
            acc += wx[i] * wy[k] * std::expm1(checked_exponent(alpha, u.values(i, k)));
    return acc;
}

double log_inequality_ratio(const SpectralField& u, double q, double r, GridSpec grid)
{
    if (!validate_pair_condition(q, r))
        throw DomainError(kModule, "(q, r) = (" + format_double(q) + ", " + format_double(r) + ") violates the pair condition");
    const double h1 = ha_norm(u);
    if (h1 == 0.0) throw DomainError(kModule, "log inequality ratio of the zero field");
    const double sup = lq_norm(synthesize(u, grid), kInf);
    const double e = fractional_norm(u, 1.0 - r, q, grid);
    return sup / (h1 * std::sqrt(1.0 + std::log1p(e / h1)));
}

void LipschitzBudget::validate(double p) const
{
    if (!(M_prime > 0.0 && M_prime < M && M < 1.0)) throw DomainError(kModule, "need 0 < M' < M < 1");
    if (!(gamma > 0.0)) throw DomainError(kModule, "gamma must be positive");
    if (!(2.0 * gamma < p)) throw DomainError(kModule, "need 2 gamma < p");
}

double default_gamma(double log_constant, double M, double eps)
{
    return 2.0 * std::numbers::pi * log_constant * log_constant * (1.0 + eps) * M * M;
}

namespace {

struct RatioParts {
    double weight = 0.0;  // [1 + |u|_E/M + |v|_E/M]^gamma |u - v|_{H_A}
    bool identical = false;
};

RatioParts ratio_denominator(const SpectralField& u, const SpectralField& v, const LipschitzBudget& budget,
                             const ExponentTriple& triple, GridSpec grid)
{
    require_same_basis(u.basis(), v.basis(), kModule);
    const double hu = ha_norm(u);
    const double hv = ha_norm(v);
    if (hu > budget.M * (1.0 + 1e-12) || hv > budget.M * (1.0 + 1e-12))
        throw PreconditionError(kModule, "Lipschitz estimate needs ||u||_{H_A}, ||v||_{H_A} <= M (got " +
                                             format_double(hu) + ", " + format_double(hv) + ")");
    const double diff = ha_norm(u - v);
    if (diff == 0.0) return {0.0, true};
    const double eu = fractional_norm(u, 1.0 - triple.r, triple.q, grid);
    const double ev = fractional_norm(v, 1.0 - triple.r, triple.q, grid);
    return {std::pow(1.0 + eu / budget.M + ev / budget.M, budget.gamma) * diff, false};
}

}  // namespace

double lipschitz_ratio_F(const SpectralField& u, const SpectralField& v, const LipschitzBudget& budget,
                         const NonlinearityKind& kind, const ExponentTriple& triple, GridSpec grid)
{
    const RatioParts parts = ratio_denominator(u, v, budget, triple, grid);
    if (parts.identical) return 0.0;
    const SpectralTransform tr(u.basis_ptr(), grid);
    PhysicalField diff = eval_F(tr.synthesize(u), kind);
    diff.values -= eval_F(tr.synthesize(v), kind).values;
    return lq_norm(diff, 2.0) / parts.weight;
}

double lipschitz_ratio_G(const SpectralField& u, const SpectralField& v, const LipschitzBudget& budget,
                         const NonlinearityKind& kind, const NoiseBasis& noise, const ExponentTriple& triple,
                         GridSpec grid)
{
    const RatioParts parts = ratio_denominator(u, v, budget, triple, grid);
    if (parts.identical) return 0.0;
    const SpectralTransform tr(u.basis_ptr(), grid);
    const NemytskiiResult gu = nemytskii_G(tr.synthesize(u), noise, kind);
    const NemytskiiResult gv = nemytskii_G(tr.synthesize(v), noise, kind);
    const Eigen::MatrixXd& w = tr.weights();
    double hs = 0.0;
    for (std::size_t j = 0; j < noise.channels(); ++j)
        hs += noise.weights[j] * (w.array() * (gu.channels[j].values - gv.channels[j].values).array().square()).sum();
    return std::sqrt(hs) / parts.weight;
}

SpectralField random_field(const BasisPtr& basis, std::uint64_t seed, std::uint32_t sample, double decay)
{
    SpectralField f(basis);
    const auto modes = basis->modes();
    const auto ev = basis->eigenvalues();
    for (std::size_t j = 0; j < modes.size(); ++j) {
        const double z = counter_normal(seed, sample, static_cast<std::uint32_t>(modes[j].jx),
                                        static_cast<std::uint32_t>(modes[j].jy), StreamTag::SampleField);
        f.coeffs()[static_cast<Eigen::Index>(j)] = z * std::pow(1.0 + ev[j], -0.5 * decay);
    }
    return f;
}

ConstantEstimate estimate_lipschitz_constants(const BasisPtr& basis, const LipschitzBudget& budget,
                                              const NonlinearityKind& f_kind, const NonlinearityKind& g_kind,
                                              const NoiseBasis& noise, const ExponentTriple& triple, GridSpec grid,
                                              std::size_t samples, std::uint64_t seed)
{
    ConstantEstimate est{budget.M, budget.gamma, samples, 0.0, 0.0, grid};
    auto ball_sample = [&](std::uint32_t id) {
        SpectralField f = random_field(basis, seed, id, 2.0);
        const double radius = budget.M * (0.05 + 0.95 * counter_uniform(seed, id, 0xffffffffu, 0xffffffffu, StreamTag::SampleField));
        const double h = ha_norm(f);
        return h > 0.0 ? (radius / h) * f : f;
    };
    for (std::size_t s = 0; s < samples; ++s) {
        const SpectralField u = ball_sample(static_cast<std::uint32_t>(2 * s));
        const SpectralField v = ball_sample(static_cast<std::uint32_t>(2 * s + 1));
        est.C_F = std::max(est.C_F, lipschitz_ratio_F(u, v, budget, f_kind, triple, grid));
        est.C_G = std::max(est.C_G, lipschitz_ratio_G(u, v, budget, g_kind, noise, triple, grid));
    }
    return est;
}

double estimate_log_constant(const BasisPtr& basis, double q, double r, GridSpec grid, std::size_t samples,
                             std::uint64_t seed)
{
    double best = 0.0;
    const std::size_t single = std::min<std::size_t>(basis->size(), 8);
    for (std::size_t j = 0; j < single; ++j) {
        SpectralField e(basis);
        e.coeffs()[static_cast<Eigen::Index>(j)] = 1.0;
        best = std::max(best, log_inequality_ratio(e, q, r, grid));
    }
    for (std::size_t s = 0; s < samples; ++s) {
        const double decay = s % 2 == 0 ? 2.0 : 1.0;
        best = std::max(best, log_inequality_ratio(random_field(basis, seed, static_cast<std::uint32_t>(s), decay), q, r, grid));
    }
    return best;
}

void write_constants_csv(std::ostream& out, const std::vector<ConstantEstimate>& rows)
{
    out << "M,gamma,samples,C_F,C_G,grid_Nx,grid_Ny\n";
    for (const auto& r : rows) {
        out << format_double(r.M) << ',' << format_double(r.gamma) << ',' << r.samples << ',' << format_double(r.C_F)
            << ',' << format_double(r.C_G) << ',' << r.grid.nx << ',' << r.grid.ny << '\n';
    }
}

}  // namespace snwe
