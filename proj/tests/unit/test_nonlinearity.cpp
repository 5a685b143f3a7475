#include "doctest.h"

#include <cmath>
#include <numbers>

#include "snwe/nonlinearity.hpp"

using namespace snwe;
using std::numbers::pi;

TEST_CASE("scalar exponential nonlinearity")
{
    const NonlinearityKind h = ExponentialCritical{};
    CHECK(nonlinearity_value(h, 0.0) == 0.0);
    CHECK(nonlinearity_value(h, 0.5) == doctest::Approx(0.5 * (std::exp(pi) - 1.0)));
    CHECK(nonlinearity_value(h, 0.5) == doctest::Approx(11.0703).epsilon(1e-5));
    CHECK(std::abs(nonlinearity_value(h, 1e-3) / 1e-9 - 4 * pi) < 1e-4);
    for (double x : {0.01, 0.2, 0.7, 1.3}) CHECK(nonlinearity_value(h, -x) == -nonlinearity_value(h, x));
    const double xmax = std::sqrt(700.0 / (4 * pi));
    CHECK(std::isfinite(nonlinearity_value(h, 0.999 * xmax)));
    CHECK_THROWS_AS(nonlinearity_value(h, 1.001 * xmax), RangeError);
    // derivative against a central difference
    for (double x : {0.05, 0.3, 0.6}) {
        const double eps = 1e-6;
        const double fd = (nonlinearity_value(h, x + eps) - nonlinearity_value(h, x - eps)) / (2 * eps);
        CHECK(nonlinearity_derivative(h, x) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("mean-value identity at scalar level")
{
    const NonlinearityKind h = ExponentialCritical{};
    const double alpha = 4 * pi;
    const double pairs[][2] = {{0.1, 0.4}, {-0.3, 0.25}, {0.55, -0.05}, {0.2, 0.21}};
    for (const auto& ab : pairs) {
        const double a = ab[0];
        const double b = ab[1];
        const double target = (nonlinearity_value(h, a) - nonlinearity_value(h, b)) / (a - b);
        auto g = [&](double th) {
            const double u = (1 - th) * a + th * b;
            return (1 + 2 * alpha * u * u) * std::exp(alpha * u * u) - 1 - target;
        };
        // scan for a sign change then bisect
        bool found = false;
        for (int i = 0; i < 1000 && !found; ++i) {
            double lo = i / 1000.0;
            double hi = (i + 1) / 1000.0;
            if (g(lo) * g(hi) <= 0) {
                for (int it = 0; it < 80; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (g(lo) * g(mid) <= 0 ? hi : lo) = mid;
                }
                found = lo > 0.0 && hi < 1.0;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("polynomial and zero kinds")
{
    const NonlinearityKind p = Polynomial{{0.0, 1.0, 0.0, 2.0}};
    CHECK(nonlinearity_value(p, 2.0) == doctest::Approx(18.0));
    CHECK(nonlinearity_derivative(p, 2.0) == doctest::Approx(25.0));
    CHECK(is_zero(ZeroNonlinearity{}));
    CHECK(is_zero(Polynomial{{0.0, 0.0}}));
    CHECK_FALSE(is_zero(p));
    CHECK_THROWS_AS(nonlinearity_from_json(nlohmann::json{{"kind", "polynomial"}, {"coefficients", {1.0, 2.0}}}), DomainError);
    const NonlinearityKind back = nonlinearity_from_json(to_json(NonlinearityKind{ExponentialCritical{2.0}}));
    CHECK(std::get<ExponentialCritical>(back).alpha == 2.0);
}

TEST_CASE("eval_F is pointwise")
{
    auto b = build_basis(pi, pi, Boundary::Dirichlet, 6.0);
    const SpectralField u = 0.3 * random_field(b, 1, 0, 2.0);
    const NonlinearityKind h = ExponentialCritical{};
    const PhysicalField zero = eval_F(synthesize(SpectralField(b), default_grid(*b)), h);
    CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);
    const PhysicalField coarse = eval_F(synthesize(u, {16, 16}), h);
    const PhysicalField fine = eval_F(synthesize(u, {32, 32}), h);
    double worst = 0.0;
    for (int i = 0; i <= 16; ++i)
        for (int k = 0; k <= 16; ++k) worst = std::max(worst, std::abs(coarse.values(i, k) - fine.values(2 * i, 2 * k)));
    CHECK(worst < 1e-13);
}

TEST_CASE("Nemytskii operator")
{
    auto b = build_basis(pi, pi, Boundary::Neumann, 5.0);
    const GridSpec g = default_grid(*b);
    const NonlinearityKind h = ExponentialCritical{};
    const NoiseBasis one = build_noise_basis(b, 1);
    const NemytskiiResult z = nemytskii_G(synthesize(SpectralField(b), g), one, h);
    CHECK(z.hs_norm_sq == 0.0);
    const SpectralField u = 0.2 * random_field(b, 9, 0, 2.0);
    const NemytskiiResult r = nemytskii_G(synthesize(u, g), one, h);
    // constant Neumann channel 1/pi
    CHECK(std::sqrt(r.hs_norm_sq) == doctest::Approx(std::sqrt(r.g_l2_sq) / pi).epsilon(1e-12));

    const NoiseBasis many = build_noise_basis(b, 12);
    for (std::uint32_t s = 0; s < 50; ++s) {
        const SpectralField v = 0.2 * random_field(b, 17, s, 1.0);
        const NemytskiiResult res = nemytskii_G(synthesize(v, g), many, h);
        CHECK(res.hs_norm_sq <= res.g_l2_sq * many.effective_sum + 1e-10);
    }
}

TEST_CASE("Moser-Trudinger functional")
{
    const GridSpec g{32, 32};
    PhysicalField c{pi, pi, Boundary::Neumann, g, Eigen::MatrixXd::Constant(33, 33, 0.2)};
    CHECK(moser_trudinger_functional(c, 4 * pi) == doctest::Approx(pi * pi * std::expm1(4 * pi * 0.04)));
    c.values.setZero();
    CHECK(moser_trudinger_functional(c, 4 * pi) == 0.0);
    auto b = build_basis(pi, pi, Boundary::Dirichlet, 8.0);
    const SpectralField u = random_field(b, 2, 0, 2.0);
    const SpectralField unit = (1.0 / ha_norm(u)) * u;
    const PhysicalField f = synthesize(unit, default_grid(*b));
    CHECK(moser_trudinger_functional(f, 4 * pi) >= moser_trudinger_functional(f, 2 * pi));
    CHECK(std::isfinite(moser_trudinger_functional(f, 4 * pi)));
}

TEST_CASE("logarithmic inequality ratio")
{
    auto b = build_basis(pi, pi, Boundary::Dirichlet, 8.0);
    const GridSpec g = default_grid(*b);
    const double q = 4.0;
    const double r = admissible_r(4, 4);
    const auto e = SpectralField::single_mode(b, {1, 1});
    const double e_norm = fractional_norm(e, 1.0 - r, q, g);
    const double sup = lq_norm(synthesize(e, g), kInf);
    CHECK(log_inequality_ratio(e, q, r, g) == doctest::Approx(sup / (std::sqrt(3.0) * std::sqrt(1 + std::log(1 + e_norm / std::sqrt(3.0))))));
    CHECK(sup == doctest::Approx(2.0 / pi));
    CHECK_THROWS_AS(log_inequality_ratio(e, 4.0, 0.75, g), DomainError);
    CHECK_THROWS_AS(log_inequality_ratio(SpectralField(b), q, r, g), DomainError);
    for (std::uint32_t s = 0; s < 200; ++s) CHECK(std::isfinite(log_inequality_ratio(random_field(b, 4, s, 1.0), q, r, g)));

    // refinement of a band-limited field: both bases carry the same data
    auto small = build_basis(pi, pi, Boundary::Dirichlet, 6.0);
    auto large = build_basis(pi, pi, Boundary::Dirichlet, 12.0);
    SpectralField us = random_field(small, 8, 0, 2.0);
    SpectralField ul(large);
    for (std::size_t j = 0; j < small->size(); ++j) ul.coeffs()[static_cast<Eigen::Index>(*large->index_of(small->modes()[j]))] = us[j];
    const double a = log_inequality_ratio(us, q, r, default_grid(*large));
    const double c = log_inequality_ratio(ul, q, r, default_grid(*large));
    CHECK(std::abs(a - c) < 0.01 * a);
}

TEST_CASE("Lipschitz ratios")
{
    auto b = build_basis(pi, pi, Boundary::Dirichlet, 6.0);
    const GridSpec g = default_grid(*b);
    const auto triple = ExponentTriple::admissible(4, 4);
    LipschitzBudget budget;
    budget.M = 0.5;
    budget.M_prime = 0.3;
    budget.gamma = 0.2;
    const NonlinearityKind h = ExponentialCritical{};
    const SpectralField u = (0.4 / ha_norm(random_field(b, 3, 0, 2.0))) * random_field(b, 3, 0, 2.0);
    CHECK(lipschitz_ratio_F(u, u, budget, h, triple, g) == 0.0);
    const SpectralField zero(b);
    const double expected = lq_norm(eval_F(synthesize(u, g), h), 2.0) /
                            (std::pow(1 + fractional_norm(u, 1 - triple.r, 4, g) / budget.M, budget.gamma) * ha_norm(u));
    CHECK(lipschitz_ratio_F(u, zero, budget, h, triple, g) == doctest::Approx(expected));
    CHECK_THROWS_AS(lipschitz_ratio_F(2.0 * u, zero, budget, h, triple, g), PreconditionError);

    const NoiseBasis nb = build_noise_basis(b, 4);
    const ConstantEstimate est = estimate_lipschitz_constants(b, budget, h, h, nb, triple, g, 100, 7);
    CHECK(std::isfinite(est.C_F));
    CHECK(est.C_F > 0.0);
    CHECK(est.C_G > 0.0);
    // smaller gamma gives a larger (or equal) constant on the same samples
    LipschitzBudget smaller = budget;
    smaller.gamma = 0.1;
    const ConstantEstimate est2 = estimate_lipschitz_constants(b, smaller, h, h, nb, triple, g, 100, 7);
    CHECK(est2.C_F >= est.C_F);
    CHECK(est2.C_G >= est.C_G);
    // refinement stability of C_F at M = 0.3
    LipschitzBudget b3 = budget;
    b3.M = 0.3;
    b3.M_prime = 0.2;
    const ConstantEstimate coarse = estimate_lipschitz_constants(b, b3, h, h, nb, triple, g, 100, 11);
    const ConstantEstimate fine = estimate_lipschitz_constants(b, b3, h, h, nb, triple, {2 * g.nx, 2 * g.ny}, 100, 11);
    CHECK(std::abs(fine.C_F - coarse.C_F) < 0.1 * coarse.C_F);
}

TEST_CASE("default gamma formula")
{
    CHECK(default_gamma(1.0, 0.5) == doctest::Approx(2 * pi * 1.1 * 0.25));
    LipschitzBudget b;
    b.gamma = 3.0;
    CHECK_THROWS_AS(b.validate(4.0), DomainError);
}
