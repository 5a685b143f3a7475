#include "doctest.h"

#include <cmath>
#include <numbers>

#include "snwe/mild_solver.hpp"

using namespace snwe;
using std::numbers::pi;

namespace {

SolverConfig base_config(double cutoff, double horizon, std::size_t steps)
{
    SolverConfig c;
    c.basis = build_basis(pi, pi, Boundary::Dirichlet, cutoff);
    c.horizon = horizon;
    c.steps = steps;
    c.triple = ExponentTriple::admissible(4, 4);
    c.gamma = 0.2;
    return c;
}

Eigen::VectorXd small_data(const BasisPtr& b, double ha, std::uint32_t sample = 0)
{
    SpectralField f = random_field(b, 31, sample, 2.0);
    return (ha / ha_norm(f)) * f.coeffs();
}

// Strang splitting: half rotation, velocity kick dt F(u), half rotation.
Eigen::MatrixXd strang_reference(const SolverConfig& c, std::size_t refine)
{
    const BasisPtr& b = c.basis;
    const SpectralTransform tr(b, c.grid.nx > 0 ? c.grid : default_grid(*b));
    const double h = c.dt() / static_cast<double>(refine);
    Eigen::VectorXd u = c.u0;
    Eigen::VectorXd v = c.u1.size() ? c.u1 : Eigen::VectorXd::Zero(u.size());
    auto rotate = [&](double t) {
        for (Eigen::Index j = 0; j < u.size(); ++j) {
            const double lam = b->frequencies()[static_cast<std::size_t>(j)];
            const double cs = std::cos(lam * t);
            const double sn = std::sin(lam * t);
            const double uj = u[j];
            u[j] = cs * uj + sn / lam * v[j];
            v[j] = -lam * sn * uj + cs * v[j];
        }
    };
    Eigen::MatrixXd out(u.size(), static_cast<Eigen::Index>(c.steps + 1));
    out.col(0) = u;
    for (std::size_t n = 0; n < c.steps; ++n) {
        for (std::size_t s = 0; s < refine; ++s) {
            rotate(0.5 * h);
            v += h * tr.analyze_coeffs(eval_F(tr.synthesize(u), c.f_kind));
            rotate(0.5 * h);
        }
        out.col(static_cast<Eigen::Index>(n + 1)) = u;
    }
    return out;
}

}  // namespace

TEST_CASE("cutoff functions")
{
    CutoffParams p;
    CHECK(cutoff_theta(1.5, 2.0, p) == 1.0);
    CHECK(cutoff_theta(3.0, 1.0, p) == 0.0);
    CHECK(cutoff_theta(1.5, 1.0, p) == doctest::Approx(0.5));
    CHECK(cutoff_theta_hat(0.2, p) == 1.0);
    CHECK(cutoff_theta_hat(0.5, p) == 0.0);
    CHECK(cutoff_theta_hat(0.4, p) == doctest::Approx(0.5));
    for (auto shape : {CutoffShape::LinearRamp, CutoffShape::CubicSmooth}) {
        p.shape = shape;
        for (double n : {1.0, 2.0, 3.5}) {
            double prev = 1.0;
            double worst_slope = 0.0;
            const double step = 1e-3;
            for (double x = 0.0; x < 3 * n; x += step) {
                const double t = cutoff_theta(x, n, p);
                CHECK(t <= prev);
                CHECK(t >= 0.0);
                CHECK(t <= 1.0);
                if (x > 0) worst_slope = std::max(worst_slope, (prev - t) / step);
                prev = t;
                // theta_n(x) h(x) <= h(2n) for the non-decreasing h(x) = x^3
                CHECK(t * x * x * x <= 8 * n * n * n + 1e-12);
            }
            CHECK(worst_slope <= p.lip() / n + 1e-6);
            CHECK(worst_slope >= 0.99 * p.lip() / n);
        }
    }
    CHECK(CutoffParams{}.lip() == 1.0);
    CHECK(CutoffParams{1.0, 0.5, 0.3, CutoffShape::CubicSmooth}.lip() == 1.5);
    CHECK_THROWS_AS((CutoffParams{1.0, 0.3, 0.5}.validate()), PreconditionError);
}

TEST_CASE("configuration validation lists every problem")
{
    SolverConfig c = base_config(3.0, 1.0, 100);
    c.tol_fp = 0.0;
    c.cutoffs.M_prime = 0.6;
    c.gamma = 3.0;
    try {
        c.validate();
        FAIL("expected failure");
    } catch (const PreconditionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("tol_fp") != std::string::npos);
        CHECK(msg.find("M'") != std::string::npos);
        CHECK(msg.find("gamma") != std::string::npos);
    }
    SolverConfig nl = base_config(3.0, 1.0, 100);
    nl.f_kind = ExponentialCritical{};
    nl.u0 = SpectralField::single_mode(nl.basis, {1, 1}).coeffs();
    CHECK_THROWS_AS(nl.validate(), PreconditionError);
    nl.u0 *= 0.1;
    CHECK_NOTHROW(nl.validate());
}

TEST_CASE("linear problem reproduces the rotation")
{
    SolverConfig c = base_config(3.0, 2 * pi, 2000);
    c.u0 = SpectralField::single_mode(c.basis, {1, 1}).coeffs();
    const MildSolver s(c);
    const SolveResult r = s.solve_truncated(0);
    CHECK(r.diagnostics.iterations == 1);
    CHECK(r.diagnostics.converged);
    CHECK(r.diagnostics.residual < 1e-12);
    double worst = 0.0;
    for (std::size_t k = 0; k <= c.steps; ++k)
        worst = std::max(worst, std::abs(r.trajectory.u(0, static_cast<Eigen::Index>(k)) - std::cos(std::sqrt(2.0) * r.trajectory.time(k))));
    CHECK(worst < 1e-10);
    CHECK(r.trajectory.u.col(0) == c.u0);
    CHECK(r.trajectory.ut.col(0).norm() == 0.0);
}

TEST_CASE("zero data is a fixed point")
{
    SolverConfig c = base_config(4.0, 0.1, 100);
    c.f_kind = ExponentialCritical{};
    c.g_kind = ExponentialCritical{};
    c.noise_channels = 3;
    const MildSolver s(c);
    TrajectoryRecord zero(c.basis, c.dt(), c.steps + 1);
    attach_running_norms(zero, s.norms());
    const TrajectoryRecord out = s.picard_step(zero, 0);
    CHECK(out.u.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deterministic Duhamel quadrature")
{
    auto b = build_basis(pi, pi, Boundary::Dirichlet, 3.0);
    const double dt = 1e-3;
    const std::size_t nodes = 1001;
    const double f = 0.1;
    TrajectoryRecord v(b, dt, nodes);
    v.u.row(0).setConstant(f);
    const NormEvaluator ev(b, default_grid(*b), ExponentTriple::admissible(4, 4));
    attach_running_norms(v, ev);
    CutoffParams cut;
    cut.n = 100.0;
    const SpectralField out = duhamel_deterministic(v, 1000, Polynomial{{0.0, 1.0}}, cut, default_grid(*b));
    const double lam2 = 2.0;
    CHECK(std::abs(out[0] - f * (1 - std::cos(std::sqrt(lam2))) / lam2) < 1e-6);
    CHECK(duhamel_deterministic(v, 1000, ZeroNonlinearity{}, cut, default_grid(*b)).coeffs().norm() == 0.0);
    CutoffParams tight;
    tight.n = 1e-3;  // Y_s >= 2n everywhere beyond t = 0
    TrajectoryRecord w = v;
    w.u.row(0).setConstant(0.15);
    attach_running_norms(w, ev);
    CHECK(duhamel_deterministic(w, 1000, Polynomial{{0.0, 1.0}}, tight, default_grid(*b)).coeffs().norm() == 0.0);
    TrajectoryRecord bare(b, dt, nodes);
    CHECK_THROWS_AS(duhamel_deterministic(bare, 10, Polynomial{{0.0, 1.0}}, cut, default_grid(*b)), PreconditionError);
}

TEST_CASE("nonlinear deterministic solve against a Strang-split reference")
{
    SolverConfig c = base_config(4.0, 1.0, 1000);
    c.f_kind = ExponentialCritical{};
    c.u0 = small_data(c.basis, 1e-3);
    const MildSolver s(c);
    const SolveResult r = s.solve_truncated(0);
    CHECK(r.diagnostics.converged);
    for (double ratio : r.diagnostics.ratios) CHECK(ratio < 0.1);
    const Eigen::MatrixXd ref = strang_reference(c, 4);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < ref.cols(); ++k) worst = std::max(worst, s.norms().ha(r.trajectory.u.col(k) - ref.col(k)));
    CHECK(worst < 1e-5);
}

TEST_CASE("stochastic solve: contraction, residual, uniqueness and pair form")
{
    SolverConfig c = base_config(6.0, 0.05, 50);
    c.f_kind = ExponentialCritical{};
    c.g_kind = ExponentialCritical{};
    c.noise_channels = 4;
    c.paths = 3;
    c.seed = 12;
    c.u0 = small_data(c.basis, 0.1);
    const MildSolver s(c);
    const SolveResult r = s.solve_truncated(1);
    CHECK(r.diagnostics.converged);
    for (double ratio : r.diagnostics.ratios) CHECK(ratio < 0.5);
    CHECK(r.diagnostics.residual < 10 * c.tol_fp);

    TrajectoryRecord other(c.basis, c.dt(), c.steps + 1);
    other.u.setConstant(0.01);
    attach_running_norms(other, s.norms());
    const SolveResult r2 = s.solve_truncated(1, &other);
    CHECK(s.y_distance(r.trajectory, r2.trajectory) < 10 * c.tol_fp);

    // cutoffs inactive along the path: the untruncated residual is small too
    const StoppingReport stop = detect_stopping(r.trajectory, c.cutoffs.n, c.cutoffs.M_prime);
    if (!stop.tau) {
        const TrajectoryRecord untrunc = s.picard_step(r.trajectory, 1, false);
        CHECK(s.y_distance(untrunc, r.trajectory) < 10 * c.tol_fp);
    }

    const TrajectoryRecord pair = s.pair_system(1);
    CHECK((pair.u - r.trajectory.u).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((pair.ut - r.trajectory.ut).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("Picard map contracts on random pairs within the budget horizon")
{
    SolverConfig c = base_config(5.0, 0.05, 50);
    c.f_kind = ExponentialCritical{};
    c.g_kind = ExponentialCritical{};
    c.noise_channels = 2;
    c.u0 = small_data(c.basis, 0.05);
    const MildSolver s(c);
    const TrajectoryRecord lin = s.linear_flow();
    for (std::uint32_t k = 0; k < 20; ++k) {
        TrajectoryRecord a = lin;
        TrajectoryRecord b = lin;
        for (Eigen::Index t = 0; t < a.u.cols(); ++t) {
            const double w = std::sin(0.1 * t + k);
            a.u.col(t) += 0.05 * w * small_data(c.basis, 1.0, 2 * k);
            b.u.col(t) += 0.05 * w * small_data(c.basis, 1.0, 2 * k + 1);
        }
        attach_running_norms(a, s.norms());
        attach_running_norms(b, s.norms());
        const double num = s.y_distance(s.picard_step(a, 0), s.picard_step(b, 0));
        CHECK(num / s.y_distance(a, b) < 1.0);
    }
}

TEST_CASE("linear pair form matches to roundoff")
{
    SolverConfig c = base_config(8.0, 3.0, 3000);
    c.u0 = small_data(c.basis, 2.0);
    c.u1 = small_data(c.basis, 1.0, 1);
    CHECK(pair_system_crosscheck(c, 0) < 1e-10);

    SolverConfig n = c;
    n.basis = build_basis(pi, pi, Boundary::Neumann, 6.0);
    n.u0 = Eigen::VectorXd();
    n.u1 = SpectralField::single_mode(n.basis, {0, 0}, 0.7).coeffs();
    const MildSolver s(n);
    const TrajectoryRecord lin = s.linear_flow();
    for (std::size_t k = 0; k <= n.steps; ++k) CHECK(std::abs(lin.u(0, static_cast<Eigen::Index>(k)) - 0.7 * lin.time(k)) < 1e-12);
    CHECK(pair_system_crosscheck(n, 0) < 1e-10);
}

TEST_CASE("nonlinear pair form agrees with the scalar formula")
{
    SolverConfig c = base_config(5.0, 0.5, 500);
    c.f_kind = ExponentialCritical{};
    c.u0 = small_data(c.basis, 0.2);
    CHECK(pair_system_crosscheck(c, 0) < 1e-6);
}

TEST_CASE("stopping detection")
{
    SolverConfig c = base_config(3.0, 1.0, 100);
    const MildSolver s(c);
    const TrajectoryRecord zero = s.linear_flow();
    const StoppingReport z = detect_stopping(zero, 1.0, 0.3);
    CHECK_FALSE(z.tau.has_value());
    CHECK(z.trigger == StoppingTrigger::HorizonEnd);

    // monotone growth starting just below M'
    TrajectoryRecord grow(c.basis, c.dt(), 101);
    const double start = 0.3 - 1e-3;
    for (Eigen::Index k = 0; k <= 100; ++k) grow.u(0, k) = (start + 0.002 * k) / std::sqrt(3.0);
    attach_running_norms(grow, s.norms());
    const StoppingReport g = detect_stopping(grow, 1.0, 0.3);
    REQUIRE(g.tau.has_value());
    CHECK(*g.tau > 0);
    CHECK(g.trigger == StoppingTrigger::ZNormReachedMprime);
    CHECK(g.z_value >= 0.3);
    CHECK(grow.z_running[*g.tau - 1] < 0.3);

    // tau_n <= tau_k for n <= k, including the n - 1/k family
    TrajectoryRecord big(c.basis, c.dt(), 101);
    for (Eigen::Index k = 0; k <= 100; ++k) big.u(0, k) = 0.05 * k;
    attach_running_norms(big, s.norms());
    std::size_t prev = 0;
    for (double level : {0.5, 1.0 - 1.0 / 2, 1.0 - 1.0 / 4, 1.0, 2.0, 3.0}) {
        const StoppingReport r = detect_stopping(big, level, 10.0);
        const std::size_t tau = r.tau.value_or(100);
        CHECK(tau >= prev);
        prev = tau;
    }
    TrajectoryRecord bare(c.basis, c.dt(), 10);
    CHECK_THROWS_AS(detect_stopping(bare, 1.0, 0.3), PreconditionError);
}

TEST_CASE("contraction budget")
{
    CutoffParams cut;
    const auto triple = ExponentTriple::admissible(4, 4);
    BudgetConstants k{2.0, 1.0, 1.5, 1.2, 0.8, 0.6};
    const double gamma = 0.3;
    double prev = 0.0;
    for (double T = 1e-8; T <= 10.0; T *= 3.0) {
        const double v = budget_L2(T, cut, gamma, 4, k) + budget_L3(T, cut, gamma, 4, k);
        CHECK(v > prev);
        prev = v;
    }
    CHECK(budget_L2(1e-14, cut, gamma, 4, k) + budget_L3(1e-14, cut, gamma, 4, k) < 1e-5);
    const double t1 = contraction_budget(cut, triple, gamma, k, 1.0, 1e-6);
    CutoffParams cut2 = cut;
    cut2.n = 2.0;
    const double t2 = contraction_budget(cut2, triple, gamma, k, 1.0, 1e-6);
    CHECK(t2 < t1);
    BudgetConstants kf = k;
    kf.C_F *= 2;
    CHECK(contraction_budget(cut, triple, gamma, kf, 1.0, 1e-6) <= t1);
    BudgetConstants kg = k;
    kg.C_G *= 2;
    CHECK(contraction_budget(cut, triple, gamma, kg, 1.0, 1e-6) <= t1);
    const double f1 = budget_L2(t1, cut, gamma, 4, k) + budget_L3(t1, cut, gamma, 4, k);
    const double f2 = budget_L2(t1 + 1e-6, cut, gamma, 4, k) + budget_L3(t1 + 1e-6, cut, gamma, 4, k);
    CHECK(f1 <= 0.5);
    CHECK(f2 > 0.5);
    CHECK(contraction_budget(cut, triple, gamma, BudgetConstants{0, 0, 1, 1, 1, 1}, 2.5, 0.01) == doctest::Approx(2.5));
    CHECK_THROWS_AS(contraction_budget(cut, triple, gamma, BudgetConstants{1e6, 1e6, 1, 1, 1, 1}, 1.0, 0.01), PreconditionError);
    CHECK_THROWS_AS(contraction_budget(cut, triple, 2.5, k, 1.0, 0.01), PreconditionError);
}

TEST_CASE("group bound")
{
    auto b = build_basis(pi, pi, Boundary::Dirichlet, 3.0);
    CHECK(group_bound(*b, 10.0) == doctest::Approx(std::sqrt(1.5)));
    auto n = build_basis(pi, pi, Boundary::Neumann, 3.0);
    CHECK(group_bound(*n, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("nesting consistency")
{
    SolverConfig c = base_config(5.0, 0.2, 200);
    CHECK(nesting_consistency(c, 0, 1.0, 1.0) == 0.0);
    c.u0 = SpectralField::single_mode(c.basis, {1, 1}, 2.0).coeffs();
    CHECK(nesting_consistency(c, 0, 1.0, 2.0) < 1e-14);
    SolverConfig nl = base_config(5.0, 0.2, 200);
    nl.f_kind = ExponentialCritical{};
    nl.g_kind = ExponentialCritical{};
    nl.noise_channels = 2;
    nl.u0 = small_data(nl.basis, 0.25);
    CHECK(nesting_consistency(nl, 0, 1.0, 2.0) < 10 * nl.tol_fp);
    CHECK_THROWS_AS(nesting_consistency(nl, 0, 2.0, 1.0), DomainError);
}

TEST_CASE("non-contraction is reported")
{
    SolverConfig c = base_config(3.0, 1.0, 100);
    c.f_kind = Polynomial{{0.0, -4000.0}};
    c.cutoffs.n = 1e6;
    c.max_iter = 40;
    c.tol_fp = 1e-20;
    c.u0 = small_data(c.basis, 1e-12);
    const MildSolver s(c);
    CHECK_THROWS_AS(s.solve_truncated(0), NonContractionError);
}
