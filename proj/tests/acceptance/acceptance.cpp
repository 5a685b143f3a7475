// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Optional arguments select criteria by
// number, e.g. `snwe_acceptance 1 7 12`.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "snwe/cli_io.hpp"
#include "snwe/mild_solver.hpp"
#include "snwe/nonlinearity.hpp"
#include "snwe/stochastic_convolution.hpp"
#include "snwe/verify_harness.hpp"

using namespace snwe;
using nlohmann::json;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    std::function<Outcome()> check;
};

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

private:
    using Clock = std::chrono::steady_clock;
    Clock::time_point start_ = Clock::now();
};

BasisPtr unit_square(Boundary bc, double cutoff) { return build_basis(pi, pi, bc, cutoff); }

Eigen::VectorXd scaled_random(const BasisPtr& b, double ha, std::uint32_t sample)
{
    const SpectralField f = random_field(b, 31, sample, 2.0);
    return (ha / ha_norm(f)) * f.coeffs();
}

Outcome linear_single_mode()
{
    const Stopwatch clock;
    SolverConfig c;
    c.basis = unit_square(Boundary::Dirichlet, 4.0);
    c.horizon = 2.0 * pi;
    c.steps = 6284;
    c.u0 = SpectralField::single_mode(c.basis, {1, 1}, 1.0).coeffs();
    const SolveResult r = MildSolver(c).solve_truncated(0);
    const Eigen::Index j = static_cast<Eigen::Index>(*c.basis->index_of({1, 1}));
    double err = 0.0;
    for (std::size_t k = 0; k < r.trajectory.nodes(); ++k) {
        const double expect = std::cos(std::sqrt(2.0) * r.trajectory.time(k));
        err = std::max(err, std::abs(r.trajectory.u(j, static_cast<Eigen::Index>(k)) - expect));
        for (Eigen::Index i = 0; i < r.trajectory.u.rows(); ++i)
            if (i != j) err = std::max(err, std::abs(r.trajectory.u(i, static_cast<Eigen::Index>(k))));
    }
    const double secs = clock.seconds();
    return {err < 1e-10 && secs < 1.0, fmt::format("max error {:.3e}, {:.3f} s", err, secs)};
}

Outcome neumann_zero_mode()
{
    SolverConfig c;
    c.basis = unit_square(Boundary::Neumann, 6.0);
    c.horizon = 3.0;
    c.steps = 3000;
    c.u1 = SpectralField::single_mode(c.basis, {0, 0}, 0.7).coeffs();
    const TrajectoryRecord lin = MildSolver(c).linear_flow();
    double err = 0.0;
    for (std::size_t k = 0; k < lin.nodes(); ++k) {
        const Eigen::VectorXd expect = lin.time(k) * c.u1;
        err = std::max(err, (lin.u.col(static_cast<Eigen::Index>(k)) - expect).cwiseAbs().maxCoeff());
    }
    return {err < 1e-12, fmt::format("max error {:.3e}", err)};
}

Outcome ito_isometry()
{
    const Stopwatch clock;
    const BasisPtr b = unit_square(Boundary::Neumann, 1.0);
    const std::size_t mode = *b->index_of({1, 0});
    const std::size_t steps = 1000;
    const std::size_t paths = 10000;
    const double dt = 2.0 * pi / static_cast<double>(steps);
    const NoiseBasis nb = build_noise_basis(b, 1);
    SpectralField f(b);
    f.coeffs()[static_cast<Eigen::Index>(mode)] = 1.0;
    const DiffusionProcess xi = DiffusionProcess::constant(nb, {f}, steps, dt);
    const WienerEnsemble ens(2024, paths, steps, 1, dt);

    std::vector<double> values(paths);
    for (std::size_t w = 0; w < paths; ++w)
        values[w] = convolve(xi, ens, w).trajectory.u(static_cast<Eigen::Index>(mode), static_cast<Eigen::Index>(steps));
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(paths);
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : values) {
        const double d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    const double n = static_cast<double>(paths);
    const double var = m2 / (n - 1.0);
    const double se = std::sqrt((m4 / n - (m2 / n) * (m2 / n)) / n);
    const double secs = clock.seconds();
    const double z = std::abs(var - pi) / se;
    return {z <= 3.0 && secs < 30.0,
            fmt::format("variance {:.5f}, target pi, {:.2f} standard errors, {:.2f} s", var, z, secs)};
}

Outcome stopped_identity()
{
    SweepSpec s;
    s.cutoffs = {16.0};
    s.path_counts = {1000};
    s.stop_threshold = 0.8;
    const StoppedReport r = verify_stopped_identity(s);
    return {r.paths == 1000 && r.max_discrepancy < 1e-12 && r.triggered > 0,
            fmt::format("{} paths, {} stopped early, max discrepancy {:.3e}", r.paths, r.triggered, r.max_discrepancy)};
}

Outcome cluster_exponents()
{
    const Stopwatch clock;
    SweepSpec s;
    s.cutoffs = {48.0};
    const ClusterReport r = verify_cluster(s);
    std::string detail;
    bool pass = r.pass();
    bool seen_q2 = false;
    const double expected_rho[] = {1.0 / 6.0, 0.25, 0.375};
    for (const ClusterSeries& series : r.series) {
        if (series.q == 2.0) {
            seen_q2 = true;
            detail += fmt::format("q=2 deviation {:.1e}; ", series.unit_deviation);
            pass = pass && series.unit_deviation < 1e-12;
            continue;
        }
        const int idx = series.q == 4.0 ? 0 : series.q == 8.0 ? 1 : 2;
        pass = pass && std::abs(series.rho - expected_rho[idx]) < 1e-15 && series.slope <= series.rho + 0.15;
        detail += fmt::format("q={} slope {:.3f} rho {:.4f}; ", series.q, series.slope, series.rho);
    }
    return {pass && seen_q2 && r.series.size() == 4, detail + fmt::format("{:.1f} s", clock.seconds())};
}

Outcome strichartz_stability()
{
    const Stopwatch clock;
    SweepSpec s;
    s.exponents = {{4.0, 4.0}, {8.0, 8.0}, {kInf, 4.0}};
    s.cutoffs = {32.0, 64.0};
    const StrichartzReport r = verify_homogeneous_strichartz(s);
    double worst_oracle = 0.0;
    for (double e : r.oracle_errors) worst_oracle = std::max(worst_oracle, e);
    std::string factors;
    for (double f : r.refinement_factors) factors += fmt::format("{:.3f} ", f);
    return {r.stable() && r.refinement_factors.size() == 3 && worst_oracle < 1e-8,
            fmt::format("refinement factors {}(bound 1.5), oracle error {:.1e}, {:.1f} s", factors, worst_oracle,
                        clock.seconds())};
}

Outcome exponent_arithmetic()
{
    bool pass = r_low_branch(8.0, 8.0) == r_high_branch(8.0, 8.0);
    pass = pass && r_low_branch(16.0, 8.0) == r_high_branch(16.0, 8.0);
    pass = pass && r_low_branch(kInf, 8.0) == r_high_branch(kInf, 8.0);
    pass = pass && rho_low_branch(8.0) == rho_high_branch(8.0);
    pass = pass && admissible_r(2.0, 2.0) == 0.0 && admissible_r(kInf, kInf) == 1.0;
    pass = pass && validate_pair_condition(4.0, 0.5) && !validate_pair_condition(4.0, 0.75) &&
           !validate_pair_condition(2.0, 0.1) && validate_pair_condition(4.0, 5.0 / 12.0);
    return {pass, fmt::format("r(8,8)={} rho(8)={} r(2,2)={} r(inf,inf)={}", admissible_r(8.0, 8.0),
                              cluster_exponent(8.0), admissible_r(2.0, 2.0), admissible_r(kInf, kInf))};
}

SweepSpec stochastic_sweep(double p)
{
    SweepSpec s;
    s.cutoffs = {16.0, 32.0};
    s.path_counts = {1000, 10000};
    s.horizons = {1.0};
    s.p_moment = p;
    return s;
}

Outcome stochastic_finiteness()
{
    const Stopwatch clock;
    const StochasticReport r = verify_stochastic(stochastic_sweep(2.0));
    std::string detail;
    for (const StochasticRow& row : r.rows)
        detail += fmt::format("L={} N={} K {:.3f} [{:.3f},{:.3f}] C~ {:.3f} [{:.3f},{:.3f}]; ", row.cutoff, row.paths,
                              row.K.ratio, row.K.ci_low, row.K.ci_high, row.C_tilde.ratio, row.C_tilde.ci_low,
                              row.C_tilde.ci_high);
    return {r.rows.size() == 4 && r.finite() && r.intervals_overlap(), detail + fmt::format("{:.1f} s", clock.seconds())};
}

// Exponential problem at Lambda = 16, dt = 1e-3 with T from the contraction
// budget assembled from measured constants.
struct BudgetedProblem {
    SolverConfig config;
    BudgetConstants constants;
    double budget_sum = 0.0;
};

const BudgetedProblem& budgeted_problem()
{
    static const BudgetedProblem problem = [] {
        BudgetedProblem bp;
        const double dt = 1e-3;
        CutoffParams cut;
        cut.n = 1.0;
        cut.M = 0.5;
        cut.M_prime = 0.3;
        const ExponentTriple triple = ExponentTriple::admissible(4.0, 4.0);

        SweepSpec fs;
        fs.cutoffs = {16.0};
        LipschitzBudget lb;
        lb.M = cut.M;
        lb.M_prime = cut.M_prime;
        const FunctionalConstants fc = estimate_functional_constants(fs, lb, ExponentialCritical{}, ExponentialCritical{});

        SweepSpec is;
        is.cutoffs = {16.0};
        is.horizons = {1.0};
        is.samples = 50;
        const StrichartzReport inh = verify_inhomogeneous_strichartz(is);

        SweepSpec ss = stochastic_sweep(triple.p);
        ss.cutoffs = {16.0};
        ss.path_counts = {1000};
        const StochasticReport st = verify_stochastic(ss);

        bp.constants.C_F = fc.lipschitz.C_F;
        bp.constants.C_G = fc.lipschitz.C_G;
        bp.constants.C_T = inh.rows.front().max_ratio;
        bp.constants.K_T = group_bound(*unit_square(Boundary::Dirichlet, 16.0), 1.0);
        bp.constants.K = st.rows.front().K.ci_high;
        bp.constants.C_tilde = st.rows.front().C_tilde.ci_high;

        const double T = contraction_budget(cut, triple, fc.gamma, bp.constants, 1.0, dt);
        bp.budget_sum = budget_L2(T, cut, fc.gamma, triple.p, bp.constants) +
                        budget_L3(T, cut, fc.gamma, triple.p, bp.constants);

        SolverConfig& c = bp.config;
        c.basis = unit_square(Boundary::Dirichlet, 16.0);
        c.horizon = T;
        c.steps = static_cast<std::size_t>(std::llround(T / dt));
        c.triple = triple;
        c.cutoffs = cut;
        c.gamma = fc.gamma;
        c.f_kind = ExponentialCritical{};
        c.g_kind = ExponentialCritical{};
        c.noise_channels = 4;
        c.seed = 77;
        c.u0 = scaled_random(c.basis, 0.2, 0);
        return bp;
    }();
    return problem;
}

Outcome picard_contraction()
{
    const Stopwatch setup;
    const BudgetedProblem& bp = budgeted_problem();
    const double setup_secs = setup.seconds();
    SolverConfig c = bp.config;
    c.paths = 3;
    const MildSolver solver(c);
    bool pass = bp.budget_sum <= 0.5;
    double worst_ratio = 0.0;
    double worst_residual = 0.0;
    double worst_secs = 0.0;
    for (std::size_t w = 0; w < c.paths; ++w) {
        const Stopwatch clock;
        const SolveResult r = solver.solve_truncated(w);
        worst_secs = std::max(worst_secs, clock.seconds());
        pass = pass && r.diagnostics.converged;
        for (double ratio : r.diagnostics.ratios) worst_ratio = std::max(worst_ratio, ratio);
        worst_residual = std::max(worst_residual, r.diagnostics.residual);
    }
    pass = pass && worst_ratio < 0.5 && worst_residual < 10.0 * c.tol_fp && worst_secs < 120.0;
    return {pass, fmt::format("T={} (L2+L3={:.3f}), max ratio {:.3e}, max residual {:.2e}, {:.1f} s per path, "
                              "constants {:.1f} s",
                              c.horizon, bp.budget_sum, worst_ratio, worst_residual, worst_secs, setup_secs)};
}

Outcome nesting()
{
    const Stopwatch clock;
    SolverConfig c = budgeted_problem().config;
    c.paths = 100;
    double worst = 0.0;
    for (std::size_t w = 0; w < c.paths; ++w) worst = std::max(worst, nesting_consistency(c, w, 1.0, 2.0));
    return {worst < 10.0 * c.tol_fp, fmt::format("100 paths, max difference {:.2e}, {:.1f} s", worst, clock.seconds())};
}

Outcome pair_equivalence()
{
    SolverConfig lin;
    lin.basis = unit_square(Boundary::Dirichlet, 8.0);
    lin.horizon = 3.0;
    lin.steps = 3000;
    lin.u0 = scaled_random(lin.basis, 2.0, 0);
    lin.u1 = scaled_random(lin.basis, 1.0, 1);
    const double lin_err = pair_system_crosscheck(lin, 0);

    SolverConfig nl;
    nl.basis = unit_square(Boundary::Dirichlet, 8.0);
    nl.horizon = 0.5;
    nl.steps = 500;
    nl.f_kind = ExponentialCritical{};
    nl.g_kind = ExponentialCritical{};
    nl.noise_channels = 4;
    nl.paths = 5;
    nl.gamma = 0.2;
    nl.u0 = scaled_random(nl.basis, 0.2, 2);
    double nl_err = 0.0;
    for (std::size_t w = 0; w < nl.paths; ++w) nl_err = std::max(nl_err, pair_system_crosscheck(nl, w));
    return {lin_err < 1e-10 && nl_err < 1e-6,
            fmt::format("linear {:.2e}, nonlinear max over 5 paths {:.2e}", lin_err, nl_err)};
}

Outcome nemytskii_bound()
{
    const BasisPtr b = unit_square(Boundary::Dirichlet, 12.0);
    const NoiseBasis noise = build_noise_basis(b, 6);
    const SpectralTransform tr(b, default_grid(*b));
    double worst = -kInf;
    for (std::uint32_t s = 0; s < 500; ++s) {
        const double amp = 0.05 + 0.3 * static_cast<double>(s % 10) / 10.0;
        const PhysicalField u = tr.synthesize(scaled_random(b, amp, s));
        const NemytskiiResult g = nemytskii_G(u, noise, ExponentialCritical{});
        worst = std::max(worst, g.hs_norm_sq - g.g_l2_sq * noise.effective_sum);
    }
    return {worst <= 1e-10, fmt::format("max(HS^2 - bound) = {:.3e} over 500 fields", worst)};
}

json determinism_config(const std::string& subcommand)
{
    json j{{"subcommand", subcommand}, {"seed", 5}};
    if (subcommand == "simulate") {
        j["basis"] = {{"cutoff", 6}};
        j["nonlinearity"] = {{"f", "exponential"}, {"g", "exponential"}};
        j["noise"] = {{"channels", 3}};
        j["solver"] = {{"T", 0.1}, {"steps", 100}, {"paths", 3}, {"gamma", 0.2}};
        j["initial"] = {{"u0", json::array({json::array({1, 1, 0.05}), json::array({2, 1, -0.02})})}};
    } else if (subcommand == "verify-cluster") {
        j["sweep"] = {{"cutoffs", {18.0}}, {"lambda_min", 4}, {"lambda_max", 12}, {"samples", 20}};
    } else if (subcommand == "verify-strichartz") {
        j["sweep"] = {{"cutoffs", {6.0, 10.0}}, {"horizons", {0.5, 1.0}}, {"samples", 12}};
    } else if (subcommand == "verify-stochastic") {
        j["noise"] = {{"channels", 3}};
        j["sweep"] = {{"cutoffs", {6.0, 8.0}}, {"path_counts", {1000, 1200}}, {"steps_per_unit", 40}, {"bootstrap", 50}};
    } else if (subcommand == "verify-stopped") {
        j["noise"] = {{"channels", 2}};
        j["sweep"] = {{"cutoffs", {8.0}}, {"path_counts", {40}}, {"steps_per_unit", 40}, {"stop_threshold", 0.3}};
    }
    return j;
}

Outcome determinism()
{
    const fs::path root = fs::temp_directory_path() / "snwe_acceptance_determinism";
    fs::remove_all(root);
    std::ostringstream log;
    bool pass = true;
    std::size_t compared = 0;
    std::string detail;
    for (const std::string sub : {"simulate", "verify-cluster", "verify-strichartz", "verify-stochastic", "verify-stopped"}) {
        RunConfig base = parse_config(determinism_config(sub));
        base.threads = 1;
        base.output_dir = (root / (sub + "_1")).string();
        const RunOutcome first = run(base, log);
        if (first.exit_code != 0) {
            pass = false;
            detail += sub + " exit " + std::to_string(first.exit_code) + "; ";
            continue;
        }
        for (std::size_t workers : {std::size_t{4}, std::size_t{16}}) {
            RunConfig replay = load_config(fs::path(base.output_dir) / "manifest.json");
            replay.threads = workers;
            replay.output_dir = (root / (sub + "_" + std::to_string(workers))).string();
            const RunOutcome again = run(replay, log);
            bool same = again.exit_code == 0 && again.manifest.config_hash == first.manifest.config_hash &&
                        again.manifest.files.size() == first.manifest.files.size();
            for (std::size_t i = 0; same && i < first.manifest.files.size(); ++i) {
                same = again.manifest.files[i].name == first.manifest.files[i].name &&
                       again.manifest.files[i].sha256 == first.manifest.files[i].sha256;
                ++compared;
            }
            if (!same) detail += fmt::format("{} differs with {} workers; ", sub, workers);
            pass = pass && same;
        }
    }
    fs::remove_all(root);
    return {pass && compared > 0, detail + fmt::format("{} output files compared across 1, 4, 16 workers", compared)};
}

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<Criterion> criteria{
        {1, "linear single-mode exactness", linear_single_mode},
        {2, "Neumann zero-mode kernel", neumann_zero_mode},
        {3, "Ito isometry oracle", ito_isometry},
        {4, "stopped-convolution identity", stopped_identity},
        {5, "cluster-estimate exponents", cluster_exponents},
        {6, "Strichartz ratio stability", strichartz_stability},
        {7, "exponent arithmetic", exponent_arithmetic},
        {8, "stochastic Strichartz finiteness", stochastic_finiteness},
        {9, "Picard contraction and residual", picard_contraction},
        {10, "nesting consistency", nesting},
        {11, "pair-system equivalence", pair_equivalence},
        {12, "Nemytskii HS bound", nemytskii_bound},
        {13, "determinism across workers", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const Criterion& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << c.id << "] " << c.name << ": " << o.detail << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
