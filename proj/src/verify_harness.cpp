#include "snwe/verify_harness.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "snwe/mild_solver.hpp"

namespace snwe {

namespace {

constexpr const char* kModule = "verify_harness";

using nlohmann::json;

BasisPtr sweep_basis(const SweepSpec& sweep, double cutoff)
{
    return build_basis(sweep.lx, sweep.ly, sweep.bc, cutoff);
}

double sample_decay(const SweepSpec& sweep, std::size_t s)
{
    return sweep.decays[s % sweep.decays.size()];
}

// X_T of a node series of E-norms.
double time_lp(const std::vector<double>& e, double dt, double p)
{
    return running_norms(e, e, dt, p).x.back();
}

double max_of(const std::vector<double>& v)
{
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

double mean_of(const std::vector<double>& v)
{
    return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

json grid_json(GridSpec g)
{
    return json::array({g.nx, g.ny});
}

}  // namespace

json exponent_to_json(double value)
{
    if (std::isinf(value)) return "inf";
    return value;
}

double exponent_from_json(const json& j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf" || s == "infinity") return kInf;
        throw DomainError(kModule, "exponent string must be \"inf\", got \"" + s + "\"");
    }
    if (!j.is_number()) throw DomainError(kModule, "exponent must be a number or \"inf\"");
    return j.get<double>();
}

// ---------------------------------------------------------------------------
// SweepSpec

void SweepSpec::validate() const
{
    std::vector<std::string> problems;
    if (!(lx > 0.0 && ly > 0.0)) problems.emplace_back("domain side lengths must be positive");
    if (exponents.empty()) problems.emplace_back("exponent list is empty");
    for (const auto& [p, q] : exponents) {
        try {
            (void)admissible_r(p, q);
        } catch (const DomainError& e) {
            problems.emplace_back(e.what());
        }
    }
    if (cluster_q.empty()) problems.emplace_back("cluster exponent list is empty");
    for (double q : cluster_q)
        if (!(q >= 2.0)) problems.emplace_back("cluster exponent q must be >= 2");
    if (lambda_min < 0 || lambda_max < lambda_min) problems.emplace_back("cluster range [lambda_min, lambda_max] is empty");
    if (cutoffs.empty()) problems.emplace_back("cutoff list is empty");
    for (double c : cutoffs)
        if (!(c > 0.0)) problems.emplace_back("cutoffs must be positive");
    if (!std::is_sorted(cutoffs.begin(), cutoffs.end())) problems.emplace_back("cutoffs must be ascending");
    if (horizons.empty()) problems.emplace_back("horizon list is empty");
    for (double t : horizons)
        if (!(t > 0.0)) problems.emplace_back("horizons must be positive");
    if (!std::is_sorted(horizons.begin(), horizons.end())) problems.emplace_back("horizons must be ascending");
    if (steps_per_unit == 0) problems.emplace_back("steps_per_unit must be positive");
    if (samples == 0) problems.emplace_back("samples must be positive");
    if (decays.empty()) problems.emplace_back("decay list is empty");
    if (path_counts.empty()) problems.emplace_back("path count list is empty");
    for (std::size_t n : path_counts)
        if (n == 0) problems.emplace_back("path counts must be positive");
    if (!std::is_sorted(path_counts.begin(), path_counts.end())) problems.emplace_back("path counts must be ascending");
    if (channels == 0) problems.emplace_back("channels must be positive");
    if (!(p_moment > 1.0)) problems.emplace_back("p_moment must exceed 1");
    if (grid_refine < 1) problems.emplace_back("grid_refine must be >= 1");
    if (threads == 0) problems.emplace_back("threads must be positive");
    if (!problems.empty()) {
        std::string msg = "invalid sweep:";
        for (const auto& p : problems) msg += " [" + p + "]";
        throw DomainError(kModule, msg);
    }
}

json SweepSpec::to_json() const
{
    json ex = json::array();
    for (const auto& [p, q] : exponents) ex.push_back(json::array({exponent_to_json(p), exponent_to_json(q)}));
    json cq = json::array();
    for (double q : cluster_q) cq.push_back(exponent_to_json(q));
    return json{{"lx", lx},
                {"ly", ly},
                {"bc", to_string(bc)},
                {"exponents", ex},
                {"cluster_q", cq},
                {"lambda_min", lambda_min},
                {"lambda_max", lambda_max},
                {"cutoffs", cutoffs},
                {"horizons", horizons},
                {"steps_per_unit", steps_per_unit},
                {"samples", samples},
                {"decays", decays},
                {"path_counts", path_counts},
                {"channels", channels},
                {"noise_decay", noise_decay},
                {"p_moment", p_moment},
                {"stop_threshold", stop_threshold},
                {"grid_refine", grid_refine},
                {"seed", seed},
                {"threads", threads},
                {"bootstrap", bootstrap},
                {"forcing_scale", forcing_scale}};
}

SweepSpec SweepSpec::from_json(const json& j)
{
    if (!j.is_object()) throw DomainError(kModule, "sweep must be a JSON object");
    static const std::set<std::string> known{
        "lx",       "ly",        "bc",          "exponents", "cluster_q",      "lambda_min",
        "lambda_max", "cutoffs", "horizons",    "steps_per_unit", "samples",   "decays",
        "path_counts", "channels", "noise_decay", "p_moment",  "stop_threshold", "grid_refine",
        "seed",     "threads",   "bootstrap",   "forcing_scale"};
    for (const auto& [key, value] : j.items())
        if (!known.contains(key)) throw DomainError(kModule, "unknown sweep key \"" + key + "\"");

    SweepSpec s;
    try {
        s.lx = j.value("lx", s.lx);
        s.ly = j.value("ly", s.ly);
        if (j.contains("bc")) s.bc = boundary_from_string(j.at("bc").get<std::string>());
        if (j.contains("exponents")) {
            s.exponents.clear();
            for (const auto& e : j.at("exponents")) {
                if (!e.is_array() || e.size() != 2) throw DomainError(kModule, "exponents entries must be [p, q]");
                s.exponents.emplace_back(exponent_from_json(e[0]), exponent_from_json(e[1]));
            }
        }
        if (j.contains("cluster_q")) {
            s.cluster_q.clear();
            for (const auto& q : j.at("cluster_q")) s.cluster_q.push_back(exponent_from_json(q));
        }
        s.lambda_min = j.value("lambda_min", s.lambda_min);
        s.lambda_max = j.value("lambda_max", s.lambda_max);
        s.cutoffs = j.value("cutoffs", s.cutoffs);
        s.horizons = j.value("horizons", s.horizons);
        s.steps_per_unit = j.value("steps_per_unit", s.steps_per_unit);
        s.samples = j.value("samples", s.samples);
        s.decays = j.value("decays", s.decays);
        s.path_counts = j.value("path_counts", s.path_counts);
        s.channels = j.value("channels", s.channels);
        s.noise_decay = j.value("noise_decay", s.noise_decay);
        s.p_moment = j.value("p_moment", s.p_moment);
        s.stop_threshold = j.value("stop_threshold", s.stop_threshold);
        s.grid_refine = j.value("grid_refine", s.grid_refine);
        s.seed = j.value("seed", s.seed);
        s.threads = j.value("threads", s.threads);
        s.bootstrap = j.value("bootstrap", s.bootstrap);
        s.forcing_scale = j.value("forcing_scale", s.forcing_scale);
    } catch (const json::exception& e) {
        throw DomainError(kModule, std::string("malformed sweep: ") + e.what());
    }
    return s;
}

GridSpec refined_grid(const SpectralBasis& basis, int factor)
{
    if (factor < 1) throw DomainError(kModule, "refinement factor must be >= 1");
    const GridSpec g = default_grid(basis);
    return {g.nx * factor, g.ny * factor};
}

// ---------------------------------------------------------------------------
// Cluster growth

bool ClusterReport::pass() const
{
    return !series.empty() && std::all_of(series.begin(), series.end(), [](const ClusterSeries& s) { return s.pass; });
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) throw DomainError(kModule, "slope needs at least two matching points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0 && y[i] > 0.0)) throw DomainError(kModule, "log-log slope needs positive data");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= static_cast<double>(x.size());
    my /= static_cast<double>(x.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw DomainError(kModule, "log-log slope needs distinct abscissae");
    return sxy / sxx;
}

ClusterReport verify_cluster(const SweepSpec& sweep)
{
    sweep.validate();
    const double cutoff = sweep.cutoffs.front();
    if (cutoff < sweep.lambda_max + 1)
        throw DomainError(kModule, "basis cutoff must cover the last cluster [lambda_max, lambda_max + 1)");
    const BasisPtr basis = sweep_basis(sweep, cutoff);
    ClusterReport report;
    report.cutoff = cutoff;
    report.grid = refined_grid(*basis, sweep.grid_refine);
    const SpectralTransform transform(basis, report.grid);

    const auto freqs = basis->frequencies();
    const auto modes = basis->modes();
    std::vector<int> lambdas;
    std::vector<std::vector<std::size_t>> members;
    for (int lam = sweep.lambda_min; lam <= sweep.lambda_max; ++lam) {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < basis->size(); ++j)
            if (static_cast<int>(std::floor(freqs[j])) == lam) idx.push_back(j);
        if (idx.empty()) throw DomainError(kModule, "empty spectral cluster at lambda = " + std::to_string(lam));
        lambdas.push_back(lam);
        members.push_back(std::move(idx));
    }

    const std::size_t nq = sweep.cluster_q.size();
    const std::size_t nl = lambdas.size();
    const std::size_t ns = sweep.samples;
    std::vector<double> ratios(nl * ns * nq, 0.0);
    parallel_for(nl * ns, sweep.threads, [&](std::size_t task) {
        const std::size_t li = task / ns;
        const std::size_t s = task % ns;
        Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis->size()));
        for (std::size_t j : members[li])
            c[static_cast<Eigen::Index>(j)] =
                counter_normal(sweep.seed, static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(modes[j].jx),
                               static_cast<std::uint32_t>(modes[j].jy), StreamTag::SampleField);
        const double l2 = c.norm();
        const PhysicalField f = transform.synthesize(c);
        for (std::size_t qi = 0; qi < nq; ++qi) ratios[task * nq + qi] = lq_norm(f, sweep.cluster_q[qi]) / l2;
    });

    std::vector<double> xs(lambdas.begin(), lambdas.end());
    for (std::size_t qi = 0; qi < nq; ++qi) {
        const double q = sweep.cluster_q[qi];
        ClusterSeries series;
        series.q = q;
        series.rho = cluster_exponent(q);
        std::vector<double> ys;
        for (std::size_t li = 0; li < nl; ++li) {
            double best = 0.0;
            for (std::size_t s = 0; s < ns; ++s) {
                const double r = ratios[(li * ns + s) * nq + qi];
                best = std::max(best, r);
                if (q == 2.0) series.unit_deviation = std::max(series.unit_deviation, std::abs(r - 1.0));
            }
            report.rows.push_back({q, lambdas[li], members[li].size(), best});
            ys.push_back(best);
        }
        series.slope = nl >= 2 ? loglog_slope(xs, ys) : 0.0;
        series.pass = series.slope <= series.rho + series.tolerance && (q != 2.0 || series.unit_deviation < 1e-12);
        report.series.push_back(series);
    }
    return report;
}

void write_cluster_csv(std::ostream& out, const ClusterReport& report)
{
    out << "q,lambda,modes,max_ratio,rho,slope\n";
    for (const auto& row : report.rows) {
        const auto it = std::find_if(report.series.begin(), report.series.end(),
                                     [&](const ClusterSeries& s) { return s.q == row.q; });
        out << format_double(row.q) << ',' << row.lambda << ',' << row.modes << ',' << format_double(row.max_ratio)
            << ',' << format_double(it->rho) << ',' << format_double(it->slope) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Deterministic Strichartz

bool StrichartzReport::stable() const
{
    return !refinement_factors.empty() &&
           std::all_of(refinement_factors.begin(), refinement_factors.end(),
                       [&](double f) { return std::isfinite(f) && f <= stability_bound; });
}

double homogeneous_lp_norm(const SpectralField& u0, const SpectralField& u1, const NormEvaluator& norms,
                           double horizon, std::size_t steps)
{
    require_same_basis(u0.basis(), u1.basis(), kModule);
    if (steps == 0) throw DomainError(kModule, "time grid needs at least one step");
    const auto freqs = u0.basis().frequencies();
    const double dt = horizon / static_cast<double>(steps);
    std::vector<double> e(steps + 1);
    Eigen::VectorXd c(u0.coeffs().size());
    for (std::size_t k = 0; k <= steps; ++k) {
        const double t = static_cast<double>(k) * dt;
        for (Eigen::Index j = 0; j < c.size(); ++j) {
            const double lam = freqs[static_cast<std::size_t>(j)];
            c[j] = std::cos(lam * t) * u0.coeffs()[j] + sinc_multiplier(lam, t) * u1.coeffs()[j];
        }
        e[k] = norms.e(c);
    }
    return time_lp(e, dt, norms.triple().p);
}

double single_mode_strichartz_ratio(int jx, int jy, const ExponentTriple& triple, double periods)
{
    if (jx < 1 || jy < 1) throw DomainError(kModule, "Dirichlet mode indices start at 1");
    if (!(periods > 0.0)) throw DomainError(kModule, "period count must be positive");
    const double lam2 = static_cast<double>(jx * jx + jy * jy);
    const double lam = std::sqrt(lam2);
    // ||e||_{L^q([0,pi]^2)} with e = (2/pi) sin(jx x) sin(jy y).
    const double q = triple.q;
    double space = 2.0 / std::numbers::pi;
    if (!std::isinf(q)) {
        const double one_d = std::sqrt(std::numbers::pi) * std::tgamma(0.5 * (q + 1.0)) / std::tgamma(0.5 * q + 1.0);
        space *= std::pow(one_d, 2.0 / q);
    }
    const double e_norm = std::pow(1.0 + lam2, 0.5 * (1.0 - triple.r)) * space;
    // (int_0^T |cos(lam t)|^p dt)^{1/p} over whole periods.
    double time = 1.0;
    if (!std::isinf(triple.p)) {
        const double p = triple.p;
        const double T = periods * 2.0 * std::numbers::pi / lam;
        const double mean = std::tgamma(0.5 * (p + 1.0)) / (std::sqrt(std::numbers::pi) * std::tgamma(0.5 * p + 1.0));
        time = std::pow(T * mean, 1.0 / p);
    }
    return e_norm * time / std::sqrt(1.0 + lam2);
}

std::size_t strichartz_rate(const SweepSpec& sweep, double cutoff)
{
    return std::max<std::size_t>(sweep.steps_per_unit, static_cast<std::size_t>(std::ceil(2.0 * cutoff)));
}

namespace {

// Numerical counterpart of single_mode_strichartz_ratio for mode (1,1).
double single_mode_oracle_error(const ExponentTriple& triple)
{
    const BasisPtr basis = build_basis(std::numbers::pi, std::numbers::pi, Boundary::Dirichlet, 3.0);
    const NormEvaluator norms(basis, default_grid(*basis), triple);
    const SpectralField e = SpectralField::single_mode(basis, {1, 1});
    const double T = 2.0 * std::numbers::pi / std::sqrt(2.0);
    const double numeric = homogeneous_lp_norm(e, SpectralField(basis), norms, T, 400) / ha_norm(e);
    return std::abs(numeric - single_mode_strichartz_ratio(1, 1, triple, 1.0));
}

// u(T) for a constant unit forcing on e_(1,1) against (1 - cos(lam T)) / lam^2.
double duhamel_oracle_error()
{
    const BasisPtr basis = build_basis(std::numbers::pi, std::numbers::pi, Boundary::Dirichlet, 3.0);
    const std::size_t steps = 1000;
    const double T = 1.0;
    const double dt = T / static_cast<double>(steps);
    const WaveKernel kernel(basis, dt, steps + 1);
    const auto j = static_cast<Eigen::Index>(*basis->index_of({1, 1}));
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basis->size()), static_cast<Eigen::Index>(steps + 1));
    for (std::size_t k = 0; k <= steps; ++k) g(j, static_cast<Eigen::Index>(k)) = (k == 0 ? 0.5 : 1.0) * dt;
    Eigen::MatrixXd U;
    kernel.accumulate(g, U, nullptr);
    const double lam2 = 2.0;
    const double exact = (1.0 - std::cos(std::sqrt(lam2) * T)) / lam2;
    return std::abs(U(j, static_cast<Eigen::Index>(steps)) - exact);
}

std::vector<ExponentTriple> sweep_triples(const SweepSpec& sweep)
{
    std::vector<ExponentTriple> out;
    for (const auto& [p, q] : sweep.exponents) out.push_back(ExponentTriple::admissible(p, q));
    return out;
}

void fill_refinement(StrichartzReport& report, const SweepSpec& sweep, std::size_t ntriples)
{
    const std::size_t nh = sweep.horizons.size();
    const std::size_t nc = sweep.cutoffs.size();
    // rows are ordered triple-major, then cutoff, then horizon
    for (std::size_t ti = 0; ti < ntriples; ++ti) {
        double factor = 0.0;
        for (std::size_t hi = 0; hi < nh; ++hi) {
            const auto& coarse = report.rows[(ti * nc + 0) * nh + hi];
            const auto& fine = report.rows[(ti * nc + nc - 1) * nh + hi];
            factor = std::max(factor, coarse.max_ratio > 0.0 ? fine.max_ratio / coarse.max_ratio : 0.0);
        }
        report.refinement_factors.push_back(factor);
    }
}

}  // namespace

StrichartzReport verify_homogeneous_strichartz(const SweepSpec& sweep)
{
    sweep.validate();
    const auto triples = sweep_triples(sweep);
    StrichartzReport report;
    report.inhomogeneous = false;
    for (const auto& triple : triples) {
        for (double cutoff : sweep.cutoffs) {
            const BasisPtr basis = sweep_basis(sweep, cutoff);
            const NormEvaluator norms(basis, default_grid(*basis), triple);
            const std::size_t rate = strichartz_rate(sweep, cutoff);
            std::vector<SpectralField> u0, u1;
            for (std::size_t s = 0; s < sweep.samples; ++s) {
                u0.push_back(random_field(basis, sweep.seed, static_cast<std::uint32_t>(2 * s), sample_decay(sweep, s)));
                u1.push_back(random_field(basis, sweep.seed, static_cast<std::uint32_t>(2 * s + 1), sample_decay(sweep, s)));
            }
            for (double T : sweep.horizons) {
                const auto steps = static_cast<std::size_t>(std::ceil(T * static_cast<double>(rate) - 1e-9));
                std::vector<double> ratios(sweep.samples, 0.0);
                parallel_for(sweep.samples, sweep.threads, [&](std::size_t s) {
                    const double data = ha_norm(u0[s]) + l2_norm(u1[s]);
                    ratios[s] = data > 0.0 ? homogeneous_lp_norm(u0[s], u1[s], norms, T, steps) / data : 0.0;
                });
                report.rows.push_back({triple, cutoff, T, sweep.samples, max_of(ratios), mean_of(ratios)});
            }
        }
        report.oracle_errors.push_back(single_mode_oracle_error(triple));
    }
    fill_refinement(report, sweep, triples.size());
    return report;
}

StrichartzReport verify_inhomogeneous_strichartz(const SweepSpec& sweep)
{
    sweep.validate();
    const auto triples = sweep_triples(sweep);
    const std::size_t nh = sweep.horizons.size();
    const double t_max = sweep.horizons.back();
    StrichartzReport report;
    report.inhomogeneous = true;
    for (const auto& triple : triples) {
        for (double cutoff : sweep.cutoffs) {
            const BasisPtr basis = sweep_basis(sweep, cutoff);
            const NormEvaluator norms(basis, default_grid(*basis), triple);
            const std::size_t rate = strichartz_rate(sweep, cutoff);
            const double dt = 1.0 / static_cast<double>(rate);
            const auto steps = static_cast<std::size_t>(std::ceil(t_max * static_cast<double>(rate) - 1e-9));
            const std::size_t nodes = steps + 1;
            const WaveKernel kernel(basis, dt, nodes);
            std::vector<std::size_t> last_node(nh);
            for (std::size_t hi = 0; hi < nh; ++hi)
                last_node[hi] = std::min(steps, static_cast<std::size_t>(std::floor(sweep.horizons[hi] * rate + 1e-9)));

            // ratios[s * nh + hi]; negative marks samples outside the family at hi
            std::vector<double> ratios(sweep.samples * nh, -1.0);
            parallel_for(sweep.samples, sweep.threads, [&](std::size_t s) {
                const double decay = sample_decay(sweep, s);
                const SpectralField u0 = random_field(basis, sweep.seed, static_cast<std::uint32_t>(2 * s), decay);
                const SpectralField u1 = random_field(basis, sweep.seed, static_cast<std::uint32_t>(2 * s + 1), decay);
                const SpectralField f =
                    random_field(basis, sweep.seed, static_cast<std::uint32_t>(0x40000000u + s), decay);
                const double support = sweep.horizons[s % nh];
                const double omega =
                    5.0 * counter_uniform(sweep.seed, static_cast<std::uint32_t>(s), 0xffffffffu, 1u, StreamTag::SampleField);
                std::vector<double> amp(nodes, 0.0);
                for (std::size_t k = 0; k < nodes; ++k) {
                    const double t = static_cast<double>(k) * dt;
                    if (t < support)
                        amp[k] = sweep.forcing_scale * std::sin(std::numbers::pi * t / support) * std::cos(omega * t);
                }
                Eigen::MatrixXd g(static_cast<Eigen::Index>(basis->size()), static_cast<Eigen::Index>(nodes));
                std::vector<double> l1_terms(nodes);
                const double f_l2 = l2_norm(f);
                for (std::size_t k = 0; k < nodes; ++k) {
                    const double w = (k == 0 || k + 1 == nodes) ? 0.5 : 1.0;
                    g.col(static_cast<Eigen::Index>(k)) = (k == 0 ? 0.5 : 1.0) * dt * amp[k] * f.coeffs();
                    l1_terms[k] = w * dt * std::abs(amp[k]) * f_l2;
                }
                Eigen::MatrixXd U, V, U0, V0;
                kernel.accumulate(g, U, nullptr);
                kernel.linear_flow(u0.coeffs(), u1.coeffs(), U0, V0);
                U += U0;
                std::vector<double> e(nodes);
                for (std::size_t k = 0; k < nodes; ++k) e[k] = norms.e(U.col(static_cast<Eigen::Index>(k)));
                const RunningNorms rn = running_norms(e, e, dt, triple.p);
                const double denom = ha_norm(u0) + l2_norm(u1) + pairwise_sum(l1_terms);
                for (std::size_t hi = 0; hi < nh; ++hi) {
                    if (support > sweep.horizons[hi]) continue;
                    ratios[s * nh + hi] = denom > 0.0 ? rn.x[last_node[hi]] / denom : 0.0;
                }
            });
            for (std::size_t hi = 0; hi < nh; ++hi) {
                std::vector<double> family;
                for (std::size_t s = 0; s < sweep.samples; ++s)
                    if (ratios[s * nh + hi] >= 0.0) family.push_back(ratios[s * nh + hi]);
                report.rows.push_back(
                    {triple, cutoff, sweep.horizons[hi], family.size(), max_of(family), mean_of(family)});
            }
        }
    }
    report.oracle_errors.push_back(duhamel_oracle_error());
    fill_refinement(report, sweep, triples.size());
    return report;
}

void write_strichartz_csv(std::ostream& out, const StrichartzReport& report)
{
    out << "kind,p,q,r,Lambda,T,samples,max_ratio,mean_ratio\n";
    const char* kind = report.inhomogeneous ? "inhomogeneous" : "homogeneous";
    for (const auto& row : report.rows) {
        out << kind << ',' << format_double(row.triple.p) << ',' << format_double(row.triple.q) << ','
            << format_double(row.triple.r) << ',' << format_double(row.cutoff) << ',' << format_double(row.horizon)
            << ',' << row.samples << ',' << format_double(row.max_ratio) << ',' << format_double(row.mean_ratio)
            << '\n';
    }
}

// ---------------------------------------------------------------------------
// Stochastic constants

bool StochasticReport::finite() const
{
    auto ok = [](const MomentStatistics& m) {
        return std::isfinite(m.ratio) && std::isfinite(m.ci_low) && std::isfinite(m.ci_high);
    };
    return !rows.empty() && std::all_of(rows.begin(), rows.end(),
                                        [&](const StochasticRow& r) { return ok(r.K) && ok(r.C_tilde) && ok(r.B); });
}

bool StochasticReport::intervals_overlap() const
{
    auto overlap = [](const MomentStatistics& a, const MomentStatistics& b) {
        return a.ci_low <= b.ci_high && b.ci_low <= a.ci_high;
    };
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            if (rows[i].cutoff != rows[j].cutoff && rows[i].paths != rows[j].paths) continue;
            if (!overlap(rows[i].K, rows[j].K) || !overlap(rows[i].C_tilde, rows[j].C_tilde)) return false;
        }
    }
    return true;
}

DiffusionProcess identity_diffusion(const NoiseBasis& noise, std::size_t steps, double dt)
{
    std::vector<SpectralField> fields;
    for (std::size_t j = 0; j < noise.channels(); ++j) fields.push_back(noise.channel(j));
    return DiffusionProcess::constant(noise, fields, steps, dt);
}

MomentStatistics martingale_burkholder_ratio(const DiffusionProcess& xi, const WienerEnsemble& ensemble, double p,
                                             const MomentOptions& options)
{
    if (!(p > 1.0)) throw DomainError(kModule, "moment exponent must exceed 1");
    if (xi.channels() != ensemble.channels() || xi.nodes() != ensemble.steps() + 1)
        throw DomainError(kModule, "diffusion and ensemble grids differ");
    const std::size_t count = options.path_count == 0 ? ensemble.paths() - options.first_path : options.path_count;
    if (options.first_path + count > ensemble.paths()) throw DomainError(kModule, "path range exceeds the ensemble");

    double quad = 0.0;
    for (std::size_t k = 0; k + 1 < xi.nodes(); ++k) quad += xi.hs_norm_sq(k) * xi.dt;
    const double rhs_value = std::isinf(p) ? std::sqrt(quad) : std::pow(quad, 0.5 * p);

    std::vector<double> lhs(count);
    std::vector<double> rhs(count, rhs_value);
    parallel_for(count, options.threads, [&](std::size_t i) {
        const Eigen::MatrixXd b = ito_increments(xi, ensemble, options.first_path + i, xi.nodes());
        Eigen::VectorXd m = Eigen::VectorXd::Zero(b.rows());
        double sup = 0.0;
        for (Eigen::Index k = 0; k < b.cols(); ++k) {
            sup = std::max(sup, m.norm());
            m += b.col(k);
        }
        lhs[i] = std::isinf(p) ? sup : std::pow(sup, p);
    });
    MomentStatistics st = ratio_statistics(lhs, rhs, p, options);
    st.horizon = xi.dt * static_cast<double>(xi.nodes() - 1);
    return st;
}

StochasticReport verify_stochastic(const SweepSpec& sweep)
{
    sweep.validate();
    if (sweep.path_counts.front() < 1000)
        throw DomainError(kModule, "stochastic sweeps need at least 1000 paths");
    const double T = sweep.horizons.front();
    const auto steps = static_cast<std::size_t>(std::ceil(T * static_cast<double>(sweep.steps_per_unit) - 1e-9));
    const double dt = T / static_cast<double>(steps);
    const ExponentTriple triple =
        ExponentTriple::admissible(sweep.p_moment, std::min(sweep.p_moment, sweep.exponents.front().second));

    StochasticReport report;
    report.channels = sweep.channels;
    const WienerEnsemble ensemble(sweep.seed, sweep.path_counts.back(), steps, sweep.channels, dt);
    for (double cutoff : sweep.cutoffs) {
        const BasisPtr basis = sweep_basis(sweep, cutoff);
        if (basis->size() < sweep.channels) throw DomainError(kModule, "basis smaller than the channel count");
        const NoiseBasis noise = build_noise_basis(basis, sweep.channels, ModeSelection::Lowest, sweep.noise_decay);
        const DiffusionProcess xi = identity_diffusion(noise, steps, dt);
        for (std::size_t paths : sweep.path_counts) {
            MomentOptions opts;
            opts.threads = sweep.threads;
            opts.bootstrap = sweep.bootstrap;
            opts.bootstrap_seed = sweep.seed;
            opts.path_count = paths;
            StochasticRow row;
            row.cutoff = cutoff;
            row.paths = paths;
            row.K = burkholder_ratio(xi, ensemble, sweep.p_moment, opts);
            row.C_tilde = strichartz_lp_moment(xi, ensemble, triple, default_grid(*basis), opts);
            row.B = martingale_burkholder_ratio(xi, ensemble, sweep.p_moment, opts);
            report.rows.push_back(row);
        }
    }
    return report;
}

void write_stochastic_csv(std::ostream& out, const StochasticReport& report)
{
    out << "Lambda,paths,J,symbol,p,T,value,ci_low,ci_high,flagged\n";
    auto line = [&](const StochasticRow& row, const char* symbol, const MomentStatistics& m) {
        out << format_double(row.cutoff) << ',' << row.paths << ',' << report.channels << ',' << symbol << ','
            << format_double(m.p) << ',' << format_double(m.horizon) << ',' << format_double(m.ratio) << ','
            << format_double(m.ci_low) << ',' << format_double(m.ci_high) << ',' << (m.flagged ? 1 : 0) << '\n';
    };
    for (const auto& row : report.rows) {
        line(row, "K", row.K);
        line(row, "C_tilde", row.C_tilde);
        line(row, "B_p", row.B);
    }
}

// ---------------------------------------------------------------------------
// Stopped identity

StoppedReport verify_stopped_identity(const SweepSpec& sweep)
{
    sweep.validate();
    const double T = sweep.horizons.front();
    const auto steps = static_cast<std::size_t>(std::ceil(T * static_cast<double>(sweep.steps_per_unit) - 1e-9));
    const double dt = T / static_cast<double>(steps);
    const BasisPtr basis = sweep_basis(sweep, sweep.cutoffs.front());
    const NoiseBasis noise = build_noise_basis(basis, sweep.channels, ModeSelection::Lowest, sweep.noise_decay);
    const DiffusionProcess xi = identity_diffusion(noise, steps, dt);
    const std::size_t paths = sweep.path_counts.back();
    const WienerEnsemble ensemble(sweep.seed, paths, steps, sweep.channels, dt);

    std::vector<double> disc(paths, 0.0);
    std::vector<std::uint8_t> hit(paths, 0);
    parallel_for(paths, sweep.threads, [&](std::size_t path) {
        const ConvolutionResult full = convolve(xi, ensemble, path);
        const StoppingIndex tau = StoppingIndex::first_hitting(full.trajectory, sweep.stop_threshold);
        hit[path] = tau.value() + 1 < xi.nodes() ? 1 : 0;
        double d = stopped_identity_discrepancy(xi, ensemble, path, tau);
        if (path == 0) {
            d = std::max(d, stopped_identity_discrepancy(xi, ensemble, path, StoppingIndex::constant(0)));
            d = std::max(d, stopped_identity_discrepancy(xi, ensemble, path, StoppingIndex::constant(steps)));
        }
        disc[path] = d;
    });
    StoppedReport report;
    report.paths = paths;
    report.max_discrepancy = max_of(disc);
    for (auto h : hit) report.triggered += h;
    return report;
}

// ---------------------------------------------------------------------------
// Functional constants

FunctionalConstants estimate_functional_constants(const SweepSpec& sweep, const LipschitzBudget& budget,
                                                  const NonlinearityKind& f_kind, const NonlinearityKind& g_kind)
{
    sweep.validate();
    const BasisPtr basis = sweep_basis(sweep, sweep.cutoffs.front());
    const GridSpec grid = default_grid(*basis);
    const auto [p, q] = sweep.exponents.front();
    const ExponentTriple triple = ExponentTriple::admissible(p, q);
    if (!validate_pair_condition(triple.q, triple.r))
        throw DomainError(kModule, "the first exponent pair violates the (q, r) pair condition");

    FunctionalConstants out;
    out.log_constant = estimate_log_constant(basis, triple.q, triple.r, grid, sweep.samples, sweep.seed);
    out.gamma = default_gamma(out.log_constant, budget.M);

    const SpectralTransform transform(basis, grid);
    const double alpha = 4.0 * std::numbers::pi;
    std::vector<double> mt(sweep.samples, 0.0);
    parallel_for(sweep.samples, sweep.threads, [&](std::size_t s) {
        SpectralField u = random_field(basis, sweep.seed, static_cast<std::uint32_t>(s), sample_decay(sweep, s));
        const double h = ha_norm(u);
        if (h > 0.0) u *= 1.0 / h;
        mt[s] = moser_trudinger_functional(transform.synthesize(u), alpha);
    });
    out.moser_trudinger = max_of(mt);

    LipschitzBudget b = budget;
    b.gamma = out.gamma;
    b.validate(triple.p);
    const NoiseBasis noise = build_noise_basis(basis, sweep.channels, ModeSelection::Lowest, sweep.noise_decay);
    out.lipschitz = estimate_lipschitz_constants(basis, b, f_kind, g_kind, noise, triple, grid, sweep.samples, sweep.seed);
    return out;
}

// ---------------------------------------------------------------------------
// Ledger

json ConstantsLedger::to_json() const
{
    json arr = json::array();
    for (const auto& e : entries) {
        arr.push_back(json{{"symbol", e.symbol},
                           {"value", e.value},
                           {"ci_low", e.ci_low},
                           {"ci_high", e.ci_high},
                           {"samples", e.samples},
                           {"cutoff", e.cutoff},
                           {"grid", grid_json(e.grid)},
                           {"dt", e.dt},
                           {"paths", e.paths},
                           {"seed", e.seed},
                           {"source", e.source},
                           {"parameters", e.parameters}});
    }
    return json{{"entries", arr}};
}

ConstantsLedger ConstantsLedger::from_json(const json& j)
{
    ConstantsLedger ledger;
    try {
        for (const auto& e : j.at("entries")) {
            LedgerEntry x;
            x.symbol = e.at("symbol").get<std::string>();
            x.value = e.at("value").get<double>();
            x.ci_low = e.at("ci_low").get<double>();
            x.ci_high = e.at("ci_high").get<double>();
            x.samples = e.at("samples").get<std::size_t>();
            x.cutoff = e.at("cutoff").get<double>();
            x.grid = {e.at("grid").at(0).get<int>(), e.at("grid").at(1).get<int>()};
            x.dt = e.at("dt").get<double>();
            x.paths = e.at("paths").get<std::size_t>();
            x.seed = e.at("seed").get<std::uint64_t>();
            x.source = e.at("source").get<std::string>();
            x.parameters = e.at("parameters");
            ledger.entries.push_back(std::move(x));
        }
    } catch (const json::exception& e) {
        throw DomainError(kModule, std::string("malformed ledger: ") + e.what());
    }
    return ledger;
}

namespace {

// A best-of-N maximum has no sampling interval; it is recorded as the
// degenerate interval [value, value].
LedgerEntry point_entry(const std::string& symbol, double value, const SweepSpec& sweep, std::size_t samples,
                        double cutoff, GridSpec grid, double dt, const std::string& source, json params)
{
    LedgerEntry e;
    e.symbol = symbol;
    e.value = value;
    e.ci_low = value;
    e.ci_high = value;
    e.samples = samples;
    e.cutoff = cutoff;
    e.grid = grid;
    e.dt = dt;
    e.paths = 0;
    e.seed = sweep.seed;
    e.source = source;
    e.parameters = std::move(params);
    return e;
}

LedgerEntry moment_entry(const std::string& symbol, const MomentStatistics& m, const SweepSpec& sweep, double cutoff,
                         GridSpec grid, double dt, std::size_t channels)
{
    LedgerEntry e;
    e.symbol = symbol;
    e.value = m.ratio;
    e.ci_low = m.ci_low;
    e.ci_high = m.ci_high;
    e.samples = m.paths;
    e.cutoff = cutoff;
    e.grid = grid;
    e.dt = dt;
    e.paths = m.paths;
    e.seed = sweep.seed;
    e.source = "verify_stochastic";
    e.parameters = json{{"p", exponent_to_json(m.p)}, {"T", m.horizon}, {"J", channels}, {"flagged", m.flagged}};
    return e;
}

}  // namespace

std::vector<LedgerEntry> ledger_entries(const ClusterReport& report, const SweepSpec& sweep)
{
    std::vector<LedgerEntry> out;
    for (const auto& series : report.series) {
        double c = 0.0;
        for (const auto& row : report.rows)
            if (row.q == series.q) c = std::max(c, row.max_ratio / std::pow(static_cast<double>(row.lambda), series.rho));
        out.push_back(point_entry("C_cluster", c, sweep, sweep.samples, report.cutoff, report.grid, 0.0,
                                  "verify_cluster",
                                  json{{"q", exponent_to_json(series.q)},
                                       {"rho", series.rho},
                                       {"slope", series.slope},
                                       {"lambda_min", sweep.lambda_min},
                                       {"lambda_max", sweep.lambda_max}}));
    }
    return out;
}

std::vector<LedgerEntry> ledger_entries(const StrichartzReport& report, const SweepSpec& sweep)
{
    std::vector<LedgerEntry> out;
    const char* kind = report.inhomogeneous ? "inhomogeneous" : "homogeneous";
    const std::string source = report.inhomogeneous ? "verify_inhomogeneous_strichartz" : "verify_homogeneous_strichartz";
    std::set<std::pair<double, double>> group_done;
    for (const auto& row : report.rows) {
        const BasisPtr basis = sweep_basis(sweep, row.cutoff);
        const double dt = 1.0 / static_cast<double>(strichartz_rate(sweep, row.cutoff));
        out.push_back(point_entry("C_T", row.max_ratio, sweep, row.samples, row.cutoff, default_grid(*basis), dt, source,
                                  json{{"p", exponent_to_json(row.triple.p)},
                                       {"q", exponent_to_json(row.triple.q)},
                                       {"r", row.triple.r},
                                       {"T", row.horizon},
                                       {"kind", kind}}));
        if (group_done.insert({row.cutoff, row.horizon}).second) {
            out.push_back(point_entry("K_T", group_bound(*basis, row.horizon), sweep, basis->size(), row.cutoff,
                                      default_grid(*basis), 0.0, source, json{{"T", row.horizon}}));
        }
    }
    return out;
}

std::vector<LedgerEntry> ledger_entries(const StochasticReport& report, const SweepSpec& sweep)
{
    std::vector<LedgerEntry> out;
    for (const auto& row : report.rows) {
        const BasisPtr basis = sweep_basis(sweep, row.cutoff);
        const GridSpec grid = default_grid(*basis);
        const double dt = row.K.horizon / std::ceil(row.K.horizon * static_cast<double>(sweep.steps_per_unit) - 1e-9);
        out.push_back(moment_entry("K", row.K, sweep, row.cutoff, grid, dt, report.channels));
        out.push_back(moment_entry("C_tilde", row.C_tilde, sweep, row.cutoff, grid, dt, report.channels));
        out.push_back(moment_entry("B_p", row.B, sweep, row.cutoff, grid, dt, report.channels));
    }
    return out;
}

std::vector<LedgerEntry> ledger_entries(const FunctionalConstants& constants, const SweepSpec& sweep)
{
    const double cutoff = sweep.cutoffs.front();
    const GridSpec grid = default_grid(*sweep_basis(sweep, cutoff));
    const auto [p, q] = sweep.exponents.front();
    const json pq{{"p", exponent_to_json(p)}, {"q", exponent_to_json(q)}};
    json lip = pq;
    lip["M"] = constants.lipschitz.M;
    lip["gamma"] = constants.lipschitz.gamma;
    std::vector<LedgerEntry> out;
    out.push_back(point_entry("C_log", constants.log_constant, sweep, sweep.samples, cutoff, grid, 0.0,
                              "estimate_functional_constants", pq));
    out.push_back(point_entry("C_MT", constants.moser_trudinger, sweep, sweep.samples, cutoff, grid, 0.0,
                              "estimate_functional_constants", json{{"alpha", 4.0 * std::numbers::pi}}));
    out.push_back(point_entry("C_F", constants.lipschitz.C_F, sweep, constants.lipschitz.samples, cutoff, grid, 0.0,
                              "estimate_functional_constants", lip));
    out.push_back(point_entry("C_G", constants.lipschitz.C_G, sweep, constants.lipschitz.samples, cutoff, grid, 0.0,
                              "estimate_functional_constants", lip));
    return out;
}

ConstantsLedger build_ledger(const std::vector<std::vector<LedgerEntry>>& reports)
{
    if (reports.empty()) throw DomainError(kModule, "ledger needs at least one report");
    ConstantsLedger ledger;
    for (const auto& rep : reports) {
        for (const auto& e : rep) {
            if (e.source.empty() || (e.samples == 0 && e.paths == 0))
                throw DomainError(kModule, "ledger entry \"" + e.symbol + "\" lacks source or sample metadata");
            for (const auto& prior : ledger.entries) {
                const bool same_resolution = prior.symbol == e.symbol && prior.parameters == e.parameters &&
                                             prior.cutoff == e.cutoff && prior.grid == e.grid && prior.dt == e.dt &&
                                             prior.paths == e.paths && prior.samples == e.samples &&
                                             prior.seed == e.seed;
                if (same_resolution && prior.value != e.value)
                    throw DomainError(kModule, "conflicting estimates of \"" + e.symbol + "\" at identical resolution");
            }
            ledger.entries.push_back(e);
        }
    }
    return ledger;
}

}  // namespace snwe
