#include "snwe/mild_solver.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace snwe {

namespace {

constexpr const char* kModule = "mild_solver";

double ramp(double s, CutoffShape shape)
{
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    if (shape == CutoffShape::LinearRamp) return 1.0 - s;
    return 1.0 - s * s * (3.0 - 2.0 * s);
}

GridSpec resolve_grid(const SolverConfig& config)
{
    if (!config.basis) throw PreconditionError(kModule, "solver configuration has no basis");
    return config.grid.nx > 0 ? config.grid : default_grid(*config.basis);
}

const SolverConfig& validated(const SolverConfig& config)
{
    config.validate();
    return config;
}

}  // namespace

std::string to_string(CutoffShape shape)
{
    return shape == CutoffShape::LinearRamp ? "linear" : "cubic";
}

CutoffShape cutoff_shape_from_string(const std::string& name)
{
    if (name == "linear") return CutoffShape::LinearRamp;
    if (name == "cubic") return CutoffShape::CubicSmooth;
    throw DomainError(kModule, "unknown cutoff shape '" + name + "'");
}

void CutoffParams::validate() const
{
    if (!(n > 0.0)) throw PreconditionError(kModule, "truncation level n must be positive");
    if (!(M_prime > 0.0 && M_prime < M && M < 1.0))
        throw PreconditionError(kModule, "cutoff radii must satisfy 0 < M' < M < 1");
}

double cutoff_theta(double x, double n, const CutoffParams& params)
{
    return ramp(x / n - 1.0, params.shape);
}

double cutoff_theta_hat(double x, const CutoffParams& params)
{
    return ramp((x - params.M_prime) / (params.M - params.M_prime), params.shape);
}

void SolverConfig::validate() const
{
    std::vector<std::string> problems;
    if (!basis) problems.emplace_back("missing basis");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) problems.emplace_back("horizon T must be positive");
    if (steps == 0) problems.emplace_back("steps must be positive");
    if (!(tol_fp > 0.0)) problems.emplace_back("tol_fp must be positive");
    if (max_iter == 0) problems.emplace_back("max_iter must be positive");
    if (!(gamma > 0.0) || !(2.0 * gamma < triple.p)) problems.emplace_back("gamma must satisfy 0 < 2 gamma < p");
    if (!(cutoffs.n > 0.0)) problems.emplace_back("truncation level n must be positive");
    if (!(cutoffs.M_prime > 0.0 && cutoffs.M_prime < cutoffs.M && cutoffs.M < 1.0))
        problems.emplace_back("cutoff radii must satisfy 0 < M' < M < 1");
    if (basis) {
        const auto size = static_cast<Eigen::Index>(basis->size());
        if (u0.size() != 0 && u0.size() != size) problems.emplace_back("u0 does not match the basis");
        if (u1.size() != 0 && u1.size() != size) problems.emplace_back("u1 does not match the basis");
        if (noise_channels > basis->size()) problems.emplace_back("more noise channels than basis modes");
        if (!is_linear() && u0.size() == size) {
            const double h = ha_norm(*basis, u0);
            if (!(h < 1.0)) problems.emplace_back("||u0||_{H_A} must be < 1 for a nonlinear problem");
            if (!(h < cutoffs.M_prime)) problems.emplace_back("||u0||_{H_A} must be < M' for a nonlinear problem");
        }
    }
    if (!problems.empty()) {
        std::string msg = "invalid solver configuration:";
        for (const auto& p : problems) msg += " [" + p + "]";
        throw PreconditionError(kModule, msg);
    }
}

std::string to_string(StoppingTrigger trigger)
{
    switch (trigger) {
    case StoppingTrigger::ZNormReachedMprime: return "ZNormReachedMprime";
    case StoppingTrigger::YNormReachedN: return "YNormReachedN";
    case StoppingTrigger::HorizonEnd: return "HorizonEnd";
    }
    return "?";
}

StoppingReport detect_stopping(const TrajectoryRecord& traj, double level, double m_prime)
{
    if (!traj.has_running_norms()) throw PreconditionError(kModule, "trajectory has no cached running norms");
    StoppingReport rep;
    for (std::size_t k = 0; k < traj.nodes(); ++k) {
        const double z = traj.z_running[k];
        const double y = traj.y_running[k];
        StoppingTrigger trig = StoppingTrigger::HorizonEnd;
        if (z >= m_prime)
            trig = StoppingTrigger::ZNormReachedMprime;
        else if (y >= level)
            trig = StoppingTrigger::YNormReachedN;
        if (trig != StoppingTrigger::HorizonEnd) {
            rep.tau = k;
            rep.trigger = trig;
            rep.z_value = z;
            rep.y_value = y;
            rep.time = traj.time(k);
            return rep;
        }
    }
    rep.z_value = traj.z_running.back();
    rep.y_value = traj.y_running.back();
    rep.time = traj.horizon();
    return rep;
}

// ---------------------------------------------------------------------------

MildSolver::MildSolver(SolverConfig config)
    : config_(validated(config)), grid_(resolve_grid(config_)), transform_(config_.basis, grid_),
      norms_(config_.basis, grid_, config_.triple), kernel_(config_.basis, config_.dt(), config_.steps + 1)
{
    const auto size = static_cast<Eigen::Index>(config_.basis->size());
    if (config_.u0.size() == 0) config_.u0 = Eigen::VectorXd::Zero(size);
    if (config_.u1.size() == 0) config_.u1 = Eigen::VectorXd::Zero(size);
    if (config_.noise_channels > 0 && !is_zero(config_.g_kind)) {
        noise_ = build_noise_basis(config_.basis, config_.noise_channels, ModeSelection::Lowest, config_.noise_decay);
        ensemble_.emplace(config_.seed, config_.paths, config_.steps, config_.noise_channels, config_.dt());
        for (std::size_t j = 0; j < noise_->channels(); ++j)
            channel_values_.push_back(transform_.synthesize(noise_->channel(j)).values);
    }
}

TrajectoryRecord MildSolver::linear_flow() const
{
    TrajectoryRecord traj(config_.basis, config_.dt(), nodes());
    kernel_.linear_flow(config_.u0, config_.u1, traj.u, traj.ut);
    attach_running_norms(traj, norms_);
    return traj;
}

void MildSolver::node_forcing(const Eigen::VectorXd& coeffs, double cutoff, std::size_t path, std::size_t k,
                              Eigen::Ref<Eigen::VectorXd> drift, Eigen::Ref<Eigen::VectorXd> noise) const
{
    drift.setZero();
    noise.setZero();
    if (cutoff == 0.0) return;
    const bool has_f = !is_zero(config_.f_kind);
    const bool has_g = ensemble_.has_value() && k < config_.steps;
    if (!has_f && !has_g) return;

    const PhysicalField u = transform_.synthesize(coeffs);
    if (has_f) drift = cutoff * transform_.analyze_coeffs(eval_F(u, config_.f_kind));
    if (has_g) {
        const PhysicalField g = eval_F(u, config_.g_kind);
        PhysicalField combined = g;
        combined.values.setZero();
        for (std::size_t j = 0; j < channel_values_.size(); ++j) {
            const double amp = std::sqrt(noise_->weights[j]) * ensemble_->increment(path, k, j);
            combined.values += amp * g.values.cwiseProduct(channel_values_[j]);
        }
        noise = cutoff * transform_.analyze_coeffs(combined);
    }
}

MildSolver::Forcing MildSolver::forcing(const TrajectoryRecord& v, std::size_t path, bool truncated) const
{
    if (v.nodes() != nodes()) throw DomainError(kModule, "trajectory does not cover the solver grid");
    if (truncated && !v.has_running_norms()) throw PreconditionError(kModule, "trajectory has no cached running norms");
    if (ensemble_ && path >= ensemble_->paths()) throw DomainError(kModule, "path index outside the ensemble");
    const auto m = static_cast<Eigen::Index>(config_.basis->size());
    const auto n = static_cast<Eigen::Index>(nodes());
    const double dt = config_.dt();
    Forcing out{Eigen::MatrixXd::Zero(m, n), Eigen::MatrixXd::Zero(m, n)};
    Eigen::VectorXd noise(m);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        const double c = truncated ? cutoff_theta(v.y_running[kk], config_.cutoffs.n, config_.cutoffs) *
                                         cutoff_theta_hat(v.z_running[kk], config_.cutoffs)
                                   : 1.0;
        node_forcing(v.u.col(k), c, path, kk, out.drift.col(k), noise);
        const double w = k == 0 ? 0.5 : 1.0;
        out.kicks.col(k) = (w * dt) * out.drift.col(k) + noise;
    }
    return out;
}

TrajectoryRecord MildSolver::picard_step(const TrajectoryRecord& v, std::size_t path, bool truncated) const
{
    const Forcing f = forcing(v, path, truncated);
    TrajectoryRecord out(config_.basis, config_.dt(), nodes());
    Eigen::MatrixXd U;
    Eigen::MatrixXd V;
    kernel_.accumulate(f.kicks, U, &V);
    kernel_.linear_flow(config_.u0, config_.u1, out.u, out.ut);
    out.u += U;
    out.ut += V;
    // Trapezoid endpoint s = t_m: the sinc kernel vanishes there, cos does not.
    if (out.ut.cols() > 1) out.ut.rightCols(out.ut.cols() - 1) += (0.5 * config_.dt()) * f.drift.rightCols(f.drift.cols() - 1);
    attach_running_norms(out, norms_);
    return out;
}

double MildSolver::y_distance(const TrajectoryRecord& a, const TrajectoryRecord& b) const
{
    return y_norm(a.u - b.u, config_.dt(), norms_);
}

SolveResult MildSolver::solve_truncated(std::size_t path, const TrajectoryRecord* initial_guess) const
{
    SolveResult res{initial_guess ? *initial_guess : linear_flow(), {}};
    if (!res.trajectory.has_running_norms()) attach_running_norms(res.trajectory, norms_);
    PicardDiagnostics& diag = res.diagnostics;
    std::size_t bad = 0;
    for (std::size_t it = 0; it < config_.max_iter; ++it) {
        TrajectoryRecord next = picard_step(res.trajectory, path);
        const double d = y_distance(next, res.trajectory);
        diag.differences.push_back(d);
        ++diag.iterations;
        if (diag.differences.size() > 1) {
            const double prev = diag.differences[diag.differences.size() - 2];
            const double ratio = prev > 0.0 ? d / prev : 0.0;
            diag.ratios.push_back(ratio);
            bad = ratio >= 1.0 ? bad + 1 : 0;
            if (bad >= 3)
                throw NonContractionError(kModule, "Picard ratios >= 1 for 3 consecutive iterations; the horizon is "
                                                   "too long, choose T with contraction_budget");
        }
        res.trajectory = std::move(next);
        if (d < config_.tol_fp) {
            diag.converged = true;
            break;
        }
    }
    diag.residual = y_distance(picard_step(res.trajectory, path), res.trajectory);

    res.trajectory.flags.assign(res.trajectory.nodes(), 0);
    for (std::size_t k = 0; k < res.trajectory.nodes(); ++k) {
        std::uint8_t bits = 0;
        if (res.trajectory.z_running[k] >= config_.cutoffs.M_prime) bits |= 1u;
        if (res.trajectory.y_running[k] >= config_.cutoffs.n) bits |= 2u;
        res.trajectory.flags[k] = bits;
    }
    return res;
}

TrajectoryRecord MildSolver::pair_system(std::size_t path) const
{
    if (ensemble_ && path >= ensemble_->paths()) throw DomainError(kModule, "path index outside the ensemble");
    const auto m = static_cast<Eigen::Index>(config_.basis->size());
    const std::size_t n = nodes();
    const double dt = config_.dt();
    const double p = config_.triple.p;
    const auto freq = config_.basis->frequencies();

    TrajectoryRecord out(config_.basis, dt, n);
    Eigen::VectorXd u = config_.u0;
    Eigen::VectorXd v = config_.u1;
    Eigen::VectorXd drift(m);
    Eigen::VectorXd noise(m);
    std::vector<double> h(n);
    std::vector<double> e(n);
    double z = 0.0;
    double integral = 0.0;
    double sup_e = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        out.u.col(kk) = u;
        h[k] = norms_.ha(u);
        e[k] = norms_.e(u);
        z = std::max(z, h[k]);
        double x = 0.0;
        if (std::isinf(p)) {
            sup_e = std::max(sup_e, e[k]);
            x = sup_e;
        } else {
            if (k > 0) integral += 0.5 * dt * (std::pow(e[k - 1], p) + std::pow(e[k], p));
            x = std::pow(integral, 1.0 / p);
        }
        const double y = combine_y(z, x, p);
        const double c = cutoff_theta(y, config_.cutoffs.n, config_.cutoffs) * cutoff_theta_hat(z, config_.cutoffs);
        node_forcing(u, c, path, k, drift, noise);
        out.ut.col(kk) = v;
        if (k > 0) out.ut.col(kk) += (0.5 * dt) * drift;
        if (k + 1 == n) break;

        v += ((k == 0 ? 0.5 : 1.0) * dt) * drift + noise;
        for (Eigen::Index j = 0; j < m; ++j) {
            const double lam = freq[static_cast<std::size_t>(j)];
            if (lam == 0.0) {
                u[j] += dt * v[j];
                continue;
            }
            const double cs = std::cos(lam * dt);
            const double sn = std::sin(lam * dt);
            const double uj = u[j];
            u[j] = cs * uj + sn / lam * v[j];
            v[j] = -lam * sn * uj + cs * v[j];
        }
    }
    attach_running_norms(out, norms_);
    return out;
}

// ---------------------------------------------------------------------------

SpectralField duhamel_deterministic(const TrajectoryRecord& v, std::size_t m, const NonlinearityKind& kind,
                                    const CutoffParams& cutoffs, GridSpec grid)
{
    if (!v.has_running_norms()) throw PreconditionError(kModule, "missing path-norm cache");
    if (m >= v.nodes()) throw DomainError(kModule, "trajectory does not cover t_m");
    SpectralField out(v.basis);
    if (is_zero(kind) || m == 0) return out;
    const SpectralTransform transform(v.basis, grid);
    const auto freq = v.basis->frequencies();
    for (std::size_t k = 0; k <= m; ++k) {
        const double c = cutoff_theta(v.y_running[k], cutoffs.n, cutoffs) * cutoff_theta_hat(v.z_running[k], cutoffs);
        if (c == 0.0) continue;
        const double w = (k == 0 || k == m) ? 0.5 : 1.0;
        const Eigen::VectorXd f =
            transform.analyze_coeffs(eval_F(transform.synthesize(Eigen::VectorXd(v.u.col(static_cast<Eigen::Index>(k)))), kind));
        const double lag = v.time(m) - v.time(k);
        for (Eigen::Index j = 0; j < f.size(); ++j)
            out.coeffs()[j] += w * v.dt * c * sinc_multiplier(freq[static_cast<std::size_t>(j)], lag) * f[j];
    }
    return out;
}

double group_bound(const SpectralBasis& basis, double horizon)
{
    double best = 0.0;
    for (double lam : basis.frequencies()) {
        double val = 0.0;
        if (lam == 0.0)
            val = horizon;
        else
            val = std::sqrt(1.0 + lam * lam) / lam * (lam * horizon >= 0.5 * std::numbers::pi ? 1.0 : std::sin(lam * horizon));
        best = std::max(best, val);
    }
    return best;
}

nlohmann::json BudgetConstants::to_json() const
{
    return {{"C_F", C_F}, {"C_G", C_G}, {"C_T", C_T}, {"K_T", K_T}, {"K", K}, {"C_tilde", C_tilde}};
}

double budget_L2(double T, const CutoffParams& cutoffs, double gamma, double p, const BudgetConstants& c)
{
    const double expo = std::isinf(p) ? 1.0 : 1.0 - gamma / p;
    const double n = cutoffs.n;
    return n * c.C_F * (c.C_T + c.K_T) * (T + std::pow(T, expo) * std::pow(2.0 * n / cutoffs.M, gamma));
}

double budget_L3(double T, const CutoffParams& cutoffs, double gamma, double p, const BudgetConstants& c)
{
    const double expo = std::isinf(p) ? 1.0 : 1.0 - 2.0 * gamma / p;
    const double n = cutoffs.n;
    return n * c.C_G * (c.K + c.C_tilde) * std::sqrt(T + std::pow(T, expo) * std::pow(2.0 * n / cutoffs.M, 2.0 * gamma));
}

double contraction_budget(const CutoffParams& cutoffs, const ExponentTriple& triple, double gamma,
                          const BudgetConstants& constants, double horizon, double dt)
{
    cutoffs.validate();
    if (!(gamma > 0.0 && 2.0 * gamma < triple.p)) throw PreconditionError(kModule, "budget requires 0 < 2 gamma < p");
    if (!(dt > 0.0 && horizon >= dt)) throw PreconditionError(kModule, "budget requires 0 < dt <= horizon");
    for (double v : {constants.C_F, constants.C_G, constants.C_T, constants.K_T, constants.K, constants.C_tilde})
        if (!(v >= 0.0) || !std::isfinite(v)) throw PreconditionError(kModule, "budget constants must be finite and >= 0");

    auto budget = [&](std::size_t k) {
        const double T = static_cast<double>(k) * dt;
        return budget_L2(T, cutoffs, gamma, triple.p, constants) + budget_L3(T, cutoffs, gamma, triple.p, constants);
    };
    const auto steps = static_cast<std::size_t>(std::floor(horizon / dt * (1.0 + 1e-12)));
    if (budget(steps) <= 0.5) return static_cast<double>(steps) * dt;
    if (budget(1) > 0.5)
        throw PreconditionError(kModule, "contraction budget exceeds 1/2 already at T = dt = " + format_double(dt) +
                                             "; refine the time step or lower n");
    std::size_t lo = 1;
    std::size_t hi = steps;
    while (hi - lo > 1) {
        const std::size_t mid = lo + (hi - lo) / 2;
        (budget(mid) <= 0.5 ? lo : hi) = mid;
    }
    return static_cast<double>(lo) * dt;
}

double nesting_consistency(const SolverConfig& config, std::size_t path, double n, double k)
{
    if (!(n <= k)) throw DomainError(kModule, "nesting requires n <= k");
    SolverConfig cn = config;
    cn.cutoffs.n = n;
    const MildSolver sn(cn);
    const SolveResult rn = sn.solve_truncated(path);
    if (n == k) return 0.0;
    SolverConfig ck = config;
    ck.cutoffs.n = k;
    const SolveResult rk = MildSolver(ck).solve_truncated(path);

    const StoppingReport stop = detect_stopping(rn.trajectory, n, config.cutoffs.M_prime);
    const std::size_t last = stop.tau.value_or(rn.trajectory.nodes() - 1);
    double worst = 0.0;
    for (std::size_t t = 0; t <= last; ++t) {
        const auto col = static_cast<Eigen::Index>(t);
        worst = std::max(worst, sn.norms().ha(rn.trajectory.u.col(col) - rk.trajectory.u.col(col)));
    }
    return worst;
}

double pair_system_crosscheck(const SolverConfig& config, std::size_t path)
{
    const MildSolver solver(config);
    const SolveResult fixed = solver.solve_truncated(path);
    const TrajectoryRecord pair = solver.pair_system(path);
    return (fixed.trajectory.u - pair.u).cwiseAbs().maxCoeff();
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& traj, std::size_t modes)
{
    const std::size_t count = std::min(modes, traj.basis->size());
    out << "t";
    for (std::size_t j = 0; j < count; ++j) {
        const Mode md = traj.basis->modes()[j];
        out << ",c_" << md.jx << '_' << md.jy;
    }
    out << ",Z,Y\n";
    const bool norms = traj.has_running_norms();
    for (std::size_t k = 0; k < traj.nodes(); ++k) {
        out << format_double(traj.time(k));
        for (std::size_t j = 0; j < count; ++j)
            out << ',' << format_double(traj.u(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)));
        out << ',' << format_double(norms ? traj.z_running[k] : 0.0) << ','
            << format_double(norms ? traj.y_running[k] : 0.0) << '\n';
    }
}

}  // namespace snwe
