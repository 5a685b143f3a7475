#include "snwe/stochastic_convolution.hpp"

#include <algorithm>
#include <cmath>

namespace snwe {

namespace {

constexpr const char* kModule = "stochastic_convolution";

}  // namespace

double DiffusionProcess::hs_norm_sq(std::size_t k) const
{
    const Eigen::MatrixXd& img = images.at(k);
    double acc = 0.0;
    for (Eigen::Index j = 0; j < img.cols(); ++j) acc += weights[static_cast<std::size_t>(j)] * img.col(j).squaredNorm();
    return acc;
}

DiffusionProcess DiffusionProcess::constant(const NoiseBasis& noise, const std::vector<SpectralField>& fields,
                                            std::size_t steps, double dt)
{
    if (fields.size() != noise.channels()) throw DomainError(kModule, "one image per noise channel required");
    Eigen::MatrixXd img(static_cast<Eigen::Index>(noise.basis->size()), static_cast<Eigen::Index>(fields.size()));
    for (std::size_t j = 0; j < fields.size(); ++j) {
        require_same_basis(fields[j].basis(), *noise.basis, kModule);
        img.col(static_cast<Eigen::Index>(j)) = fields[j].coeffs();
    }
    DiffusionProcess xi;
    xi.basis = noise.basis;
    xi.dt = dt;
    xi.images.assign(steps + 1, img);
    xi.weights = noise.weights;
    return xi;
}

DiffusionProcess DiffusionProcess::zero(const NoiseBasis& noise, std::size_t steps, double dt)
{
    std::vector<SpectralField> fields(noise.channels(), SpectralField(noise.basis));
    return constant(noise, fields, steps, dt);
}

// ---------------------------------------------------------------------------

WaveKernel::WaveKernel(BasisPtr basis, double dt, std::size_t nodes)
    : basis_(std::move(basis)), dt_(dt), nodes_(nodes)
{
    if (!(dt > 0.0)) throw DomainError(kModule, "time step must be positive");
    const auto freq = basis_->frequencies();
    const auto m = static_cast<Eigen::Index>(freq.size());
    const auto n = static_cast<Eigen::Index>(nodes);
    cos_.resize(m, n);
    sin_.resize(m, n);
    lambda_.resize(m);
    inv_lambda_.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const double lam = freq[static_cast<std::size_t>(j)];
        lambda_[j] = lam;
        inv_lambda_[j] = lam > 0.0 ? 1.0 / lam : 0.0;
        if (lam == 0.0) zero_modes_.push_back(j);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            cos_(j, k) = std::cos(lam * t);
            sin_(j, k) = std::sin(lam * t);
        }
    }
}

void WaveKernel::accumulate(const Eigen::MatrixXd& g, Eigen::MatrixXd& U, Eigen::MatrixXd* V) const
{
    const Eigen::Index m = lambda_.size();
    const auto n = static_cast<Eigen::Index>(nodes_);
    if (g.rows() != m || g.cols() != n) throw DomainError(kModule, "forcing matrix does not match the kernel grid");
    U.setZero(m, n);
    if (V) V->setZero(m, n);
    // A = sum_k cos(lambda t_k) g_k, B = sum_k sin(lambda t_k) g_k; on zero
    // modes A = sum g_k and B = sum t_k g_k.
    Eigen::VectorXd A = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd B = Eigen::VectorXd::Zero(m);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt_;
        U.col(k) = (sin_.col(k).cwiseProduct(A) - cos_.col(k).cwiseProduct(B)).cwiseProduct(inv_lambda_);
        if (V) V->col(k) = cos_.col(k).cwiseProduct(A) + sin_.col(k).cwiseProduct(B);
        for (Eigen::Index z : zero_modes_) {
            U(z, k) = t * A[z] - B[z];
            if (V) (*V)(z, k) = A[z];
        }
        A += cos_.col(k).cwiseProduct(g.col(k));
        B += sin_.col(k).cwiseProduct(g.col(k));
        // sin(0 t) = 0 in the table, so B still lacks t_k g_k on zero modes.
        for (Eigen::Index z : zero_modes_) B[z] += t * g(z, k);
    }
}

void WaveKernel::accumulate_direct(const Eigen::MatrixXd& g, Eigen::MatrixXd& U, Eigen::MatrixXd* V) const
{
    const Eigen::Index m = lambda_.size();
    const auto n = static_cast<Eigen::Index>(nodes_);
    if (g.rows() != m || g.cols() != n) throw DomainError(kModule, "forcing matrix does not match the kernel grid");
    U.setZero(m, n);
    if (V) V->setZero(m, n);
    for (Eigen::Index t_idx = 0; t_idx < n; ++t_idx) {
        for (Eigen::Index k = 0; k < t_idx; ++k) {
            const double lag = static_cast<double>(t_idx - k) * dt_;
            for (Eigen::Index j = 0; j < m; ++j) {
                U(j, t_idx) += sinc_multiplier(lambda_[j], lag) * g(j, k);
                if (V) (*V)(j, t_idx) += std::cos(lambda_[j] * lag) * g(j, k);
            }
        }
    }
}

void WaveKernel::linear_flow(const Eigen::VectorXd& u0, const Eigen::VectorXd& u1, Eigen::MatrixXd& U,
                             Eigen::MatrixXd& V) const
{
    const Eigen::Index m = lambda_.size();
    const auto n = static_cast<Eigen::Index>(nodes_);
    if (u0.size() != m || u1.size() != m) throw DomainError(kModule, "initial data do not match the basis");
    U.resize(m, n);
    V.resize(m, n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) * dt_;
        U.col(k) = cos_.col(k).cwiseProduct(u0) + sin_.col(k).cwiseProduct(inv_lambda_).cwiseProduct(u1);
        V.col(k) = -(lambda_.cwiseProduct(sin_.col(k))).cwiseProduct(u0) + cos_.col(k).cwiseProduct(u1);
        for (Eigen::Index z : zero_modes_) {
            U(z, k) = u0[z] + t * u1[z];
            V(z, k) = u1[z];
        }
    }
}

std::string to_string(EvaluationMode mode)
{
    return mode == EvaluationMode::DirectKernel ? "direct" : "factorized";
}

// ---------------------------------------------------------------------------

namespace {

void check_alignment(const DiffusionProcess& xi, const WienerEnsemble& ensemble)
{
    if (xi.nodes() < 1) throw DomainError(kModule, "diffusion process has no nodes");
    if (xi.channels() != ensemble.channels())
        throw DomainError(kModule, "diffusion channels do not match the ensemble channels");
    if (xi.nodes() - 1 > ensemble.steps()) throw DomainError(kModule, "diffusion grid longer than the ensemble");
    if (std::abs(xi.dt - ensemble.dt()) > 1e-12 * ensemble.dt())
        throw DomainError(kModule, "diffusion and ensemble time grids are misaligned");
}

}  // namespace

Eigen::MatrixXd ito_increments(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                               std::size_t active)
{
    check_alignment(xi, ensemble);
    const auto m = static_cast<Eigen::Index>(xi.basis->size());
    const std::size_t nodes = xi.nodes();
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(nodes));
    Eigen::VectorXd dw(static_cast<Eigen::Index>(xi.channels()));
    const std::size_t last = std::min(active, nodes - 1);
    for (std::size_t k = 0; k < last; ++k) {
        for (std::size_t j = 0; j < xi.channels(); ++j) {
            const double inc = ensemble.increment(path, k, j);
            if (!std::isfinite(inc)) throw DomainError(kModule, "non-finite Wiener increment");
            dw[static_cast<Eigen::Index>(j)] = std::sqrt(xi.weights[j]) * inc;
        }
        b.col(static_cast<Eigen::Index>(k)).noalias() = xi.images[k] * dw;
    }
    return b;
}

namespace {

ConvolutionResult convolve_active(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                                  std::size_t active, EvaluationMode mode)
{
    const Eigen::MatrixXd b = ito_increments(xi, ensemble, path, active);
    const WaveKernel kernel(xi.basis, xi.dt, xi.nodes());
    ConvolutionResult res{TrajectoryRecord(xi.basis, xi.dt, xi.nodes()), mode};
    if (mode == EvaluationMode::GroupFactorized)
        kernel.accumulate(b, res.trajectory.u, &res.trajectory.ut);
    else
        kernel.accumulate_direct(b, res.trajectory.u, &res.trajectory.ut);
    return res;
}

}  // namespace

ConvolutionResult convolve(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                           EvaluationMode mode)
{
    return convolve_active(xi, ensemble, path, xi.nodes(), mode);
}

StoppingIndex StoppingIndex::first_hitting(const TrajectoryRecord& path_values, double threshold)
{
    const std::size_t n = path_values.nodes();
    if (n == 0) throw DomainError(kModule, "empty path");
    for (std::size_t k = 0; k < n; ++k) {
        if (ha_norm(*path_values.basis, path_values.u.col(static_cast<Eigen::Index>(k))) >= threshold)
            return StoppingIndex(k);
    }
    return StoppingIndex(n - 1);
}

ConvolutionResult stopped_convolve(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                                   StoppingIndex tau, EvaluationMode mode)
{
    if (tau.value() >= xi.nodes()) throw DomainError(kModule, "stopping index beyond the grid");
    return convolve_active(xi, ensemble, path, tau.value(), mode);
}

double stopped_identity_discrepancy(const DiffusionProcess& xi, const WienerEnsemble& ensemble, std::size_t path,
                                    StoppingIndex tau)
{
    const ConvolutionResult full = convolve(xi, ensemble, path);
    const ConvolutionResult stopped = stopped_convolve(xi, ensemble, path, tau);
    double worst = 0.0;
    for (std::size_t n = 0; n < xi.nodes(); ++n) {
        const auto at = static_cast<Eigen::Index>(std::min(n, tau.value()));
        worst = std::max(worst, (full.trajectory.u.col(at) - stopped.trajectory.u.col(at)).cwiseAbs().maxCoeff());
    }
    return worst;
}

// ---------------------------------------------------------------------------

MomentStatistics ratio_statistics(const std::vector<double>& lhs, const std::vector<double>& rhs, double p,
                                  const MomentOptions& options)
{
    MomentStatistics st;
    st.p = p;
    st.paths = lhs.size();
    if (lhs.empty()) throw DomainError(kModule, "no paths");
    const double n = static_cast<double>(lhs.size());
    st.lhs = pairwise_sum(lhs) / n;
    st.rhs = pairwise_sum(rhs) / n;
    if (st.rhs == 0.0) return st;  // xi = 0: ratio reported as 0
    st.ratio = st.lhs / st.rhs;

    std::vector<double> boot(options.bootstrap);
    std::vector<double> bl(lhs.size());
    std::vector<double> br(lhs.size());
    for (std::size_t b = 0; b < options.bootstrap; ++b) {
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double u = counter_uniform(options.bootstrap_seed, static_cast<std::uint32_t>(b),
                                             static_cast<std::uint32_t>(i), 0, StreamTag::Bootstrap);
            const auto pick = std::min(lhs.size() - 1, static_cast<std::size_t>(u * n));
            bl[i] = lhs[pick];
            br[i] = rhs[pick];
        }
        const double den = pairwise_sum(br);
        boot[b] = den > 0.0 ? pairwise_sum(bl) / den : 0.0;
    }
    std::sort(boot.begin(), boot.end());
    if (!boot.empty()) {
        auto quantile = [&](double a) {
            const double pos = a * static_cast<double>(boot.size() - 1);
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            const auto hi = std::min(boot.size() - 1, lo + 1);
            return boot[lo] + (pos - static_cast<double>(lo)) * (boot[hi] - boot[lo]);
        };
        st.ci_low = quantile(0.025);
        st.ci_high = quantile(0.975);
    }
    if (lhs.size() < 100) {
        st.flagged = true;
        st.note = "fewer than 100 paths";
    }
    if (p > 4.0) {
        st.flagged = true;
        st.note += st.note.empty() ? "p > 4: high-variance moment" : "; p > 4: high-variance moment";
    }
    return st;
}

namespace {

template <typename PathValue>
MomentStatistics run_moment(const DiffusionProcess& xi, const WienerEnsemble& ensemble, double p,
                            const MomentOptions& options, PathValue&& path_value)
{
    if (!(p > 1.0)) throw DomainError(kModule, "moment exponent must exceed 1");
    check_alignment(xi, ensemble);
    const std::size_t count = options.path_count == 0 ? ensemble.paths() - options.first_path : options.path_count;
    if (options.first_path + count > ensemble.paths()) throw DomainError(kModule, "path range exceeds the ensemble");

    // Left-point quadrature matching the Ito sum.
    double quad = 0.0;
    for (std::size_t k = 0; k + 1 < xi.nodes(); ++k) quad += xi.hs_norm_sq(k) * xi.dt;
    const double rhs_value = std::isinf(p) ? std::sqrt(quad) : std::pow(quad, 0.5 * p);

    const WaveKernel kernel(xi.basis, xi.dt, xi.nodes());
    std::vector<double> lhs(count);
    std::vector<double> rhs(count, rhs_value);
    parallel_for(count, options.threads, [&](std::size_t i) {
        const Eigen::MatrixXd b = ito_increments(xi, ensemble, options.first_path + i, xi.nodes());
        Eigen::MatrixXd U;
        kernel.accumulate(b, U, nullptr);
        lhs[i] = path_value(U);
    });
    MomentStatistics st = ratio_statistics(lhs, rhs, p, options);
    st.horizon = xi.dt * static_cast<double>(xi.nodes() - 1);
    return st;
}

}  // namespace

MomentStatistics burkholder_ratio(const DiffusionProcess& xi, const WienerEnsemble& ensemble, double p,
                                  const MomentOptions& options)
{
    const SpectralBasis& basis = *xi.basis;
    return run_moment(xi, ensemble, p, options, [&](const Eigen::MatrixXd& U) {
        double sup = 0.0;
        for (Eigen::Index k = 0; k < U.cols(); ++k) sup = std::max(sup, ha_norm(basis, U.col(k)));
        return std::pow(sup, p);
    });
}

MomentStatistics strichartz_lp_moment(const DiffusionProcess& xi, const WienerEnsemble& ensemble,
                                      const ExponentTriple& triple, GridSpec grid, const MomentOptions& options)
{
    const NormEvaluator norms(xi.basis, grid, triple);
    const double p = triple.p;
    return run_moment(xi, ensemble, p, options, [&](const Eigen::MatrixXd& U) {
        if (std::isinf(p)) {
            double sup = 0.0;
            for (Eigen::Index k = 0; k < U.cols(); ++k) sup = std::max(sup, norms.e(U.col(k)));
            return sup;
        }
        double acc = 0.0;
        double prev = std::pow(norms.e(U.col(0)), p);
        for (Eigen::Index k = 1; k < U.cols(); ++k) {
            const double cur = std::pow(norms.e(U.col(k)), p);
            acc += 0.5 * xi.dt * (prev + cur);
            prev = cur;
        }
        return acc;
    });
}

void write_moment_csv(std::ostream& out, const std::vector<MomentStatistics>& rows, double cutoff, std::size_t channels)
{
    out << "p,T,Lambda,J,paths,lhs,rhs,ratio,ci_low,ci_high\n";
    for (const auto& r : rows) {
        out << format_double(r.p) << ',' << format_double(r.horizon) << ',' << format_double(cutoff) << ',' << channels
            << ',' << r.paths << ',' << format_double(r.lhs) << ',' << format_double(r.rhs) << ','
            << format_double(r.ratio) << ',' << format_double(r.ci_low) << ',' << format_double(r.ci_high) << '\n';
    }
}

}  // namespace snwe
