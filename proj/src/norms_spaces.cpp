#include "snwe/norms_spaces.hpp"

#include <algorithm>
#include <cmath>

namespace snwe {

namespace {

constexpr const char* kModule = "norms_spaces";

double inv(double p) { return std::isinf(p) ? 0.0 : 1.0 / p; }

// x^q for x >= 0; exponentiation by squaring when q is a small integer.
double power(double x, double q, int iq)
{
    if (iq <= 0) return std::pow(x, q);
    double result = 1.0;
    double base = x;
    for (int e = iq; e > 0; e >>= 1) {
        if (e & 1) result *= base;
        base *= base;
    }
    return result;
}

}  // namespace

double r_low_branch(double p, double q) { return (5.0 - 6.0 * inv(p) - 4.0 * inv(q)) / 6.0; }
double r_high_branch(double p, double q) { return 1.0 - inv(p) - 2.0 * inv(q); }

double rho_low_branch(double q) { return 2.0 / 3.0 * (0.5 - inv(q)); }
double rho_high_branch(double q) { return 2.0 * (0.5 - inv(q)) - 0.5; }

double cluster_exponent(double q)
{
    if (!(q >= 2.0)) throw DomainError(kModule, "cluster exponent needs q >= 2");
    return q <= 8.0 ? rho_low_branch(q) : rho_high_branch(q);
}

double admissible_r(double p, double q)
{
    if (std::isnan(p) || std::isnan(q) || q < 2.0 || q > p)
        throw DomainError(kModule, "inadmissible exponents: need 2 <= q <= p <= inf (p=" + format_double(p) +
                                       ", q=" + format_double(q) + ")");
    return q <= 8.0 ? r_low_branch(p, q) : r_high_branch(p, q);
}

bool validate_pair_condition(double q, double r)
{
    if (!(q > 2.0)) return false;
    const double upper = std::min(1.0, (q - 2.0) / 2.0);
    if (!(r > 0.0 && r < upper)) return false;
    return r != 1.0 - inv(q);
}

double lq_norm(const PhysicalField& f, double q)
{
    if (!(q >= 1.0)) throw DomainError(kModule, "L^q norm needs q >= 1");
    const double peak = f.values.cwiseAbs().maxCoeff();
    if (std::isinf(q) || peak == 0.0) return peak;
    const Eigen::VectorXd wx = trapezoid_weights(f.grid.nx, f.lx);
    const Eigen::VectorXd wy = trapezoid_weights(f.grid.ny, f.ly);
    const int iq = (q == std::floor(q) && q <= 64.0) ? static_cast<int>(q) : 0;
    const double scale = 1.0 / peak;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < f.values.cols(); ++k) {
        double col = 0.0;
        for (Eigen::Index i = 0; i < f.values.rows(); ++i) col += wx[i] * power(std::abs(f.values(i, k)) * scale, q, iq);
        acc += wy[k] * col;
    }
    return peak * std::pow(acc, 1.0 / q);
}

Eigen::VectorXd fractional_power(const SpectralBasis& basis, const Eigen::VectorXd& coeffs, double s)
{
    const auto ev = basis.eigenvalues();
    Eigen::VectorXd out(coeffs.size());
    for (Eigen::Index j = 0; j < coeffs.size(); ++j) out[j] = std::pow(1.0 + ev[static_cast<std::size_t>(j)], 0.5 * s) * coeffs[j];
    return out;
}

SpectralField fractional_power(const SpectralField& u, double s)
{
    return SpectralField(u.basis_ptr(), fractional_power(u.basis(), u.coeffs(), s));
}

double fractional_norm(const SpectralField& u, double s, double q, GridSpec grid)
{
    const Eigen::VectorXd scaled = fractional_power(u.basis(), u.coeffs(), s);
    if (q == 2.0) return scaled.norm();
    return lq_norm(SpectralTransform(u.basis_ptr(), grid).synthesize(scaled), q);
}

double ha_norm(const SpectralBasis& basis, const Eigen::VectorXd& coeffs)
{
    const auto ev = basis.eigenvalues();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < coeffs.size(); ++j) acc += (1.0 + ev[static_cast<std::size_t>(j)]) * coeffs[j] * coeffs[j];
    return std::sqrt(acc);
}

double ha_norm(const SpectralField& u) { return ha_norm(u.basis(), u.coeffs()); }

double l2_norm(const SpectralField& u) { return u.coeffs().norm(); }

// ---------------------------------------------------------------------------

NormEvaluator::NormEvaluator(BasisPtr basis, GridSpec grid, ExponentTriple triple)
    : transform_(std::move(basis), grid), triple_(triple)
{
    const auto ev = transform_.basis().eigenvalues();
    const auto n = static_cast<Eigen::Index>(ev.size());
    e_multiplier_.resize(n);
    ha_weight_.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double one_plus = 1.0 + ev[static_cast<std::size_t>(j)];
        e_multiplier_[j] = std::pow(one_plus, 0.5 * (1.0 - triple_.r));
        ha_weight_[j] = one_plus;
    }
}

double NormEvaluator::ha(const Eigen::VectorXd& coeffs) const
{
    return std::sqrt((ha_weight_.array() * coeffs.array().square()).sum());
}

double NormEvaluator::e(const Eigen::VectorXd& coeffs) const
{
    const Eigen::VectorXd scaled = e_multiplier_.cwiseProduct(coeffs);
    if (triple_.q == 2.0) return scaled.norm();
    return lq_norm(transform_.synthesize(scaled), triple_.q);
}

// ---------------------------------------------------------------------------

double combine_y(double z, double x, double p)
{
    if (std::isinf(p)) return std::max(z, x);
    if (z == 0.0 && x == 0.0) return 0.0;
    const double m = std::max(z, x);
    return m * std::pow(std::pow(z / m, p) + std::pow(x / m, p), 1.0 / p);
}

RunningNorms running_norms(std::span<const double> ha_values, std::span<const double> e_values, double dt, double p)
{
    if (ha_values.size() != e_values.size()) throw DomainError(kModule, "running norm inputs differ in length");
    const std::size_t n = ha_values.size();
    RunningNorms out;
    out.z.resize(n);
    out.x.resize(n);
    out.y.resize(n);
    double z = 0.0;
    double integral = 0.0;
    double sup_e = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        z = std::max(z, ha_values[k]);
        double x = 0.0;
        if (std::isinf(p)) {
            sup_e = std::max(sup_e, e_values[k]);
            x = sup_e;
        } else {
            if (k > 0) integral += 0.5 * dt * (std::pow(e_values[k - 1], p) + std::pow(e_values[k], p));
            x = std::pow(integral, 1.0 / p);
        }
        out.z[k] = z;
        out.x[k] = x;
        out.y[k] = combine_y(z, x, p);
    }
    return out;
}

void attach_running_norms(TrajectoryRecord& traj, const NormEvaluator& norms)
{
    const std::size_t n = traj.nodes();
    std::vector<double> h(n);
    std::vector<double> e(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Eigen::VectorXd col = traj.u.col(static_cast<Eigen::Index>(k));
        h[k] = norms.ha(col);
        e[k] = norms.e(col);
    }
    RunningNorms rn = running_norms(h, e, traj.dt, norms.triple().p);
    traj.z_running = std::move(rn.z);
    traj.x_running = std::move(rn.x);
    traj.y_running = std::move(rn.y);
}

double y_norm(const Eigen::MatrixXd& u, double dt, const NormEvaluator& norms)
{
    const auto n = static_cast<std::size_t>(u.cols());
    if (n == 0) return 0.0;
    std::vector<double> h(n);
    std::vector<double> e(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Eigen::VectorXd col = u.col(static_cast<Eigen::Index>(k));
        h[k] = norms.ha(col);
        e[k] = norms.e(col);
    }
    return running_norms(h, e, dt, norms.triple().p).y.back();
}

std::string to_string(NormKind kind)
{
    switch (kind) {
    case NormKind::Lq: return "Lq";
    case NormKind::HA: return "HA";
    case NormKind::E: return "E";
    case NormKind::XT: return "XT";
    case NormKind::ZT: return "ZT";
    case NormKind::YT: return "YT";
    }
    return "?";
}

PathNorms path_norms(const TrajectoryRecord& traj, const ExponentTriple& triple, double horizon, GridSpec grid)
{
    if (traj.nodes() == 0) throw DomainError(kModule, "empty trajectory");
    if (!(horizon >= 0.0)) throw DomainError(kModule, "negative horizon");
    const double steps = traj.dt > 0.0 ? horizon / traj.dt : 0.0;
    const double rounded = std::round(steps);
    if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, steps) || rounded + 1 > static_cast<double>(traj.nodes()))
        throw DomainError(kModule, "trajectory does not cover [0, T] on its grid");
    const auto last = static_cast<Eigen::Index>(rounded);

    const NormEvaluator norms(traj.basis, grid, triple);
    std::vector<double> h(static_cast<std::size_t>(last + 1));
    std::vector<double> e(h.size());
    for (Eigen::Index k = 0; k <= last; ++k) {
        const Eigen::VectorXd col = traj.u.col(k);
        h[static_cast<std::size_t>(k)] = norms.ha(col);
        e[static_cast<std::size_t>(k)] = norms.e(col);
    }
    const RunningNorms rn = running_norms(h, e, traj.dt, triple.p);
    PathNorms out;
    out.xt = {rn.x.back(), NormKind::XT, grid, traj.dt};
    out.zt = {rn.z.back(), NormKind::ZT, grid, traj.dt};
    out.yt = {rn.y.back(), NormKind::YT, grid, traj.dt};
    return out;
}

void write_norm_csv(std::ostream& out, std::span<const NormCsvRow> rows)
{
    out << "run_id,kind,p,q,r,T,value,grid_Nx,grid_Ny,dt\n";
    for (const auto& row : rows) {
        out << row.run_id << ',' << to_string(row.report.kind) << ',' << format_double(row.triple.p) << ','
            << format_double(row.triple.q) << ',' << format_double(row.triple.r) << ',' << format_double(row.horizon)
            << ',' << format_double(row.report.value) << ',' << row.report.grid.nx << ',' << row.report.grid.ny << ','
            << format_double(row.report.dt) << '\n';
    }
}

}  // namespace snwe
