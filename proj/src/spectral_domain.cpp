#include "snwe/spectral_domain.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <tuple>

namespace snwe {

namespace {

constexpr const char* kModule = "spectral_domain";

}  // namespace

std::string to_string(Boundary bc)
{
    return bc == Boundary::Dirichlet ? "dirichlet" : "neumann";
}

Boundary boundary_from_string(const std::string& name)
{
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower == "dirichlet") return Boundary::Dirichlet;
    if (lower == "neumann") return Boundary::Neumann;
    throw DomainError(kModule, "unknown boundary condition '" + name + "'");
}

// ---------------------------------------------------------------------------
// SpectralBasis

std::shared_ptr<const SpectralBasis> SpectralBasis::build(double lx, double ly, Boundary bc, double cutoff)
{
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
        throw DomainError(kModule, "domain lengths must be positive and finite");
    if (!(cutoff > 0.0) || !std::isfinite(cutoff))
        throw DomainError(kModule, "frequency cutoff must be positive and finite");

    const double kx = std::numbers::pi / lx;
    const double ky = std::numbers::pi / ly;
    const int first = bc == Boundary::Dirichlet ? 1 : 0;
    const int jx_max = static_cast<int>(std::floor(cutoff / kx)) + 1;
    const int jy_max = static_cast<int>(std::floor(cutoff / ky)) + 1;
    // Relative slack so that cutoffs placed exactly on an eigenvalue keep it.
    const double bound = cutoff * cutoff * (1.0 + 1e-12);

    std::vector<std::tuple<double, int, int>> found;
    for (int jx = first; jx <= jx_max; ++jx) {
        for (int jy = first; jy <= jy_max; ++jy) {
            const double ev = (jx * kx) * (jx * kx) + (jy * ky) * (jy * ky);
            if (ev <= bound) found.emplace_back(ev, jx, jy);
        }
    }
    if (found.empty())
        throw DomainError(kModule, "empty basis: no eigenvalue below the cutoff");
    std::sort(found.begin(), found.end());

    auto basis = std::shared_ptr<SpectralBasis>(new SpectralBasis());
    basis->lx_ = lx;
    basis->ly_ = ly;
    basis->bc_ = bc;
    basis->cutoff_ = cutoff;
    basis->modes_.reserve(found.size());
    for (const auto& [ev, jx, jy] : found) {
        basis->modes_.push_back({jx, jy});
        basis->eigenvalues_.push_back(ev);
        basis->frequencies_.push_back(std::sqrt(ev));
        basis->max_jx_ = std::max(basis->max_jx_, jx);
        basis->max_jy_ = std::max(basis->max_jy_, jy);
    }
    return basis;
}

std::optional<std::size_t> SpectralBasis::index_of(Mode m) const
{
    auto it = std::find(modes_.begin(), modes_.end(), m);
    if (it == modes_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - modes_.begin());
}

double SpectralBasis::factor(int j, double x, double length) const
{
    const double arg = j * std::numbers::pi * x / length;
    if (bc_ == Boundary::Dirichlet) return std::sqrt(2.0 / length) * std::sin(arg);
    if (j == 0) return std::sqrt(1.0 / length);
    return std::sqrt(2.0 / length) * std::cos(arg);
}

double SpectralBasis::eigenfunction(std::size_t j, double x, double y) const
{
    const Mode& m = modes_.at(j);
    return factor(m.jx, x, lx_) * factor(m.jy, y, ly_);
}

double SpectralBasis::sup_norm(std::size_t j) const
{
    const Mode& m = modes_.at(j);
    auto sup1 = [&](int idx, double length) {
        if (bc_ == Boundary::Neumann && idx == 0) return std::sqrt(1.0 / length);
        return std::sqrt(2.0 / length);
    };
    return sup1(m.jx, lx_) * sup1(m.jy, ly_);
}

bool SpectralBasis::same_as(const SpectralBasis& other) const
{
    if (this == &other) return true;
    return lx_ == other.lx_ && ly_ == other.ly_ && bc_ == other.bc_ && modes_ == other.modes_;
}

nlohmann::json SpectralBasis::to_json() const
{
    nlohmann::json modes = nlohmann::json::array();
    for (const auto& m : modes_) modes.push_back({m.jx, m.jy});
    return {
        {"Lx", lx_},
        {"Ly", ly_},
        {"bc", to_string(bc_)},
        {"Lambda", cutoff_},
        {"modes", modes},
        {"eigenvalues", eigenvalues_},
    };
}

std::shared_ptr<const SpectralBasis> SpectralBasis::from_json(const nlohmann::json& j)
{
    auto basis = build(j.at("Lx").get<double>(), j.at("Ly").get<double>(),
                       boundary_from_string(j.at("bc").get<std::string>()), j.at("Lambda").get<double>());
    if (j.contains("modes")) {
        const auto& modes = j.at("modes");
        bool match = modes.size() == basis->size();
        for (std::size_t i = 0; match && i < modes.size(); ++i) {
            match = modes[i].at(0).get<int>() == basis->modes_[i].jx && modes[i].at(1).get<int>() == basis->modes_[i].jy;
        }
        if (!match) throw DomainError(kModule, "serialized mode list does not match the rebuilt basis");
    }
    return basis;
}

// ---------------------------------------------------------------------------
// SpectralField

SpectralField::SpectralField(BasisPtr basis)
    : basis_(std::move(basis))
{
    if (!basis_) throw DomainError(kModule, "null basis");
    coeffs_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis_->size()));
}

SpectralField::SpectralField(BasisPtr basis, Eigen::VectorXd coeffs)
    : basis_(std::move(basis)), coeffs_(std::move(coeffs))
{
    if (!basis_) throw DomainError(kModule, "null basis");
    if (static_cast<std::size_t>(coeffs_.size()) != basis_->size())
        throw DomainError(kModule, "coefficient count " + std::to_string(coeffs_.size()) + " does not match basis size " +
                                       std::to_string(basis_->size()));
    if (!coeffs_.allFinite()) throw DomainError(kModule, "non-finite coefficient");
}

double SpectralField::coefficient(Mode m) const
{
    auto idx = basis_->index_of(m);
    return idx ? coeffs_[static_cast<Eigen::Index>(*idx)] : 0.0;
}

SpectralField SpectralField::single_mode(BasisPtr basis, Mode m, double value)
{
    auto idx = basis->index_of(m);
    if (!idx) throw DomainError(kModule, "mode (" + std::to_string(m.jx) + "," + std::to_string(m.jy) + ") not in basis");
    SpectralField f(std::move(basis));
    f.coeffs_[static_cast<Eigen::Index>(*idx)] = value;
    return f;
}

void require_same_basis(const SpectralBasis& a, const SpectralBasis& b, const char* module)
{
    if (!a.same_as(b)) throw DomainError(module, "fields live on different bases");
}

SpectralField& SpectralField::operator+=(const SpectralField& other)
{
    require_same_basis(*basis_, *other.basis_, kModule);
    coeffs_ += other.coeffs_;
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& other)
{
    require_same_basis(*basis_, *other.basis_, kModule);
    coeffs_ -= other.coeffs_;
    return *this;
}

SpectralField& SpectralField::operator*=(double s)
{
    coeffs_ *= s;
    return *this;
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

// ---------------------------------------------------------------------------
// Grids and transforms

GridSpec default_grid(const SpectralBasis& basis, int minimum)
{
    auto pick = [minimum](int max_index) {
        int n = std::max(2 * max_index + 2, minimum);
        return n + (n % 2);
    };
    return {pick(basis.max_jx()), pick(basis.max_jy())};
}

Eigen::VectorXd trapezoid_weights(int n, double length)
{
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n + 1, length / n);
    w[0] *= 0.5;
    w[n] *= 0.5;
    return w;
}

SpectralTransform::SpectralTransform(BasisPtr basis, GridSpec grid)
    : basis_(std::move(basis)), grid_(grid)
{
    if (!basis_) throw DomainError(kModule, "null basis");
    if (grid_.nx < 2 * basis_->max_jx() + 2 || grid_.ny < 2 * basis_->max_jy() + 2)
        throw DomainError(kModule, "grid " + std::to_string(grid_.nx) + "x" + std::to_string(grid_.ny) +
                                       " aliases the basis (need n >= 2*max index + 2)");

    auto table = [this](int max_j, int n, double length) {
        Eigen::MatrixXd t(max_j + 1, n + 1);
        for (int j = 0; j <= max_j; ++j)
            for (int i = 0; i <= n; ++i) t(j, i) = basis_->factor(j, i * length / n, length);
        return t;
    };
    phi_x_ = table(basis_->max_jx(), grid_.nx, basis_->lx());
    phi_y_ = table(basis_->max_jy(), grid_.ny, basis_->ly());
    const Eigen::VectorXd wx = trapezoid_weights(grid_.nx, basis_->lx());
    const Eigen::VectorXd wy = trapezoid_weights(grid_.ny, basis_->ly());
    weighted_phi_x_ = phi_x_ * wx.asDiagonal();
    weighted_phi_y_ = phi_y_ * wy.asDiagonal();
    weights_ = wx * wy.transpose();
}

PhysicalField SpectralTransform::synthesize(const Eigen::VectorXd& coeffs) const
{
    if (static_cast<std::size_t>(coeffs.size()) != basis_->size())
        throw DomainError(kModule, "coefficient vector does not match the transform basis");
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(basis_->max_jx() + 1, basis_->max_jy() + 1);
    const auto modes = basis_->modes();
    // Only the leading block of indices carrying nonzero coefficients enters
    // the products below.
    Eigen::Index ax = 0;
    Eigen::Index ay = 0;
    for (std::size_t j = 0; j < modes.size(); ++j) {
        const double c = coeffs[static_cast<Eigen::Index>(j)];
        dense(modes[j].jx, modes[j].jy) = c;
        if (c != 0.0) {
            ax = std::max<Eigen::Index>(ax, modes[j].jx + 1);
            ay = std::max<Eigen::Index>(ay, modes[j].jy + 1);
        }
    }

    PhysicalField f;
    f.lx = basis_->lx();
    f.ly = basis_->ly();
    f.bc = basis_->bc();
    f.grid = grid_;
    if (ax == 0) {
        f.values = Eigen::MatrixXd::Zero(grid_.nx + 1, grid_.ny + 1);
        return f;
    }
    f.values.noalias() = phi_x_.topRows(ax).transpose() * (dense.topLeftCorner(ax, ay) * phi_y_.topRows(ay));
    return f;
}

Eigen::VectorXd SpectralTransform::analyze_coeffs(const PhysicalField& f) const
{
    if (f.grid != grid_ || f.values.rows() != grid_.nx + 1 || f.values.cols() != grid_.ny + 1)
        throw DomainError(kModule, "physical field grid does not match the transform grid");
    if (f.bc != basis_->bc() || f.lx != basis_->lx() || f.ly != basis_->ly())
        throw DomainError(kModule, "physical field domain does not match the basis");
    const Eigen::MatrixXd dense = weighted_phi_x_ * f.values * weighted_phi_y_.transpose();
    const auto modes = basis_->modes();
    Eigen::VectorXd c(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t j = 0; j < modes.size(); ++j) c[static_cast<Eigen::Index>(j)] = dense(modes[j].jx, modes[j].jy);
    return c;
}

SpectralField SpectralTransform::analyze(const PhysicalField& f) const
{
    return SpectralField(basis_, analyze_coeffs(f));
}

PhysicalField synthesize(const SpectralField& u, GridSpec grid)
{
    return SpectralTransform(u.basis_ptr(), grid).synthesize(u);
}

SpectralField analyze(const PhysicalField& f, const BasisPtr& basis)
{
    return SpectralTransform(basis, f.grid).analyze(f);
}

// ---------------------------------------------------------------------------
// Propagators

SpectralField spectral_projector(const SpectralField& u, int lambda)
{
    SpectralField out(u.basis_ptr());
    const auto freq = u.basis().frequencies();
    for (std::size_t j = 0; j < freq.size(); ++j) {
        if (freq[j] >= lambda && freq[j] < lambda + 1) out.coeffs()[static_cast<Eigen::Index>(j)] = u[j];
    }
    return out;
}

namespace {

template <typename Multiplier>
SpectralField apply_multiplier(const SpectralField& u, Multiplier&& m)
{
    SpectralField out(u.basis_ptr());
    const auto freq = u.basis().frequencies();
    for (std::size_t j = 0; j < freq.size(); ++j) out.coeffs()[static_cast<Eigen::Index>(j)] = m(freq[j]) * u[j];
    return out;
}

}  // namespace

SpectralField apply_cos_group(const SpectralField& u, double t)
{
    return apply_multiplier(u, [t](double lam) { return std::cos(lam * t); });
}

SpectralField apply_sinc_group(const SpectralField& u, double t)
{
    return apply_multiplier(u, [t](double lam) { return sinc_multiplier(lam, t); });
}

ComplexField apply_rounded_group(const SpectralField& u, double t)
{
    ComplexField out{SpectralField(u.basis_ptr()), SpectralField(u.basis_ptr())};
    const auto freq = u.basis().frequencies();
    for (std::size_t j = 0; j < freq.size(); ++j) {
        // Reduce k*t modulo 2*pi through the integer k so t = 2*pi stays exact.
        const double k = std::floor(freq[j]);
        const std::complex<double> phase = std::polar(1.0, std::remainder(k * t, 2.0 * std::numbers::pi));
        out.re.coeffs()[static_cast<Eigen::Index>(j)] = phase.real() * u[j];
        out.im.coeffs()[static_cast<Eigen::Index>(j)] = phase.imag() * u[j];
    }
    return out;
}

SpectralField rounded_minus_sqrt(const SpectralField& u)
{
    return apply_multiplier(u, [](double lam) { return std::floor(lam) - lam; });
}

std::pair<SpectralField, SpectralField> pair_evolve(const SpectralField& u, const SpectralField& v, double t)
{
    require_same_basis(u.basis(), v.basis(), kModule);
    SpectralField pos(u.basis_ptr());
    SpectralField vel(u.basis_ptr());
    const auto freq = u.basis().frequencies();
    for (std::size_t j = 0; j < freq.size(); ++j) {
        const double lam = freq[j];
        const double c = std::cos(lam * t);
        const double s = std::sin(lam * t);
        const auto idx = static_cast<Eigen::Index>(j);
        pos.coeffs()[idx] = c * u[j] + sinc_multiplier(lam, t) * v[j];
        vel.coeffs()[idx] = -lam * s * u[j] + c * v[j];
    }
    return {std::move(pos), std::move(vel)};
}

}  // namespace snwe
