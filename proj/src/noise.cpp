#include "snwe/noise.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace snwe {

namespace {

constexpr const char* kModule = "noise";

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi)
{
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(prod);
    hi = static_cast<std::uint32_t>(prod >> 32);
}

Philox4x32::Counter keyed_block(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c, StreamTag tag)
{
    const Philox4x32::Key key{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Philox4x32::generate({a, b, c, static_cast<std::uint32_t>(tag)}, key);
}

// 53-bit uniform from two words, in [0, 1).
inline double to_unit(std::uint32_t hi, std::uint32_t lo)
{
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return static_cast<double>(bits) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::generate(Counter ctr, Key key) noexcept
{
    for (int round = 0; round < 10; ++round) {
        std::uint32_t lo0, hi0, lo1, hi1;
        mulhilo(kMul0, ctr[0], lo0, hi0);
        mulhilo(kMul1, ctr[2], lo1, hi1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

double counter_uniform(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c, StreamTag tag) noexcept
{
    const auto block = keyed_block(seed, a, b, c, tag);
    return to_unit(block[0], block[1]);
}

double counter_normal(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c, StreamTag tag) noexcept
{
    const auto block = keyed_block(seed, a, b, c, tag);
    const double u1 = 1.0 - to_unit(block[0], block[1]);  // (0, 1]
    const double u2 = to_unit(block[2], block[3]);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------

SpectralField NoiseBasis::channel(std::size_t j) const
{
    SpectralField f(basis);
    f.coeffs()[static_cast<Eigen::Index>(mode_indices.at(j))] = 1.0;
    return f;
}

nlohmann::json NoiseBasis::manifest() const
{
    return {
        {"J", channels()},
        {"mu_decay", decay},
        {"sup_sum", sup_sum},
        {"effective_summability", effective_sum},
    };
}

NoiseBasis build_noise_basis(BasisPtr basis, std::size_t channels, ModeSelection selection, double decay)
{
    if (!basis) throw DomainError(kModule, "null basis");
    if (channels == 0) throw DomainError(kModule, "noise needs at least one channel");
    if (channels > basis->size())
        throw DomainError(kModule, "requested " + std::to_string(channels) + " channels but the basis has " +
                                       std::to_string(basis->size()) + " modes");
    if (!(decay >= 0.0)) throw DomainError(kModule, "weight decay exponent must be non-negative");
    (void)selection;  // only the lowest-mode selection exists

    NoiseBasis nb;
    nb.basis = std::move(basis);
    nb.decay = decay;
    for (std::size_t j = 0; j < channels; ++j) {
        const double mu = std::pow(static_cast<double>(j + 1), -decay);
        const double sup = nb.basis->sup_norm(j);
        nb.mode_indices.push_back(j);
        nb.weights.push_back(mu);
        nb.sup_norms.push_back(sup);
        nb.sup_sum += sup * sup;
        nb.effective_sum += mu * sup * sup;
    }
    return nb;
}

// ---------------------------------------------------------------------------

WienerEnsemble::WienerEnsemble(std::uint64_t seed, std::size_t paths, std::size_t steps, std::size_t channels, double dt)
    : seed_(seed), paths_(paths), steps_(steps), channels_(channels), dt_(dt), sqrt_dt_(std::sqrt(dt))
{
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError(kModule, "time step must be positive");
    constexpr auto limit = static_cast<std::size_t>(std::numeric_limits<std::uint32_t>::max());
    if (paths == 0 || steps == 0 || channels == 0) throw DomainError(kModule, "empty ensemble");
    if (paths > limit || steps > limit || channels > limit) throw DomainError(kModule, "ensemble index exceeds 32 bits");
}

double WienerEnsemble::increment(std::size_t path, std::size_t step, std::size_t channel) const
{
    if (path >= paths_ || step >= steps_ || channel >= channels_)
        throw DomainError(kModule, "increment index out of range (path " + std::to_string(path) + ", step " +
                                       std::to_string(step) + ", channel " + std::to_string(channel) + ")");
    return sqrt_dt_ * counter_normal(seed_, static_cast<std::uint32_t>(channel), static_cast<std::uint32_t>(step),
                                     static_cast<std::uint32_t>(path), StreamTag::Wiener);
}

std::vector<double> WienerEnsemble::sample_increments(std::size_t path, std::size_t step) const
{
    std::vector<double> out(channels_);
    for (std::size_t j = 0; j < channels_; ++j) out[j] = increment(path, step, j);
    return out;
}

nlohmann::json WienerEnsemble::manifest() const
{
    return {{"seed", seed_}, {"paths", paths_}, {"steps", steps_}, {"channels", channels_}, {"dt", dt_}};
}

}  // namespace snwe
