#pragma once

// Cylindrical Wiener noise: an orthonormal channel family built from
// Laplacian eigenfunctions with summable weights, and counter-based Gaussian
// increments that are a pure function of (seed, path, step, channel).

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "snwe/spectral_domain.hpp"

namespace snwe {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept;
};

/// Stream tags keep independent users of the generator apart.
enum class StreamTag : std::uint32_t {
    Wiener = 0x57494e52u,
    SampleField = 0x4649454cu,
    Bootstrap = 0x424f4f54u,
};

/// N(0,1) draw keyed by (seed, a, b, c, tag). Box-Muller on one Philox block.
double counter_normal(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c, StreamTag tag) noexcept;
/// U[0,1) draw keyed the same way.
double counter_uniform(std::uint64_t seed, std::uint32_t a, std::uint32_t b, std::uint32_t c, StreamTag tag) noexcept;

enum class ModeSelection { Lowest };

/// Channels f_j = e_{m(j)} (first J eigenfunctions); the channel action of
/// the diffusion is weighted by mu_j = j^{-decay}.
struct NoiseBasis {
    BasisPtr basis;
    std::vector<std::size_t> mode_indices;
    std::vector<double> weights;
    std::vector<double> sup_norms;
    /// sum_j ||f_j||_inf^2 over the J channels (grows linearly in J)
    double sup_sum = 0.0;
    /// sum_j mu_j ||f_j||_inf^2
    double effective_sum = 0.0;
    double decay = 2.0;

    std::size_t channels() const noexcept { return mode_indices.size(); }
    SpectralField channel(std::size_t j) const;
    nlohmann::json manifest() const;
};

NoiseBasis build_noise_basis(BasisPtr basis, std::size_t channels, ModeSelection selection = ModeSelection::Lowest,
                             double decay = 2.0);

/// Brownian increments dW_{k,j} ~ N(0, dt) for every (path, step, channel).
/// Nothing is stored; each increment is regenerated from its key.
class WienerEnsemble {
public:
    WienerEnsemble(std::uint64_t seed, std::size_t paths, std::size_t steps, std::size_t channels, double dt);

    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return steps_; }
    std::size_t channels() const noexcept { return channels_; }
    double dt() const noexcept { return dt_; }

    double increment(std::size_t path, std::size_t step, std::size_t channel) const;
    std::vector<double> sample_increments(std::size_t path, std::size_t step) const;

    nlohmann::json manifest() const;

private:
    std::uint64_t seed_;
    std::size_t paths_;
    std::size_t steps_;
    std::size_t channels_;
    double dt_;
    double sqrt_dt_;
};

}  // namespace snwe
