#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <vector>

#include "snwe/spectral_domain.hpp"

namespace snwe {

/// Time-indexed (u, u_t) in coefficient space on a uniform grid t_k = k*dt,
/// plus the running path norms Z_t, X_t, Y_t once attached.
struct TrajectoryRecord {
    BasisPtr basis;
    double dt = 0.0;
    /// modes x nodes
    Eigen::MatrixXd u;
    /// modes x nodes; may be empty for position-only records.
    Eigen::MatrixXd ut;
    std::vector<double> z_running;
    std::vector<double> x_running;
    std::vector<double> y_running;
    /// Per-node trigger bits, see StoppingTrigger.
    std::vector<std::uint8_t> flags;

    TrajectoryRecord() = default;
    TrajectoryRecord(BasisPtr b, double step, std::size_t nodes, bool with_velocity = true)
        : basis(std::move(b)), dt(step),
          u(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(basis->size()), static_cast<Eigen::Index>(nodes))),
          ut(with_velocity ? Eigen::MatrixXd::Zero(u.rows(), u.cols()) : Eigen::MatrixXd())
    {}

    std::size_t nodes() const noexcept { return static_cast<std::size_t>(u.cols()); }
    double time(std::size_t k) const noexcept { return static_cast<double>(k) * dt; }
    double horizon() const noexcept { return nodes() == 0 ? 0.0 : time(nodes() - 1); }
    bool has_velocity() const noexcept { return ut.size() != 0; }
    bool has_running_norms() const noexcept { return y_running.size() == nodes() && nodes() > 0; }

    SpectralField position(std::size_t k) const { return SpectralField(basis, u.col(static_cast<Eigen::Index>(k))); }
    SpectralField velocity(std::size_t k) const { return SpectralField(basis, ut.col(static_cast<Eigen::Index>(k))); }
};

}  // namespace snwe
