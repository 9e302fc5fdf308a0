#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "decab/discretization.hpp"
#include "decab/geometry.hpp"
#include "decab/integrator.hpp"
#include "decab/random.hpp"
#include "decab/system.hpp"

namespace decab {

inline constexpr std::size_t kDefaultSubsteps = 256;

/// Centre of every cell of the configuration.
std::vector<Vec> reference_point(const GridDecomposition& grid, const CellConfiguration& configuration);

/// Independent uniform point in every cell of the configuration.
std::vector<Vec> random_reference_point(const GridDecomposition& grid, const CellConfiguration& configuration,
                                        Rng& rng);

/// Feedback k = k1 + k2 + k3 for one agent and one cell configuration.
///
/// Neighbours are frozen at the reference point to form the averaged field
/// f~(x) = f_i(x, x_{j,G}...), whose solution from x_{i,G} is the reference
/// trajectory. The three components cancel the neighbour-induced deviation (k1),
/// pull the initial offset linearly to zero over [0, dt] (k2) and compensate the
/// drift that offset induces along the reference (k3). Under the closed loop the
/// agent satisfies x(t) = x~(t) + (1 - t/dt)(x0 - x~(0)), so x(dt) = x~(dt)
/// whatever the neighbours do.
///
/// Immutable after construction; copies share the cached trajectory.
class HybridController {
public:
    /// Throws InvalidInput if the configuration does not match the network or a
    /// reference point lies outside its cell, IntegrationFailure if the reference
    /// endpoint is non-finite.
    HybridController(DynamicsModel model, GridDecomposition grid, DiscretizationParams params,
                     CellConfiguration configuration, std::vector<Vec> reference_point,
                     std::size_t substeps = kDefaultSubsteps);

    /// Reference point at the cell centres.
    HybridController(DynamicsModel model, GridDecomposition grid, DiscretizationParams params,
                     CellConfiguration configuration, std::size_t substeps = kDefaultSubsteps);

    AgentId agent() const noexcept { return configuration_.agent; }
    const CellConfiguration& configuration() const noexcept { return configuration_; }
    const std::vector<Vec>& reference_point() const noexcept { return reference_; }
    const DiscretizationParams& params() const noexcept { return params_; }
    const GridDecomposition& grid() const noexcept { return grid_; }
    const DynamicsModel& model() const noexcept { return model_; }
    std::size_t substeps() const noexcept { return trajectory_->substeps(); }

    /// f~(x) with neighbours frozen at the reference point.
    Vec averaged_dynamics(const Vec& x) const;

    /// x~(t) for t in [0, dt]; DomainError otherwise.
    Vec reference_trajectory(double t) const;
    const Vec& reference_endpoint() const noexcept { return trajectory_->endpoint(); }
    const DenseSolution& reference_solution() const noexcept { return *trajectory_; }

    /// -[f_i(x_i, x_bar) - f_i(x_i, x_bar_G)]
    Vec k1(const Vec& x_i, std::span<const Vec> neighbors) const;
    /// -(x0 - x_{i,G}) / dt
    Vec k2(const Vec& x0) const;
    /// -[f~(x~(t) + (1 - t/dt)(x0 - x_{i,G})) - f~(x~(t))], zero for t >= dt.
    Vec k3(double t, const Vec& x0) const;
    /// k1 + k2 + k3; defined for every t >= 0.
    Vec feedback(double t, const Vec& x_i, std::span<const Vec> neighbors, const Vec& x0) const;

    /// Cell containing x~(dt): the successor of the transition.
    const CellIndex& target_cell() const noexcept { return target_; }

    double k1_bound() const noexcept;  // L1 sqrt|N_i| (R_max + d_max)
    double k2_bound() const noexcept;  // d_max / dt
    double k3_bound() const noexcept;  // L2 d_max

private:
    DynamicsModel model_;
    GridDecomposition grid_;
    DiscretizationParams params_;
    CellConfiguration configuration_;
    std::vector<Vec> reference_;
    std::shared_ptr<const DenseSolution> trajectory_;
    CellIndex target_;
};

struct InputBoundWitness {
    double t = 0.0;
    Vec x_i;
    std::vector<Vec> neighbors;
    Vec x0;
    double magnitude = 0.0;
};

struct InputBoundReport {
    std::size_t samples = 0;
    std::size_t violations = 0;  // samples with |k| > v_max + 1e-12
    double max_magnitude = 0.0;
    std::optional<InputBoundWitness> worst;
};

/// Samples (t, x_i, neighbours, x0) over
/// [0, dt] x (S_{l_i} + B(R_max)) x prod_k (S_{l_i^k} + B(R_max)) x S_{l_i},
/// biased towards cell corners and the outer boundary of the inflated cells, and
/// records the largest |k| seen.
InputBoundReport sample_input_bound(const HybridController& controller, std::size_t samples, Rng& rng);

}  // namespace decab
