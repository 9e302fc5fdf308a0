#include "decab/controller.hpp"

#include <algorithm>
#include <cmath>

namespace decab {

namespace {

constexpr double kBoundSlack = 1e-12;

Vec point_in_box(const Box& b, Rng& rng, bool corner) {
    if (!corner) return rng.uniform_in_box(b.lower, b.upper);
    Vec x(b.lower.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = rng.coin() ? b.lower[k] : b.upper[k];
    return x;
}

// Point of closure(box) + B(radius); half of the draws sit on the outer boundary.
Vec point_in_inflated(const Box& b, double radius, Rng& rng) {
    Vec y = point_in_box(b, rng, rng.coin(0.25));
    const auto n = y.size();
    if (rng.coin()) return y + radius * rng.unit_vector(n);
    return y + rng.in_ball(n, radius);
}

}  // namespace

std::vector<Vec> reference_point(const GridDecomposition& grid, const CellConfiguration& configuration) {
    std::vector<Vec> out;
    out.reserve(configuration.cells.size());
    for (const auto& z : configuration.cells) out.push_back(grid.cell_center(z));
    return out;
}

std::vector<Vec> random_reference_point(const GridDecomposition& grid, const CellConfiguration& configuration,
                                        Rng& rng) {
    std::vector<Vec> out;
    out.reserve(configuration.cells.size());
    for (const auto& z : configuration.cells) {
        const Box b = grid.cell_box(z);
        out.push_back(rng.uniform_in_box(b.lower, b.upper));
    }
    return out;
}

HybridController::HybridController(DynamicsModel model, GridDecomposition grid, DiscretizationParams params,
                                   CellConfiguration configuration, std::vector<Vec> reference_point,
                                   std::size_t substeps)
    : model_(std::move(model)),
      grid_(std::move(grid)),
      params_(std::move(params)),
      configuration_(std::move(configuration)),
      reference_(std::move(reference_point)) {
    const auto& net = model_.network();
    net.check_agent(configuration_.agent);
    if (grid_.dimension() != net.state_dimension()) throw InvalidInput("grid and network dimensions differ");
    if (configuration_.cells.size() != net.degree(configuration_.agent) + 1)
        throw InvalidInput("configuration " + configuration_.to_string() + " does not match the degree of agent " +
                           std::to_string(configuration_.agent));
    if (reference_.size() != configuration_.cells.size())
        throw InvalidInput("reference point needs one entry per configuration cell");
    for (std::size_t k = 0; k < reference_.size(); ++k)
        if (!grid_.inflated_contains(configuration_.cells[k], 0.0, reference_[k]))
            throw InvalidInput("reference point component " + std::to_string(k) + " lies outside cell " +
                               configuration_.cells[k].to_string());
    if (!(params_.dt > 0.0)) throw InvalidInput("time step must be positive");

    trajectory_ = std::make_shared<const DenseSolution>(
        integrate_dense([this](const Vec& x) { return averaged_dynamics(x); }, reference_.front(), params_.dt,
                        substeps));
    if (!trajectory_->endpoint().allFinite()) throw IntegrationFailure("reference endpoint is not finite");
    target_ = grid_.cell_of(trajectory_->endpoint());
}

HybridController::HybridController(DynamicsModel model, GridDecomposition grid, DiscretizationParams params,
                                   CellConfiguration configuration, std::size_t substeps)
    : HybridController(model, grid, params, configuration, decab::reference_point(grid, configuration), substeps) {}

Vec HybridController::averaged_dynamics(const Vec& x) const {
    return model_.evaluate_local(agent(), x, std::span<const Vec>(reference_).subspan(1));
}

Vec HybridController::reference_trajectory(double t) const {
    if (!(t >= 0.0 && t <= params_.dt)) throw DomainError("reference trajectory queried outside [0, dt]");
    return (*trajectory_)(t);
}

Vec HybridController::k1(const Vec& x_i, std::span<const Vec> neighbors) const {
    return -(model_.evaluate_local(agent(), x_i, neighbors) - averaged_dynamics(x_i));
}

Vec HybridController::k2(const Vec& x0) const { return -(x0 - reference_.front()) / params_.dt; }

Vec HybridController::k3(double t, const Vec& x0) const {
    if (t >= params_.dt) return Vec::Zero(x0.size());
    const double tau = std::max(t, 0.0);
    const Vec ref = (*trajectory_)(tau);
    const double weight = 1.0 - tau / params_.dt;
    return -(averaged_dynamics(ref + weight * (x0 - reference_.front())) - averaged_dynamics(ref));
}

Vec HybridController::feedback(double t, const Vec& x_i, std::span<const Vec> neighbors, const Vec& x0) const {
    return k1(x_i, neighbors) + k2(x0) + k3(t, x0);
}

double HybridController::k1_bound() const noexcept {
    const auto deg = static_cast<double>(configuration_.neighbor_count());
    return params_.L1 * std::sqrt(deg) * (params_.R_max + params_.d_max);
}

double HybridController::k2_bound() const noexcept { return params_.d_max / params_.dt; }

double HybridController::k3_bound() const noexcept { return params_.L2 * params_.d_max; }

InputBoundReport sample_input_bound(const HybridController& controller, std::size_t samples, Rng& rng) {
    const auto& grid = controller.grid();
    const auto& cells = controller.configuration().cells;
    const double radius = controller.params().R_max;
    const double dt = controller.params().dt;
    const double v_max = controller.params().v_max;
    std::vector<Box> boxes;
    boxes.reserve(cells.size());
    for (const auto& z : cells) boxes.push_back(grid.cell_box(z));

    InputBoundReport report;
    report.samples = samples;
    std::vector<Vec> neighbors(cells.size() - 1);
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = rng.coin(0.1) ? 0.0 : rng.uniform(0.0, dt);
        const Vec x_i = point_in_inflated(boxes[0], radius, rng);
        for (std::size_t k = 0; k < neighbors.size(); ++k) neighbors[k] = point_in_inflated(boxes[k + 1], radius, rng);
        const Vec x0 = point_in_box(boxes[0], rng, rng.coin(0.25));
        const double mag = controller.feedback(t, x_i, neighbors, x0).norm();
        if (mag > v_max + kBoundSlack) ++report.violations;
        if (mag > report.max_magnitude) {
            report.max_magnitude = mag;
            report.worst = InputBoundWitness{t, x_i, neighbors, x0, mag};
        }
    }
    return report;
}

}  // namespace decab
