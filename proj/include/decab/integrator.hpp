#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "decab/errors.hpp"

namespace decab {

/// Uniform grid t_k = k * horizon / substeps, with the last node pinned to horizon.
inline std::vector<double> uniform_times(double horizon, std::size_t substeps) {
    if (substeps == 0) throw InvalidInput("substep count must be positive");
    if (!(horizon > 0.0)) throw InvalidInput("integration horizon must be positive");
    std::vector<double> t(substeps + 1);
    for (std::size_t k = 0; k < substeps; ++k)
        t[k] = horizon * static_cast<double>(k) / static_cast<double>(substeps);
    t[substeps] = horizon;
    return t;
}

/// One classical fourth-order Runge-Kutta step. `rhs(t, x)` returns dx/dt.
template <class Rhs>
Eigen::VectorXd rk4_step(Rhs&& rhs, double t, const Eigen::VectorXd& x, double h) {
    const Eigen::VectorXd k1 = rhs(t, x);
    const Eigen::VectorXd k2 = rhs(t + 0.5 * h, x + (0.5 * h) * k1);
    const Eigen::VectorXd k3 = rhs(t + 0.5 * h, x + (0.5 * h) * k2);
    const Eigen::VectorXd k4 = rhs(t + h, x + h * k3);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Fixed-step solution with piecewise cubic Hermite dense output built from the
/// node states and node derivatives.
class DenseSolution {
public:
    DenseSolution(std::vector<double> times, std::vector<Eigen::VectorXd> states,
                  std::vector<Eigen::VectorXd> derivatives)
        : times_(std::move(times)), states_(std::move(states)), derivatives_(std::move(derivatives)) {}

    double start() const noexcept { return times_.front(); }
    double end() const noexcept { return times_.back(); }
    std::size_t substeps() const noexcept { return times_.size() - 1; }
    const std::vector<double>& times() const noexcept { return times_; }
    const std::vector<Eigen::VectorXd>& states() const noexcept { return states_; }
    const Eigen::VectorXd& endpoint() const noexcept { return states_.back(); }

    /// t must lie in [start, end].
    Eigen::VectorXd operator()(double t) const {
        if (!(t >= start() && t <= end())) throw DomainError("dense output queried outside its time span");
        const double h0 = times_[1] - times_[0];
        auto k = static_cast<std::size_t>(std::floor((t - start()) / h0));
        k = std::min(k, substeps() - 1);
        while (k > 0 && t < times_[k]) --k;
        while (k + 1 < substeps() && t >= times_[k + 1]) ++k;
        const double h = times_[k + 1] - times_[k];
        const double s = (t - times_[k]) / h;
        if (s == 0.0) return states_[k];
        if (s == 1.0) return states_[k + 1];
        const double s2 = s * s;
        const double s3 = s2 * s;
        return (2 * s3 - 3 * s2 + 1) * states_[k] + ((s3 - 2 * s2 + s) * h) * derivatives_[k] +
               (-2 * s3 + 3 * s2) * states_[k + 1] + ((s3 - s2) * h) * derivatives_[k + 1];
    }

private:
    std::vector<double> times_;
    std::vector<Eigen::VectorXd> states_;
    std::vector<Eigen::VectorXd> derivatives_;
};

/// Integrates an autonomous field dx/dt = field(x) on [0, horizon].
template <class Field>
DenseSolution integrate_dense(Field&& field, Eigen::VectorXd x0, double horizon, std::size_t substeps) {
    std::vector<double> times = uniform_times(horizon, substeps);
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> derivatives;
    states.reserve(times.size());
    derivatives.reserve(times.size());
    auto rhs = [&](double, const Eigen::VectorXd& x) { return field(x); };
    states.push_back(std::move(x0));
    for (std::size_t k = 0; k < substeps; ++k) {
        derivatives.push_back(field(states[k]));
        states.push_back(rk4_step(rhs, times[k], states[k], times[k + 1] - times[k]));
        if (!states.back().allFinite()) throw IntegrationFailure("reference integration produced a non-finite state");
    }
    derivatives.push_back(field(states.back()));
    return DenseSolution(std::move(times), std::move(states), std::move(derivatives));
}

}  // namespace decab
