#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "decab/controller.hpp"

namespace decab {

struct SampleRecord {
    std::vector<double> input_magnitude;  // |k_i| per agent
    std::vector<bool> contained;          // x_i in S_{l_i} + B(R_max); true at t = dt by convention
};

/// Closed-loop samples on the substep grid; states are stacked (length N*n).
struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<SampleRecord> monitor;
};

struct MonitorReport {
    std::vector<double> max_input_magnitude;
    std::vector<double> max_input_time;
    std::vector<bool> containment_ok;
    std::vector<double> endpoint_deviation;       // |x_i(dt) - x~_i(dt)|
    std::vector<double> interpolation_deviation;  // max_t |x_i - x~_i - (1 - t/dt)(x_i0 - x~_i0)|

    bool input_bound_ok(double v_max) const noexcept;
    bool containment_all() const noexcept;
};

struct ClosedLoopResult {
    Trajectory trajectory;
    MonitorReport report;
};

/// Integrates dx_i/dt = f_i(...) + k_i(t, ...; x_i0) for all agents with `substeps`
/// classical RK4 steps on [0, dt]. controllers[i] must belong to agent i and all
/// configurations must be projections of one global configuration.
/// Throws PreconditionError on inconsistent controllers or initial states outside
/// their cells, IntegrationFailure on a non-finite state.
ClosedLoopResult integrate_closed_loop(const DynamicsModel& model, std::span<const HybridController> controllers,
                                       const Vec& initial_state, std::size_t substeps);

/// Per-agent max residual of x_i(t) = x~_i(t) + (1 - t/dt)(x_i0 - x~_i0) over the samples.
std::vector<double> check_linear_interpolation(const Trajectory& trajectory,
                                               std::span<const HybridController> controllers);

/// Per-agent max |k_i| over the samples. Throws MonitorViolation naming the agent
/// and time of the first sample above v_max + 1e-12.
std::vector<double> verify_property_P_bound(const Trajectory& trajectory,
                                            std::span<const HybridController> controllers);

/// Stacks one point per agent into a length N*n vector.
Vec stack_states(std::span<const Vec> per_agent);
Vec agent_state(const Vec& stacked, AgentId i, std::size_t dimension);

}  // namespace decab
