#include "decab/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace decab {

namespace {

constexpr double kBoundSlack = 1e-12;

std::vector<CellIndex> global_configuration(std::span<const HybridController> controllers) {
    std::vector<CellIndex> cells;
    cells.reserve(controllers.size());
    for (const auto& c : controllers) cells.push_back(c.configuration().own());
    return cells;
}

void check_consistency(const DynamicsModel& model, std::span<const HybridController> controllers) {
    const auto& net = model.network();
    if (controllers.size() != net.agent_count())
        throw PreconditionError("expected one controller per agent (" + std::to_string(net.agent_count()) + ")");
    const auto global = global_configuration(controllers);
    const double dt = controllers.front().params().dt;
    for (AgentId i = 0; i < controllers.size(); ++i) {
        const auto& c = controllers[i];
        if (c.agent() != i) throw PreconditionError("controller " + std::to_string(i) + " belongs to another agent");
        if (c.params().dt != dt) throw PreconditionError("controllers disagree on the time step");
        if (c.configuration() != net.project_configuration(global, i))
            throw PreconditionError("configuration of agent " + std::to_string(i) +
                                    " is not the projection of the global configuration");
    }
}

// Evaluates every agent's feedback at (t, X); optionally returns f_i + k_i.
struct LoopField {
    const DynamicsModel& model;
    std::span<const HybridController> controllers;
    const Vec& x0;

    void inputs(double t, const Vec& x, std::vector<Vec>& k, Vec* velocity) const {
        const auto& net = model.network();
        const auto n = static_cast<Eigen::Index>(net.state_dimension());
        for (AgentId i = 0; i < controllers.size(); ++i) {
            auto [self, neighbors] = local_states(net, i, x);
            const Vec self0 = x0.segment(static_cast<Eigen::Index>(i) * n, n);
            k[i] = controllers[i].feedback(t, self, neighbors, self0);
            if (velocity)
                velocity->segment(static_cast<Eigen::Index>(i) * n, n) = model.evaluate_local(i, self, neighbors) + k[i];
        }
    }
};

}  // namespace

bool MonitorReport::input_bound_ok(double v_max) const noexcept {
    return std::all_of(max_input_magnitude.begin(), max_input_magnitude.end(),
                       [v_max](double m) { return m <= v_max + kBoundSlack; });
}

bool MonitorReport::containment_all() const noexcept {
    return std::all_of(containment_ok.begin(), containment_ok.end(), [](bool b) { return b; });
}

Vec stack_states(std::span<const Vec> per_agent) {
    if (per_agent.empty()) return {};
    const auto n = per_agent.front().size();
    Vec x(n * static_cast<Eigen::Index>(per_agent.size()));
    for (std::size_t i = 0; i < per_agent.size(); ++i) {
        if (per_agent[i].size() != n) throw InvalidInput("agent states have different dimensions");
        x.segment(static_cast<Eigen::Index>(i) * n, n) = per_agent[i];
    }
    return x;
}

Vec agent_state(const Vec& stacked, AgentId i, std::size_t dimension) {
    const auto n = static_cast<Eigen::Index>(dimension);
    if ((static_cast<Eigen::Index>(i) + 1) * n > stacked.size()) throw InvalidInput("agent index beyond stacked state");
    return stacked.segment(static_cast<Eigen::Index>(i) * n, n);
}

ClosedLoopResult integrate_closed_loop(const DynamicsModel& model, std::span<const HybridController> controllers,
                                       const Vec& initial_state, std::size_t substeps) {
    check_consistency(model, controllers);
    const auto& net = model.network();
    const std::size_t N = net.agent_count();
    const std::size_t dim = net.state_dimension();
    const auto& grid = controllers.front().grid();
    const double dt = controllers.front().params().dt;
    const double radius = controllers.front().params().R_max;

    if (initial_state.size() != static_cast<Eigen::Index>(N * dim))
        throw PreconditionError("initial state has wrong length");
    if (!initial_state.allFinite()) throw PreconditionError("initial state is not finite");
    for (AgentId i = 0; i < N; ++i) {
        const CellIndex& own = controllers[i].configuration().own();
        if (grid.cell_of(agent_state(initial_state, i, dim)) != own)
            throw PreconditionError("initial state of agent " + std::to_string(i) + " is outside cell " +
                                    own.to_string());
    }

    const LoopField field{model, controllers, initial_state};
    ClosedLoopResult out;
    Trajectory& traj = out.trajectory;
    traj.times = uniform_times(dt, substeps);
    traj.states.reserve(substeps + 1);
    traj.monitor.reserve(substeps + 1);

    MonitorReport& rep = out.report;
    rep.max_input_magnitude.assign(N, 0.0);
    rep.max_input_time.assign(N, 0.0);
    rep.containment_ok.assign(N, true);
    rep.endpoint_deviation.assign(N, 0.0);
    rep.interpolation_deviation.assign(N, 0.0);

    std::vector<Vec> k(N);
    Vec velocity(initial_state.size());
    auto rhs = [&](double t, const Vec& x) {
        field.inputs(t, x, k, &velocity);
        return velocity;
    };

    auto record = [&](std::size_t step) {
        const double t = traj.times[step];
        const Vec& x = traj.states[step];
        field.inputs(t, x, k, nullptr);
        SampleRecord sample;
        sample.input_magnitude.resize(N);
        sample.contained.resize(N);
        for (AgentId i = 0; i < N; ++i) {
            const Vec xi = agent_state(x, i, dim);
            const double mag = k[i].norm();
            sample.input_magnitude[i] = mag;
            if (mag > rep.max_input_magnitude[i]) {
                rep.max_input_magnitude[i] = mag;
                rep.max_input_time[i] = t;
            }
            // Containment is stated on [0, dt); the endpoint is checked separately.
            const bool inside = step == substeps ||
                                grid.inflated_contains(controllers[i].configuration().own(), radius, xi);
            sample.contained[i] = inside;
            if (!inside) rep.containment_ok[i] = false;

            const Vec offset = agent_state(initial_state, i, dim) - controllers[i].reference_point().front();
            const Vec predicted = controllers[i].reference_trajectory(t) + (1.0 - t / dt) * offset;
            rep.interpolation_deviation[i] = std::max(rep.interpolation_deviation[i], (xi - predicted).norm());
        }
        traj.monitor.push_back(std::move(sample));
    };

    traj.states.push_back(initial_state);
    record(0);
    for (std::size_t s = 0; s < substeps; ++s) {
        Vec next = rk4_step(rhs, traj.times[s], traj.states[s], traj.times[s + 1] - traj.times[s]);
        if (!next.allFinite()) {
            std::ostringstream os;
            os << "closed-loop state became non-finite at t=" << traj.times[s + 1];
            throw IntegrationFailure(os.str());
        }
        traj.states.push_back(std::move(next));
        record(s + 1);
    }
    for (AgentId i = 0; i < N; ++i)
        rep.endpoint_deviation[i] =
            (agent_state(traj.states.back(), i, dim) - controllers[i].reference_endpoint()).norm();
    return out;
}

std::vector<double> check_linear_interpolation(const Trajectory& trajectory,
                                               std::span<const HybridController> controllers) {
    const std::size_t N = controllers.size();
    const std::size_t dim = controllers.front().grid().dimension();
    const double dt = controllers.front().params().dt;
    const Vec& x0 = trajectory.states.front();
    std::vector<double> worst(N, 0.0);
    for (std::size_t s = 0; s < trajectory.times.size(); ++s) {
        const double t = trajectory.times[s];
        for (AgentId i = 0; i < N; ++i) {
            const Vec offset = agent_state(x0, i, dim) - controllers[i].reference_point().front();
            const Vec residual = agent_state(trajectory.states[s], i, dim) - controllers[i].reference_trajectory(t) -
                                 (1.0 - t / dt) * offset;
            worst[i] = std::max(worst[i], residual.norm());
        }
    }
    return worst;
}

std::vector<double> verify_property_P_bound(const Trajectory& trajectory,
                                            std::span<const HybridController> controllers) {
    const auto& model = controllers.front().model();
    const auto& net = model.network();
    const std::size_t N = controllers.size();
    const std::size_t dim = net.state_dimension();
    const double v_max = controllers.front().params().v_max;
    const Vec& x0 = trajectory.states.front();
    std::vector<double> worst(N, 0.0);
    for (std::size_t s = 0; s < trajectory.times.size(); ++s) {
        const double t = trajectory.times[s];
        for (AgentId i = 0; i < N; ++i) {
            auto [self, neighbors] = local_states(net, i, trajectory.states[s]);
            const double mag = controllers[i].feedback(t, self, neighbors, agent_state(x0, i, dim)).norm();
            worst[i] = std::max(worst[i], mag);
            if (mag > v_max + kBoundSlack) {
                std::ostringstream os;
                os.precision(17);
                os << "input bound violated by agent " << i << " at t=" << t << ": |k|=" << mag << " > v_max=" << v_max;
                throw MonitorViolation(os.str());
            }
        }
    }
    return worst;
}

}  // namespace decab
