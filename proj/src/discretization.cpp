#include "decab/discretization.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace decab {

namespace {

// Absolute slack applied to every closed-form admissibility comparison.
constexpr double kSlack = 1e-12;

std::string fmt(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

double discriminant(const QuadraticConstants& q, double d_max) {
    return q.v_max * q.v_max - 4.0 * q.M * q.coupling * d_max;
}

}  // namespace

CouplingConstants coupling_constant(const DynamicsModel& model) {
    const auto& c = model.constants();
    const auto& net = model.network();
    CouplingConstants out;
    out.per_agent.reserve(net.agent_count());
    for (AgentId i = 0; i < net.agent_count(); ++i) {
        const double li = 2.0 * c.L2 + 4.0 * c.L1 * std::sqrt(static_cast<double>(net.degree(i)));
        out.per_agent.push_back(li);
        out.max = std::max(out.max, li);
    }
    return out;
}

QuadraticConstants quadratic_constants(const DynamicsModel& model) {
    const double coupling = coupling_constant(model).max;
    if (!(coupling > 0.0)) throw DomainError("coupling constant is zero; declare L1 or L2 > 0");
    return {model.constants().M, model.constants().v_max, coupling};
}

double dmax_upper_bound(const QuadraticConstants& q) {
    return q.v_max * q.v_max / (4.0 * q.M * q.coupling);
}

double dmax_upper_bound(const DynamicsModel& model) { return dmax_upper_bound(quadratic_constants(model)); }

Interval delta_t_interval(const QuadraticConstants& q, double d_max) {
    const double bound = dmax_upper_bound(q);
    if (!(d_max > 0.0)) throw Infeasible("d_max must be positive");
    if (d_max > bound + kSlack)
        throw Infeasible("d_max " + fmt(d_max) + " exceeds v_max^2/(4 M L~) = " + fmt(bound));
    const double s = std::sqrt(std::max(0.0, discriminant(q, d_max)));
    const double a2 = 2.0 * q.M * q.coupling;
    // Lower root in the cancellation-free form 2c / (b + sqrt(disc)).
    return {2.0 * d_max / (q.v_max + s), (q.v_max + s) / a2};
}

Interval delta_t_interval(const DynamicsModel& model, double d_max) {
    return delta_t_interval(quadratic_constants(model), d_max);
}

double h_curve(const QuadraticConstants& q, double d_max) {
    const double bound = dmax_upper_bound(q);
    if (!(d_max >= 0.0) || d_max > bound + kSlack)
        throw DomainError("h is defined on [0, " + fmt(bound) + "], got " + fmt(d_max));
    if (d_max == 0.0) return 0.0;
    const double s = std::sqrt(std::max(0.0, discriminant(q, d_max)));
    return 2.0 * d_max / (q.v_max + s);
}

double h_curve(const DynamicsModel& model, double d_max) { return h_curve(quadratic_constants(model), d_max); }

double quadratic_residual(const QuadraticConstants& q, double d_max, double dt) {
    return q.M * q.coupling * dt * dt - q.v_max * dt + d_max;
}

DiscretizationParams is_admissible(const DynamicsModel& model, double d_max, double dt) {
    const auto& c = model.constants();
    DiscretizationParams p;
    p.d_max = d_max;
    p.dt = dt;
    p.M = c.M;
    p.L1 = c.L1;
    p.L2 = c.L2;
    p.v_max = c.v_max;
    p.R_max = dt * (c.M + c.v_max);
    p.coupling = coupling_constant(model).max;

    if (!(d_max > 0.0) || !(dt > 0.0)) {
        p.reason = "d_max and dt must be positive";
        return p;
    }
    if (!(p.coupling > 0.0)) {
        p.reason = "coupling constant L~ is zero";
        return p;
    }
    const QuadraticConstants q{c.M, c.v_max, p.coupling};
    const double bound = dmax_upper_bound(q);
    if (d_max > bound + kSlack) {
        p.reason = "d_max " + fmt(d_max) + " exceeds bound " + fmt(bound);
        return p;
    }
    const Interval iv = delta_t_interval(q, d_max);
    if (!iv.contains(dt, kSlack)) {
        p.reason = "dt " + fmt(dt) + " outside interval [" + fmt(iv.lower) + ", " + fmt(iv.upper) + "]";
        return p;
    }
    if (p.R_max + kSlack < d_max) {
        p.reason = "R_max " + fmt(p.R_max) + " is smaller than d_max " + fmt(d_max);
        return p;
    }
    p.admissible = true;
    p.reason = "admissible";
    return p;
}

std::vector<RegionRow> feasible_region(const DynamicsModel& model, std::size_t samples) {
    if (samples == 0) throw InvalidInput("region needs at least one sample");
    const QuadraticConstants q = quadratic_constants(model);
    const double bound = dmax_upper_bound(q);
    std::vector<RegionRow> rows;
    rows.reserve(samples);
    for (std::size_t k = 1; k <= samples; ++k) {
        const double d = k == samples ? bound : bound * static_cast<double>(k) / static_cast<double>(samples);
        const Interval iv = delta_t_interval(q, d);
        rows.push_back({d, iv.lower, iv.upper, d / (q.M + q.v_max), d / q.v_max});
    }
    return rows;
}

}  // namespace decab
