#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "decab/system.hpp"

namespace decab {

/// Constants entering the admissibility quadratic  M*L*dt^2 - v_max*dt + d_max <= 0.
struct QuadraticConstants {
    double M = 0.0;
    double v_max = 0.0;
    double coupling = 0.0;  // L~ = max_i (2 L2 + 4 L1 sqrt|N_i|)
};

struct CouplingConstants {
    std::vector<double> per_agent;
    double max = 0.0;
};

/// L~_i = 2 L2 + 4 L1 sqrt|N_i| and their maximum.
CouplingConstants coupling_constant(const DynamicsModel& model);

/// Throws DomainError when L~ is zero (the quadratic degenerates).
QuadraticConstants quadratic_constants(const DynamicsModel& model);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double x, double slack = 0.0) const noexcept { return x >= lower - slack && x <= upper + slack; }
};

/// v_max^2 / (4 M L~)
double dmax_upper_bound(const QuadraticConstants& q);
double dmax_upper_bound(const DynamicsModel& model);

/// Roots of M L~ dt^2 - v_max dt + d_max. Throws Infeasible unless 0 < d_max <= bound.
Interval delta_t_interval(const QuadraticConstants& q, double d_max);
Interval delta_t_interval(const DynamicsModel& model, double d_max);

/// Lower root as a function of d_max, h(0) = 0. Throws DomainError outside [0, bound].
double h_curve(const QuadraticConstants& q, double d_max);
double h_curve(const DynamicsModel& model, double d_max);

/// M L~ dt^2 - v_max dt + d_max
double quadratic_residual(const QuadraticConstants& q, double d_max, double dt);

struct DiscretizationParams {
    double d_max = 0.0;
    double dt = 0.0;
    double M = 0.0;
    double L1 = 0.0;
    double L2 = 0.0;
    double v_max = 0.0;
    double R_max = 0.0;     // dt (M + v_max)
    double coupling = 0.0;  // L~
    bool admissible = false;
    std::string reason;
};

/// Evaluates every admissibility condition; never throws for positive inputs.
DiscretizationParams is_admissible(const DynamicsModel& model, double d_max, double dt);

struct RegionRow {
    double d_max = 0.0;
    double dt_lower = 0.0;
    double dt_upper = 0.0;
    double reach_line = 0.0;     // d_max / (M + v_max)
    double free_input_line = 0.0;  // d_max / v_max
};

/// `samples` rows on the linear grid d_max = bound * k / samples, k = 1..samples.
std::vector<RegionRow> feasible_region(const DynamicsModel& model, std::size_t samples);

}  // namespace decab
