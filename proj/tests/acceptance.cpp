// Acceptance suite for the reference fixture: n = 2, N = 3 path graph, saturated
// consensus a = 0.5 (M = 1, L1 = sqrt 2, L2 = 2, L~ = 12), v_max = 0.5, cell
// diameter 0.004, dt = 0.02. Prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "decab/abstraction.hpp"
#include "decab/cli.hpp"
#include "decab/random.hpp"
#include "decab/simulation.hpp"

using namespace decab;

namespace {

struct Fixture {
    DynamicsModel model = saturated_consensus(AgentNetwork::path(3, 2), 0.5, 0.5);
    GridDecomposition grid = GridDecomposition::with_diameter(2, 0.004, Vec::Zero(2));
    DiscretizationParams params = is_admissible(model, grid.diameter(), 0.02);
    Window window = Window::around(CellIndex{0, 0}, 1);
};

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(double x, int precision = 6) {
    std::ostringstream os;
    os.precision(precision);
    os << x;
    return os.str();
}

int failures = 0;

void criterion(int id, const std::string& name, double limit_ms, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = ms < limit_ms;
    const bool pass = o.pass && in_time;
    if (!pass) ++failures;
    std::printf("[%s] %2d %s: %s; runtime %.3f ms (limit %.0f ms%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), ms, limit_ms, in_time ? "" : ", EXCEEDED");
    std::fflush(stdout);
}

// Independent quadratic-root oracle in extended precision.
struct Roots {
    long double lo, hi;
};
Roots oracle_roots(long double a, long double b, long double c) {
    const long double s = std::sqrt(b * b - 4 * a * c);
    return {(-b - s) / (2 * a), (-b + s) / (2 * a)};
}

bool rel_ok(double got, long double want, double rel) {
    return std::fabs(static_cast<long double>(got) - want) <= rel * std::fabs(want);
}

std::vector<CellConfiguration> window_configurations(const Fixture& f) {
    std::vector<CellConfiguration> out;
    for (AgentId i = 0; i < 3; ++i)
        for (auto& c : enumerate_configurations(f.model.network(), i, f.window, kDefaultMaxConfigurations))
            out.push_back(std::move(c));
    return out;
}

struct InputBoundScan {
    std::size_t configurations = 0;
    std::size_t samples = 0;
    std::size_t violations = 0;
    std::size_t violating_configurations = 0;
    double max_magnitude = 0.0;
};

// Samples |k| over the inflated-cell region of every configuration. Each
// configuration gets its centre controller plus `random_refs` controllers with
// uniformly drawn reference points, sharing `samples` draws between them.
InputBoundScan input_bound_scan(const Fixture& f, const DiscretizationParams& params, std::size_t samples, std::size_t random_refs,
               std::size_t substeps, std::uint64_t seed, bool stop_at_first) {
    InputBoundScan scan;
    const auto cfgs = window_configurations(f);
    for (std::size_t c = 0; c < cfgs.size(); ++c) {
        Rng rng(derive_seed(seed, c));
        const std::size_t controllers = 1 + random_refs;
        std::size_t hits = 0;
        for (std::size_t r = 0; r < controllers; ++r) {
            auto ref = r == 0 ? reference_point(f.grid, cfgs[c]) : random_reference_point(f.grid, cfgs[c], rng);
            const HybridController ctrl(f.model, f.grid, params, cfgs[c], std::move(ref), substeps);
            const std::size_t n = samples / controllers + (r < samples % controllers ? 1 : 0);
            const auto rep = sample_input_bound(ctrl, n, rng);
            scan.samples += rep.samples;
            hits += rep.violations;
            scan.max_magnitude = std::max(scan.max_magnitude, rep.max_magnitude);
        }
        ++scan.configurations;
        scan.violations += hits;
        scan.violating_configurations += hits > 0 ? 1 : 0;
        if (stop_at_first && hits > 0) break;
    }
    return scan;
}

std::vector<CellIndex> random_global(Rng& rng, std::int64_t spread) {
    std::vector<CellIndex> cells;
    for (int k = 0; k < 3; ++k) cells.push_back(CellIndex{rng.uniform_int(-spread, spread), rng.uniform_int(-spread, spread)});
    return cells;
}

Vec random_state_in(const GridDecomposition& g, const std::vector<CellIndex>& cells, Rng& rng) {
    std::vector<Vec> x;
    for (const auto& z : cells) {
        const Box b = g.cell_box(z);
        Vec p;
        do p = rng.uniform_in_box(b.lower, b.upper);
        while (g.cell_of(p) != z);
        x.push_back(p);
    }
    return stack_states(x);
}

std::vector<HybridController> controllers_for(const Fixture& f, const std::vector<CellIndex>& cells,
                                              std::size_t K, Rng* rng) {
    std::vector<HybridController> out;
    for (AgentId i = 0; i < 3; ++i) {
        const auto cfg = f.model.network().project_configuration(cells, i);
        if (rng) out.emplace_back(f.model, f.grid, f.params, cfg, random_reference_point(f.grid, cfg, *rng), K);
        else out.emplace_back(f.model, f.grid, f.params, cfg, K);
    }
    return out;
}

// Exact reference endpoint for an unsaturated agent: d/dt x = sum_k (x_kG - x) gives
// x(t) = m + (x_G - m) e^{-|N| t} with m the mean of the frozen neighbours.
Vec exact_reference_endpoint(const HybridController& c, double dt) {
    const auto& ref = c.reference_point();
    const auto deg = static_cast<double>(ref.size() - 1);
    Vec m = Vec::Zero(ref[0].size());
    for (std::size_t k = 1; k < ref.size(); ++k) m += ref[k];
    m /= deg;
    return m + (ref[0] - m) * std::exp(-deg * dt);
}

bool unsaturated(const std::vector<HybridController>& ctrls, double a, double R) {
    // Sufficient: all pairwise separations stay below a along the run (states move at most R).
    for (const auto& c : ctrls)
        for (std::size_t k = 1; k < c.reference_point().size(); ++k)
            if ((c.reference_point()[k] - c.reference_point()[0]).norm() + 4 * R > a) return false;
    return true;
}

}  // namespace

int main() {
    const Fixture f;
    std::printf("fixture: d_max=%.17g dt=%.17g R_max=%.17g L~=%.17g admissible=%s\n", f.params.d_max, f.params.dt,
                f.params.R_max, f.params.coupling, f.params.admissible ? "yes" : "no");

    criterion(1, "admissibility arithmetic", 1.0, [&] {
        const auto q = quadratic_constants(f.model);
        const double bound = dmax_upper_bound(q);
        const auto iv = delta_t_interval(q, 0.004);
        const long double want_bound = 0.25L / 48.0L;
        const Roots r = oracle_roots(12.0L, -0.5L, 0.004L);
        const double res_lo = quadratic_residual(q, 0.004, iv.lower);
        const double res_hi = quadratic_residual(q, 0.004, iv.upper);
        Outcome o;
        o.pass = rel_ok(bound, want_bound, 1e-9) && rel_ok(iv.lower, r.lo, 1e-9) && rel_ok(iv.upper, r.hi, 1e-9) &&
                 std::fabs(res_lo) <= 1e-12 && std::fabs(res_hi) <= 1e-12 &&
                 std::fabs(bound - 0.00520833) < 5e-9 && std::fabs(iv.lower - 0.0107987) < 5e-8 &&
                 std::fabs(iv.upper - 0.0308680) < 5e-8;
        o.detail = "bound=" + fmt(bound, 12) + " interval=[" + fmt(iv.lower, 12) + ", " + fmt(iv.upper, 12) +
                   "] residuals=" + fmt(res_lo, 3) + "," + fmt(res_hi, 3);
        return o;
    });

    criterion(2, "h(d_max) >= d_max/(M+v_max) over 200 points", 10.0, [&] {
        const auto q = quadratic_constants(f.model);
        const double bound = dmax_upper_bound(q);
        std::size_t violations = 0;
        double worst_gap = 1e300;
        for (int k = 1; k <= 200; ++k) {
            const double d = bound * k / 200.0;
            const double gap = h_curve(q, d) - d / (q.M + q.v_max);
            worst_gap = std::min(worst_gap, gap);
            if (gap < 0.0) ++violations;
        }
        return Outcome{violations == 0, "violations=" + std::to_string(violations) + " min gap=" + fmt(worst_gap)};
    });

    criterion(3, "input-bound certificate on the 3x3 window", 30000.0, [&] {
        // The sampler reuses the controllers' trajectory cache at K = 256.
        const auto scan = input_bound_scan(f, f.params, 10000, 3, 256, 303, false);
        return Outcome{scan.violations == 0 && scan.max_magnitude <= 0.5 + 1e-12 && scan.configurations == 891,
                       std::to_string(scan.configurations) + " configurations, " + std::to_string(scan.samples) +
                           " samples, max |k|=" + fmt(scan.max_magnitude, 9) + ", violations=" +
                           std::to_string(scan.violations)};
    });

    // Criteria 4-6 share the same 100 closed-loop runs at K = 1024.
    struct Runs {
        double max_endpoint = 0.0;
        double max_interp = 0.0;
        std::size_t containment_violations = 0;
        std::size_t samples_checked = 0;
        std::size_t order_runs = 0;
        std::vector<double> coarse_error;
        double ms = 0.0;
        std::string error;
    } runs;
    const std::vector<std::size_t> coarse{2, 4, 8};
    criterion(4, "endpoint identity over 100 closed-loop runs", 60000.0, [&] {
        const auto t0 = std::chrono::steady_clock::now();
        try {
            Rng rng(404);
            runs.coarse_error.assign(coarse.size(), 0.0);
            for (int run = 0; run < 100; ++run) {
                const auto cells = random_global(rng, run % 4 == 0 ? 150 : 3);
                const bool random_refs = run % 2 == 1;
                const auto ctrls = controllers_for(f, cells, 1024, random_refs ? &rng : nullptr);
                const Vec x0 = random_state_in(f.grid, cells, rng);
                const auto r = integrate_closed_loop(f.model, ctrls, x0, 1024);
                for (AgentId i = 0; i < 3; ++i) {
                    runs.max_endpoint = std::max(runs.max_endpoint, r.report.endpoint_deviation[i]);
                    runs.max_interp = std::max(runs.max_interp, r.report.interpolation_deviation[i]);
                }
                // Containment on [0, dt); the endpoint is covered by criterion 4.
                for (std::size_t s = 0; s + 1 < r.trajectory.times.size(); ++s)
                    for (AgentId i = 0; i < 3; ++i) {
                        ++runs.samples_checked;
                        const Vec xi = agent_state(r.trajectory.states[s], i, 2);
                        if (!f.grid.inflated_contains(cells[i], f.params.R_max, xi)) ++runs.containment_violations;
                    }
                // Integrator order: at K = 1024 the endpoint matches the numerical reference to
                // roundoff (RK4 reproduces the time-linear offset exactly), so the order is read
                // off the error against the exact reference endpoint at coarse K.
                if (!unsaturated(ctrls, 0.5, f.params.R_max)) continue;
                ++runs.order_runs;
                for (std::size_t k = 0; k < coarse.size(); ++k) {
                    std::vector<HybridController> ck;
                    for (const auto& c : ctrls)
                        ck.emplace_back(f.model, f.grid, f.params, c.configuration(), c.reference_point(), coarse[k]);
                    const auto rk = integrate_closed_loop(f.model, ck, x0, coarse[k]);
                    for (AgentId i = 0; i < 3; ++i) {
                        const Vec xi = agent_state(rk.trajectory.states.back(), i, 2);
                        const double err = (xi - exact_reference_endpoint(ck[i], f.params.dt)).norm();
                        runs.coarse_error[k] = std::max(runs.coarse_error[k], err);
                    }
                }
            }
        } catch (const std::exception& e) {
            runs.error = e.what();
        }
        runs.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
            if (!runs.error.empty()) return Outcome{false, "exception: " + runs.error};
        bool order_ok = runs.order_runs >= 10;
        std::string ratios;
        for (std::size_t k = 0; k + 1 < coarse.size(); ++k) {
            const double ratio = runs.coarse_error[k] / runs.coarse_error[k + 1];
            // Fourth order: doubling K divides the error by 2^4 = 16.
            order_ok = order_ok && ratio > 12.0 && ratio < 20.0;
            ratios += (k ? ", " : "") + std::string("K=") + std::to_string(coarse[k]) + "->" +
                      std::to_string(coarse[k + 1]) + ": " + fmt(ratio, 4);
        }
        return Outcome{runs.max_endpoint <= 1e-8 && order_ok,
                       "max |x_i(dt) - x~_i(dt)|=" + fmt(runs.max_endpoint, 3) + " at K=1024; error ratios " + ratios +
                           " over " + std::to_string(runs.order_runs) + " unsaturated runs"};
    });

    criterion(5, "linear-interpolation identity", 60000.0, [&] {
        if (!runs.error.empty()) return Outcome{false, "exception: " + runs.error};
        return Outcome{runs.max_interp <= 1e-8, "max residual=" + fmt(runs.max_interp, 3) + " over every substep of the runs of 4 (" + fmt(runs.ms / 1000.0, 3) + " s)"};
    });

    criterion(6, "containment in S + B(R_max)", 60000.0, [&] {
        if (!runs.error.empty()) return Outcome{false, "exception: " + runs.error};
        return Outcome{runs.containment_violations == 0 && std::fabs(f.params.R_max - 0.03) < 1e-15,
                       "R_max=" + fmt(f.params.R_max, 17) + ", " + std::to_string(runs.samples_checked) +
                           " samples from the runs of 4, violations=" + std::to_string(runs.containment_violations)};
    });

    std::vector<TransitionSystem> systems;
    criterion(7, "well-posedness of TS_i on the 3x3 window", 300000.0, [&] {
        std::size_t configs = 0, empty_post = 0;
        std::vector<Transition> pool;
        for (AgentId i = 0; i < 3; ++i) {
            systems.push_back(build_transition_system(f.model, f.grid, f.params, i, f.window));
            const auto& ts = systems.back();
            for (const auto& a : enumerate_configurations(f.model.network(), i, f.window, kDefaultMaxConfigurations)) {
                ++configs;
                if (ts.post_set(a.own(), a).empty()) ++empty_post;
            }
            for (auto& t : ts.transitions()) pool.push_back(std::move(t));
        }
        Rng pick(707);
        std::size_t counterexamples = 0, monitor_hits = 0, marginal = 0;
        double min_margin = 1e300;
        for (int k = 0; k < 20; ++k) {
            const auto j = static_cast<std::size_t>(pick.uniform_int(k, static_cast<std::int64_t>(pool.size()) - 1));
            std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
            VerifyOptions o;
            o.trials = 500;
            o.seed = derive_seed(707, static_cast<std::uint64_t>(k));
            try {
                const auto r = verify_transition(f.model, f.grid, f.params, pool[static_cast<std::size_t>(k)], o);
                min_margin = std::min(min_margin, r.min_margin);
                marginal += r.marginal ? 1 : 0;
            } catch (const WellPosednessFalsified& e) {
                counterexamples += e.report().counterexamples;
                monitor_hits += e.report().input_bound_hits + e.report().containment_hits;
            }
        }
        return Outcome{empty_post == 0 && configs == 891 && counterexamples == 0 && monitor_hits == 0,
                       std::to_string(configs) + " configurations, empty Post=" + std::to_string(empty_post) +
                           "; 20 transitions x 500 trials: counterexamples=" + std::to_string(counterexamples) +
                           ", monitor hits=" + std::to_string(monitor_hits) + ", marginal=" + std::to_string(marginal) +
                           ", min margin=" + fmt(min_margin, 4)};
    });

    criterion(8, "composition of 100 joint plans", 120000.0, [&] {
        if (systems.size() != 3) return Outcome{false, "transition systems unavailable"};
        Rng rng(808);
        std::size_t failures_seen = 0, landed_runs = 0;
        const auto cells = f.window.cells();
        for (int p = 0; p < 100; ++p) {
            std::vector<CellIndex> initial;
            for (int a = 0; a < 3; ++a)
                initial.push_back(cells[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cells.size()) - 1))]);
            std::vector<CellIndex> target;
            for (AgentId a = 0; a < 3; ++a) {
                const auto cfg = f.model.network().project_configuration(initial, a);
                const auto post = systems[a].post_set(cfg.own(), cfg);
                auto it = post.begin();
                std::advance(it, rng.uniform_int(0, static_cast<std::int64_t>(post.size()) - 1));
                target.push_back(*it);
            }
            try {
                const auto r = compose_plan(systems, f.model, f.grid, f.params, initial, target,
                                            {5, derive_seed(808, static_cast<std::uint64_t>(p)), kDefaultSubsteps});
                landed_runs += r.trials;
            } catch (const CompositionFalsified&) {
                ++failures_seen;
            }
        }
        return Outcome{failures_seen == 0, "failures=" + std::to_string(failures_seen) + ", " +
                                               std::to_string(landed_runs) + " joint runs landed all 3 agents"};
    });

    criterion(9, "neighbour invariance of agent i's endpoint", 30000.0, [&] {
        Rng rng(909);
        double worst = 0.0;
        for (int c = 0; c < 6; ++c) {
            const AgentId i = c % 3;
            auto cells = random_global(rng, c < 3 ? 2 : 80);
            const auto cfg = f.model.network().project_configuration(cells, i);
            const HybridController own(f.model, f.grid, f.params, cfg, 1024);
            const Vec xi0 = agent_state(random_state_in(f.grid, cells, rng), i, 2);
            Vec first;
            for (int s = 0; s < 10; ++s) {
                // Non-neighbours may move to other cells; neighbours keep theirs.
                for (AgentId a = 0; a < 3; ++a)
                    if (a != i && std::find(f.model.network().neighbors(i).begin(), f.model.network().neighbors(i).end(),
                                            a) == f.model.network().neighbors(i).end())
                        cells[a] = CellIndex{cells[a][0] + rng.uniform_int(-2, 2), cells[a][1] + rng.uniform_int(-2, 2)};
                std::vector<HybridController> ctrls;
                for (AgentId a = 0; a < 3; ++a) {
                    if (a == i) {
                        ctrls.push_back(own);
                        continue;
                    }
                    const auto ca = f.model.network().project_configuration(cells, a);
                    ctrls.emplace_back(f.model, f.grid, f.params, ca, random_reference_point(f.grid, ca, rng), 1024);
                }
                Vec x0 = random_state_in(f.grid, cells, rng);
                x0.segment(static_cast<Eigen::Index>(2 * i), 2) = xi0;
                const auto r = integrate_closed_loop(f.model, ctrls, x0, 1024);
                const Vec end = agent_state(r.trajectory.states.back(), i, 2);
                if (s == 0) first = end;
                else worst = std::max(worst, (end - first).norm());
            }
        }
        return Outcome{worst <= 2e-8, "max endpoint change=" + fmt(worst, 3) + " over 6 configurations x 10 resamples"};
    });

    criterion(10, "distance on inflated-cell boundaries", 1000.0, [&] {
        Rng rng(1010);
        std::size_t violations = 0;
        double worst = 1e300;
        for (int s = 0; s < 10000; ++s) {
            const CellIndex z{rng.uniform_int(-1000, 1000), rng.uniform_int(-1000, 1000)};
            const Box b = f.grid.cell_box(z);
            const double R = rng.uniform(1e-6, 0.1);
            // Boundary of S + B(R): a face point pushed along its normal, or a corner pushed
            // along a direction of its normal cone.
            Vec x(2);
            if (rng.coin()) {
                Vec y = rng.uniform_in_box(b.lower, b.upper);
                const auto axis = static_cast<Eigen::Index>(rng.uniform_int(0, 1));
                const bool up = rng.coin();
                y[axis] = up ? b.upper[axis] : b.lower[axis];
                x = y;
                x[axis] += up ? R : -R;
            } else {
                const double theta = rng.uniform(0.0, M_PI / 2);
                const int sx = rng.coin() ? 1 : -1, sy = rng.coin() ? 1 : -1;
                x << (sx > 0 ? b.upper[0] : b.lower[0]) + sx * R * std::cos(theta),
                    (sy > 0 ? b.upper[1] : b.lower[1]) + sy * R * std::sin(theta);
            }
            const double d = f.grid.distance_to_cell(z, x);
            worst = std::min(worst, d - R);
            if (d < R - 1e-12) ++violations;
        }
        return Outcome{violations == 0, "10000 points, violations=" + std::to_string(violations) +
                                            ", min (distance - R)=" + fmt(worst, 3)};
    });

    criterion(11, "negative control at dt = 0.005", 10000.0, [&] {
        const auto bad = is_admissible(f.model, f.grid.diameter(), 0.005);
        const auto scan = input_bound_scan(f, bad, 10000, 3, 256, 1111, true);
        const std::filesystem::path cfg = std::filesystem::path(DECAB_EXAMPLES_DIR) / "negative.json";
        const std::string path = cfg.string();
        const char* argv[] = {"decab", "check", "--config", path.c_str()};
        std::ostringstream out, err;
        const int code = run_cli(4, argv, out, err);
        return Outcome{!bad.admissible && scan.violations > 0 && code == kExitFalsified,
                       "admissible=" + std::string(bad.admissible ? "yes" : "no") + ", monitor hits=" +
                           std::to_string(scan.violations) + " (first violating configuration after " +
                           std::to_string(scan.configurations) + "), max |k|=" + fmt(scan.max_magnitude, 6) +
                           ", check exit code=" + std::to_string(code)};
    });

    std::printf("%s: %d failing criteria\n", failures == 0 ? "ALL PASS" : "FAILED", failures);
    return failures == 0 ? 0 : 1;
}
