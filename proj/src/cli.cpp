#include "decab/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "decab/abstraction.hpp"
#include "decab/config.hpp"
#include "decab/random.hpp"
#include "decab/simulation.hpp"

namespace decab {

namespace {

namespace fs = std::filesystem;

std::string num(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

std::string vec_str(const Vec& v) {
    std::string s = "(";
    for (Eigen::Index k = 0; k < v.size(); ++k) s += (k ? "," : "") + num(v[k]);
    return s + ")";
}

std::string bool_str(bool b) { return b ? "yes" : "no"; }

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> substeps;
    std::optional<std::size_t> trials;
    std::optional<std::string> out;
};

struct Context {
    RunConfig config;
    DynamicsModel model;
    GridDecomposition grid;
    DiscretizationParams params;
};

Context load(const Common& c) {
    RunConfig config = load_config(c.config);
    if (c.seed) config.run.seed = *c.seed;
    if (c.substeps) config.run.substeps = *c.substeps;
    if (c.trials) config.run.trials = *c.trials;
    if (c.out) config.run.out = *c.out;
    if (config.run.substeps == 0 || config.run.trials == 0) throw InvalidInput("substeps and trials must be positive");
    DynamicsModel model = make_model(config);
    GridDecomposition grid = make_grid(config);
    DiscretizationParams params = is_admissible(model, grid.diameter(), config.discretization.dt);
    return Context{std::move(config), std::move(model), std::move(grid), std::move(params)};
}

void write_file(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidInput("cannot write '" + path.string() + "'");
    f << content;
}

// Writes to <out>/<name> when an output directory is set, otherwise to the stream.
void emit(const Context& ctx, const std::string& name, const std::string& content, std::ostream& out) {
    if (ctx.config.run.out.empty()) out << content;
    else write_file(fs::path(ctx.config.run.out) / name, content);
}

Window window_of(const Context& ctx) {
    if (ctx.config.run.window) return *ctx.config.run.window;
    return Window::around(CellIndex(std::vector<std::int64_t>(ctx.grid.dimension(), 0)), 1);
}

std::string params_report(const DiscretizationParams& p) {
    std::ostringstream os;
    os << "d_max: " << num(p.d_max) << "\n"
       << "dt: " << num(p.dt) << "\n"
       << "M: " << num(p.M) << "\n"
       << "L1: " << num(p.L1) << "\n"
       << "L2: " << num(p.L2) << "\n"
       << "v_max: " << num(p.v_max) << "\n"
       << "coupling: " << num(p.coupling) << "\n"
       << "R_max: " << num(p.R_max) << "\n";
    if (p.coupling > 0.0) {
        QuadraticConstants q{p.M, p.v_max, p.coupling};
        const double bound = dmax_upper_bound(q);
        os << "d_max_bound: " << num(bound) << "\n";
        if (p.d_max > 0.0 && p.d_max <= bound + 1e-12) {
            const Interval iv = delta_t_interval(q, p.d_max);
            os << "dt_lower: " << num(iv.lower) << "\n"
               << "dt_upper: " << num(iv.upper) << "\n";
        }
    }
    os << "admissible: " << bool_str(p.admissible) << "\n";
    if (!p.admissible) os << "reason: " << p.reason << "\n";
    return os.str();
}

int cmd_check(const Context& ctx, std::ostream& out) {
    const auto coupling = coupling_constant(ctx.model);
    for (std::size_t i = 0; i < coupling.per_agent.size(); ++i)
        out << "coupling_agent_" << i << ": " << num(coupling.per_agent[i]) << "\n";
    out << params_report(ctx.params);
    return ctx.params.admissible ? kExitOk : kExitFalsified;
}

int cmd_region(const Context& ctx, std::size_t samples, std::ostream& out) {
    std::ostringstream os;
    os << "d_max,dt_lower,dt_upper,reach_line,free_input_line\n";
    for (const auto& r : feasible_region(ctx.model, samples))
        os << num(r.d_max) << "," << num(r.dt_lower) << "," << num(r.dt_upper) << "," << num(r.reach_line) << ","
           << num(r.free_input_line) << "\n";
    emit(ctx, "region.csv", os.str(), out);
    return kExitOk;
}

std::vector<TransitionSystem> build_all(const Context& ctx, const std::vector<AgentId>& agents) {
    BuildOptions opts{ctx.config.run.substeps, ctx.config.run.max_configurations};
    const Window window = window_of(ctx);
    std::vector<TransitionSystem> out;
    for (AgentId i : agents) out.push_back(build_transition_system(ctx.model, ctx.grid, ctx.params, i, window, opts));
    return out;
}

std::vector<AgentId> all_agents(const Context& ctx) {
    std::vector<AgentId> ids(ctx.model.network().agent_count());
    for (AgentId i = 0; i < ids.size(); ++i) ids[i] = i;
    return ids;
}

int cmd_abstract(const Context& ctx, const std::string& format, std::ostream& out) {
    std::vector<ExportFormat> formats;
    if (format == "both") formats = {ExportFormat::json, ExportFormat::dot};
    else formats = {parse_export_format(format)};
    if (!ctx.params.admissible) {
        out << params_report(ctx.params);
        return kExitFalsified;
    }
    const std::string dir = ctx.config.run.out.empty() ? "." : ctx.config.run.out;
    for (const auto& ts : build_all(ctx, all_agents(ctx))) {
        out << "agent " << ts.agent() << ": " << ts.states().size() << " states, " << ts.size() << " transitions\n";
        for (ExportFormat fmt : formats) {
            const fs::path path = fs::path(dir) / ("agent_" + std::to_string(ts.agent()) +
                                                   (fmt == ExportFormat::json ? ".json" : ".dot"));
            write_file(path, export_transition_system(ts, fmt));
            out << "  wrote " << path.string() << "\n";
        }
    }
    return kExitOk;
}

std::vector<std::size_t> select(const std::string& selector, std::size_t count, Rng& rng) {
    std::vector<std::size_t> idx;
    if (selector == "all") {
        for (std::size_t k = 0; k < count; ++k) idx.push_back(k);
        return idx;
    }
    if (selector.rfind("random:", 0) == 0) {
        std::size_t n = 0;
        try {
            n = std::stoul(selector.substr(7));
        } catch (const std::exception&) {
            throw InvalidInput("bad selector '" + selector + "'");
        }
        std::vector<std::size_t> pool(count);
        for (std::size_t k = 0; k < count; ++k) pool[k] = k;
        // Partial Fisher-Yates with the project's own draws for reproducible picks.
        n = std::min(n, count);
        for (std::size_t k = 0; k < n; ++k) {
            const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(k),
                                                                    static_cast<std::int64_t>(count) - 1));
            std::swap(pool[k], pool[j]);
        }
        pool.resize(n);
        std::sort(pool.begin(), pool.end());
        return pool;
    }
    std::stringstream ss(selector);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long k = 0;
        try {
            k = std::stoul(item, &pos);
        } catch (const std::exception&) {
            throw InvalidInput("bad selector '" + selector + "'");
        }
        if (pos != item.size() || k >= count) throw InvalidInput("transition index '" + item + "' out of range");
        idx.push_back(k);
    }
    if (idx.empty()) throw InvalidInput("empty selector");
    return idx;
}

void print_report(const VerificationReport& r, std::ostream& out) {
    const auto& t = r.transition;
    out << "transition: " << t.source.to_string() << " --" << t.action.to_string() << "--> " << t.target.to_string()
        << "\n"
        << "  trials: " << r.trials << "\n"
        << "  counterexamples: " << r.counterexamples << "\n"
        << "  input_bound_hits: " << r.input_bound_hits << "\n"
        << "  containment_hits: " << r.containment_hits << "\n"
        << "  max_input_magnitude: " << num(r.max_input_magnitude) << "\n"
        << "  min_margin: " << num(r.min_margin) << "\n"
        << "  reference_margin: " << num(r.reference_margin) << "\n"
        << "  marginal: " << bool_str(r.marginal) << "\n"
        << "  max_endpoint_deviation: " << num(r.max_endpoint_deviation) << "\n"
        << "  margin_histogram:";
    for (auto b : r.histogram.bins) out << " " << b;
    out << " negative=" << r.histogram.negative << "\n";
    if (r.witness) {
        const auto& w = *r.witness;
        out << "  witness_configuration:";
        for (const auto& c : w.global_configuration) out << " " << c.to_string();
        out << "\n  witness_initial_state: " << vec_str(w.initial_state) << "\n"
            << "  witness_endpoint: " << vec_str(w.endpoint) << "\n";
        for (std::size_t a = 0; a < w.reference_points.size(); ++a) {
            out << "  witness_reference_" << a << ":";
            for (const auto& p : w.reference_points[a]) out << " " << vec_str(p);
            out << "\n";
        }
    }
}

int cmd_verify(const Context& ctx, const std::string& selector, std::optional<AgentId> agent, std::ostream& out) {
    std::vector<AgentId> agents = all_agents(ctx);
    if (agent) {
        ctx.model.network().check_agent(*agent);
        agents = {*agent};
    }
    VerifyOptions vo;
    vo.trials = ctx.config.run.trials;
    vo.seed = ctx.config.run.seed;
    vo.substeps = ctx.config.run.substeps;
    vo.context_radius = ctx.config.run.context_radius;
    vo.allow_inadmissible = !ctx.params.admissible;
    if (!ctx.params.admissible) out << "warning: parameters are inadmissible (" << ctx.params.reason << ")\n";

    Rng picker(derive_seed(ctx.config.run.seed, 0x5e1ec7));
    std::size_t checked = 0;
    std::size_t falsified = 0;
    std::size_t marginal = 0;
    for (const auto& ts : build_all(ctx, agents)) {
        const auto transitions = ts.transitions();
        out << "agent " << ts.agent() << ": " << transitions.size() << " transitions\n";
        for (std::size_t k : select(selector, transitions.size(), picker)) {
            VerificationReport report;
            bool failed = false;
            try {
                report = verify_transition(ctx.model, ctx.grid, ctx.params, transitions[k], vo);
            } catch (const WellPosednessFalsified& e) {
                report = e.report();
                failed = true;
            }
            out << "[" << k << "] " << (failed ? "FALSIFIED" : "ok") << "\n";
            print_report(report, out);
            ++checked;
            falsified += failed ? 1 : 0;
            marginal += report.marginal ? 1 : 0;
        }
    }
    out << "checked: " << checked << "\n"
        << "falsified: " << falsified << "\n"
        << "marginal: " << marginal << "\n"
        << "evidence: " << VerificationReport::evidence << "\n";
    return falsified == 0 && ctx.params.admissible ? kExitOk : kExitFalsified;
}

int cmd_simulate(const Context& ctx, std::ostream& out) {
    if (!ctx.config.plan) throw InvalidInput("simulate needs a 'plan' section in the config");
    const auto& plan = *ctx.config.plan;
    const std::size_t N = ctx.model.network().agent_count();
    const std::size_t n = ctx.grid.dimension();

    std::vector<CellIndex> target;
    if (plan.target) {
        target = *plan.target;
    } else {
        for (AgentId i = 0; i < N; ++i)
            target.push_back(agent_transition(ctx.model, ctx.grid, ctx.params,
                                              ctx.model.network().project_configuration(plan.initial, i),
                                              ctx.config.run.substeps, true)
                                 .target);
    }
    if (!ctx.params.admissible) {
        out << params_report(ctx.params);
        return kExitFalsified;
    }

    PlanOptions po{ctx.config.run.trials, ctx.config.run.seed, ctx.config.run.substeps};
    PlanResult result;
    try {
        result = compose_plan(ctx.model, ctx.grid, ctx.params, plan.initial, target, po);
    } catch (const CompositionFalsified& e) {
        out << "landed: no\n"
            << "error: " << e.what() << "\n"
            << "witness_agent: " << e.witness().agent << "\n"
            << "witness_initial_state: " << vec_str(e.witness().initial_state) << "\n"
            << "witness_endpoint: " << vec_str(e.witness().endpoint) << "\n";
        return kExitFalsified;
    }

    std::vector<Vec> x0;
    if (plan.initial_states) {
        for (const auto& s : *plan.initial_states) x0.push_back(Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(n)));
    } else {
        for (const auto& c : plan.initial) x0.push_back(ctx.grid.cell_center(c));
    }
    const auto run = integrate_closed_loop(ctx.model, result.controllers, stack_states(x0), ctx.config.run.substeps);

    std::ostringstream csv;
    csv << "t";
    for (AgentId i = 0; i < N; ++i)
        for (std::size_t a = 0; a < n; ++a) csv << ",x" << i << "_" << a;
    for (AgentId i = 0; i < N; ++i) csv << ",k" << i;
    csv << "\n";
    for (std::size_t s = 0; s < run.trajectory.times.size(); ++s) {
        csv << num(run.trajectory.times[s]);
        const Vec& x = run.trajectory.states[s];
        for (Eigen::Index k = 0; k < x.size(); ++k) csv << "," << num(x[k]);
        for (double m : run.trajectory.monitor[s].input_magnitude) csv << "," << num(m);
        csv << "\n";
    }

    std::ostringstream rep;
    bool landed = true;
    const Vec& xf = run.trajectory.states.back();
    for (AgentId i = 0; i < N; ++i) {
        const CellIndex got = ctx.grid.cell_of(agent_state(xf, i, n));
        landed = landed && got == target[i];
        rep << "agent_" << i << "_initial: " << plan.initial[i].to_string() << "\n"
            << "agent_" << i << "_target: " << target[i].to_string() << "\n"
            << "agent_" << i << "_final_cell: " << got.to_string() << "\n"
            << "agent_" << i << "_final_state: " << vec_str(agent_state(xf, i, n)) << "\n"
            << "agent_" << i << "_max_input: " << num(run.report.max_input_magnitude[i]) << "\n"
            << "agent_" << i << "_containment: " << bool_str(run.report.containment_ok[i]) << "\n"
            << "agent_" << i << "_endpoint_deviation: " << num(run.report.endpoint_deviation[i]) << "\n"
            << "agent_" << i << "_interpolation_deviation: " << num(run.report.interpolation_deviation[i]) << "\n";
    }
    rep << "plan_trials: " << result.trials << "\n"
        << "plan_min_margin: " << num(result.min_margin) << "\n"
        << "input_bound_ok: " << bool_str(run.report.input_bound_ok(ctx.params.v_max)) << "\n"
        << "landed: " << bool_str(landed) << "\n";

    if (ctx.config.run.out.empty()) {
        out << rep.str();
    } else {
        write_file(fs::path(ctx.config.run.out) / "trajectory.csv", csv.str());
        write_file(fs::path(ctx.config.run.out) / "report.txt", rep.str());
        out << rep.str();
    }
    return landed && run.report.input_bound_ok(ctx.params.v_max) ? kExitOk : kExitFalsified;
}

int cmd_controller_dump(const Context& ctx, std::ostream& out) {
    if (!ctx.config.controller) throw InvalidInput("controller-dump needs a 'controller' section in the config");
    const auto& cd = *ctx.config.controller;
    const std::size_t n = ctx.grid.dimension();
    CellConfiguration cfg{cd.agent, cd.configuration};
    HybridController ctrl(ctx.model, ctx.grid, ctx.params, cfg, ctx.config.run.substeps);
    Vec x0;
    if (cd.initial_state) {
        x0 = Eigen::Map<const Vec>(cd.initial_state->data(), static_cast<Eigen::Index>(n));
    } else {
        // Default to the lower corner, the largest initial offset.
        x0 = ctx.grid.cell_box(cfg.own()).lower;
    }
    if (ctx.grid.cell_of(x0) != cfg.own() && ctx.grid.distance_to_cell(cfg.own(), x0) > 0.0)
        throw PreconditionError("controller.initial_state is outside the agent's cell");

    const Vec k2 = ctrl.k2(x0);
    std::ostringstream csv;
    csv << "t";
    for (std::size_t a = 0; a < n; ++a) csv << ",xref_" << a;
    for (std::size_t a = 0; a < n; ++a) csv << ",k2_" << a;
    csv << ",k3_norm,k3_bound\n";
    const auto& sol = ctrl.reference_solution();
    for (std::size_t s = 0; s < sol.times().size(); ++s) {
        const double t = sol.times()[s];
        const Vec& xr = sol.states()[s];
        csv << num(t);
        for (Eigen::Index a = 0; a < xr.size(); ++a) csv << "," << num(xr[a]);
        for (Eigen::Index a = 0; a < k2.size(); ++a) csv << "," << num(k2[a]);
        csv << "," << num(ctrl.k3(t, x0).norm()) << "," << num(ctrl.k3_bound()) << "\n";
    }
    emit(ctx, "controller.csv", csv.str(), out);
    if (!ctx.config.run.out.empty())
        out << "target: " << ctrl.target_cell().to_string() << "\n"
            << "reference_endpoint: " << vec_str(ctrl.reference_endpoint()) << "\n";
    return kExitOk;
}

int cmd_validate_constants(const Context& ctx, std::ostream& out) {
    ValidationReport report;
    bool ok = true;
    try {
        report = validate_constants(ctx.model, ctx.config.run.trials, ctx.config.run.sample_radius, ctx.config.run.seed);
    } catch (const ConstantsViolated& e) {
        report = e.report();
        ok = false;
    }
    out << "trials: " << report.trials << "\n"
        << "worst_bound_ratio: " << num(report.worst_bound_ratio) << "\n"
        << "worst_neighbor_ratio: " << num(report.worst_neighbor_ratio) << "\n"
        << "worst_self_ratio: " << num(report.worst_self_ratio) << "\n"
        << "consistent: " << bool_str(ok) << "\n";
    if (report.counterexample) {
        const auto& w = *report.counterexample;
        out << "violated: " << to_string(w.kind) << "\n"
            << "agent: " << w.agent << "\n"
            << "ratio: " << num(w.ratio) << "\n"
            << "self: " << vec_str(w.self) << "\n";
        for (const auto& v : w.neighbors) out << "neighbor: " << vec_str(v) << "\n";
        if (w.other_self.size() > 0) out << "other_self: " << vec_str(w.other_self) << "\n";
        for (const auto& v : w.other_neighbors) out << "other_neighbor: " << vec_str(v) << "\n";
    }
    return ok ? kExitOk : kExitFalsified;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Decentralized cell abstractions for networked single integrators"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "decab 0.1.0");

    Common common;
    std::size_t samples = 0;
    std::string format = "both";
    std::string selector = "all";
    std::optional<AgentId> agent;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config, "run configuration (JSON)")->required();
        sub->add_option("--seed", common.seed, "random seed");
        sub->add_option("--substeps", common.substeps, "RK4 steps per sampling period");
        sub->add_option("--trials", common.trials, "Monte Carlo trials");
        sub->add_option("-o,--out", common.out, "output directory");
    };
    auto* check = app.add_subcommand("check", "check admissibility of (d_max, dt)");
    auto* region = app.add_subcommand("region", "tabulate the feasible (d_max, dt) region as CSV");
    region->add_option("--samples", samples, "number of d_max samples");
    auto* abstract = app.add_subcommand("abstract", "build and export every agent's transition system");
    abstract->add_option("--format", format, "json, dot or both");
    auto* verify = app.add_subcommand("verify", "falsification search over transitions");
    verify->add_option("--select", selector, "all | random:N | comma-separated indices");
    verify->add_option("--agent", agent, "restrict to one agent");
    auto* simulate = app.add_subcommand("simulate", "execute a joint plan and dump the trajectory");
    auto* dump = app.add_subcommand("controller-dump", "sample one controller over [0, dt]");
    auto* validate = app.add_subcommand("validate-constants", "check declared M, L1, L2 by sampling");
    for (auto* s : {check, region, abstract, verify, simulate, dump, validate}) add_common(s);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        const Context ctx = load(common);
        if (*check) return cmd_check(ctx, out);
        if (*region) return cmd_region(ctx, samples ? samples : ctx.config.run.region_samples, out);
        if (*abstract) return cmd_abstract(ctx, format, out);
        if (*verify) return cmd_verify(ctx, selector, agent, out);
        if (*simulate) return cmd_simulate(ctx, out);
        if (*dump) return cmd_controller_dump(ctx, out);
        if (*validate) return cmd_validate_constants(ctx, out);
    } catch (const ResourceCap& e) {
        err << "error: " << e.what() << "\n";
        return kExitResource;
    } catch (const Infeasible& e) {
        err << "error: " << e.what() << "\n";
        return kExitFalsified;
    } catch (const IntegrationFailure& e) {
        err << "error: " << e.what() << "\n";
        return kExitFalsified;
    } catch (const MonitorViolation& e) {
        err << "error: " << e.what() << "\n";
        return kExitFalsified;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitInput;
}

}  // namespace decab
