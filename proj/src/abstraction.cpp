#include "decab/abstraction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace decab {

namespace {

int compare_vec(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    for (Eigen::Index k = 0; k < a.size(); ++k) {
        if (a[k] < b[k]) return -1;
        if (b[k] < a[k]) return 1;
    }
    return 0;
}

int compare_points(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (int c = compare_vec(a[k], b[k]); c != 0) return c;
    return 0;
}

// Uniform point of the half-open cell; redraws the rare sample that rounds onto the upper face.
Vec sample_in_cell(const GridDecomposition& grid, const CellIndex& z, Rng& rng) {
    const Box b = grid.cell_box(z);
    for (;;) {
        Vec x = rng.uniform_in_box(b.lower, b.upper);
        if (grid.cell_of(x) == z) return x;
    }
}

// Corner `mask` of the cell, pulled inwards by 1e-9 * side on every axis.
Vec inset_corner(const GridDecomposition& grid, const CellIndex& z, std::size_t mask) {
    const Box b = grid.cell_box(z);
    const double inset = 1e-9 * grid.side();
    Vec x(b.lower.size());
    for (Eigen::Index k = 0; k < x.size(); ++k)
        x[k] = (mask >> k) & 1U ? b.upper[k] - inset : b.lower[k] + inset;
    return x;
}

void require_admissible(const DiscretizationParams& params, bool allow_inadmissible) {
    if (!params.admissible && !allow_inadmissible)
        throw Infeasible("discretization is not admissible: " + params.reason);
}

std::size_t saturating_mul(std::size_t a, std::size_t b) {
    if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) return std::numeric_limits<std::size_t>::max();
    return a * b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Window

Window::Window(CellIndex lower, CellIndex upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
    if (lower_.size() == 0 || lower_.size() != upper_.size()) throw InvalidInput("window bounds must share a dimension");
    for (std::size_t k = 0; k < lower_.size(); ++k)
        if (lower_[k] > upper_[k]) throw InvalidInput("window is empty along axis " + std::to_string(k));
}

Window Window::around(const CellIndex& center, std::int64_t half_width) {
    CellIndex lo = center;
    CellIndex hi = center;
    for (std::size_t k = 0; k < center.size(); ++k) {
        lo[k] -= half_width;
        hi[k] += half_width;
    }
    return Window(std::move(lo), std::move(hi));
}

std::size_t Window::cell_count() const noexcept {
    std::size_t c = 1;
    for (std::size_t k = 0; k < lower_.size(); ++k)
        c = saturating_mul(c, static_cast<std::size_t>(upper_[k] - lower_[k] + 1));
    return c;
}

bool Window::contains(const CellIndex& z) const noexcept {
    if (z.size() != lower_.size()) return false;
    for (std::size_t k = 0; k < z.size(); ++k)
        if (z[k] < lower_[k] || z[k] > upper_[k]) return false;
    return true;
}

std::vector<CellIndex> Window::cells() const {
    std::vector<CellIndex> out;
    out.reserve(cell_count());
    CellIndex z = lower_;
    for (;;) {
        out.push_back(z);
        std::size_t k = z.size();
        while (k > 0) {
            --k;
            if (z[k] < upper_[k]) {
                ++z[k];
                break;
            }
            z[k] = lower_[k];
            if (k == 0) return out;
        }
    }
}

// ---------------------------------------------------------------------------
// Transition system

bool operator==(const Transition& a, const Transition& b) {
    return a.source == b.source && a.action == b.action && a.target == b.target &&
           compare_points(a.reference_point, b.reference_point) == 0;
}

bool operator<(const Transition& a, const Transition& b) {
    if (a.source != b.source) return a.source < b.source;
    if (a.action != b.action) return a.action < b.action;
    if (a.target != b.target) return a.target < b.target;
    return compare_points(a.reference_point, b.reference_point) < 0;
}

TransitionSystem::TransitionSystem(AgentId agent, Window window) : agent_(agent), window_(std::move(window)) {}

void TransitionSystem::add(Transition transition) {
    if (transition.action.agent != agent_)
        throw InvalidInput("transition action belongs to agent " + std::to_string(transition.action.agent));
    if (transition.action.cells.empty() || transition.action.own() != transition.source)
        throw InvalidInput("action " + transition.action.to_string() + " does not start at source " +
                           transition.source.to_string());
    by_action_[transition.action].insert(std::move(transition));
}

std::set<CellConfiguration> TransitionSystem::actions() const {
    std::set<CellConfiguration> out;
    for (const auto& [action, _] : by_action_) out.insert(action);
    return out;
}

std::vector<Transition> TransitionSystem::transitions() const {
    std::vector<Transition> out;
    for (const auto& [_, set] : by_action_) out.insert(out.end(), set.begin(), set.end());
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t TransitionSystem::size() const noexcept {
    std::size_t n = 0;
    for (const auto& [_, set] : by_action_) n += set.size();
    return n;
}

std::set<CellIndex> TransitionSystem::post_set(const CellIndex& source, const CellConfiguration& action) const {
    if (action.cells.empty() || action.own() != source)
        throw InvalidInput("action " + action.to_string() + " does not start at source " + source.to_string());
    std::set<CellIndex> out;
    if (auto it = by_action_.find(action); it != by_action_.end())
        for (const auto& t : it->second) out.insert(t.target);
    return out;
}

std::vector<Transition> TransitionSystem::transitions_for(const CellConfiguration& action) const {
    std::vector<Transition> out;
    if (auto it = by_action_.find(action); it != by_action_.end()) out.assign(it->second.begin(), it->second.end());
    return out;
}

bool operator==(const TransitionSystem& a, const TransitionSystem& b) {
    return a.agent_ == b.agent_ && a.window_ == b.window_ && a.transitions() == b.transitions();
}

// ---------------------------------------------------------------------------
// Construction

Transition AgentTransition::as_transition() const {
    return {controller.configuration().own(), controller.configuration(), target, controller.reference_point()};
}

AgentTransition agent_transition(const DynamicsModel& model, const GridDecomposition& grid,
                                 const DiscretizationParams& params, const CellConfiguration& configuration,
                                 std::vector<Vec> reference_point, std::size_t substeps, bool allow_inadmissible) {
    require_admissible(params, allow_inadmissible);
    HybridController c(model, grid, params, configuration, std::move(reference_point), substeps);
    CellIndex target = c.target_cell();
    return {std::move(target), std::move(c)};
}

AgentTransition agent_transition(const DynamicsModel& model, const GridDecomposition& grid,
                                 const DiscretizationParams& params, const CellConfiguration& configuration,
                                 std::size_t substeps, bool allow_inadmissible) {
    return agent_transition(model, grid, params, configuration, reference_point(grid, configuration), substeps,
                            allow_inadmissible);
}

std::size_t configuration_count(const AgentNetwork& network, AgentId agent, const Window& window) {
    std::size_t count = 1;
    for (std::size_t k = 0; k <= network.degree(agent); ++k) count = saturating_mul(count, window.cell_count());
    return count;
}

std::vector<CellConfiguration> enumerate_configurations(const AgentNetwork& network, AgentId agent,
                                                        const Window& window, std::size_t max_configurations) {
    const std::size_t count = configuration_count(network, agent, window);
    if (count > max_configurations)
        throw ResourceCap("agent " + std::to_string(agent) + " has " +
                          (count == std::numeric_limits<std::size_t>::max() ? std::string("too many")
                                                                             : std::to_string(count)) +
                          " configurations in the window, cap is " + std::to_string(max_configurations));
    const auto cells = window.cells();
    const std::size_t slots = network.degree(agent) + 1;
    std::vector<std::size_t> digit(slots, 0);
    std::vector<CellConfiguration> out;
    out.reserve(count);
    for (std::size_t c = 0; c < count; ++c) {
        CellConfiguration cfg{agent, {}};
        cfg.cells.reserve(slots);
        for (std::size_t s = 0; s < slots; ++s) cfg.cells.push_back(cells[digit[s]]);
        out.push_back(std::move(cfg));
        for (std::size_t s = slots; s-- > 0;) {
            if (++digit[s] < cells.size()) break;
            digit[s] = 0;
        }
    }
    return out;
}

TransitionSystem build_transition_system(const DynamicsModel& model, const GridDecomposition& grid,
                                         const DiscretizationParams& params, AgentId agent, const Window& window,
                                         const BuildOptions& options) {
    require_admissible(params, false);
    model.network().check_agent(agent);
    if (window.dimension() != grid.dimension()) throw InvalidInput("window and grid dimensions differ");
    TransitionSystem ts(agent, window);
    for (const auto& cfg : enumerate_configurations(model.network(), agent, window, options.max_configurations))
        ts.add(agent_transition(model, grid, params, cfg, options.substeps).as_transition());
    return ts;
}

// ---------------------------------------------------------------------------
// Verification

void MarginHistogram::add(double margin_over_side) {
    if (margin_over_side < 0.0) {
        ++negative;
        return;
    }
    const auto b = static_cast<std::size_t>(std::floor(margin_over_side / 0.05));
    ++bins[std::min(b, bins.size() - 1)];
}

WellPosednessFalsified::WellPosednessFalsified(VerificationReport report)
    : Error("transition " + report.transition.source.to_string() + " --" + report.transition.action.to_string() +
            "--> " + report.transition.target.to_string() + " falsified: " + std::to_string(report.counterexamples) +
            " landing failures, " + std::to_string(report.input_bound_hits) + " input-bound hits, " +
            std::to_string(report.containment_hits) + " containment hits over " + std::to_string(report.trials) +
            " trials"),
      report_(std::move(report)) {}

VerificationReport verify_transition(const DynamicsModel& model, const GridDecomposition& grid,
                                     const DiscretizationParams& params, const Transition& transition,
                                     const VerifyOptions& options) {
    require_admissible(params, options.allow_inadmissible);
    if (options.trials == 0) throw InvalidInput("verification needs at least one trial");
    const auto& net = model.network();
    const std::size_t N = net.agent_count();
    const std::size_t dim = net.state_dimension();
    const AgentId i = transition.action.agent;
    net.check_agent(i);
    if (transition.action.own() != transition.source) throw InvalidInput("transition action does not start at its source");

    const HybridController own(model, grid, params, transition.action, transition.reference_point, options.substeps);
    const auto& nb = net.neighbors(i);

    VerificationReport rep;
    rep.transition = transition;
    rep.trials = options.trials;
    rep.reference_margin = grid.face_margin(transition.target, own.reference_endpoint());
    rep.marginal = rep.reference_margin < 1e-6 * grid.side();
    rep.min_margin = std::numeric_limits<double>::infinity();
    const std::size_t corners = dim < 20 ? (std::size_t{1} << dim) : 0;

    for (std::size_t t = 0; t < options.trials; ++t) {
        Rng rng(derive_seed(options.seed, t));
        std::vector<CellIndex> global(N);
        std::vector<bool> fixed(N, false);
        global[i] = transition.source;
        fixed[i] = true;
        for (std::size_t k = 0; k < nb.size(); ++k) {
            global[nb[k]] = transition.action.cells[k + 1];
            fixed[nb[k]] = true;
        }
        for (AgentId a = 0; a < N; ++a) {
            if (fixed[a]) continue;
            CellIndex z = transition.source;
            for (std::size_t k = 0; k < dim; ++k) z[k] += rng.uniform_int(-options.context_radius, options.context_radius);
            global[a] = std::move(z);
        }

        std::vector<Vec> x0(N);
        for (AgentId a = 0; a < N; ++a)
            x0[a] = (a == i && t < corners) ? inset_corner(grid, global[a], t) : sample_in_cell(grid, global[a], rng);

        std::vector<HybridController> controllers;
        controllers.reserve(N);
        for (AgentId a = 0; a < N; ++a) {
            if (a == i) {
                controllers.push_back(own);
                continue;
            }
            const auto cfg = net.project_configuration(global, a);
            controllers.emplace_back(model, grid, params, cfg, random_reference_point(grid, cfg, rng), options.substeps);
        }

        const Vec stacked = stack_states(x0);
        const auto run = integrate_closed_loop(model, controllers, stacked, options.substeps);
        const Vec endpoint = agent_state(run.trajectory.states.back(), i, dim);
        const double margin = grid.face_margin(transition.target, endpoint);
        rep.min_margin = std::min(rep.min_margin, margin);
        rep.histogram.add(margin / grid.side());
        rep.max_endpoint_deviation = std::max(rep.max_endpoint_deviation, run.report.endpoint_deviation[i]);
        const double max_input =
            *std::max_element(run.report.max_input_magnitude.begin(), run.report.max_input_magnitude.end());
        rep.max_input_magnitude = std::max(rep.max_input_magnitude, max_input);
        if (!run.report.input_bound_ok(params.v_max)) ++rep.input_bound_hits;
        if (!run.report.containment_all()) ++rep.containment_hits;

        const bool landed = grid.cell_of(endpoint) == transition.target;
        if (!landed) ++rep.counterexamples;
        const bool monitor_fired = !run.report.input_bound_ok(params.v_max) || !run.report.containment_all();
        if (!rep.witness && (!landed || (params.admissible && monitor_fired))) {
            std::vector<std::vector<Vec>> refs;
            for (const auto& c : controllers) refs.push_back(c.reference_point());
            rep.witness = VerificationWitness{global, std::move(refs), stacked, endpoint};
        }
    }
    const bool monitors_failed = params.admissible && (rep.input_bound_hits > 0 || rep.containment_hits > 0);
    if (rep.counterexamples > 0 || monitors_failed) throw WellPosednessFalsified(std::move(rep));
    return rep;
}

// ---------------------------------------------------------------------------
// Plan composition

CompositionFalsified::CompositionFalsified(const std::string& what, PlanWitness witness)
    : Error(what), witness_(std::move(witness)) {}

namespace {

PlanResult simulate_plan(const DynamicsModel& model, const GridDecomposition& grid,
                         std::vector<HybridController> controllers, std::span<const CellIndex> target,
                         const PlanOptions& options) {
    const auto& net = model.network();
    const std::size_t N = net.agent_count();
    const std::size_t dim = net.state_dimension();
    PlanResult out;
    out.trials = options.trials;
    out.min_margin = std::numeric_limits<double>::infinity();
    MonitorReport& agg = out.report;
    agg.max_input_magnitude.assign(N, 0.0);
    agg.max_input_time.assign(N, 0.0);
    agg.containment_ok.assign(N, true);
    agg.endpoint_deviation.assign(N, 0.0);
    agg.interpolation_deviation.assign(N, 0.0);

    for (std::size_t t = 0; t < options.trials; ++t) {
        Rng rng(derive_seed(options.seed, t));
        std::vector<Vec> x0(N);
        for (AgentId a = 0; a < N; ++a) {
            const CellIndex& z = controllers[a].configuration().own();
            x0[a] = t == 0 ? grid.cell_center(z) : sample_in_cell(grid, z, rng);
        }
        const Vec stacked = stack_states(x0);
        const auto run = integrate_closed_loop(model, controllers, stacked, options.substeps);
        for (AgentId a = 0; a < N; ++a) {
            if (run.report.max_input_magnitude[a] > agg.max_input_magnitude[a]) {
                agg.max_input_magnitude[a] = run.report.max_input_magnitude[a];
                agg.max_input_time[a] = run.report.max_input_time[a];
            }
            agg.containment_ok[a] = agg.containment_ok[a] && run.report.containment_ok[a];
            agg.endpoint_deviation[a] = std::max(agg.endpoint_deviation[a], run.report.endpoint_deviation[a]);
            agg.interpolation_deviation[a] =
                std::max(agg.interpolation_deviation[a], run.report.interpolation_deviation[a]);
            const Vec endpoint = agent_state(run.trajectory.states.back(), a, dim);
            out.min_margin = std::min(out.min_margin, grid.face_margin(target[a], endpoint));
            if (grid.cell_of(endpoint) != target[a])
                throw CompositionFalsified("agent " + std::to_string(a) + " missed target " + target[a].to_string() +
                                               " (landed in " + grid.cell_of(endpoint).to_string() + ") in trial " +
                                               std::to_string(t),
                                           PlanWitness{a, stacked, endpoint});
        }
    }
    out.controllers = std::move(controllers);
    return out;
}

void check_plan_shape(const AgentNetwork& net, std::span<const CellIndex> initial, std::span<const CellIndex> target,
                      const PlanOptions& options) {
    if (initial.size() != net.agent_count() || target.size() != net.agent_count())
        throw PreconditionError("plan configurations must list one cell per agent");
    if (options.trials == 0) throw InvalidInput("plan needs at least one trial");
}

}  // namespace

PlanResult compose_plan(const DynamicsModel& model, const GridDecomposition& grid, const DiscretizationParams& params,
                        std::span<const CellIndex> initial, std::span<const CellIndex> target,
                        const PlanOptions& options) {
    require_admissible(params, false);
    const auto& net = model.network();
    check_plan_shape(net, initial, target, options);
    std::vector<HybridController> controllers;
    controllers.reserve(net.agent_count());
    for (AgentId a = 0; a < net.agent_count(); ++a) {
        auto at = agent_transition(model, grid, params, net.project_configuration(initial, a), options.substeps);
        if (at.target != target[a])
            throw PreconditionError("target " + target[a].to_string() + " of agent " + std::to_string(a) +
                                    " is not in Post; the constructive successor is " + at.target.to_string());
        controllers.push_back(std::move(at.controller));
    }
    return simulate_plan(model, grid, std::move(controllers), target, options);
}

PlanResult compose_plan(std::span<const TransitionSystem> systems, const DynamicsModel& model,
                        const GridDecomposition& grid, const DiscretizationParams& params,
                        std::span<const CellIndex> initial, std::span<const CellIndex> target,
                        const PlanOptions& options) {
    require_admissible(params, false);
    const auto& net = model.network();
    check_plan_shape(net, initial, target, options);
    if (systems.size() != net.agent_count()) throw PreconditionError("expected one transition system per agent");
    std::vector<HybridController> controllers;
    controllers.reserve(net.agent_count());
    for (AgentId a = 0; a < net.agent_count(); ++a) {
        if (systems[a].agent() != a) throw PreconditionError("transition systems must be ordered by agent");
        const auto cfg = net.project_configuration(initial, a);
        const auto candidates = systems[a].transitions_for(cfg);
        auto it = std::find_if(candidates.begin(), candidates.end(),
                               [&](const Transition& t) { return t.target == target[a]; });
        if (it == candidates.end())
            throw PreconditionError("target " + target[a].to_string() + " of agent " + std::to_string(a) +
                                    " is not in Post(" + cfg.own().to_string() + "; " + cfg.to_string() + ")");
        controllers.emplace_back(model, grid, params, cfg, it->reference_point, options.substeps);
    }
    return simulate_plan(model, grid, std::move(controllers), target, options);
}

// ---------------------------------------------------------------------------
// Export

ExportFormat parse_export_format(std::string_view name) {
    if (name == "json") return ExportFormat::json;
    if (name == "dot") return ExportFormat::dot;
    throw InvalidInput("unsupported export format '" + std::string(name) + "' (expected json or dot)");
}

std::string export_transition_system(const TransitionSystem& ts, ExportFormat format) {
    return format == ExportFormat::json ? export_json(ts) : export_dot(ts);
}

namespace {

using nlohmann::json;

json cell_json(const CellIndex& z) { return json(z.coords()); }

json point_json(const Vec& x) {
    json a = json::array();
    for (Eigen::Index k = 0; k < x.size(); ++k) a.push_back(x[k]);
    return a;
}

CellIndex cell_from(const json& j) { return CellIndex(j.get<std::vector<std::int64_t>>()); }

Vec point_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string export_json(const TransitionSystem& ts) {
    json doc;
    doc["agent"] = ts.agent();
    doc["window"] = {{"lower", cell_json(ts.window().lower())}, {"upper", cell_json(ts.window().upper())}};
    json states = json::array();
    for (const auto& z : ts.states()) states.push_back(cell_json(z));
    doc["states"] = std::move(states);
    json transitions = json::array();
    for (const auto& t : ts.transitions()) {
        json action = json::array();
        for (const auto& z : t.action.cells) action.push_back(cell_json(z));
        json ref = json::array();
        for (const auto& x : t.reference_point) ref.push_back(point_json(x));
        transitions.push_back(
            {{"source", cell_json(t.source)}, {"action", action}, {"target", cell_json(t.target)}, {"reference_point", ref}});
    }
    doc["transitions"] = std::move(transitions);
    return doc.dump(2) + "\n";
}

TransitionSystem import_json(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
        TransitionSystem ts(doc.at("agent").get<AgentId>(),
                            Window(cell_from(doc.at("window").at("lower")), cell_from(doc.at("window").at("upper"))));
        for (const auto& t : doc.at("transitions")) {
            Transition tr;
            tr.source = cell_from(t.at("source"));
            tr.action.agent = ts.agent();
            for (const auto& z : t.at("action")) tr.action.cells.push_back(cell_from(z));
            tr.target = cell_from(t.at("target"));
            for (const auto& x : t.at("reference_point")) tr.reference_point.push_back(point_from(x));
            ts.add(std::move(tr));
        }
        return ts;
    } catch (const json::exception& e) {
        throw InvalidInput(std::string("malformed transition system document: ") + e.what());
    }
}

std::string export_dot(const TransitionSystem& ts) {
    std::ostringstream os;
    os << "digraph TS_" << ts.agent() << " {\n";
    for (const auto& z : ts.states()) os << "  \"" << z.to_string() << "\";\n";
    for (const auto& t : ts.transitions())
        os << "  \"" << t.source.to_string() << "\" -> \"" << t.target.to_string() << "\" [label=\""
           << t.action.to_string() << "\"];\n";
    os << "}\n";
    return os.str();
}

}  // namespace decab
