#include "decab/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace decab {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(path + " must be an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, _] : j.items())
        if (!ok.contains(key)) throw ConfigError("unknown key '" + path + "." + key + "'");
}

const json& require(const json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw ConfigError("missing key '" + path + "." + key + "'");
    return j.at(key);
}

double positive(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    const double x = j.get<double>();
    if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(what + " must be positive and finite");
    return x;
}

double nonnegative(const json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    const double x = j.get<double>();
    if (!(x >= 0.0) || !std::isfinite(x)) throw ConfigError(what + " must be nonnegative and finite");
    return x;
}

std::uint64_t count(const json& j, const std::string& what, std::uint64_t min = 1) {
    if (!j.is_number_integer() || j.get<std::int64_t>() < static_cast<std::int64_t>(min))
        throw ConfigError(what + " must be an integer >= " + std::to_string(min));
    return j.get<std::uint64_t>();
}

std::vector<double> vector_of(const json& j, const std::string& what, std::size_t size) {
    if (!j.is_array() || j.size() != size) throw ConfigError(what + " must be an array of " + std::to_string(size) + " numbers");
    std::vector<double> v;
    for (const auto& e : j) {
        if (!e.is_number() || !std::isfinite(e.get<double>())) throw ConfigError(what + " must contain finite numbers");
        v.push_back(e.get<double>());
    }
    return v;
}

CellIndex cell_of_json(const json& j, const std::string& what, std::size_t dim) {
    if (!j.is_array() || j.size() != dim) throw ConfigError(what + " must be an integer array of length " + std::to_string(dim));
    std::vector<std::int64_t> z;
    for (const auto& e : j) {
        if (!e.is_number_integer()) throw ConfigError(what + " must contain integers");
        z.push_back(e.get<std::int64_t>());
    }
    return CellIndex(std::move(z));
}

std::vector<CellIndex> cells_of_json(const json& j, const std::string& what, std::size_t dim, std::size_t size) {
    if (!j.is_array() || j.size() != size) throw ConfigError(what + " must list " + std::to_string(size) + " cells");
    std::vector<CellIndex> out;
    for (std::size_t k = 0; k < j.size(); ++k) out.push_back(cell_of_json(j[k], what + "[" + std::to_string(k) + "]", dim));
    return out;
}

GridConfig parse_grid(const json& j) {
    check_keys(j, "grid", {"dimension", "side", "diameter", "origin"});
    GridConfig g;
    g.dimension = count(require(j, "grid", "dimension"), "grid.dimension");
    const bool has_side = j.contains("side");
    const bool has_diameter = j.contains("diameter");
    if (has_side == has_diameter) throw ConfigError("grid needs exactly one of 'side' or 'diameter'");
    g.side = has_side ? positive(j.at("side"), "grid.side")
                      : positive(j.at("diameter"), "grid.diameter") / std::sqrt(static_cast<double>(g.dimension));
    g.origin = j.contains("origin") ? vector_of(j.at("origin"), "grid.origin", g.dimension)
                                    : std::vector<double>(g.dimension, 0.0);
    return g;
}

NetworkConfig parse_network(const json& j) {
    check_keys(j, "network", {"agents", "edges", "neighbors"});
    NetworkConfig n;
    n.agents = count(require(j, "network", "agents"), "network.agents");
    const bool has_edges = j.contains("edges");
    const bool has_neighbors = j.contains("neighbors");
    if (has_edges && has_neighbors) throw ConfigError("network takes either 'edges' or 'neighbors', not both");
    n.neighbors.assign(n.agents, {});
    if (has_neighbors) {
        const auto& lists = j.at("neighbors");
        if (!lists.is_array() || lists.size() != n.agents)
            throw ConfigError("network.neighbors must hold one list per agent");
        for (std::size_t i = 0; i < n.agents; ++i) {
            if (!lists[i].is_array()) throw ConfigError("network.neighbors entries must be arrays");
            for (const auto& e : lists[i]) n.neighbors[i].push_back(count(e, "neighbour id", 0));
        }
    } else if (has_edges) {
        std::vector<std::pair<AgentId, AgentId>> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw ConfigError("network.edges entries must be [a, b] pairs");
            edges.emplace_back(count(e[0], "edge endpoint", 0), count(e[1], "edge endpoint", 0));
        }
        try {
            // Reuse the network's undirected sugar for validation and ordering.
            n.neighbors.clear();
            const auto net = AgentNetwork::undirected(n.agents, 1, edges);
            for (AgentId i = 0; i < n.agents; ++i) n.neighbors.push_back(net.neighbors(i));
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("network.edges: ") + e.what());
        }
    }
    return n;
}

DynamicsConfig parse_dynamics(const json& j, std::size_t dim) {
    check_keys(j, "dynamics", {"model", "gain", "drift", "constants"});
    DynamicsConfig d;
    const auto& model = require(j, "dynamics", "model");
    if (!model.is_string()) throw ConfigError("dynamics.model must be a string");
    d.model = model.get<std::string>();
    if (j.contains("constants")) {
        const auto& c = j.at("constants");
        check_keys(c, "dynamics.constants", {"M", "L1", "L2"});
        DynamicsConstants dc;
        dc.M = positive(require(c, "dynamics.constants", "M"), "dynamics.constants.M");
        dc.L1 = nonnegative(require(c, "dynamics.constants", "L1"), "dynamics.constants.L1");
        dc.L2 = nonnegative(require(c, "dynamics.constants", "L2"), "dynamics.constants.L2");
        d.declared = dc;
    }
    if (d.model == "saturated_consensus") {
        d.gain = positive(require(j, "dynamics", "gain"), "dynamics.gain");
        if (j.contains("drift")) throw ConfigError("dynamics.drift is only valid for constant_drift");
    } else if (d.model == "zero" || d.model == "constant_drift") {
        if (j.contains("gain")) throw ConfigError("dynamics.gain is only valid for saturated_consensus");
        if (!d.declared) throw ConfigError("dynamics model '" + d.model + "' needs a 'constants' block");
        if (d.model == "constant_drift") d.drift = vector_of(require(j, "dynamics", "drift"), "dynamics.drift", dim);
        else if (j.contains("drift")) throw ConfigError("dynamics.drift is only valid for constant_drift");
    } else {
        throw ConfigError("unknown dynamics model '" + d.model + "'");
    }
    return d;
}

RunOptions parse_run(const json& j, std::size_t dim) {
    check_keys(j, "run", {"substeps", "trials", "seed", "window", "out", "max_configurations", "sample_radius",
                          "context_radius", "region_samples"});
    RunOptions r;
    if (j.contains("substeps")) r.substeps = count(j.at("substeps"), "run.substeps");
    if (j.contains("trials")) r.trials = count(j.at("trials"), "run.trials");
    if (j.contains("seed")) r.seed = count(j.at("seed"), "run.seed", 0);
    if (j.contains("max_configurations")) r.max_configurations = count(j.at("max_configurations"), "run.max_configurations");
    if (j.contains("sample_radius")) r.sample_radius = positive(j.at("sample_radius"), "run.sample_radius");
    if (j.contains("context_radius")) r.context_radius = static_cast<std::int64_t>(count(j.at("context_radius"), "run.context_radius", 0));
    if (j.contains("region_samples")) r.region_samples = count(j.at("region_samples"), "run.region_samples");
    if (j.contains("out")) {
        if (!j.at("out").is_string()) throw ConfigError("run.out must be a string");
        r.out = j.at("out").get<std::string>();
    }
    if (j.contains("window")) {
        const auto& w = j.at("window");
        check_keys(w, "run.window", {"lower", "upper"});
        try {
            r.window = Window(cell_of_json(require(w, "run.window", "lower"), "run.window.lower", dim),
                              cell_of_json(require(w, "run.window", "upper"), "run.window.upper", dim));
        } catch (const ConfigError&) {
            throw;
        } catch (const InvalidInput& e) {
            throw ConfigError(std::string("run.window: ") + e.what());
        }
    }
    return r;
}

std::vector<std::vector<AgentId>> neighbors_or_throw(const NetworkConfig& n) { return n.neighbors; }

}  // namespace

RunConfig parse_config(const json& doc) {
    check_keys(doc, "config", {"grid", "network", "dynamics", "discretization", "run", "plan", "controller"});
    RunConfig c;
    c.grid = parse_grid(require(doc, "config", "grid"));
    c.network = parse_network(require(doc, "config", "network"));
    c.dynamics = parse_dynamics(require(doc, "config", "dynamics"), c.grid.dimension);

    const auto& disc = require(doc, "config", "discretization");
    check_keys(disc, "discretization", {"dt", "v_max"});
    c.discretization.dt = positive(require(disc, "discretization", "dt"), "discretization.dt");
    c.discretization.v_max = positive(require(disc, "discretization", "v_max"), "discretization.v_max");

    if (doc.contains("run")) c.run = parse_run(doc.at("run"), c.grid.dimension);

    const std::size_t dim = c.grid.dimension;
    const std::size_t agents = c.network.agents;
    if (doc.contains("plan")) {
        const auto& p = doc.at("plan");
        check_keys(p, "plan", {"initial", "target", "initial_states"});
        PlanConfig plan;
        plan.initial = cells_of_json(require(p, "plan", "initial"), "plan.initial", dim, agents);
        if (p.contains("target")) plan.target = cells_of_json(p.at("target"), "plan.target", dim, agents);
        if (p.contains("initial_states")) {
            const auto& s = p.at("initial_states");
            if (!s.is_array() || s.size() != agents) throw ConfigError("plan.initial_states must list one point per agent");
            std::vector<std::vector<double>> states;
            for (const auto& x : s) states.push_back(vector_of(x, "plan.initial_states entry", dim));
            plan.initial_states = std::move(states);
        }
        c.plan = std::move(plan);
    }
    if (doc.contains("controller")) {
        const auto& k = doc.at("controller");
        check_keys(k, "controller", {"agent", "configuration", "initial_state"});
        ControllerDumpConfig cd;
        cd.agent = count(require(k, "controller", "agent"), "controller.agent", 0);
        if (cd.agent >= agents) throw ConfigError("controller.agent out of range");
        const auto& cfg = require(k, "controller", "configuration");
        cd.configuration =
            cells_of_json(cfg, "controller.configuration", dim, c.network.neighbors[cd.agent].size() + 1);
        if (k.contains("initial_state")) cd.initial_state = vector_of(k.at("initial_state"), "controller.initial_state", dim);
        c.controller = std::move(cd);
    }

    // Constructing the model validates the network and v_max < M.
    (void)make_model(c);
    return c;
}

RunConfig parse_config_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

GridDecomposition make_grid(const RunConfig& config) {
    const auto& g = config.grid;
    return GridDecomposition(g.dimension, g.side,
                             Eigen::Map<const Vec>(g.origin.data(), static_cast<Eigen::Index>(g.origin.size())));
}

AgentNetwork make_network(const RunConfig& config) {
    return AgentNetwork(config.grid.dimension, neighbors_or_throw(config.network));
}

DynamicsModel make_model(const RunConfig& config) {
    const auto& d = config.dynamics;
    const double v_max = config.discretization.v_max;
    AgentNetwork net = make_network(config);
    auto declared = [&]() {
        DynamicsConstants c = *d.declared;
        c.v_max = v_max;
        return c;
    };
    if (d.model == "saturated_consensus") {
        DynamicsModel m = saturated_consensus(std::move(net), d.gain, v_max);
        return d.declared ? m.with_constants(declared()) : m;
    }
    if (d.model == "zero") return zero_feedback(std::move(net), declared());
    return constant_drift(std::move(net), Eigen::Map<const Vec>(d.drift.data(), static_cast<Eigen::Index>(d.drift.size())),
                          declared());
}

DiscretizationParams make_params(const RunConfig& config) {
    return is_admissible(make_model(config), make_grid(config).diameter(), config.discretization.dt);
}

}  // namespace decab
