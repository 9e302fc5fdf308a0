#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "decab/abstraction.hpp"
#include "decab/discretization.hpp"
#include "decab/geometry.hpp"
#include "decab/system.hpp"

namespace decab {

class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

struct GridConfig {
    std::size_t dimension = 0;
    double side = 0.0;
    std::vector<double> origin;
};

struct NetworkConfig {
    std::size_t agents = 0;
    std::vector<std::vector<AgentId>> neighbors;
};

struct DynamicsConfig {
    std::string model;                               // saturated_consensus | zero | constant_drift
    double gain = 0.0;                               // saturated_consensus
    std::vector<double> drift;                       // constant_drift
    std::optional<DynamicsConstants> declared;       // M, L1, L2 override (v_max from discretization)
};

struct DiscretizationConfig {
    double dt = 0.0;
    double v_max = 0.0;
};

struct RunOptions {
    std::size_t substeps = kDefaultSubsteps;
    std::size_t trials = 500;
    std::uint64_t seed = 1;
    std::optional<Window> window;
    std::string out;
    std::size_t max_configurations = kDefaultMaxConfigurations;
    double sample_radius = 1.0;
    std::int64_t context_radius = 1;
    std::size_t region_samples = 200;
};

struct PlanConfig {
    std::vector<CellIndex> initial;
    std::optional<std::vector<CellIndex>> target;
    std::optional<std::vector<std::vector<double>>> initial_states;
};

struct ControllerDumpConfig {
    AgentId agent = 0;
    std::vector<CellIndex> configuration;
    std::optional<std::vector<double>> initial_state;
};

/// Parsed run configuration. Every numeric constraint is checked at parse time and
/// unknown keys are rejected.
struct RunConfig {
    GridConfig grid;
    NetworkConfig network;
    DynamicsConfig dynamics;
    DiscretizationConfig discretization;
    RunOptions run;
    std::optional<PlanConfig> plan;
    std::optional<ControllerDumpConfig> controller;
};

/// Throws ConfigError (or InvalidInput from model construction) on any violation.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

GridDecomposition make_grid(const RunConfig& config);
AgentNetwork make_network(const RunConfig& config);
DynamicsModel make_model(const RunConfig& config);
DiscretizationParams make_params(const RunConfig& config);

}  // namespace decab
