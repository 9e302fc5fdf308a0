#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "decab/controller.hpp"
#include "decab/simulation.hpp"

namespace decab {

/// Finite box of cell indices, inclusive on both ends.
class Window {
public:
    Window(CellIndex lower, CellIndex upper);

    /// Cube of `half_width` cells around `center` on every axis.
    static Window around(const CellIndex& center, std::int64_t half_width);

    const CellIndex& lower() const noexcept { return lower_; }
    const CellIndex& upper() const noexcept { return upper_; }
    std::size_t dimension() const noexcept { return lower_.size(); }
    std::size_t cell_count() const noexcept;
    bool contains(const CellIndex& z) const noexcept;
    /// Lexicographic order, last axis fastest.
    std::vector<CellIndex> cells() const;

    friend bool operator==(const Window&, const Window&) = default;

private:
    CellIndex lower_;
    CellIndex upper_;
};

/// (l_i, l~_i, l_i') together with the reference point of the controller realizing it.
struct Transition {
    CellIndex source;
    CellConfiguration action;
    CellIndex target;
    std::vector<Vec> reference_point;
};

bool operator==(const Transition& a, const Transition& b);
bool operator<(const Transition& a, const Transition& b);

/// TS_i = (Q, L_i, ->_i) over a window of cells. Set semantics: inserting an
/// existing transition is a no-op, and iteration order is independent of
/// insertion order.
class TransitionSystem {
public:
    TransitionSystem(AgentId agent, Window window);

    AgentId agent() const noexcept { return agent_; }
    const Window& window() const noexcept { return window_; }

    /// Throws InvalidInput unless action.agent == agent and action.own() == source.
    void add(Transition transition);

    std::vector<CellIndex> states() const { return window_.cells(); }
    std::set<CellConfiguration> actions() const;
    std::vector<Transition> transitions() const;
    std::size_t size() const noexcept;

    /// Successors recorded for (source, action); empty if none were built.
    std::set<CellIndex> post_set(const CellIndex& source, const CellConfiguration& action) const;
    /// Transitions recorded for an action.
    std::vector<Transition> transitions_for(const CellConfiguration& action) const;

    friend bool operator==(const TransitionSystem& a, const TransitionSystem& b);

private:
    AgentId agent_;
    Window window_;
    std::map<CellConfiguration, std::set<Transition>> by_action_;
};

struct AgentTransition {
    CellIndex target;
    HybridController controller;

    Transition as_transition() const;
};

/// Constructive transition for one cell configuration, reference point at the cell
/// centres unless given. Throws Infeasible for inadmissible parameters unless
/// `allow_inadmissible` is set.
AgentTransition agent_transition(const DynamicsModel& model, const GridDecomposition& grid,
                                 const DiscretizationParams& params, const CellConfiguration& configuration,
                                 std::size_t substeps = kDefaultSubsteps, bool allow_inadmissible = false);
AgentTransition agent_transition(const DynamicsModel& model, const GridDecomposition& grid,
                                 const DiscretizationParams& params, const CellConfiguration& configuration,
                                 std::vector<Vec> reference_point, std::size_t substeps = kDefaultSubsteps,
                                 bool allow_inadmissible = false);

inline constexpr std::size_t kDefaultMaxConfigurations = 1'000'000;

struct BuildOptions {
    std::size_t substeps = kDefaultSubsteps;
    std::size_t max_configurations = kDefaultMaxConfigurations;
};

/// Number of configurations |window|^(|N_i|+1), saturating at SIZE_MAX.
std::size_t configuration_count(const AgentNetwork& network, AgentId agent, const Window& window);

/// Every configuration of `agent` with all cells in the window, in lexicographic order.
std::vector<CellConfiguration> enumerate_configurations(const AgentNetwork& network, AgentId agent,
                                                        const Window& window, std::size_t max_configurations);

/// Builds TS_i exhaustively: one constructive transition per configuration.
/// Throws ResourceCap past `max_configurations`, Infeasible for inadmissible params.
TransitionSystem build_transition_system(const DynamicsModel& model, const GridDecomposition& grid,
                                         const DiscretizationParams& params, AgentId agent, const Window& window,
                                         const BuildOptions& options = {});

struct VerifyOptions {
    std::size_t trials = 500;
    std::uint64_t seed = 1;
    std::size_t substeps = kDefaultSubsteps;
    std::int64_t context_radius = 1;  // non-neighbour cells are drawn within this many cells of l_i
    bool allow_inadmissible = false;
};

struct VerificationWitness {
    std::vector<CellIndex> global_configuration;
    std::vector<std::vector<Vec>> reference_points;  // per agent
    Vec initial_state;
    Vec endpoint;  // agent i at dt
};

struct MarginHistogram {
    // Bins of (margin / side) over [0, 0.5] in steps of 0.05; outside-cell margins go in `negative`.
    std::vector<std::size_t> bins = std::vector<std::size_t>(10, 0);
    std::size_t negative = 0;

    void add(double margin_over_side);
};

struct VerificationReport {
    Transition transition;
    std::size_t trials = 0;
    std::size_t counterexamples = 0;
    std::size_t input_bound_hits = 0;   // runs where some agent had |k| > v_max
    std::size_t containment_hits = 0;   // runs where some agent left its inflated cell
    double max_input_magnitude = 0.0;
    double min_margin = 0.0;            // smallest face margin of x_i(dt) in the target cell
    double reference_margin = 0.0;      // face margin of the reference endpoint
    bool marginal = false;              // reference endpoint within 1e-6 * side of a face
    double max_endpoint_deviation = 0.0;
    MarginHistogram histogram;
    std::optional<VerificationWitness> witness;

    /// Sampling evidence only: neighbours range over constructive controllers with
    /// random reference points, a subset of all admissible neighbour inputs.
    static constexpr std::string_view evidence = "monte-carlo falsification (constructive neighbour family)";
};

class WellPosednessFalsified : public Error {
public:
    explicit WellPosednessFalsified(VerificationReport report);
    const VerificationReport& report() const noexcept { return report_; }

private:
    VerificationReport report_;
};

/// Randomized search for a violation of the landing condition of one transition.
/// Initial states of agent i are the 2^n cell corners (pulled 1e-9 * side inwards)
/// followed by uniform draws; neighbours and non-neighbours start uniformly in their
/// cells and run constructive controllers with random reference points.
/// Throws WellPosednessFalsified when agent i misses the target, or when a monitor
/// fires under admissible parameters.
VerificationReport verify_transition(const DynamicsModel& model, const GridDecomposition& grid,
                                     const DiscretizationParams& params, const Transition& transition,
                                     const VerifyOptions& options = {});

struct PlanOptions {
    std::size_t trials = 100;
    std::uint64_t seed = 1;
    std::size_t substeps = kDefaultSubsteps;
};

struct PlanResult {
    std::vector<HybridController> controllers;
    MonitorReport report;  // worst case over trials
    std::size_t trials = 0;
    double min_margin = 0.0;
};

struct PlanWitness {
    AgentId agent = 0;
    Vec initial_state;
    Vec endpoint;
};

class CompositionFalsified : public Error {
public:
    CompositionFalsified(const std::string& what, PlanWitness witness);
    const PlanWitness& witness() const noexcept { return witness_; }

private:
    PlanWitness witness_;
};

/// Joint plan from `initial` to `target`: every target must be the constructive
/// successor of pr_i(initial) (PreconditionError otherwise). Simulates sampled
/// initial states and throws CompositionFalsified if any agent misses its target.
PlanResult compose_plan(const DynamicsModel& model, const GridDecomposition& grid, const DiscretizationParams& params,
                        std::span<const CellIndex> initial, std::span<const CellIndex> target,
                        const PlanOptions& options = {});

/// As above, with Post sets and controllers taken from prebuilt transition systems
/// (one per agent).
PlanResult compose_plan(std::span<const TransitionSystem> systems, const DynamicsModel& model,
                        const GridDecomposition& grid, const DiscretizationParams& params,
                        std::span<const CellIndex> initial, std::span<const CellIndex> target,
                        const PlanOptions& options = {});

enum class ExportFormat { json, dot };

/// Throws InvalidInput for anything but "json" or "dot".
ExportFormat parse_export_format(std::string_view name);

std::string export_transition_system(const TransitionSystem& ts, ExportFormat format);
std::string export_json(const TransitionSystem& ts);
std::string export_dot(const TransitionSystem& ts);
TransitionSystem import_json(std::string_view text);

}  // namespace decab
