#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decab/errors.hpp"
#include "decab/geometry.hpp"

namespace decab {

/// N agents in R^n with per-agent ordered neighbour lists. Agent ids are 0-based.
class AgentNetwork {
public:
    AgentNetwork(std::size_t state_dimension, std::vector<std::vector<AgentId>> neighbors);

    /// Symmetric adjacency from an edge list; neighbour lists come out sorted by id.
    static AgentNetwork undirected(std::size_t agent_count, std::size_t state_dimension,
                                   std::span<const std::pair<AgentId, AgentId>> edges);

    /// 0 - 1 - ... - (N-1)
    static AgentNetwork path(std::size_t agent_count, std::size_t state_dimension);

    std::size_t agent_count() const noexcept { return neighbors_.size(); }
    std::size_t state_dimension() const noexcept { return dimension_; }
    const std::vector<AgentId>& neighbors(AgentId i) const;
    std::size_t degree(AgentId i) const { return neighbors(i).size(); }
    std::size_t max_degree() const noexcept;

    /// pr_i: (global cells) -> (l_i, l_{j_1}, ..., l_{j_|N_i|}).
    CellConfiguration project_configuration(std::span<const CellIndex> global_cells, AgentId i) const;

    void check_agent(AgentId i) const;

private:
    std::size_t dimension_;
    std::vector<std::vector<AgentId>> neighbors_;
};

/// f_i(x_i, x_{j_1}, ..., x_{j_|N_i|}); neighbour states arrive in declared order.
using FeedbackFn = std::function<Vec(AgentId, const Vec&, std::span<const Vec>)>;

/// Declared global bound M, neighbour-block Lipschitz constant L1, self-block
/// Lipschitz constant L2 and free-input bound v_max.
struct DynamicsConstants {
    double M = 0.0;
    double L1 = 0.0;
    double L2 = 0.0;
    double v_max = 0.0;
};

/// Interconnection dynamics with declared constants. Cheap to copy; the
/// evaluator and network are shared and immutable.
class DynamicsModel {
public:
    /// Throws InvalidInput unless M > 0, v_max > 0, L1, L2 >= 0 and v_max < M.
    DynamicsModel(AgentNetwork network, FeedbackFn feedback, DynamicsConstants constants, std::string name);

    const AgentNetwork& network() const noexcept { return state_->network; }
    const DynamicsConstants& constants() const noexcept { return state_->constants; }
    const std::string& name() const noexcept { return state_->name; }

    /// f_i from agent i's own state and neighbour states in declared order.
    Vec evaluate_local(AgentId i, const Vec& self, std::span<const Vec> neighbors) const;

    /// f_i from the stacked global state (length N*n).
    Vec evaluate_feedback(AgentId i, const Vec& states) const;

    /// Same evaluator, different declared constants.
    DynamicsModel with_constants(DynamicsConstants constants) const;

private:
    struct State {
        AgentNetwork network;
        FeedbackFn feedback;
        DynamicsConstants constants;
        std::string name;
    };
    std::shared_ptr<const State> state_;
};

/// Radial saturation: v if |v| <= a, else a v / |v|.
Vec saturate(const Vec& v, double a);

/// f_i = sum_k sat_a(x_{j_k} - x_i), with exact constants M = a*d, L1 = sqrt(d), L2 = d
/// where d is the maximum degree.
DynamicsModel saturated_consensus(AgentNetwork network, double gain, double v_max);

/// f_i = 0 with user-declared constants.
DynamicsModel zero_feedback(AgentNetwork network, DynamicsConstants constants);

/// f_i = drift for every agent, with user-declared constants (M >= |drift| expected).
DynamicsModel constant_drift(AgentNetwork network, Vec drift, DynamicsConstants constants);

/// Gathers agent i's own state and its neighbours' states from the stacked vector.
std::pair<Vec, std::vector<Vec>> local_states(const AgentNetwork& network, AgentId i, const Vec& states);

struct ConstantsWitness {
    enum class Kind { bound, neighbor_lipschitz, self_lipschitz };
    Kind kind = Kind::bound;
    AgentId agent = 0;
    Vec self;
    std::vector<Vec> neighbors;
    Vec other_self;                // second point of a difference quotient
    std::vector<Vec> other_neighbors;
    double ratio = 0.0;            // observed / declared
};

struct ValidationReport {
    std::size_t trials = 0;
    double worst_bound_ratio = 0.0;
    double worst_neighbor_ratio = 0.0;
    double worst_self_ratio = 0.0;
    std::optional<ConstantsWitness> counterexample;

    bool ok() const noexcept { return !counterexample.has_value(); }
};

class ConstantsViolated : public Error {
public:
    explicit ConstantsViolated(ValidationReport report);
    const ValidationReport& report() const noexcept { return report_; }

private:
    ValidationReport report_;
};

std::string to_string(ConstantsWitness::Kind kind);

/// Randomized falsification of the declared M, L1 and L2. Draws states uniformly in
/// a ball of the given radius plus perturbation pairs at scales 1e-3, 1e-1, 1 and the
/// radius. Returns the report when every ratio is <= 1; throws ConstantsViolated
/// with the first witness otherwise.
ValidationReport validate_constants(const DynamicsModel& model, std::size_t trials, double sample_radius,
                                    std::uint64_t seed);

}  // namespace decab
