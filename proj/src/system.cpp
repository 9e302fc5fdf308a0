#include "decab/system.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "decab/random.hpp"

namespace decab {

AgentNetwork::AgentNetwork(std::size_t state_dimension, std::vector<std::vector<AgentId>> neighbors)
    : dimension_(state_dimension), neighbors_(std::move(neighbors)) {
    if (dimension_ == 0) throw InvalidInput("state dimension must be at least 1");
    if (neighbors_.empty()) throw InvalidInput("network needs at least one agent");
    const std::size_t n = neighbors_.size();
    for (AgentId i = 0; i < n; ++i) {
        auto sorted = neighbors_[i];
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw InvalidInput("agent " + std::to_string(i) + " lists a neighbour twice");
        for (AgentId j : neighbors_[i]) {
            if (j >= n) throw InvalidInput("agent " + std::to_string(i) + " has out-of-range neighbour " + std::to_string(j));
            if (j == i) throw InvalidInput("agent " + std::to_string(i) + " lists itself as a neighbour");
        }
    }
}

AgentNetwork AgentNetwork::undirected(std::size_t agent_count, std::size_t state_dimension,
                                      std::span<const std::pair<AgentId, AgentId>> edges) {
    std::vector<std::vector<AgentId>> adj(agent_count);
    for (auto [a, b] : edges) {
        if (a >= agent_count || b >= agent_count) throw InvalidInput("edge endpoint out of range");
        if (a == b) throw InvalidInput("self-loop edge");
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& list : adj) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }
    return AgentNetwork(state_dimension, std::move(adj));
}

AgentNetwork AgentNetwork::path(std::size_t agent_count, std::size_t state_dimension) {
    std::vector<std::pair<AgentId, AgentId>> edges;
    for (AgentId i = 0; i + 1 < agent_count; ++i) edges.emplace_back(i, i + 1);
    return undirected(agent_count, state_dimension, edges);
}

void AgentNetwork::check_agent(AgentId i) const {
    if (i >= neighbors_.size())
        throw InvalidInput("agent id " + std::to_string(i) + " out of range (N=" + std::to_string(neighbors_.size()) + ")");
}

const std::vector<AgentId>& AgentNetwork::neighbors(AgentId i) const {
    check_agent(i);
    return neighbors_[i];
}

std::size_t AgentNetwork::max_degree() const noexcept {
    std::size_t d = 0;
    for (const auto& list : neighbors_) d = std::max(d, list.size());
    return d;
}

CellConfiguration AgentNetwork::project_configuration(std::span<const CellIndex> global_cells, AgentId i) const {
    if (global_cells.size() != neighbors_.size())
        throw InvalidInput("global configuration has " + std::to_string(global_cells.size()) + " entries, expected " +
                           std::to_string(neighbors_.size()));
    check_agent(i);
    CellConfiguration c{i, {}};
    c.cells.reserve(neighbors_[i].size() + 1);
    c.cells.push_back(global_cells[i]);
    for (AgentId j : neighbors_[i]) c.cells.push_back(global_cells[j]);
    return c;
}

std::pair<Vec, std::vector<Vec>> local_states(const AgentNetwork& network, AgentId i, const Vec& states) {
    const auto n = static_cast<Eigen::Index>(network.state_dimension());
    if (states.size() != n * static_cast<Eigen::Index>(network.agent_count()))
        throw InvalidInput("stacked state has wrong length");
    const auto& nb = network.neighbors(i);
    std::vector<Vec> neighbors;
    neighbors.reserve(nb.size());
    for (AgentId j : nb) neighbors.push_back(states.segment(static_cast<Eigen::Index>(j) * n, n));
    return {states.segment(static_cast<Eigen::Index>(i) * n, n), std::move(neighbors)};
}

DynamicsModel::DynamicsModel(AgentNetwork network, FeedbackFn feedback, DynamicsConstants constants, std::string name) {
    const auto& c = constants;
    if (!feedback) throw InvalidInput("dynamics model needs a feedback evaluator");
    if (!(c.M > 0.0) || !std::isfinite(c.M)) throw InvalidInput("M must be positive and finite");
    if (!(c.v_max > 0.0) || !std::isfinite(c.v_max)) throw InvalidInput("v_max must be positive and finite");
    if (!(c.L1 >= 0.0) || !std::isfinite(c.L1)) throw InvalidInput("L1 must be nonnegative and finite");
    if (!(c.L2 >= 0.0) || !std::isfinite(c.L2)) throw InvalidInput("L2 must be nonnegative and finite");
    if (!(c.v_max < c.M)) throw InvalidInput("v_max must be strictly smaller than M");
    state_ = std::make_shared<const State>(State{std::move(network), std::move(feedback), constants, std::move(name)});
}

Vec DynamicsModel::evaluate_local(AgentId i, const Vec& self, std::span<const Vec> neighbors) const {
    const auto& net = network();
    if (neighbors.size() != net.degree(i))
        throw InvalidInput("agent " + std::to_string(i) + " expects " + std::to_string(net.degree(i)) + " neighbour states");
    return state_->feedback(i, self, neighbors);
}

Vec DynamicsModel::evaluate_feedback(AgentId i, const Vec& states) const {
    if (!states.allFinite()) throw InvalidInput("state vector has a non-finite entry");
    auto [self, neighbors] = local_states(network(), i, states);
    return state_->feedback(i, self, neighbors);
}

DynamicsModel DynamicsModel::with_constants(DynamicsConstants constants) const {
    return DynamicsModel(state_->network, state_->feedback, constants, state_->name);
}

Vec saturate(const Vec& v, double a) {
    const double norm = v.norm();
    if (norm <= a) return v;
    return (a / norm) * v;
}

DynamicsModel saturated_consensus(AgentNetwork network, double gain, double v_max) {
    if (!(gain > 0.0) || !std::isfinite(gain)) throw InvalidInput("saturation gain must be positive");
    const auto d = static_cast<double>(network.max_degree());
    // Degree-zero networks have f = 0; keep M above v_max so the model stays well formed.
    const DynamicsConstants c{d > 0 ? gain * d : std::max(gain, 2.0 * v_max), std::sqrt(d), d, v_max};
    auto f = [gain](AgentId, const Vec& self, std::span<const Vec> neighbors) {
        Vec u = Vec::Zero(self.size());
        for (const Vec& xj : neighbors) u += saturate(xj - self, gain);
        return u;
    };
    return DynamicsModel(std::move(network), f, c, "saturated_consensus");
}

DynamicsModel zero_feedback(AgentNetwork network, DynamicsConstants constants) {
    auto f = [](AgentId, const Vec& self, std::span<const Vec>) -> Vec { return Vec::Zero(self.size()); };
    return DynamicsModel(std::move(network), f, constants, "zero");
}

DynamicsModel constant_drift(AgentNetwork network, Vec drift, DynamicsConstants constants) {
    if (static_cast<std::size_t>(drift.size()) != network.state_dimension())
        throw InvalidInput("drift has wrong dimension");
    auto f = [drift = std::move(drift)](AgentId, const Vec&, std::span<const Vec>) { return drift; };
    return DynamicsModel(std::move(network), f, constants, "constant_drift");
}

std::string to_string(ConstantsWitness::Kind kind) {
    switch (kind) {
        case ConstantsWitness::Kind::bound: return "bound M";
        case ConstantsWitness::Kind::neighbor_lipschitz: return "neighbour Lipschitz L1";
        case ConstantsWitness::Kind::self_lipschitz: return "self Lipschitz L2";
    }
    return "unknown";
}

ConstantsViolated::ConstantsViolated(ValidationReport report)
    : Error("declared constants violated: " + to_string(report.counterexample->kind) + " exceeded by ratio " +
            std::to_string(report.counterexample->ratio) + " at agent " + std::to_string(report.counterexample->agent)),
      report_(std::move(report)) {}

namespace {

constexpr double kRatioSlack = 1e-9;

double ratio_of(double observed, double declared) {
    if (declared > 0.0) return observed / declared;
    return observed > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
}

double stacked_distance(std::span<const Vec> a, std::span<const Vec> b) {
    double sq = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) sq += (a[k] - b[k]).squaredNorm();
    return std::sqrt(sq);
}

}  // namespace

ValidationReport validate_constants(const DynamicsModel& model, std::size_t trials, double sample_radius,
                                    std::uint64_t seed) {
    if (trials == 0) throw InvalidInput("validation needs at least one trial");
    if (!(sample_radius > 0.0)) throw InvalidInput("sample radius must be positive");
    const auto& net = model.network();
    const auto n = static_cast<Eigen::Index>(net.state_dimension());
    const auto& c = model.constants();
    const std::array<double, 4> scales{1e-3, 1e-1, 1.0, sample_radius};

    ValidationReport report;
    report.trials = trials;
    Rng rng(seed);

    auto note = [&](ConstantsWitness w, double& worst) {
        worst = std::max(worst, w.ratio);
        if (w.ratio > 1.0 + kRatioSlack && (!report.counterexample || w.ratio > report.counterexample->ratio))
            report.counterexample = std::move(w);
    };

    // Perturbation of a stacked block: axis-aligned at a fixed scale, a random
    // direction at a fixed scale, or an independent uniform redraw.
    auto perturb = [&](std::vector<Vec>& block, std::size_t mode) {
        if (mode == scales.size()) {
            for (Vec& x : block) x = rng.in_ball(n, sample_radius);
            return;
        }
        const double s = scales[mode];
        if (rng.coin()) {
            const auto which = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(block.size()) - 1));
            const auto axis = rng.uniform_int(0, n - 1);
            block[which][axis] += rng.coin() ? s : -s;
        } else {
            const Eigen::Index total = n * static_cast<Eigen::Index>(block.size());
            const Vec dir = rng.unit_vector(total) * s;
            for (std::size_t k = 0; k < block.size(); ++k) block[k] += dir.segment(static_cast<Eigen::Index>(k) * n, n);
        }
    };

    for (std::size_t t = 0; t < trials; ++t) {
        const AgentId i = t % net.agent_count();
        const std::size_t deg = net.degree(i);
        std::vector<Vec> self{rng.in_ball(n, sample_radius)};
        std::vector<Vec> nb(deg);
        for (Vec& x : nb) x = rng.in_ball(n, sample_radius);
        const Vec f0 = model.evaluate_local(i, self[0], nb);
        const std::size_t mode = t % (scales.size() + 1);

        note({ConstantsWitness::Kind::bound, i, self[0], nb, {}, {}, ratio_of(f0.norm(), c.M)}, report.worst_bound_ratio);

        if (deg > 0) {
            auto nb2 = nb;
            perturb(nb2, mode);
            const double dx = stacked_distance(nb, nb2);
            if (dx > 0.0) {
                const double q = (f0 - model.evaluate_local(i, self[0], nb2)).norm() / dx;
                note({ConstantsWitness::Kind::neighbor_lipschitz, i, self[0], nb, self[0], nb2, ratio_of(q, c.L1)},
                     report.worst_neighbor_ratio);
            }
        }

        auto self2 = self;
        perturb(self2, mode);
        const double dx = (self2[0] - self[0]).norm();
        if (dx > 0.0) {
            const double q = (f0 - model.evaluate_local(i, self2[0], nb)).norm() / dx;
            note({ConstantsWitness::Kind::self_lipschitz, i, self[0], nb, self2[0], nb, ratio_of(q, c.L2)},
                 report.worst_self_ratio);
        }
    }
    if (report.counterexample) throw ConstantsViolated(std::move(report));
    return report;
}

}  // namespace decab
