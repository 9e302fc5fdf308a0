#include <doctest.h>

#include <cmath>
#include <vector>

#include "decab/random.hpp"
#include "decab/simulation.hpp"

using namespace decab;

namespace {

Vec v2(double a, double b) {
    Vec x(2);
    x << a, b;
    return x;
}

struct Fixture {
    DynamicsModel model = saturated_consensus(AgentNetwork::path(3, 2), 0.5, 0.5);
    GridDecomposition grid = GridDecomposition::with_diameter(2, 0.004, Vec::Zero(2));
    DiscretizationParams params = is_admissible(model, grid.diameter(), 0.02);

    std::vector<HybridController> controllers(const std::vector<CellIndex>& cells, std::size_t K,
                                              Rng* rng = nullptr) const {
        std::vector<HybridController> out;
        for (AgentId i = 0; i < cells.size(); ++i) {
            const auto cfg = model.network().project_configuration(cells, i);
            if (rng) out.emplace_back(model, grid, params, cfg, random_reference_point(grid, cfg, *rng), K);
            else out.emplace_back(model, grid, params, cfg, K);
        }
        return out;
    }

    Vec random_start(const std::vector<CellIndex>& cells, Rng& rng) const {
        std::vector<Vec> x;
        for (const auto& z : cells) {
            const Box b = grid.cell_box(z);
            x.push_back(rng.uniform_in_box(b.lower, b.upper));
        }
        return stack_states(x);
    }
};

std::vector<CellIndex> random_cells(Rng& rng, std::int64_t spread) {
    std::vector<CellIndex> cells;
    for (int k = 0; k < 3; ++k) cells.push_back(CellIndex{rng.uniform_int(-spread, spread), rng.uniform_int(-spread, spread)});
    return cells;
}

}  // namespace

TEST_CASE("stacking helpers") {
    const std::vector<Vec> parts{v2(1, 2), v2(3, 4)};
    const Vec s = stack_states(parts);
    CHECK(s.size() == 4);
    CHECK(agent_state(s, 1, 2) == v2(3, 4));
    CHECK_THROWS_AS(agent_state(s, 2, 2), InvalidInput);
}

TEST_CASE("global equilibrium stays put") {
    Fixture f;
    const std::vector<CellIndex> cells(3, CellIndex{4, -2});
    const auto ctrls = f.controllers(cells, 1024);
    const Vec c = f.grid.cell_center(CellIndex{4, -2});
    const std::vector<Vec> x0(3, c);
    const auto r = integrate_closed_loop(f.model, ctrls, stack_states(x0), 1024);
    for (const auto& x : r.trajectory.states) CHECK((x - stack_states(x0)).norm() == 0.0);
    for (AgentId i = 0; i < 3; ++i) {
        CHECK(r.report.endpoint_deviation[i] == 0.0);
        CHECK(r.report.max_input_magnitude[i] == 0.0);
    }
    CHECK(verify_property_P_bound(r.trajectory, ctrls) == std::vector<double>(3, 0.0));
}

TEST_CASE("trajectory grid") {
    Fixture f;
    Rng rng(1);
    const auto cells = random_cells(rng, 3);
    const auto ctrls = f.controllers(cells, 64);
    const auto r = integrate_closed_loop(f.model, ctrls, f.random_start(cells, rng), 64);
    const auto& t = r.trajectory.times;
    REQUIRE(t.size() == 65);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 0.02);
    for (std::size_t k = 1; k < t.size(); ++k) CHECK(t[k] > t[k - 1]);
    CHECK(r.trajectory.states.size() == 65);
    CHECK(r.trajectory.monitor.size() == 65);
    for (const auto& x : r.trajectory.states) CHECK(x.allFinite());
}

TEST_CASE("endpoint and interpolation identities on random admissible runs") {
    Fixture f;
    Rng rng(2);
    for (int run = 0; run < 10; ++run) {
        const auto cells = random_cells(rng, run < 5 ? 2 : 60);
        const auto ctrls = f.controllers(cells, 1024, run % 2 ? &rng : nullptr);
        const Vec x0 = f.random_start(cells, rng);
        const auto r = integrate_closed_loop(f.model, ctrls, x0, 1024);
        const auto interp = check_linear_interpolation(r.trajectory, ctrls);
        for (AgentId i = 0; i < 3; ++i) {
            CHECK(r.report.endpoint_deviation[i] <= 1e-8 * f.params.R_max);
            CHECK(r.report.interpolation_deviation[i] <= 1e-8 * f.params.R_max);
            CHECK(std::abs(interp[i] - r.report.interpolation_deviation[i]) < 1e-15);
            CHECK(r.report.containment_ok[i]);
            CHECK(f.grid.cell_of(agent_state(r.trajectory.states.back(), i, 2)) == ctrls[i].target_cell());
        }
        CHECK(r.report.input_bound_ok(0.5));
        CHECK(r.report.containment_all());
        const auto maxk = verify_property_P_bound(r.trajectory, ctrls);
        for (AgentId i = 0; i < 3; ++i) CHECK(maxk[i] <= 0.5);
    }
}

TEST_CASE("interpolation residual at dt is the endpoint deviation") {
    Fixture f;
    Rng rng(3);
    const auto cells = random_cells(rng, 40);
    const auto ctrls = f.controllers(cells, 64);
    const auto r = integrate_closed_loop(f.model, ctrls, f.random_start(cells, rng), 64);
    const Vec& last = r.trajectory.states.back();
    for (AgentId i = 0; i < 3; ++i) {
        const double direct = (agent_state(last, i, 2) - ctrls[i].reference_endpoint()).norm();
        CHECK(r.report.endpoint_deviation[i] == direct);
        CHECK(r.report.interpolation_deviation[i] >= direct);
    }
}

TEST_CASE("starting at the reference point: residual is pure integrator error") {
    Fixture f;
    const std::vector<CellIndex> cells{CellIndex{0, 0}, CellIndex{20, 5}, CellIndex{-7, 30}};
    const auto ctrls = f.controllers(cells, 1024);
    std::vector<Vec> x0;
    for (const auto& c : ctrls) x0.push_back(c.reference_point()[0]);
    const auto r = integrate_closed_loop(f.model, ctrls, stack_states(x0), 1024);
    for (double d : check_linear_interpolation(r.trajectory, ctrls)) CHECK(d <= 1e-10);
}

TEST_CASE("single agent without neighbours is pulled to its reference point") {
    const auto m = zero_feedback(AgentNetwork(2, {{}}), {1.0, 0.0, 1.0, 0.5});
    GridDecomposition g = GridDecomposition::with_diameter(2, 0.004, Vec::Zero(2));
    const auto p = is_admissible(m, g.diameter(), 0.02);
    const std::vector<HybridController> ctrls{HybridController(m, g, p, CellConfiguration{0, {CellIndex{3, 3}}}, 256)};
    const Box b = g.cell_box(CellIndex{3, 3});
    const Vec x0 = 0.9 * b.lower + 0.1 * b.upper;
    const auto r = integrate_closed_loop(m, ctrls, x0, 256);
    CHECK((r.trajectory.states.back() - g.cell_center(CellIndex{3, 3})).norm() < 1e-15);
    CHECK(r.report.endpoint_deviation[0] < 1e-15);
}

TEST_CASE("closed-loop preconditions") {
    Fixture f;
    const std::vector<CellIndex> cells{CellIndex{0, 0}, CellIndex{1, 0}, CellIndex{2, 0}};
    auto ctrls = f.controllers(cells, 32);
    std::vector<Vec> x0;
    for (const auto& z : cells) x0.push_back(f.grid.cell_center(z));

    std::vector<Vec> bad = x0;
    bad[1] = f.grid.cell_center(CellIndex{5, 5});
    CHECK_THROWS_AS(integrate_closed_loop(f.model, ctrls, stack_states(bad), 32), PreconditionError);

    // Agent 1's configuration claims a different left neighbour cell.
    auto mixed = ctrls;
    mixed[1] = HybridController(f.model, f.grid, f.params,
                                CellConfiguration{1, {CellIndex{1, 0}, CellIndex{9, 9}, CellIndex{2, 0}}}, 32);
    CHECK_THROWS_AS(integrate_closed_loop(f.model, mixed, stack_states(x0), 32), PreconditionError);

    auto swapped = ctrls;
    std::swap(swapped[0], swapped[2]);
    CHECK_THROWS_AS(integrate_closed_loop(f.model, swapped, stack_states(x0), 32), PreconditionError);

    const std::vector<HybridController> few(ctrls.begin(), ctrls.begin() + 2);
    CHECK_THROWS_AS(integrate_closed_loop(f.model, few, stack_states(x0), 32), PreconditionError);

    auto other_dt = ctrls;
    const auto p2 = is_admissible(f.model, f.grid.diameter(), 0.025);
    other_dt[2] = HybridController(f.model, f.grid, p2, f.model.network().project_configuration(cells, 2), 32);
    CHECK_THROWS_AS(integrate_closed_loop(f.model, other_dt, stack_states(x0), 32), PreconditionError);
}

TEST_CASE("determinism") {
    Fixture f;
    Rng rng(4);
    const auto cells = random_cells(rng, 10);
    const auto ctrls = f.controllers(cells, 128, &rng);
    const Vec x0 = f.random_start(cells, rng);
    const auto a = integrate_closed_loop(f.model, ctrls, x0, 128);
    const auto b = integrate_closed_loop(f.model, ctrls, x0, 128);
    for (std::size_t k = 0; k < a.trajectory.states.size(); ++k) CHECK(a.trajectory.states[k] == b.trajectory.states[k]);
}

TEST_CASE("inadmissible dt trips the input monitor") {
    Fixture f;
    const auto p = is_admissible(f.model, f.grid.diameter(), 0.005);
    REQUIRE_FALSE(p.admissible);
    const std::vector<CellIndex> cells{CellIndex{0, 0}, CellIndex{0, 0}, CellIndex{0, 0}};
    std::vector<HybridController> ctrls;
    std::vector<Vec> x0;
    const Box b = f.grid.cell_box(CellIndex{0, 0});
    for (AgentId i = 0; i < 3; ++i) {
        const auto cfg = f.model.network().project_configuration(cells, i);
        // Reference near one corner, start near the opposite one: |k2| ~ d_max / dt = 0.8.
        std::vector<Vec> ref(cfg.cells.size(), 0.99 * b.upper + 0.01 * b.lower);
        ctrls.emplace_back(f.model, f.grid, p, cfg, ref, 64);
        x0.push_back(0.99 * b.lower + 0.01 * b.upper);
    }
    const auto r = integrate_closed_loop(f.model, ctrls, stack_states(x0), 64);
    CHECK_FALSE(r.report.input_bound_ok(0.5));
    CHECK_THROWS_AS(verify_property_P_bound(r.trajectory, ctrls), MonitorViolation);
    try {
        verify_property_P_bound(r.trajectory, ctrls);
    } catch (const MonitorViolation& e) {
        CHECK(std::string(e.what()).find("agent 0") != std::string::npos);
    }
}
