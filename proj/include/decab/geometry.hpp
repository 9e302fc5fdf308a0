#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "decab/errors.hpp"

namespace decab {

using Vec = Eigen::VectorXd;
using AgentId = std::size_t;

/// Integer coordinates of a grid cell.
class CellIndex {
public:
    CellIndex() = default;
    explicit CellIndex(std::vector<std::int64_t> coords) : coords_(std::move(coords)) {}
    CellIndex(std::initializer_list<std::int64_t> coords) : coords_(coords) {}

    std::size_t size() const noexcept { return coords_.size(); }
    std::int64_t operator[](std::size_t k) const { return coords_[k]; }
    std::int64_t& operator[](std::size_t k) { return coords_[k]; }
    const std::vector<std::int64_t>& coords() const noexcept { return coords_; }

    /// "(a,b,...)"
    std::string to_string() const;

    friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;

private:
    std::vector<std::int64_t> coords_;
};

/// Cells of an agent and of its neighbours, in the agent's declared neighbour order.
struct CellConfiguration {
    AgentId agent = 0;
    std::vector<CellIndex> cells;

    const CellIndex& own() const { return cells.front(); }
    std::size_t neighbor_count() const { return cells.size() - 1; }
    std::string to_string() const;

    friend auto operator<=>(const CellConfiguration&, const CellConfiguration&) = default;
    friend bool operator==(const CellConfiguration&, const CellConfiguration&) = default;
};

/// Axis-aligned box [lower, upper).
struct Box {
    Vec lower;
    Vec upper;

    Vec center() const { return 0.5 * (lower + upper); }
};

/// Uniform hyper-rectangular decomposition of R^n with half-open cells
/// [origin + side*z, origin + side*(z+1)).
class GridDecomposition {
public:
    GridDecomposition(std::size_t dimension, double side, Vec origin);
    GridDecomposition(std::size_t dimension, double side);

    /// Grid whose cells have the given diameter.
    static GridDecomposition with_diameter(std::size_t dimension, double diameter, Vec origin);

    std::size_t dimension() const noexcept { return dimension_; }
    double side() const noexcept { return side_; }
    const Vec& origin() const noexcept { return origin_; }

    /// side * sqrt(n)
    double diameter() const noexcept;

    /// Throws InvalidInput on wrong length or non-finite coordinates.
    CellIndex cell_of(const Vec& x) const;
    Box cell_box(const CellIndex& z) const;
    Vec cell_center(const CellIndex& z) const;

    /// Euclidean distance from x to the closed cell.
    double distance_to_cell(const CellIndex& z, const Vec& x) const;

    /// Membership in closure(cell) + B(radius).
    bool inflated_contains(const CellIndex& z, double radius, const Vec& x) const;

    /// Distance from x to the nearest face of the cell; negative when x is outside.
    double face_margin(const CellIndex& z, const Vec& x) const;

private:
    void check_index(const CellIndex& z) const;
    void check_point(const Vec& x) const;

    std::size_t dimension_;
    double side_;
    Vec origin_;
};

}  // namespace decab
