#include "decab/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "decab/errors.hpp"

namespace decab {

namespace {

// Membership slack for inflated cells; shared with the inflated-boundary property tests.
constexpr double kContainmentSlack = 1e-12;

}  // namespace

std::string CellIndex::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t k = 0; k < coords_.size(); ++k) os << (k ? "," : "") << coords_[k];
    os << ')';
    return os.str();
}

std::string CellConfiguration::to_string() const {
    std::string s = "[";
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) s += ' ';
        s += cells[k].to_string();
    }
    return s + "]";
}

GridDecomposition::GridDecomposition(std::size_t dimension, double side, Vec origin)
    : dimension_(dimension), side_(side), origin_(std::move(origin)) {
    if (dimension_ == 0) throw InvalidInput("grid dimension must be at least 1");
    if (!(side_ > 0.0) || !std::isfinite(side_)) throw InvalidInput("grid side must be positive and finite");
    if (static_cast<std::size_t>(origin_.size()) != dimension_)
        throw InvalidInput("grid origin has wrong dimension");
    if (!origin_.allFinite()) throw InvalidInput("grid origin must be finite");
}

GridDecomposition::GridDecomposition(std::size_t dimension, double side)
    : GridDecomposition(dimension, side, Vec::Zero(static_cast<Eigen::Index>(dimension))) {}

GridDecomposition GridDecomposition::with_diameter(std::size_t dimension, double diameter, Vec origin) {
    if (dimension == 0) throw InvalidInput("grid dimension must be at least 1");
    return GridDecomposition(dimension, diameter / std::sqrt(static_cast<double>(dimension)), std::move(origin));
}

double GridDecomposition::diameter() const noexcept {
    return side_ * std::sqrt(static_cast<double>(dimension_));
}

void GridDecomposition::check_index(const CellIndex& z) const {
    if (z.size() != dimension_) throw InvalidInput("cell index " + z.to_string() + " has wrong dimension");
}

void GridDecomposition::check_point(const Vec& x) const {
    if (static_cast<std::size_t>(x.size()) != dimension_) throw InvalidInput("point has wrong dimension");
    if (!x.allFinite()) throw InvalidInput("point has a non-finite coordinate");
}

CellIndex GridDecomposition::cell_of(const Vec& x) const {
    check_point(x);
    std::vector<std::int64_t> z(dimension_);
    for (std::size_t k = 0; k < dimension_; ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        auto q = static_cast<std::int64_t>(std::floor((x[e] - origin_[e]) / side_));
        // Re-anchor against the corners exactly as cell_box computes them, so that
        // lower <= x < upper holds in floating point and face points go to the upper cell.
        while (origin_[e] + side_ * static_cast<double>(q + 1) <= x[e]) ++q;
        while (origin_[e] + side_ * static_cast<double>(q) > x[e]) --q;
        z[k] = q;
    }
    return CellIndex(std::move(z));
}

Box GridDecomposition::cell_box(const CellIndex& z) const {
    check_index(z);
    Box b{Vec(origin_.size()), Vec(origin_.size())};
    for (std::size_t k = 0; k < dimension_; ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        b.lower[e] = origin_[e] + side_ * static_cast<double>(z[k]);
        b.upper[e] = origin_[e] + side_ * static_cast<double>(z[k] + 1);
    }
    return b;
}

Vec GridDecomposition::cell_center(const CellIndex& z) const {
    check_index(z);
    Vec c(origin_.size());
    for (std::size_t k = 0; k < dimension_; ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        c[e] = origin_[e] + side_ * (static_cast<double>(z[k]) + 0.5);
    }
    return c;
}

double GridDecomposition::distance_to_cell(const CellIndex& z, const Vec& x) const {
    check_point(x);
    const Box b = cell_box(z);
    double sq = 0.0;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        const double gap = std::max({b.lower[k] - x[k], 0.0, x[k] - b.upper[k]});
        sq += gap * gap;
    }
    return std::sqrt(sq);
}

bool GridDecomposition::inflated_contains(const CellIndex& z, double radius, const Vec& x) const {
    if (radius < 0.0) throw InvalidInput("inflation radius must be nonnegative");
    return distance_to_cell(z, x) <= radius + kContainmentSlack;
}

double GridDecomposition::face_margin(const CellIndex& z, const Vec& x) const {
    check_point(x);
    const Box b = cell_box(z);
    if (distance_to_cell(z, x) > 0.0) return -distance_to_cell(z, x);
    double m = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < x.size(); ++k) m = std::min({m, x[k] - b.lower[k], b.upper[k] - x[k]});
    return m;
}

}  // namespace decab
