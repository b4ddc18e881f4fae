#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "agentfield/core.hpp"

namespace agentfield {

/// The compact agent state space E = prod [lower_i, upper_i] together with
/// the truncation box used for fields on R^d (E widened by `margin` on every
/// side).
struct BoxDomain {
  std::size_t dim = 1;
  Point lower{};
  Point upper{};
  double margin = 0.0;

  /// Validates and builds a domain; throws ConfigError on a degenerate box.
  static BoxDomain make(std::size_t dim, const Point& lower, const Point& upper, double margin);

  [[nodiscard]] bool contains(const Point& x) const;
  [[nodiscard]] double volume() const;
  [[nodiscard]] double width(std::size_t axis) const { return upper[axis] - lower[axis]; }
  [[nodiscard]] double diameter() const;
  [[nodiscard]] Point center() const;

  /// Throws DomainError when x is not in E.
  void require_inside(const Point& x, const char* what) const;
};

enum class Support { E, FieldBox };

using Index = std::array<std::size_t, kMaxDim>;

/// Regular lattice of cells. Values attached to a grid are point values at
/// cell centres; quadrature is the midpoint rule.
struct GridSpec {
  std::size_t dim = 1;
  Index cells{1, 1, 1};
  Point origin{};
  Point step{};

  [[nodiscard]] std::size_t size() const;
  [[nodiscard]] double cell_volume() const;
  [[nodiscard]] Index unflatten(std::size_t flat) const;
  [[nodiscard]] std::size_t flatten(const Index& idx) const;
  [[nodiscard]] Point center(std::size_t flat) const;
  [[nodiscard]] double center_coord(std::size_t axis, std::size_t i) const {
    return origin[axis] + (static_cast<double>(i) + 0.5) * step[axis];
  }
  [[nodiscard]] double upper(std::size_t axis) const {
    return origin[axis] + static_cast<double>(cells[axis]) * step[axis];
  }
  /// Stride of `axis` in the row-major flat layout (last axis fastest).
  [[nodiscard]] std::size_t stride(std::size_t axis) const;

  /// Cell containing x, clamped to the grid.
  [[nodiscard]] std::size_t locate(const Point& x) const;

  /// Multilinear interpolation between cell centres; clamps outside the
  /// outermost centres.
  [[nodiscard]] double interpolate(std::span<const double> values, const Point& x) const;

  bool operator==(const GridSpec&) const = default;
};

/// Grid on E with `cells_per_axis` cells on every axis.
GridSpec make_e_grid(const BoxDomain& dom, std::size_t cells_per_axis);

/// Grid on the field box, aligned cell-for-cell with the E grid: the same
/// cell widths, extended by ceil(margin / h) cells on each side.
GridSpec make_field_grid(const BoxDomain& dom, std::size_t cells_per_axis);

/// Number of field cells before the first E cell on `axis`.
std::size_t field_offset(const GridSpec& e_grid, const GridSpec& field_grid, std::size_t axis);

/// Flat field-grid index of every E-grid cell (same centre points).
std::vector<std::size_t> e_cells_in_field(const GridSpec& e_grid, const GridSpec& field_grid);

}  // namespace agentfield
