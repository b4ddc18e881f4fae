#include "agentfield/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace agentfield {

BoxDomain BoxDomain::make(std::size_t dim, const Point& lower, const Point& upper, double margin) {
  if (dim == 0 || dim > kMaxDim) {
    throw ConfigError("domain.dim must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  BoxDomain d;
  d.dim = dim;
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(std::isfinite(lower[i]) && std::isfinite(upper[i]) && lower[i] < upper[i])) {
      throw ConfigError("domain: degenerate box on axis " + std::to_string(i));
    }
    d.lower[i] = lower[i];
    d.upper[i] = upper[i];
  }
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw ConfigError("domain: field margin must be positive");
  }
  d.margin = margin;
  return d;
}

bool BoxDomain::contains(const Point& x) const {
  for (std::size_t i = 0; i < dim; ++i) {
    if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
  }
  return true;
}

double BoxDomain::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim; ++i) v *= width(i);
  return v;
}

double BoxDomain::diameter() const {
  double s = 0.0;
  for (std::size_t i = 0; i < dim; ++i) s += width(i) * width(i);
  return std::sqrt(s);
}

Point BoxDomain::center() const {
  Point c{};
  for (std::size_t i = 0; i < dim; ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return c;
}

void BoxDomain::require_inside(const Point& x, const char* what) const {
  if (contains(x)) return;
  std::ostringstream os;
  os << what << ": point (";
  for (std::size_t i = 0; i < dim; ++i) os << (i ? ", " : "") << x[i];
  os << ") is outside E";
  throw DomainError(os.str());
}

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < dim; ++i) n *= cells[i];
  return n;
}

double GridSpec::cell_volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim; ++i) v *= step[i];
  return v;
}

std::size_t GridSpec::stride(std::size_t axis) const {
  std::size_t s = 1;
  for (std::size_t i = axis + 1; i < dim; ++i) s *= cells[i];
  return s;
}

Index GridSpec::unflatten(std::size_t flat) const {
  Index idx{};
  for (std::size_t a = dim; a-- > 0;) {
    idx[a] = flat % cells[a];
    flat /= cells[a];
  }
  return idx;
}

std::size_t GridSpec::flatten(const Index& idx) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < dim; ++a) flat = flat * cells[a] + idx[a];
  return flat;
}

Point GridSpec::center(std::size_t flat) const {
  const Index idx = unflatten(flat);
  Point p{};
  for (std::size_t a = 0; a < dim; ++a) p[a] = center_coord(a, idx[a]);
  return p;
}

std::size_t GridSpec::locate(const Point& x) const {
  Index idx{};
  for (std::size_t a = 0; a < dim; ++a) {
    const double t = std::floor((x[a] - origin[a]) / step[a]);
    const double hi = static_cast<double>(cells[a] - 1);
    idx[a] = static_cast<std::size_t>(std::clamp(t, 0.0, hi));
  }
  return flatten(idx);
}

double GridSpec::interpolate(std::span<const double> values, const Point& x) const {
  Index base{};
  std::array<double, kMaxDim> frac{};
  for (std::size_t a = 0; a < dim; ++a) {
    const double u = (x[a] - origin[a]) / step[a] - 0.5;
    const double hi = static_cast<double>(cells[a] - 1);
    if (cells[a] == 1 || u <= 0.0) {
      base[a] = 0;
      frac[a] = 0.0;
    } else if (u >= hi) {
      base[a] = cells[a] - 2;
      frac[a] = 1.0;
    } else {
      const double f = std::floor(u);
      base[a] = static_cast<std::size_t>(f);
      frac[a] = u - f;
    }
  }
  double acc = 0.0;
  const std::size_t corners = std::size_t{1} << dim;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    Index idx = base;
    for (std::size_t a = 0; a < dim; ++a) {
      const bool up = (c >> a) & 1U;
      if (cells[a] == 1) {
        if (up) { w = 0.0; break; }
        continue;
      }
      w *= up ? frac[a] : 1.0 - frac[a];
      idx[a] += up ? 1 : 0;
    }
    if (w != 0.0) acc += w * values[flatten(idx)];
  }
  return acc;
}

GridSpec make_e_grid(const BoxDomain& dom, std::size_t cells_per_axis) {
  if (cells_per_axis == 0) throw ConfigError("grid resolution must be positive");
  GridSpec g;
  g.dim = dom.dim;
  for (std::size_t a = 0; a < dom.dim; ++a) {
    g.cells[a] = cells_per_axis;
    g.origin[a] = dom.lower[a];
    g.step[a] = dom.width(a) / static_cast<double>(cells_per_axis);
  }
  return g;
}

GridSpec make_field_grid(const BoxDomain& dom, std::size_t cells_per_axis) {
  GridSpec g = make_e_grid(dom, cells_per_axis);
  for (std::size_t a = 0; a < dom.dim; ++a) {
    const auto pad = static_cast<std::size_t>(std::ceil(dom.margin / g.step[a] - 1e-9));
    g.cells[a] = cells_per_axis + 2 * pad;
    g.origin[a] = dom.lower[a] - static_cast<double>(pad) * g.step[a];
  }
  return g;
}

std::size_t field_offset(const GridSpec& e_grid, const GridSpec& field_grid, std::size_t axis) {
  return (field_grid.cells[axis] - e_grid.cells[axis]) / 2;
}

std::vector<std::size_t> e_cells_in_field(const GridSpec& e_grid, const GridSpec& field_grid) {
  std::vector<std::size_t> out(e_grid.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    Index idx = e_grid.unflatten(i);
    for (std::size_t a = 0; a < e_grid.dim; ++a) idx[a] += field_offset(e_grid, field_grid, a);
    out[i] = field_grid.flatten(idx);
  }
  return out;
}

}  // namespace agentfield
