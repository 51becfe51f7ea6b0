#include "fpsrm/field.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fpsrm {

Grid2D::Grid2D(Domain domain, std::size_t nx, std::size_t ny)
    : domain_(domain), nx_(nx), ny_(ny) {
  if (!(domain.x_max > domain.x_min) || !(domain.y_max > domain.y_min))
    throw std::invalid_argument("Grid2D: empty domain");
  if (nx < 2 || ny < 2)
    throw std::invalid_argument("Grid2D: need at least 2 cells per axis, got " +
                                std::to_string(nx) + "x" + std::to_string(ny));
  hx_ = domain.width() / static_cast<double>(nx);
  hy_ = domain.height() / static_cast<double>(ny);
}

Grid2D square_grid(const Domain& domain, std::size_t n) { return Grid2D(domain, n, n); }

ScalarField::ScalarField(Grid2D grid, double fill)
    : grid_(grid), values_(grid.size(), fill) {}

ScalarField::ScalarField(Grid2D grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  if (values_.size() != grid_.size())
    throw std::invalid_argument("ScalarField: value count " + std::to_string(values_.size()) +
                                " does not match grid size " + std::to_string(grid_.size()));
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

namespace {
void require_same_grid(const ScalarField& a, const ScalarField& b, const char* what) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}
}  // namespace

ScalarField& ScalarField::operator+=(const ScalarField& other) {
  require_same_grid(*this, other, "operator+=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& other) {
  require_same_grid(*this, other, "operator-=");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

ScalarField& ScalarField::operator*=(double s) {
  for (double& v : values_) v *= s;
  return *this;
}

ScalarField& ScalarField::axpy(double s, const ScalarField& other) {
  require_same_grid(*this, other, "axpy");
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += s * other.values_[k];
  return *this;
}

double integrate(const ScalarField& field) {
  double sum = 0.0;
  for (double v : field.values()) sum += v;
  return sum * field.grid().cell_area();
}

double inner_product(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a, b, "inner_product");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum * a.grid().cell_area();
}

std::pair<ScalarField, ScalarField> gradient_central(const ScalarField& field) {
  const Grid2D& g = field.grid();
  const std::size_t nx = g.nx(), ny = g.ny();
  if (nx < 3 || ny < 3) throw std::invalid_argument("gradient_central: grid too small (need 3x3)");
  ScalarField dx(g), dy(g);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      if (i == 0)
        dx(i, j) = (field(1, j) - field(0, j)) / g.hx();
      else if (i == nx - 1)
        dx(i, j) = (field(i, j) - field(i - 1, j)) / g.hx();
      else
        dx(i, j) = (field(i + 1, j) - field(i - 1, j)) / (2.0 * g.hx());

      if (j == 0)
        dy(i, j) = (field(i, 1) - field(i, 0)) / g.hy();
      else if (j == ny - 1)
        dy(i, j) = (field(i, j) - field(i, j - 1)) / g.hy();
      else
        dy(i, j) = (field(i, j + 1) - field(i, j - 1)) / (2.0 * g.hy());
    }
  }
  return {std::move(dx), std::move(dy)};
}

namespace {
// Fractional cell-center coordinate, clamped to [0, n-1]; returns the lower
// index and the weight of the upper neighbor.
std::pair<std::size_t, double> locate(double s, std::size_t n) {
  const double top = static_cast<double>(n - 1);
  s = std::clamp(s, 0.0, top);
  auto i0 = static_cast<std::size_t>(std::floor(s));
  if (i0 >= n - 1) i0 = n - 2;
  return {i0, s - static_cast<double>(i0)};
}
}  // namespace

double interp_bilinear(const ScalarField& field, double x, double y) {
  const Grid2D& g = field.grid();
  const auto [i0, tx] = locate((x - g.domain().x_min) / g.hx() - 0.5, g.nx());
  const auto [j0, ty] = locate((y - g.domain().y_min) / g.hy() - 0.5, g.ny());
  const double v00 = field(i0, j0), v10 = field(i0 + 1, j0);
  const double v01 = field(i0, j0 + 1), v11 = field(i0 + 1, j0 + 1);
  return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11);
}

ScaledField min_max_scale(const ScalarField& field) {
  const double lo = field.min();
  const double hi = field.max();
  if (!(hi > lo)) return {ScalarField(field.grid(), 0.0), true};
  ScalarField out(field.grid());
  const double span = hi - lo;
  for (std::size_t k = 0; k < field.size(); ++k) out[k] = (field[k] - lo) / span;
  return {std::move(out), false};
}

namespace {
// Row-stochastic overlap weights: w[t][s] = |target cell t ∩ source cell s| / |t|.
std::vector<std::vector<std::pair<std::size_t, double>>> overlap_weights(
    double lo, double src_h, std::size_t src_n, double tgt_h, std::size_t tgt_n) {
  std::vector<std::vector<std::pair<std::size_t, double>>> w(tgt_n);
  for (std::size_t t = 0; t < tgt_n; ++t) {
    const double a = lo + static_cast<double>(t) * tgt_h;
    const double b = a + tgt_h;
    auto s0 = static_cast<std::size_t>(std::max(0.0, std::floor((a - lo) / src_h)));
    s0 = std::min(s0, src_n - 1);
    for (std::size_t s = s0 > 0 ? s0 - 1 : 0; s < src_n; ++s) {
      const double sa = lo + static_cast<double>(s) * src_h;
      const double sb = sa + src_h;
      if (sa >= b) break;
      const double len = std::min(b, sb) - std::max(a, sa);
      if (len > 0.0) w[t].emplace_back(s, len / tgt_h);
    }
  }
  return w;
}
}  // namespace

ScalarField resample(const ScalarField& field, const Grid2D& target) {
  const Grid2D& src = field.grid();
  if (!(src.domain() == target.domain())) throw std::invalid_argument("resample: domain mismatch");
  if (src == target) return field;

  if (target.nx() <= src.nx() && target.ny() <= src.ny()) {
    const Domain& d = src.domain();
    const auto wx = overlap_weights(d.x_min, src.hx(), src.nx(), target.hx(), target.nx());
    const auto wy = overlap_weights(d.y_min, src.hy(), src.ny(), target.hy(), target.ny());
    ScalarField out(target);
    for (std::size_t tj = 0; tj < target.ny(); ++tj) {
      for (std::size_t ti = 0; ti < target.nx(); ++ti) {
        double acc = 0.0;
        for (const auto& [sj, wyv] : wy[tj])
          for (const auto& [si, wxv] : wx[ti]) acc += wyv * wxv * field(si, sj);
        out(ti, tj) = acc;
      }
    }
    return out;
  }
  return ScalarField::sample(target, [&](double x, double y) { return interp_bilinear(field, x, y); });
}

ScalarField inject(const ScalarField& field, const Grid2D& target) {
  const Grid2D& src = field.grid();
  if (!(src.domain() == target.domain())) throw std::invalid_argument("inject: domain mismatch");
  if (src == target) return field;
  ScalarField out(target);
  const Domain& d = src.domain();
  for (std::size_t j = 0; j < target.ny(); ++j) {
    const auto sj = std::min(src.ny() - 1,
                             static_cast<std::size_t>((target.y_center(j) - d.y_min) / src.hy()));
    for (std::size_t i = 0; i < target.nx(); ++i) {
      const auto si = std::min(src.nx() - 1,
                               static_cast<std::size_t>((target.x_center(i) - d.x_min) / src.hx()));
      out(i, j) = field(si, sj);
    }
  }
  return out;
}

ScalarField laplacian_neumann(const ScalarField& field) {
  const Grid2D& g = field.grid();
  const double ihx2 = 1.0 / (g.hx() * g.hx());
  const double ihy2 = 1.0 / (g.hy() * g.hy());
  ScalarField out(g);
  for (std::size_t j = 0; j < g.ny(); ++j) {
    for (std::size_t i = 0; i < g.nx(); ++i) {
      const double c = field(i, j);
      double acc = 0.0;
      if (i > 0) acc += (field(i - 1, j) - c) * ihx2;
      if (i + 1 < g.nx()) acc += (field(i + 1, j) - c) * ihx2;
      if (j > 0) acc += (field(i, j - 1) - c) * ihy2;
      if (j + 1 < g.ny()) acc += (field(i, j + 1) - c) * ihy2;
      out(i, j) = acc;
    }
  }
  return out;
}

}  // namespace fpsrm
