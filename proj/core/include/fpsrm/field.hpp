#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace fpsrm {

/// Axis-aligned rectangle in the length unit u.
struct Domain {
  double x_min = -3.0;
  double x_max = 3.0;
  double y_min = -3.0;
  double y_max = 3.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }

  friend bool operator==(const Domain&, const Domain&) = default;
};

/// Uniform cell-centered partition of a Domain.
///
/// Cell (i, j) has its center at (x_min + (i + 1/2) hx, y_min + (j + 1/2) hy);
/// linear storage index is j * nx + i, so j = 0 is the bottom row.
class Grid2D {
 public:
  Grid2D() = default;
  Grid2D(Domain domain, std::size_t nx, std::size_t ny);

  const Domain& domain() const { return domain_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  double cell_area() const { return hx_ * hy_; }

  std::size_t index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
  // Measured from the domain midpoint so that centers of a symmetric domain
  // are exact negatives of each other.
  double x_center(std::size_t i) const {
    return 0.5 * (domain_.x_min + domain_.x_max) + (static_cast<double>(i) + 0.5 - 0.5 * static_cast<double>(nx_)) * hx_;
  }
  double y_center(std::size_t j) const {
    return 0.5 * (domain_.y_min + domain_.y_max) + (static_cast<double>(j) + 0.5 - 0.5 * static_cast<double>(ny_)) * hy_;
  }

  friend bool operator==(const Grid2D& a, const Grid2D& b) {
    return a.domain_ == b.domain_ && a.nx_ == b.nx_ && a.ny_ == b.ny_;
  }

 private:
  Domain domain_{};
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  double hx_ = 0.0;
  double hy_ = 0.0;
};

/// Square grid with n cells per side.
Grid2D square_grid(const Domain& domain, std::size_t n);

/// Cell-centered values on a Grid2D.
class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(Grid2D grid, double fill = 0.0);
  ScalarField(Grid2D grid, std::vector<double> values);

  /// Samples fn(x, y) at every cell center.
  template <typename Fn>
  static ScalarField sample(const Grid2D& grid, Fn&& fn) {
    ScalarField out(grid);
    for (std::size_t j = 0; j < grid.ny(); ++j)
      for (std::size_t i = 0; i < grid.nx(); ++i)
        out(i, j) = fn(grid.x_center(i), grid.y_center(j));
    return out;
  }

  const Grid2D& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[grid_.index(i, j)]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[grid_.index(i, j)]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& data() { return values_; }
  const std::vector<double>& data() const { return values_; }

  bool all_finite() const;
  double min() const;
  double max() const;

  ScalarField& operator+=(const ScalarField& other);
  ScalarField& operator-=(const ScalarField& other);
  ScalarField& operator*=(double s);
  /// this += s * other
  ScalarField& axpy(double s, const ScalarField& other);

  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(double s, ScalarField a) { return a *= s; }

  friend bool operator==(const ScalarField& a, const ScalarField& b) {
    return a.grid_ == b.grid_ && a.values_ == b.values_;
  }

 private:
  Grid2D grid_{};
  std::vector<double> values_;
};

/// Midpoint quadrature: sum of values times the cell area.
double integrate(const ScalarField& field);

/// L2(Omega) inner product with midpoint quadrature.
double inner_product(const ScalarField& a, const ScalarField& b);

/// Central differences in the interior, one-sided at boundary cells.
/// Requires at least 3 cells along each axis.
std::pair<ScalarField, ScalarField> gradient_central(const ScalarField& field);

/// Bilinear interpolation between cell centers. Points outside the span of
/// cell centers are clamped, which gives constant extrapolation in the
/// half-cell margin and beyond.
double interp_bilinear(const ScalarField& field, double x, double y);

struct ScaledField {
  ScalarField field;
  bool degenerate = false;  ///< input was constant; field is all zeros
};

/// (U - min U) / (max U - min U).
ScaledField min_max_scale(const ScalarField& field);

/// Transfers a field onto another grid over the same domain. Coarsening in
/// both axes uses area-weighted box averaging (integral preserving);
/// anything else uses bilinear interpolation at the target cell centers.
ScalarField resample(const ScalarField& field, const Grid2D& target);

/// Each target cell takes the value of the source cell containing its
/// center (piecewise-constant injection).
ScalarField inject(const ScalarField& field, const Grid2D& target);

/// Neumann 5-point Laplacian (zero normal derivative, ghost cells mirror the
/// boundary values).
ScalarField laplacian_neumann(const ScalarField& field);

}  // namespace fpsrm
