#include "fpsrm/binning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fpsrm {

namespace {
std::size_t bin_index(double v, double lo, double h, std::size_t n) {
  const double s = std::floor((v - lo) / h);
  if (s <= 0.0) return 0;
  return std::min(n - 1, static_cast<std::size_t>(s));
}
}  // namespace

ScalarField bin_frame(const ParticleEnsemble& ensemble, const Grid2D& grid) {
  if (ensemble.size() == 0) throw std::invalid_argument("bin_frame: empty ensemble");
  const Domain& d = grid.domain();
  ScalarField out(grid);
  for (const Point& p : ensemble.positions) {
    if (!d.contains(p.x, p.y)) throw std::invalid_argument("bin_frame: particle outside the domain");
    out(bin_index(p.x, d.x_min, grid.hx(), grid.nx()), bin_index(p.y, d.y_min, grid.hy(), grid.ny())) += 1.0;
  }
  out *= 1.0 / (static_cast<double>(ensemble.size()) * grid.cell_area());
  return out;
}

FrameSequence bin_sequence(const TrajectoryFrames& frames, const Grid2D& grid) {
  if (!(frames.domain == grid.domain())) throw std::invalid_argument("bin_sequence: domain mismatch");
  FrameSequence out{grid, {}, frames.dt};
  out.frames.reserve(frames.size());
  for (const ParticleEnsemble& e : frames.frames) out.frames.push_back(bin_frame(e, grid));
  return out;
}

FrameSequence FrameSequence::slice(std::size_t first, std::size_t last) const {
  if (first > last || last >= frames.size()) throw std::out_of_range("FrameSequence::slice: bad range");
  FrameSequence out{grid, {}, dt};
  out.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(first),
                    frames.begin() + static_cast<std::ptrdiff_t>(last) + 1);
  return out;
}

FrameSequence FrameSequence::injected(const Grid2D& target) const {
  FrameSequence out{target, {}, dt};
  out.frames.reserve(frames.size());
  for (const ScalarField& f : frames) out.frames.push_back(inject(f, target));
  return out;
}

}  // namespace fpsrm
