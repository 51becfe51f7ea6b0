#include "fpsrm/windowed.hpp"

#include <cmath>
#include <stdexcept>

namespace fpsrm {

void WindowPlan::validate(std::size_t n_frames) const {
  if (windows < 1) throw std::invalid_argument("WindowPlan: need at least one window");
  if (steps_per_frame < 1) throw std::invalid_argument("WindowPlan: steps_per_frame must be >= 1");
  if (n_frames < 2) throw std::invalid_argument("WindowPlan: need at least two frames");
  if (windows > n_frames - 1)
    throw std::invalid_argument("WindowPlan: more windows than frame intervals");
}

std::vector<std::pair<std::size_t, std::size_t>> WindowPlan::frame_ranges(std::size_t n_frames) const {
  validate(n_frames);
  const std::size_t intervals = n_frames - 1;
  const std::size_t per_window = intervals / windows;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  out.reserve(windows);
  for (std::size_t k = 0; k < windows; ++k) {
    const std::size_t first = k * per_window;
    const std::size_t last = (k + 1 == windows) ? intervals : first + per_window;
    out.emplace_back(first, last);
  }
  return out;
}

Aggregate aggregate(const std::vector<ScalarField>& potentials) {
  if (potentials.empty()) throw std::invalid_argument("aggregate: no potentials");
  const Grid2D& g = potentials.front().grid();
  const std::size_t k = potentials.size();

  Aggregate out;
  std::vector<ScalarField> scaled;
  scaled.reserve(k);
  for (const ScalarField& u : potentials) {
    if (!(u.grid() == g)) throw std::invalid_argument("aggregate: potentials on different grids");
    ScaledField s = min_max_scale(u);
    out.degenerate.push_back(s.degenerate);
    scaled.push_back(std::move(s.field));
  }

  out.mean = ScalarField(g, 0.0);
  for (const ScalarField& s : scaled) out.mean += s;
  out.mean *= 1.0 / static_cast<double>(k);

  out.sd = ScalarField(g, 0.0);
  if (k < 2) {
    out.sd_defined = false;
    return out;
  }
  for (const ScalarField& s : scaled) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double d = s[i] - out.mean[i];
      out.sd[i] += d * d;
    }
  }
  for (double& v : out.sd.values()) v = std::sqrt(v / static_cast<double>(k - 1));
  return out;
}

ReconstructionResult run_windows(const FrameSequence& fd, const WindowPlan& plan, const InverseConfig& inverse,
                                 const FpConfig& fp, const WindowIterationCallback& on_iteration) {
  if (!(fd.dt > 0.0)) throw std::invalid_argument("run_windows: frame spacing must be positive");
  const auto ranges = plan.frame_ranges(fd.size());
  const FrameSequence data = (fd.grid == fp.grid) ? fd : fd.injected(fp.grid);

  ReconstructionResult result;
  ScalarField f0 = data.frames.front();
  for (std::size_t k = 0; k < ranges.size(); ++k) {
    const auto [first, last] = ranges[k];
    FpConfig window_fp = fp;
    window_fp.dt = data.dt / static_cast<double>(plan.steps_per_frame);
    window_fp.n_steps = (last - first) * plan.steps_per_frame;

    WindowResult w;
    w.first_frame = first;
    w.last_frame = last;
    w.initial_density = f0;
    try {
      ReducedObjective problem(f0, data.slice(first, last), inverse, window_fp);
      IterationCallback cb;
      if (on_iteration) cb = [&, k](const NcgIterate& it) { on_iteration(k, it); };
      NcgResult r = ncg_minimize(problem, cb);
      w.potential = std::move(r.potential);
      w.report = std::move(r.report);
      f0 = std::move(r.final_density);
    } catch (const std::exception& e) {
      result.complete = false;
      result.failure = "window " + std::to_string(k + 1) + ": " + e.what();
      break;
    }
    ScaledField s = min_max_scale(w.potential);
    w.scaled = std::move(s.field);
    w.degenerate = s.degenerate;
    result.windows.push_back(std::move(w));
  }

  if (!result.windows.empty()) {
    std::vector<ScalarField> potentials;
    for (const WindowResult& w : result.windows) potentials.push_back(w.potential);
    Aggregate agg = aggregate(potentials);
    result.mean = std::move(agg.mean);
    result.sd = std::move(agg.sd);
    result.sd_defined = agg.sd_defined;
  }
  return result;
}

}  // namespace fpsrm
