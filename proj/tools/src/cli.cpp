#include "fpsrm/cli.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fpsrm/analysis.hpp"
#include "fpsrm/binning.hpp"
#include "fpsrm/inverse.hpp"
#include "fpsrm/io.hpp"
#include "fpsrm/sde.hpp"
#include "fpsrm/windowed.hpp"

#ifndef FPSRM_VERSION_STRING
#define FPSRM_VERSION_STRING "unknown"
#endif

namespace fpsrm::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

/// Bad flag values or config contents; reported with exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Domain square_domain(double half_width) {
  if (!(half_width > 0.0)) throw UsageError("--half-width must be positive");
  return Domain{-half_width, half_width, -half_width, half_width};
}

// ---------------------------------------------------------------------------
// config file and manifest

/// Top-level scalar keys apply to any subcommand that has a matching option;
/// an object keyed by the subcommand name applies only there and must not
/// contain unknown keys.
std::vector<std::string> config_tokens(const fs::path& path, const CLI::App& sub) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path.string());
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError("config file " + path.string() + ": " + e.what());
  }
  if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");

  std::vector<std::string> tokens;
  auto add = [&](const std::string& key, const json& v, bool strict) {
    if (!sub.get_option_no_throw("--" + key)) {
      if (strict) throw UsageError("config file: '" + sub.get_name() + "' has no option '" + key + "'");
      return;
    }
    if (v.is_boolean()) {
      if (v.get<bool>()) tokens.push_back("--" + key);
    } else if (v.is_string()) {
      tokens.push_back("--" + key + "=" + v.get<std::string>());
    } else if (v.is_number()) {
      tokens.push_back("--" + key + "=" + v.dump());
    } else {
      throw UsageError("config key '" + key + "': expected a number, string or boolean");
    }
  };
  for (const auto& [key, v] : cfg.items())
    if (!v.is_object()) add(key, v, false);
  if (auto it = cfg.find(sub.get_name()); it != cfg.end() && it->is_object())
    for (const auto& [key, v] : it->items()) add(key, v, true);
  return tokens;
}

json typed_value(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  try {
    std::size_t pos = 0;
    if (s.find_first_of(".eEnN") == std::string::npos) {
      const long long v = std::stoll(s, &pos);
      if (pos == s.size()) return v;
    }
    const double d = std::stod(s, &pos);
    if (pos == s.size()) return d;
  } catch (const std::exception&) {
  }
  return s;
}

/// Every named option of the subcommand with its effective value.
json option_echo(const CLI::App& sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->get_expected_max() == 0) {
      cfg[name] = opt->count() > 0;
    } else if (opt->count() > 0) {
      cfg[name] = typed_value(opt->results().back());
    } else {
      const std::string def = opt->get_default_str();
      cfg[name] = def.empty() ? json(nullptr) : typed_value(def);
    }
  }
  return cfg;
}

json base_manifest(const std::string& command, const std::vector<std::string>& args, const CLI::App& sub) {
  json m;
  m["tool"] = "fpsrm";
  m["version"] = FPSRM_VERSION_STRING;
  m["command"] = command;
  m["argv"] = args;
  m["config"] = option_echo(sub);
  m["inputs"] = json::object();
  m["outputs"] = json::object();
  m["timings_s"] = json::object();
  return m;
}

fs::path manifest_beside(const fs::path& output) {
  fs::path p = output;
  p.replace_extension(".manifest.json");
  return p;
}

void write_json(const json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << std::setw(2) << j << '\n';
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string status_string(const NcgReport& r) { return to_string(r.status); }

// ---------------------------------------------------------------------------
// subcommands

struct SimulateArgs {
  std::string potential;
  std::string out;
  double potential_scale = 1.0;
  double half_width = 3.0;
  double sigma = 0.268;
  double tau = 0.03;
  std::size_t substeps = 1;
  std::size_t particles = 1000;
  std::size_t frames = 3000;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a, json& manifest, std::ostream& out) {
  const auto t0 = Clock::now();
  const Domain domain = square_domain(a.half_width);
  ScalarField u = io::load_field_or_image(a.potential, domain);
  if (!(u.grid().domain() == domain))
    throw UsageError("potential field domain does not match --half-width " + std::to_string(a.half_width));
  u *= a.potential_scale;

  SdeConfig cfg;
  cfg.sigma_mc = a.sigma;
  cfg.tau = a.tau;
  cfg.substeps_per_frame = a.substeps;
  cfg.n_particles = a.particles;
  cfg.n_frames = a.frames;
  cfg.seed = a.seed;
  cfg.domain = domain;
  const TrajectoryFrames frames = simulate(cfg, u);
  io::save_frames(frames, a.out);

  manifest["inputs"]["potential"] = a.potential;
  manifest["outputs"]["frames"] = a.out;
  manifest["seeds"] = {{"simulation", a.seed}};
  manifest["potential_range"] = {u.min(), u.max()};
  manifest["frame_dt"] = frames.dt;
  manifest["timings_s"]["total"] = seconds_since(t0);
  write_json(manifest, manifest_beside(a.out));
  out << "wrote " << frames.size() << " frames of " << a.particles << " particles to " << a.out << '\n';
  return kExitOk;
}

struct BinArgs {
  std::string frames;
  std::string out;
  std::size_t bins = 50;
};

int run_bin(const BinArgs& a, json& manifest, std::ostream& out) {
  const auto t0 = Clock::now();
  const TrajectoryFrames frames = io::load_frames(a.frames);
  if (a.bins < 2) throw UsageError("--bins must be at least 2");
  const FrameSequence density = bin_sequence(frames, square_grid(frames.domain, a.bins));
  io::save_density(density, a.out);

  manifest["inputs"]["frames"] = a.frames;
  manifest["outputs"]["density"] = a.out;
  manifest["frames"] = density.size();
  manifest["timings_s"]["total"] = seconds_since(t0);
  write_json(manifest, manifest_beside(a.out));
  out << "binned " << density.size() << " frames onto " << a.bins << "x" << a.bins << " to " << a.out << '\n';
  return kExitOk;
}

struct ReconstructArgs {
  std::string density;
  std::string out_dir;
  std::string reference;
  std::size_t grid = 100;
  double sigma_fp = 0.7;
  double alpha = 1e-4;
  double xi = 1.0;
  std::size_t windows = 5;
  std::size_t steps_per_frame = 1;
  double tol = 1e-4;
  bool tol_absolute = false;
  std::size_t max_iter = 100;
  double threshold = kResolutionThreshold;
  bool quiet = false;
};

int run_reconstruct(const ReconstructArgs& a, json& manifest, std::ostream& out, std::ostream& err) {
  const auto t0 = Clock::now();
  const FrameSequence fd = io::load_density(a.density);
  if (a.grid < 2) throw UsageError("--grid must be at least 2");

  FpConfig fp;
  fp.sigma_fp = a.sigma_fp;
  fp.grid = square_grid(fd.grid.domain(), a.grid);
  InverseConfig inv;
  inv.alpha = a.alpha;
  inv.xi = a.xi;
  inv.tol = a.tol;
  inv.tol_relative = !a.tol_absolute;
  inv.n_max = a.max_iter;
  inv.validate();
  const WindowPlan plan{a.windows, a.steps_per_frame};
  plan.validate(fd.size());

  std::optional<ScalarField> reference;
  if (!a.reference.empty()) reference = io::load_field_or_image(a.reference, fd.grid.domain());

  const fs::path dir = a.out_dir;
  fs::create_directories(dir);
  std::ofstream log(dir / "iterations.tsv");
  if (!log) throw std::runtime_error("cannot open " + (dir / "iterations.tsv").string());
  log << "window\titeration\tJ\tgrad_h1\tstep\tbacktracks\n";

  auto window_start = Clock::now();
  std::vector<double> window_seconds;
  std::size_t current = 0;
  const auto on_iteration = [&](std::size_t w, const NcgIterate& it) {
    if (w != current) {
      window_seconds.push_back(seconds_since(window_start));
      window_start = Clock::now();
      current = w;
    }
    log << (w + 1) << '\t' << format_iteration_tsv(it) << '\n';
    if (!a.quiet && it.iteration % 10 == 0)
      err << "window " << (w + 1) << " iteration " << it.iteration << " J=" << it.objective
          << " |g|=" << it.gradient_norm << '\n';
  };
  const ReconstructionResult res = run_windows(fd, plan, inv, fp, on_iteration);
  window_seconds.push_back(seconds_since(window_start));
  log.close();

  manifest["inputs"]["density"] = a.density;
  if (reference) manifest["inputs"]["reference"] = a.reference;
  json outputs = {{"iterations", (dir / "iterations.tsv").string()}};
  json windows = json::array();
  std::vector<double> ccs;
  for (std::size_t k = 0; k < res.windows.size(); ++k) {
    const WindowResult& w = res.windows[k];
    const std::string stem = "window_" + std::to_string(k + 1);
    io::save_field(w.potential, dir / (stem + ".field"));
    io::save_field_image(w.potential, dir / (stem + ".pgm"), io::ImageScale::MinMax);
    const NcgIterate& last = w.report.iterates.back();
    json jw = {{"first_frame", w.first_frame},
               {"last_frame", w.last_frame},
               {"status", status_string(w.report)},
               {"iterations", last.iteration},
               {"objective", last.objective},
               {"gradient_h1", last.gradient_norm},
               {"degenerate", w.degenerate},
               {"field", (dir / (stem + ".field")).string()}};
    if (!w.report.diagnostic.empty()) jw["diagnostic"] = w.report.diagnostic;
    if (k < window_seconds.size()) jw["seconds"] = window_seconds[k];
    if (reference) {
      ccs.push_back(compare_to_reference(w.potential, *reference));
      jw["cc"] = ccs.back();
    }
    windows.push_back(jw);
  }
  manifest["windows"] = windows;
  manifest["complete"] = res.complete;
  if (!res.complete) manifest["failure"] = res.failure;

  if (!res.windows.empty()) {
    io::save_field(res.mean, dir / "mean.field");
    io::save_field_image(res.mean, dir / "mean.pgm", io::ImageScale::MinMax);
    outputs["mean"] = (dir / "mean.field").string();
    if (res.sd_defined) {
      io::save_field(res.sd, dir / "sd.field");
      io::save_field_image(res.sd, dir / "sd.pgm", io::ImageScale::MinMax);
      outputs["sd"] = (dir / "sd.field").string();
    }
    manifest["sd_defined"] = res.sd_defined;
    if (reference) {
      const double cc = compare_to_reference(res.mean, *reference);
      manifest["mean_cc"] = cc;
      manifest["resolved"] = resolution_verdict(cc, a.threshold);
      out << "mean cc " << std::fixed << std::setprecision(4) << cc << " ("
          << (resolution_verdict(cc, a.threshold) ? "resolved" : "not resolved") << ")\n";
      out.unsetf(std::ios::fixed);
    }
  }
  manifest["outputs"] = outputs;
  manifest["timings_s"]["total"] = seconds_since(t0);
  write_json(manifest, dir / "manifest.json");

  if (!res.complete) {
    err << "error: reconstruction stopped after " << res.windows.size() << " of " << a.windows
        << " windows: " << res.failure << '\n';
    return kExitFailure;
  }
  out << "reconstructed " << res.windows.size() << " windows into " << a.out_dir << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string reconstruction;
  std::string reference;
  std::string manifest;
  double threshold = kResolutionThreshold;
  double half_width = 3.0;
};

int run_evaluate(const EvaluateArgs& a, json& manifest, std::ostream& out) {
  const Domain domain = square_domain(a.half_width);
  const ScalarField recon = io::load_field_or_image(a.reconstruction, domain);
  const ScalarField ref = io::load_field_or_image(a.reference, recon.grid().domain());
  const double cc = compare_to_reference(recon, ref);
  const bool resolved = resolution_verdict(cc, a.threshold);
  out << "cc\t" << std::setprecision(6) << cc << '\n' << "verdict\t" << (resolved ? "resolved" : "not resolved") << '\n';
  if (!a.manifest.empty()) {
    manifest["inputs"] = {{"reconstruction", a.reconstruction}, {"reference", a.reference}};
    manifest["cc"] = cc;
    manifest["resolved"] = resolved;
    write_json(manifest, a.manifest);
  }
  return kExitOk;
}

struct TargetArgs {
  std::string out;
  std::string scale = "minmax";
  double amplitude = 0.05;
  double d = 1.0 / 20.0;
  double half_width = 3.0;
  std::size_t grid = 500;
};

int run_target(const TargetArgs& a, json& manifest, std::ostream& out) {
  const Domain domain = square_domain(a.half_width);
  if (a.grid < 2) throw UsageError("--grid must be at least 2");
  const TargetSpec spec{a.amplitude, a.d, domain.width()};
  const ScalarField u = make_target(spec, square_grid(domain, a.grid));
  const fs::path path = a.out;
  if (path.extension() == ".field") {
    io::save_field(u, path);
  } else {
    io::save_field_image(u, path, a.scale == "unit" ? io::ImageScale::Unit : io::ImageScale::MinMax);
  }
  // gray 0 and max gray correspond to these values in minmax mode
  manifest["value_range"] = {u.min(), u.max()};
  manifest["outputs"]["target"] = a.out;
  write_json(manifest, manifest_beside(path));
  out << "target range [" << u.min() << ", " << u.max() << "] written to " << a.out << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Potential reconstruction from particle trajectories", "fpsrm"};
  app.require_subcommand(1);
  app.set_version_flag("--version", FPSRM_VERSION_STRING);
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;

  SimulateArgs sim;
  CLI::App* simulate_cmd = app.add_subcommand("simulate", "Simulate particle frames in a potential");
  simulate_cmd->add_option("--potential", sim.potential, "Potential as PGM image or .field file")->required();
  simulate_cmd->add_option("--potential-scale", sim.potential_scale, "Factor applied to the loaded potential");
  simulate_cmd->add_option("--half-width", sim.half_width, "Domain is [-w, w]^2");
  simulate_cmd->add_option("--sigma", sim.sigma, "Noise amplitude")->check(CLI::NonNegativeNumber);
  simulate_cmd->add_option("--tau", sim.tau, "Euler-Maruyama step (s)")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--substeps", sim.substeps, "Steps per frame")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--particles", sim.particles, "Number of particles")->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--frames", sim.frames, "Snapshots including the initial one")->check(CLI::Range(2, 1 << 30));
  simulate_cmd->add_option("--seed", sim.seed, "Random seed");
  simulate_cmd->add_option("--out", sim.out, "Output frame file")->required();

  BinArgs bin;
  CLI::App* bin_cmd = app.add_subcommand("bin", "Bin particle frames into densities");
  bin_cmd->add_option("--frames", bin.frames, "Input frame file")->required();
  bin_cmd->add_option("--bins", bin.bins, "Bins per axis");
  bin_cmd->add_option("--out", bin.out, "Output density file")->required();

  ReconstructArgs rec;
  CLI::App* rec_cmd = app.add_subcommand("reconstruct", "Reconstruct the potential from densities");
  rec_cmd->add_option("--density", rec.density, "Input density file")->required();
  rec_cmd->add_option("--grid", rec.grid, "Solver cells per axis");
  rec_cmd->add_option("--sigma-fp", rec.sigma_fp, "Fokker-Planck noise amplitude")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--alpha", rec.alpha, "Tikhonov weight")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--xi", rec.xi, "Terminal misfit weight")->check(CLI::NonNegativeNumber);
  rec_cmd->add_option("--windows", rec.windows, "Number of time windows")->check(CLI::PositiveNumber);
  rec_cmd->add_option("--steps-per-frame", rec.steps_per_frame, "Solver steps per frame interval")
      ->check(CLI::PositiveNumber);
  rec_cmd->add_option("--tol", rec.tol, "Gradient tolerance (relative to the first gradient)")
      ->check(CLI::PositiveNumber);
  rec_cmd->add_flag("--tol-absolute", rec.tol_absolute, "Treat --tol as an absolute H1 norm");
  rec_cmd->add_option("--max-iter", rec.max_iter, "NCG iterations per window");
  rec_cmd->add_option("--reference", rec.reference, "Reference potential for cross-correlation");
  rec_cmd->add_option("--threshold", rec.threshold, "Resolution threshold on cc");
  rec_cmd->add_option("--out-dir", rec.out_dir, "Output directory")->required();
  rec_cmd->add_flag("--quiet", rec.quiet, "No progress output");

  EvaluateArgs ev;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "Cross-correlate a reconstruction with a reference");
  eval_cmd->add_option("--reconstruction", ev.reconstruction, "Reconstruction (.field or PGM)")->required();
  eval_cmd->add_option("--reference", ev.reference, "Reference (.field or PGM)")->required();
  eval_cmd->add_option("--threshold", ev.threshold, "Resolution threshold on cc");
  eval_cmd->add_option("--half-width", ev.half_width, "Domain of PGM inputs is [-w, w]^2");
  eval_cmd->add_option("--manifest", ev.manifest, "Write a run manifest here");

  TargetArgs tg;
  CLI::App* target_cmd = app.add_subcommand("target", "Write the concentric-ring test potential");
  target_cmd->add_option("--A", tg.amplitude, "Semi-amplitude")->check(CLI::PositiveNumber);
  target_cmd->add_option("--d", tg.d, "Ring spacing as a fraction of the domain side");
  target_cmd->add_option("--grid", tg.grid, "Cells per axis");
  target_cmd->add_option("--half-width", tg.half_width, "Domain is [-w, w]^2");
  target_cmd->add_option("--scale", tg.scale, "Gray mapping for images")->check(CLI::IsMember({"minmax", "unit"}));
  target_cmd->add_option("--out", tg.out, "Output .field or PGM")->required();

  for (CLI::App* sub : app.get_subcommands({}))
    sub->add_option("--config", config_path, "JSON file with option defaults")->check(CLI::ExistingFile);

  // Config values go in right after the subcommand name so that flags given
  // on the command line (parsed later, last one wins) take precedence.
  std::vector<std::string> effective = args;
  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (path.empty() || args.empty()) continue;
      CLI::App* sub = app.get_subcommand_no_throw(args[0]);
      if (!sub) break;
      const auto tokens = config_tokens(path, *sub);
      effective.insert(effective.begin() + 1, tokens.begin(), tokens.end());
      break;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  std::vector<std::string> reversed(effective.rbegin(), effective.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    err << "error: " << e.what() << '\n';
    CLI::App* sub = effective.empty() ? nullptr : app.get_subcommand_no_throw(effective[0]);
    err << (sub ? sub->help() : app.help());
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  json manifest = base_manifest(sub->get_name(), args, *sub);
  if (!config_path.empty()) manifest["config_file"] = config_path;
  try {
    if (sub == simulate_cmd) return run_simulate(sim, manifest, out);
    if (sub == bin_cmd) return run_bin(bin, manifest, out);
    if (sub == rec_cmd) return run_reconstruct(rec, manifest, out, err);
    if (sub == eval_cmd) return run_evaluate(ev, manifest, out);
    if (sub == target_cmd) return run_target(tg, manifest, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: invalid value: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << sub->get_name() << " failed: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace fpsrm::cli
