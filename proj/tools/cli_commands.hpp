#pragma once

// Subcommands of the regflow tool. Kept in a header so the test suite can
// drive them in-process through run_cli().

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "regflow/regflow.hpp"

namespace regflow::cli {

namespace fs = std::filesystem;

struct MaskPaths {
  std::optional<fs::path> brain;
  std::optional<fs::path> vent;
  std::optional<fs::path> wml;
};

/// Parses "brain=a,vent=b,wml=c" (any subset, any order).
inline MaskPaths parse_mask_spec(const std::string& spec) {
  MaskPaths out;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw InvalidArgument("mask entry '" + item + "' is not key=path");
    const std::string key = item.substr(0, eq);
    const fs::path path = item.substr(eq + 1);
    if (path.empty()) throw InvalidArgument("mask entry '" + item + "' has an empty path");
    if (key == "brain") {
      out.brain = path;
    } else if (key == "vent") {
      out.vent = path;
    } else if (key == "wml") {
      out.wml = path;
    } else {
      throw InvalidArgument("unknown mask key '" + key + "' (expected brain, vent or wml)");
    }
  }
  return out;
}

inline StructureMasks load_masks(const MaskPaths& p) {
  StructureMasks m;
  if (p.brain) m.brain = load_mask(*p.brain);
  if (p.vent) m.vent = load_mask(*p.vent);
  if (p.wml) m.wml = load_mask(*p.wml);
  return m;
}

inline void require_file(const fs::path& path, const char* what) {
  const auto paths = volume_paths(path);
  if (!fs::exists(paths.header)) throw IoError(std::string(what) + " not found: " + paths.header.string());
}

/// Options shared by register and alpha-sweep.
struct RegistrationFlags {
  double alpha = LossWeights{}.alpha;
  double gamma = LossWeights{}.gamma;
  double zeta = LossWeights{}.zeta;
  double lambda = LossWeights{}.lambda;
  std::optional<double> lr;
  std::optional<int> iters;
  std::uint64_t seed = 0;
  int jobs = 0;

  void add_to(CLI::App& app) {
    app.add_option("--alpha", alpha, "Charbonnier exponent")->capture_default_str();
    app.add_option("--gamma", gamma, "photometric weight")->capture_default_str();
    app.add_option("--zeta", zeta, "correlation weight")->capture_default_str();
    app.add_option("--lambda", lambda, "smoothness weight")->capture_default_str();
    app.add_option("--lr", lr, "Adam step size (both stages)");
    app.add_option("--iters", iters, "iteration cap (affine total / flow per level)");
    app.add_option("--seed", seed, "seed recorded in the optimizer config")->capture_default_str();
    app.add_option("--jobs", jobs, "worker threads (default: REGFLOW_JOBS or all cores)");
  }

  [[nodiscard]] PipelineOptions options() const {
    PipelineOptions opt;
    opt.weights.alpha = alpha;
    opt.weights.gamma = gamma;
    opt.weights.zeta = zeta;
    opt.weights.lambda = lambda;
    opt.weights.validate();
    for (auto* cfg : {&opt.affine, &opt.flow}) {
      if (lr) cfg->lr = *lr;
      if (iters) cfg->max_iters = *iters;
      cfg->seed = seed;
      cfg->validate();
    }
    opt.jobs = jobs > 0 ? jobs : default_jobs();
    return opt;
  }
};

inline std::string slice_name(const char* prefix, std::int64_t z) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%03lld", prefix, static_cast<long long>(z));
  return buf;
}

// ---------------------------------------------------------------------------

struct RegisterArgs {
  fs::path moving;
  fs::path fixed;
  std::string masks;
  std::string stage = "both";
  fs::path out;
  std::optional<fs::path> trace;
  RegistrationFlags flags;
};

inline int cmd_register(const RegisterArgs& a, std::ostream& log) {
  require_file(a.moving, "moving volume");
  require_file(a.fixed, "fixed volume");
  Volume moving = load_volume(a.moving);
  const Volume fixed = load_volume(a.fixed);
  auto masks = load_masks(parse_mask_spec(a.masks));
  if (!(moving.dims() == fixed.dims())) {
    log << "resizing moving " << to_string(moving.dims()) << " to " << to_string(fixed.dims()) << "\n";
    moving = resize_volume(moving, fixed.dims());
    for (auto* m : {&masks.brain, &masks.vent, &masks.wml}) {
      if (*m) *m = binarize(resize_volume(mask_to_float(**m), fixed.dims()));
    }
  }
  for (auto* m : {&masks.brain, &masks.vent, &masks.wml}) {
    if (*m && !((*m)->dims() == moving.dims())) {
      throw InvalidArgument("mask " + to_string((*m)->dims()) + " does not match moving " + to_string(moving.dims()));
    }
  }

  PipelineOptions opt = a.flags.options();
  if (a.stage == "affine") {
    opt.run_flow = false;
  } else if (a.stage == "flow") {
    opt.run_affine = false;
  } else if (a.stage != "both") {
    throw InvalidArgument("--stage must be affine, flow or both");
  }
  const auto r = register_volume_pipeline(moving, fixed, opt);

  fs::create_directories(a.out);
  save_affine(a.out / "affine.json", opt.run_affine ? r.affine.transform : AffineTransform::identity());
  if (opt.run_flow) {
    fs::create_directories(a.out / "flows");
    for (std::size_t z = 0; z < r.flows.size(); ++z) {
      save_flow(a.out / "flows" / (slice_name("flow_z", static_cast<std::int64_t>(z)) + ".json"), r.flows[z]);
    }
    for (auto z : r.skipped_slices) log << "warning: slice " << z << " is constant after affine; zero flow\n";
  }
  save_volume(a.out / "warped.json", r.warped);

  const AffineTransform t = opt.run_affine ? r.affine.transform : AffineTransform::identity();
  const std::span<const FlowField> flows = opt.run_flow ? std::span<const FlowField>(r.flows) : std::span<const FlowField>{};
  const std::pair<const char*, const std::optional<LabelMask>*> named[] = {
      {"warped_brain", &masks.brain}, {"warped_vent", &masks.vent}, {"warped_wml", &masks.wml}};
  for (const auto& [name, mask] : named) {
    if (*mask) save_mask(a.out / (std::string(name) + ".json"), warp_mask(**mask, t, flows));
  }

  if (a.trace) {
    fs::create_directories(*a.trace);
    if (opt.run_affine) write_trace_csv(*a.trace / "affine.csv", r.affine.trace);
    if (opt.run_flow) {
      for (std::size_t z = 0; z < r.slice_traces.size(); ++z) {
        write_trace_csv(*a.trace / (slice_name("flow_z", static_cast<std::int64_t>(z)) + ".csv"), r.slice_traces[z]);
      }
    }
  }
  if (opt.run_affine) log << "affine loss " << r.affine.loss << " after " << r.affine.iterations << " iterations\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::vector<fs::path> moving;
  fs::path fixed;
  std::vector<std::string> masks;
  std::vector<std::string> orig_masks;
  std::string fixed_masks;
  fs::path report;
  std::optional<fs::path> atlas;
  std::optional<fs::path> heatmap;
  std::optional<fs::path> pwa_slices;
  int jobs = 0;
};

inline int cmd_evaluate(const EvaluateArgs& a, std::ostream& log) {
  require_file(a.fixed, "fixed volume");
  if (a.moving.empty()) throw InvalidArgument("evaluate needs at least one --moving volume");
  if (!a.masks.empty() && a.masks.size() != a.moving.size()) {
    throw InvalidArgument("--masks must be given once per --moving volume");
  }
  if (!a.orig_masks.empty() && a.orig_masks.size() != a.moving.size()) {
    throw InvalidArgument("--orig-masks must be given once per --moving volume");
  }
  const Volume fixed = load_volume(a.fixed);
  const auto fixed_masks = load_masks(parse_mask_spec(a.fixed_masks));

  const auto n = static_cast<std::int64_t>(a.moving.size());
  std::vector<MetricReport> rows(static_cast<std::size_t>(n));
  std::vector<std::optional<Volume>> volumes(static_cast<std::size_t>(n));
  std::vector<std::optional<LabelMask>> brains(static_cast<std::size_t>(n));
  const int jobs = a.jobs > 0 ? a.jobs : default_jobs();
  parallel_for(n, jobs, [&](std::int64_t i) {
    const auto k = static_cast<std::size_t>(i);
    MetricReport& row = rows[k];
    row.volume = a.moving[k].string();
    try {
      require_file(a.moving[k], "moving volume");
      Volume v = load_volume(a.moving[k]);
      const auto reg = a.masks.empty() ? StructureMasks{} : load_masks(parse_mask_spec(a.masks[k]));
      const auto orig = a.orig_masks.empty() ? StructureMasks{} : load_masks(parse_mask_spec(a.orig_masks[k]));
      row = evaluate_volume(a.moving[k].string(), v, fixed, reg, orig, fixed_masks.brain);
      volumes[k] = std::move(v);
      brains[k] = reg.brain;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });

  std::vector<Volume> ok;
  std::vector<LabelMask> ok_brains;
  for (std::size_t k = 0; k < volumes.size(); ++k) {
    if (volumes[k]) ok.push_back(*volumes[k]);
    if (brains[k]) ok_brains.push_back(*brains[k]);
  }
  if (!ok.empty()) {
    MetricReport summary;
    summary.volume = "dataset";
    const auto p = pwa(std::span<const Volume>(ok), fixed);
    summary.pwa_total = p.total;
    const Volume atlas = build_atlas(ok);
    detail::try_metric(summary, summary.maid, "maid", [&] { return maid(atlas, fixed, 0); });
    detail::try_metric(summary, summary.maid_zp, "maid_zp", [&] { return maid(atlas, fixed, kBackgroundBins); });
    rows.push_back(summary);
    if (a.atlas) save_volume(*a.atlas, atlas);
    if (a.pwa_slices) {
      if (a.pwa_slices->has_parent_path()) fs::create_directories(a.pwa_slices->parent_path());
      std::ofstream out(*a.pwa_slices, std::ios::trunc | std::ios::binary);
      if (!out) throw IoError("cannot write " + a.pwa_slices->string());
      out << "slice,pwa\n";
      for (std::size_t z = 0; z < p.per_slice.size(); ++z) out << z << ',' << detail::csv_number(p.per_slice[z]) << '\n';
    }
  }
  if (a.heatmap) {
    if (ok_brains.empty()) throw InvalidArgument("--heatmap needs brain masks via --masks");
    save_volume(*a.heatmap, brain_heatmap(ok_brains));
  }
  write_report_csv(a.report, rows);
  std::int64_t failed = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    if (rows[static_cast<std::size_t>(i)].failed) {
      ++failed;
      log << "error: " << rows[static_cast<std::size_t>(i)].volume << ": " << rows[static_cast<std::size_t>(i)].error
          << "\n";
    }
  }
  return failed == n ? 1 : 0;
}

// ---------------------------------------------------------------------------

struct AtlasArgs {
  std::vector<fs::path> moving;
  fs::path out;
  std::optional<fs::path> fixed;
};

inline int cmd_atlas(const AtlasArgs& a, std::ostream& log) {
  if (a.moving.empty()) throw InvalidArgument("atlas needs at least one --moving volume");
  std::vector<Volume> vols;
  for (const auto& p : a.moving) {
    require_file(p, "moving volume");
    vols.push_back(load_volume(p));
  }
  const Volume atlas = build_atlas(vols);
  save_volume(a.out, atlas);
  if (a.fixed) {
    const Volume f = load_volume(*a.fixed);
    log << "maid " << detail::csv_number(maid(atlas, f, 0)) << "\n";
    log << "maid_zp " << detail::csv_number(maid(atlas, f, kBackgroundBins)) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
  fs::path out;
  std::vector<std::int64_t> dims{64, 64, 16};
  std::vector<double> spacing{1.0, 1.0, 1.0};
  int lesions = 4;
  std::uint64_t seed = 0;
  double noise = 0.0;
  bool symmetric = false;
  double rotate = 0.0;
  std::vector<double> translate{0.0, 0.0, 0.0};
  std::vector<double> head_scale{1.0, 1.0};
  double ventricle_scale = 1.0;
};

inline int cmd_phantom(const PhantomArgs& a, std::ostream& log) {
  if (a.dims.size() != 3 || a.spacing.size() != 3 || a.translate.size() != 3 || a.head_scale.size() != 2) {
    throw InvalidArgument("--dims, --spacing and --translate take 3 values, --head-scale takes 2");
  }
  const Dims3 d{a.dims[0], a.dims[1], a.dims[2]};
  const Spacing3 sp{a.spacing[0], a.spacing[1], a.spacing[2]};
  PhantomSpec spec = a.symmetric ? PhantomSpec::symmetric(d, sp)
                                 : phantom_subject(d, sp, a.head_scale[0], a.head_scale[1], a.ventricle_scale, a.seed,
                                                   a.lesions);
  spec.noise_sigma = a.noise;
  spec.seed = a.seed;
  auto images = make_phantom(spec);
  const AffineTransform t = content_translation(a.translate[0], a.translate[1], a.translate[2]) *
                            content_rotation_z(a.rotate, grid_center(d));
  if (!(t == AffineTransform::identity())) images = apply_known_transform(images, t).images;
  fs::create_directories(a.out);
  save_volume(a.out / "volume.json", images.volume);
  save_mask(a.out / "brain.json", images.brain);
  save_mask(a.out / "vent.json", images.ventricles);
  save_mask(a.out / "wml.json", images.wml);
  save_affine(a.out / "truth.json", t);
  log << "phantom " << to_string(d) << " with " << spec.wml.size() << " lesions written to " << a.out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::optional<fs::path> moving;
  std::optional<fs::path> fixed;
  bool phantom = false;
  std::vector<std::int64_t> dims{64, 64, 16};
  std::optional<std::int64_t> slice;
  std::vector<double> alphas = default_alphas();
  fs::path out;
  RegistrationFlags flags;
};

/// Fixed pair used by `alpha-sweep --phantom`: the standard phantom against a
/// second subject with a 5% narrower head and different lesions.
inline std::pair<Volume, Volume> sweep_phantom_pair(Dims3 d) {
  const Volume fixed = make_phantom(PhantomSpec::standard(d)).volume;
  const Volume moving = make_phantom(phantom_subject(d, {}, 0.95, 1.0, 1.0, 7)).volume;
  return {moving, fixed};
}

inline int cmd_alpha_sweep(const SweepArgs& a, std::ostream& log) {
  Volume moving;
  Volume fixed;
  if (a.phantom) {
    if (a.dims.size() != 3) throw InvalidArgument("--dims takes 3 values");
    std::tie(moving, fixed) = sweep_phantom_pair({a.dims[0], a.dims[1], a.dims[2]});
  } else {
    if (!a.moving || !a.fixed) throw InvalidArgument("alpha-sweep needs --moving and --fixed, or --phantom");
    require_file(*a.moving, "moving volume");
    require_file(*a.fixed, "fixed volume");
    moving = load_volume(*a.moving);
    fixed = load_volume(*a.fixed);
    if (!(moving.dims() == fixed.dims())) moving = resize_volume(moving, fixed.dims());
  }
  if (a.slice) {
    const auto z = *a.slice;
    const auto m = extract_slice(moving, z);
    const auto f = extract_slice(fixed, z);
    moving = Volume({m.nx(), m.ny(), 1}, moving.spacing(), m.values());
    fixed = Volume({f.nx(), f.ny(), 1}, fixed.spacing(), f.values());
  }
  const auto rows = alpha_sweep(moving, fixed, a.alphas, a.flags.options());
  if (a.out.has_parent_path()) fs::create_directories(a.out.parent_path());
  std::ofstream out(a.out, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + a.out.string());
  out << "alpha,avg_flow_magnitude,total,photometric,correlation,smoothness\n";
  for (const auto& r : rows) {
    out << detail::csv_number(r.alpha) << ',' << detail::csv_number(r.magnitude) << ',' << detail::csv_number(r.total)
        << ',' << detail::csv_number(r.photometric) << ',' << detail::csv_number(r.correlation) << ','
        << detail::csv_number(r.smoothness) << '\n';
    log << "alpha " << r.alpha << ": average flow magnitude " << r.magnitude << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

/// Parses argv and dispatches. Returns the process exit code; diagnostics go to `err`.
inline int run_cli(const std::vector<std::string>& argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"regflow: affine + optical-flow registration of FLAIR-like volumes and validation metrics"};
  app.require_subcommand(1);

  RegisterArgs reg;
  auto* r = app.add_subcommand("register", "register a moving volume to a fixed volume");
  r->add_option("--moving", reg.moving, "moving volume")->required();
  r->add_option("--fixed", reg.fixed, "fixed volume")->required();
  r->add_option("--masks", reg.masks, "moving masks to warp: brain=…,vent=…,wml=…");
  r->add_option("--stage", reg.stage, "affine, flow or both")->capture_default_str();
  r->add_option("--out", reg.out, "output directory")->required();
  r->add_option("--trace", reg.trace, "directory for loss trace CSVs");
  reg.flags.add_to(*r);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "compute the metric report for registered volumes");
  e->add_option("--moving", ev.moving, "registered volume (repeatable)")->required();
  e->add_option("--fixed", ev.fixed, "fixed volume / atlas")->required();
  e->add_option("--masks", ev.masks, "registered masks per volume: brain=…,vent=…,wml=…");
  e->add_option("--orig-masks", ev.orig_masks, "pre-registration masks per volume");
  e->add_option("--fixed-masks", ev.fixed_masks, "fixed-volume masks (brain= enables DSC)");
  e->add_option("--report", ev.report, "CSV report path")->required();
  e->add_option("--atlas", ev.atlas, "write the average of the registered volumes");
  e->add_option("--heatmap", ev.heatmap, "write the average registered brain mask");
  e->add_option("--pwa-slices", ev.pwa_slices, "CSV of per-slice PWA over the dataset");
  e->add_option("--jobs", ev.jobs, "worker threads");

  AtlasArgs at;
  auto* t = app.add_subcommand("atlas", "average registered volumes");
  t->add_option("--moving", at.moving, "registered volume (repeatable)")->required();
  t->add_option("--out", at.out, "atlas output path")->required();
  t->add_option("--fixed", at.fixed, "report MAID of the atlas against this volume");

  PhantomArgs ph;
  auto* p = app.add_subcommand("phantom", "write a synthetic head phantom and its masks");
  p->add_option("--out", ph.out, "output directory")->required();
  p->add_option("--dims", ph.dims, "nx ny nz")->expected(3)->delimiter(',')->capture_default_str();
  p->add_option("--spacing", ph.spacing, "mm per voxel")->expected(3)->delimiter(',')->capture_default_str();
  p->add_option("--lesions", ph.lesions, "number of lesion blobs")->capture_default_str();
  p->add_option("--seed", ph.seed, "lesion placement and noise seed")->capture_default_str();
  p->add_option("--noise", ph.noise, "Gaussian noise sigma")->capture_default_str();
  p->add_flag("--symmetric", ph.symmetric, "no lesions; mirror-symmetric about the midline");
  p->add_option("--rotate", ph.rotate, "in-plane rotation, degrees")->capture_default_str();
  p->add_option("--translate", ph.translate, "dx,dy,dz in voxels")->expected(3)->delimiter(',');
  p->add_option("--head-scale", ph.head_scale, "head semi-axis scale in x,y")->expected(2)->delimiter(',');
  p->add_option("--ventricle-scale", ph.ventricle_scale, "in-plane ventricle scale")->capture_default_str();

  SweepArgs sw;
  auto* s = app.add_subcommand("alpha-sweep", "average flow magnitude across Charbonnier exponents");
  s->add_option("--moving", sw.moving, "moving volume");
  s->add_option("--fixed", sw.fixed, "fixed volume");
  s->add_flag("--phantom", sw.phantom, "use the built-in phantom pair");
  s->add_option("--dims", sw.dims, "phantom dims")->expected(3)->delimiter(',');
  s->add_option("--slice", sw.slice, "register only this slice");
  s->add_option("--alphas", sw.alphas, "alpha values")->delimiter(',');
  s->add_option("--out", sw.out, "CSV output path")->required();
  sw.flags.add_to(*s);

  std::vector<const char*> raw;
  raw.reserve(argv.size());
  for (const auto& a : argv) raw.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(raw.size()), raw.data());
  } catch (const CLI::CallForHelp& ex) {
    log << app.help();
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return ex.get_exit_code() == 0 ? 2 : ex.get_exit_code();
  }

  try {
    if (r->parsed()) return cmd_register(reg, log);
    if (e->parsed()) return cmd_evaluate(ev, log);
    if (t->parsed()) return cmd_atlas(at, log);
    if (p->parsed()) return cmd_phantom(ph, log);
    if (s->parsed()) return cmd_alpha_sweep(sw, log);
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace regflow::cli
