#include "vifi/app.hpp"

#include "vifi/fusion.hpp"
#include "vifi/gradcheck.hpp"
#include "vifi/io.hpp"
#include "vifi/parallel.hpp"
#include "vifi/reduce.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>

namespace vifi {

namespace {

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string format_matrix(const Eigen::Matrix3d& m) {
  std::string s;
  for (int r = 0; r < 3; ++r) {
    s += "  ";
    for (int c = 0; c < 3; ++c) s += (c ? " " : "") + format_double(m(r, c));
    s += "\n";
  }
  return s;
}

ValidityMask positive_mask(const ImageGrid& gt) {
  ValidityMask m(gt.height(), gt.width());
  for (Eigen::Index p = 0; p < m.size(); ++p) {
    const double v = gt.data()[p];
    m.data()[p] = std::isfinite(v) && v > 0.0 ? 1 : 0;
  }
  return m;
}

std::string psnr_text(double psnr) {
  if (psnr >= kPsnrSentinel) return fixed(kPsnrSentinel, 3) + " (sentinel: exact up to rounding)";
  return fixed(psnr, 3);
}

// Features at pyramid level `level`, rendered with intrinsics rescaled to
// that level's grid.
ImageGrid level_features(const Scene& scene, const Bundle& b, int view, int level, int channels) {
  const auto [h, w] = pyramid_shape(b.height, b.width, level);
  const Intrinsics k = b.k.rescaled(double(w) / b.width, double(h) / b.height);
  return render_features(scene, b.poses[view], k, h, w, channels);
}

std::string fusion_report(const Scene& scene, const Bundle& b, const RunConfig& cfg) {
  const InterpolationTruth& it = b.interpolations[1];
  const int c = cfg.feature_channels;
  const int s = cfg.octaves;
  const int aligned = c + encoded_flow_channels(s);
  std::ostringstream r;
  r << "octaves S = " << s << "\n";
  r << "aligned channels C + 2(2S+1) = " << c << " + " << encoded_flow_channels(s) << " = "
    << aligned << "\n";
  r << "fused-feature consistency, interpolating view " << it.mid << " from " << it.prev
    << " and " << it.next << "\n";
  r << "level  height  width  covisible  mean_abs_err\n";

  // Mixing matrix that reads back the first C channels of the merged
  // neighbor block chi, so the fused output should equal phi_t wherever
  // both neighbors see the point.
  Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(c, 2 * aligned);
  for (int i = 0; i < c; ++i) mix(i, aligned + i) = 1.0;

  ImageGrid covisible(b.height, b.width, 1);
  for (Eigen::Index p = 0; p < covisible.size(); ++p) covisible.data()[p] = it.covisible.data()[p];

  for (int level = 1; level <= cfg.levels; ++level) {
    const ImageGrid phi_prev = level_features(scene, b, it.prev, level, c);
    const ImageGrid phi_next = level_features(scene, b, it.next, level, c);
    const ImageGrid phi_t = level_features(scene, b, it.mid, level, c);
    const FlowField f_prev = pyramid_flow(it.to_prev, level, cfg.levels);
    const FlowField f_next = pyramid_flow(it.to_next, level, cfg.levels);
    const MergeMask m = pyramid_mask(it.merge, level, cfg.levels);
    const MergeMask vis = pyramid_mask(covisible, level, cfg.levels);

    const AlignedFeatures a = mafa_align(phi_prev, phi_next, phi_t, f_prev, f_next, s);
    const ImageGrid fused = oaff_fuse(a.from_prev, a.from_next, a.current, m, mix);

    std::vector<double> err;
    for (Eigen::Index p = 0; p < fused.pixels(); ++p) {
      if (vis.data()[p] < 1.0) continue;
      for (int ch = 0; ch < c; ++ch) {
        err.push_back(std::abs(fused.data()[p * c + ch] - phi_t.data()[p * c + ch]));
      }
    }
    const double mean = err.empty() ? 0.0 : pairwise_sum(err) / err.size();
    r << level << "  " << phi_t.height() << "  " << phi_t.width() << "  " << err.size() / c << "  "
      << fixed(mean, 6) << "\n";
  }
  return r.str();
}

void make_output_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

RunConfig resolve_config(const std::string& config_path, const std::vector<std::string>& sets,
                         const std::string& out_dir) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
  if (const char* env = std::getenv("VIFI_SEED")) apply_override(cfg, std::string("seed=") + env);
  for (const std::string& s : sets) apply_override(cfg, s);
  if (!out_dir.empty()) cfg.out_dir = out_dir;
  cfg.validate();
  return cfg;
}

}  // namespace

std::string format_metrics(const DepthMetrics& m, int decimals) {
  const std::pair<const char*, double> rows[] = {
      {"abs_rel", m.abs_rel}, {"sq_rel", m.sq_rel}, {"rmse", m.rmse},     {"rmse_log", m.rmse_log},
      {"delta1", m.delta1},   {"delta2", m.delta2}, {"delta3", m.delta3},
  };
  std::string s;
  for (const auto& [name, v] : rows) s += std::string(name) + " " + fixed(v, decimals) + "\n";
  return s;
}

std::string format_loss_csv(const std::vector<ObjectiveValue>& curve) {
  std::string s = "iter,total,pe,sm,sv,sa,sa_m\n";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const ObjectiveValue& v = curve[i];
    s += std::to_string(i);
    for (double x : {v.total, v.pe, v.sm, v.sv, v.sa, v.sa_m}) s += "," + format_double(x);
    s += "\n";
  }
  return s;
}

double masked_psnr(const ImageGrid& a, const ImageGrid& b, const ValidityMask& mask) {
  require_same_shape(a, b, "masked_psnr");
  require_same_extent(a, mask, "masked_psnr");
  std::vector<double> se;
  for (Eigen::Index p = 0; p < a.pixels(); ++p) {
    if (!mask.data()[p]) continue;
    for (int c = 0; c < a.channels(); ++c) {
      const double d = a.data()[p * a.channels() + c] - b.data()[p * a.channels() + c];
      se.push_back(d * d);
    }
  }
  if (se.empty()) throw std::invalid_argument("masked_psnr: empty mask");
  const double mse = pairwise_sum(se) / se.size();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

Bundle synthesize_bundle(const RunConfig& cfg) {
  const Scene scene = generate_scene(cfg.seed, cfg.scene());
  return make_triplet(scene, make_trajectory(cfg.trajectory()), cfg.intrinsics(), cfg.height,
                      cfg.width);
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const Bundle b = synthesize_bundle(cfg);
  write_bundle(cfg.out_dir, b);
  out << "wrote 5-frame bundle (" << b.width << "x" << b.height << ") to " << cfg.out_dir << "\n";
  return kExitOk;
}

int cmd_gradcheck(const RunConfig& cfg, bool inject_sign_flip, std::ostream& out) {
  GradcheckOptions options;
  options.samples = cfg.gradcheck_samples;
  options.seed = cfg.seed;
  options.inject_sign_flip = inject_sign_flip;
  const std::vector<GradcheckRow> rows = run_gradcheck_suite(options);
  out << format_gradcheck_table(rows);
  int failed = 0;
  for (const GradcheckRow& r : rows) failed += r.passed ? 0 : 1;
  out << rows.size() << " ops checked, " << failed << " failed\n";
  return failed ? kExitNumeric : kExitOk;
}

int cmd_optimize(const RunConfig& cfg, const std::optional<std::filesystem::path>& bundle_dir,
                 std::ostream& out) {
  const Bundle bundle = bundle_dir ? read_bundle(*bundle_dir) : synthesize_bundle(cfg);
  const Problem problem = make_problem(bundle, cfg.aug_seed, cfg.augmentation());
  const auto [a, b] = depth_coefficients(cfg.min_depth, cfg.max_depth);
  const OptimConfig ocfg = cfg.optim();
  const OptimResult result =
      optimize(problem, constant_init(problem, cfg.init_depth, cfg.init_multi_depth, a, b), ocfg);

  const ImageGrid depth = decode_depth(result.params.targets[1].single);
  const ImageGrid& gt = problem.target_depths[1];
  const ValidityMask all = full_mask(gt.height(), gt.width());
  const ImageGrid scaled = median_scale(depth, gt, all);
  const DepthMetrics metrics = depth_metrics(scaled, gt, cfg.eval());

  const std::filesystem::path dir = cfg.out_dir;
  make_output_dir(dir);
  write_pfm(dir / "depth.pfm", depth);
  write_pfm(dir / "abs_rel.pfm", abs_rel_map(scaled, gt, cfg.eval()));
  write_text(dir / "loss.csv", format_loss_csv(result.curve));

  const bool diverged = result.status == OptimStatus::kDiverged;
  const ObjectiveValue& first = result.curve.front();
  const ObjectiveValue& last = result.curve.back();
  std::string report;
  report += std::string("status ") + (diverged ? "diverged" : "completed") + "\n";
  report += "iterations " + std::to_string(result.curve.size() - 1) + "\n";
  report += "initial_total " + format_double(first.total) + "\n";
  report += "final_total " + format_double(last.total) + "\n";
  report += "initial_sv " + format_double(first.sv) + "\n";
  report += "final_sv " + format_double(last.sv) + "\n";
  report += "median_scaled_center_target\n";
  report += format_metrics(metrics, 6);
  write_text(dir / "metrics.txt", report);
  out << report;
  return diverged && cfg.strict ? kExitNumeric : kExitOk;
}

int cmd_eval(const std::filesystem::path& pred_path, const std::filesystem::path& gt_path,
             const EvalFlags& flags, std::ostream& out) {
  const ImageGrid pred = read_pfm(pred_path);
  const ImageGrid gt = read_pfm(gt_path);
  if (pred.channels() != 1 || gt.channels() != 1) {
    throw std::invalid_argument("eval: depth maps must have one channel");
  }
  require_same_shape(pred, gt, "eval");
  const ValidityMask mask = positive_mask(gt);
  const ImageGrid p = flags.median_scale ? median_scale(pred, gt, mask) : pred;
  out << format_metrics(depth_metrics(p, gt, {flags.min_depth, flags.cap}, &mask));
  return kExitOk;
}

int cmd_fuse_demo(const RunConfig& cfg, std::ostream& out) {
  const Scene scene = generate_scene(cfg.seed, cfg.scene());
  const Bundle b = make_triplet(scene, make_trajectory(cfg.trajectory()), cfg.intrinsics(),
                                cfg.height, cfg.width);
  const std::filesystem::path dir = cfg.out_dir;
  make_output_dir(dir);
  std::ostringstream r;
  r << "interpolation  psnr_db_covisible\n";
  for (const InterpolationTruth& it : b.interpolations) {
    const ImageGrid mid = synthesize_intermediate(b.images[it.prev], b.images[it.next], it.to_prev,
                                                  it.to_next, it.merge);
    const std::string tag = std::to_string(it.mid);
    write_ppm(dir / ("interp_" + tag + ".ppm"), mid);
    write_ppm(dir / ("gt_" + tag + ".ppm"), b.images[it.mid]);
    r << it.prev << "," << it.mid << "," << it.next << "  "
      << psnr_text(masked_psnr(mid, b.images[it.mid], it.covisible)) << "\n";
  }
  r << fusion_report(scene, b, cfg);
  write_text(dir / "fuse_report.txt", r.str());
  out << r.str();
  return kExitOk;
}

int cmd_augcheck(const RunConfig& cfg, const AugcheckFlags& flags, std::ostream& out) {
  const AffineSuiteReport suite = run_affine_suite(cfg.seed);
  const bool ok = suite.passed();
  out << "affine consistency suite: " << suite.cases << " cases\n";
  out << "  max pixel rel error " << format_double(suite.max_pixel_rel_error) << "\n";
  out << "  max depth rel error " << format_double(suite.max_depth_rel_error) << "\n";
  out << "  identity |R_c - I|_inf " << format_double(suite.identity_error) << "\n";
  out << "  centered f_s=2 error " << format_double(suite.centered_error) << "\n";
  out << "  " << (ok ? "PASS" : "FAIL") << "\n";

  AffineParams p = AffineParams::identity(cfg.height, cfg.width);
  p.scale = flags.scale;
  p.theta = flags.theta_deg * M_PI / 180.0;
  if (flags.crop_x) p.crop_center.x() = *flags.crop_x;
  if (flags.crop_y) p.crop_center.y() = *flags.crop_y;
  p.validate();
  out << "R_c for f_s=" << format_double(p.scale) << " theta_deg=" << format_double(flags.theta_deg)
      << " crop=(" << format_double(p.crop_center.x()) << ", " << format_double(p.crop_center.y())
      << ")\n";
  out << format_matrix(rectification_matrix(cfg.intrinsics(), p).matrix);
  return ok ? kExitOk : kExitNumeric;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"vifi: synthetic self-supervised depth and frame interpolation experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  int jobs = 1;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value config file");
    sub->add_option("--set", sets, "override one key, e.g. --set seed=3")->allow_extra_args(false);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--jobs", jobs, "worker threads for per-pixel loops")->check(CLI::PositiveNumber);
  };

  CLI::App* synth = app.add_subcommand("synth", "render a 5-frame bundle");
  common(synth);

  CLI::App* grad = app.add_subcommand("gradcheck", "compare analytic gradients with finite differences");
  common(grad);
  bool inject = false;
  grad->add_flag("--inject-sign-flip", inject)->group("");

  CLI::App* opt = app.add_subcommand("optimize", "fit depth grids to a bundle");
  common(opt);
  std::string bundle_dir;
  opt->add_option("--bundle", bundle_dir, "bundle directory written by synth");

  CLI::App* eval = app.add_subcommand("eval", "depth metrics of a prediction against ground truth");
  std::string pred_path, gt_path;
  EvalFlags eval_flags;
  eval->add_option("pred", pred_path, "predicted depth (PFM)")->required();
  eval->add_option("gt", gt_path, "ground-truth depth (PFM)")->required();
  eval->add_flag("--median-scale", eval_flags.median_scale, "scale by median(gt)/median(pred)");
  eval->add_option("--cap", eval_flags.cap, "depth cap in meters")->capture_default_str();
  eval->add_option("--min-depth", eval_flags.min_depth, "minimum depth in meters")->capture_default_str();

  CLI::App* fuse = app.add_subcommand("fuse-demo", "interpolate middle frames and fuse features");
  common(fuse);

  CLI::App* aug = app.add_subcommand("augcheck", "affine consistency suite and R_c");
  common(aug);
  AugcheckFlags aug_flags;
  double crop_x = 0.0, crop_y = 0.0;
  aug->add_option("--scale", aug_flags.scale, "resize factor f_s")->capture_default_str();
  aug->add_option("--theta-deg", aug_flags.theta_deg, "rotation in degrees")->capture_default_str();
  CLI::Option* cx = aug->add_option("--crop-x", crop_x, "crop center x (default image center)");
  CLI::Option* cy = aug->add_option("--crop-y", crop_y, "crop center y (default image center)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    set_jobs(jobs);
    if (eval->parsed()) {
      if (!(eval_flags.min_depth > 0.0 && eval_flags.cap > eval_flags.min_depth)) {
        throw ConfigError("need 0 < --min-depth < --cap");
      }
      return cmd_eval(pred_path, gt_path, eval_flags, out);
    }
    const RunConfig cfg = resolve_config(config_path, sets, out_dir);
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (grad->parsed()) return cmd_gradcheck(cfg, inject, out);
    if (opt->parsed()) {
      std::optional<std::filesystem::path> dir;
      if (!bundle_dir.empty()) dir = bundle_dir;
      return cmd_optimize(cfg, dir, out);
    }
    if (fuse->parsed()) return cmd_fuse_demo(cfg, out);
    if (cx->count()) aug_flags.crop_x = crop_x;
    if (cy->count()) aug_flags.crop_y = crop_y;
    return cmd_augcheck(cfg, aug_flags, out);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace vifi
