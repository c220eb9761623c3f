#include "commands.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vcr/caa.hpp"
#include "vcr/colorspace.hpp"
#include "vcr/image_io.hpp"
#include "vcr/iqa.hpp"
#include "vcr/losses.hpp"
#include "vcr/pipeline.hpp"
#include "vcr/selfcheck.hpp"
#include "vcr/tensor_io.hpp"

namespace vcr::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;
constexpr std::uint64_t kWeightSeedSalt = 0x9e3779b97f4a7c15ULL;

struct RunConfig {
  HviParams hvi;
  CaaConfig caa;
  LossWeights loss;
  double tau = 1.0;
  std::uint64_t seed = kDefaultSeed;
  std::size_t channels = 8;
  std::optional<double> dynamic_range;
  std::size_t jobs = 1;

  // Paths
  std::string input, output, gt, weights, save_weights, manifest, model, brisque_coeffs;
  std::vector<std::string> inputs;
  std::size_t patch_size = kNiqePatchSize;
  int bit_depth = 16;
  bool header = false;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("vcr", sink);
  logger->set_pattern("[%l] %v");
  logger->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("VCR_LOG")) {
    logger->set_level(spdlog::level::from_str(env));
  }
  return logger;
}

std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void add_hvi_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--k", rc.hvi.k, "Intensity collapse density k (> 0)")->capture_default_str();
  cmd->add_option("--eps", rc.hvi.eps, "Collapse stability constant")->capture_default_str();
  cmd->add_option("--alpha-s", rc.hvi.alpha_s, "Saturation scale on inversion")->capture_default_str();
  cmd->add_option("--alpha-i", rc.hvi.alpha_i, "Intensity scale on inversion")->capture_default_str();
}

void add_caa_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--mask-ratio", rc.caa.mask_ratio, "Fraction of upper-triangle entries masked")
      ->capture_default_str();
  cmd->add_option("--layers", rc.caa.num_layers, "Stacked CAA layers")->capture_default_str();
  cmd->add_option("--tce-kernel", rc.caa.tce_kernel, "Odd TCE convolution size")->capture_default_str();
  cmd->add_option("--fusion-strength", rc.caa.fusion_strength, "Gate strength in [0,1]")
      ->capture_default_str();
  cmd->add_option("--channels", rc.channels, "Feature channels produced by the stem")->capture_default_str();
  cmd->add_option("--seed,--random-seed", rc.seed, "Seed for stem and random weights")->capture_default_str();
}

RgbImage load_rgb(const std::string& path) { return read_image(path).rgb; }

void print_plane_summary(std::ostream& out, const HviImage& hvi) {
  const char* names[3] = {"Hhat", "Vhat", "Imax"};
  for (std::size_t c = 0; c < 3; ++c) {
    const auto plane = hvi.plane(c);
    const auto [lo, hi] = std::minmax_element(plane.begin(), plane.end());
    out << names[c] << "\tmin=" << fmt_num(*lo) << "\tmax=" << fmt_num(*hi) << '\n';
  }
}

int cmd_hvi_convert(const RunConfig& rc, std::ostream& out) {
  rc.hvi.validate();
  const RgbImage img = load_rgb(rc.input);
  const HviImage hvi = rgb_to_hvi(img, rc.hvi);
  save_hvi(rc.output, hvi, rc.hvi);
  out << "wrote " << rc.output << " (" << hvi.height() << "x" << hvi.width() << ")\n";
  print_plane_summary(out, hvi);
  return kOk;
}

int cmd_hvi_invert(const RunConfig& rc, const CLI::App& cmd, std::ostream& out) {
  HviParams stored;
  const HviImage hvi = load_hvi(rc.input, stored);
  HviParams p = stored;
  if (cmd.count("--alpha-s")) p.alpha_s = rc.hvi.alpha_s;
  if (cmd.count("--alpha-i")) p.alpha_i = rc.hvi.alpha_i;
  p.validate();
  const RgbImage rgb = hvi_to_rgb(hvi, p);
  write_image(rc.output, rgb, rc.bit_depth);
  out << "wrote " << rc.output << " (alpha_s=" << fmt_num(p.alpha_s) << ", alpha_i=" << fmt_num(p.alpha_i)
      << ")\n";
  return kOk;
}

void write_grid(const fs::path& path, const Tensor& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  for (std::size_t i = 0; i < m.extent(0); ++i) {
    for (std::size_t j = 0; j < m.extent(1); ++j) {
      if (j) os << ' ';
      os << fmt_num(m(i, j));
    }
    os << '\n';
  }
}

int cmd_caa_demo(RunConfig rc, const CLI::App& cmd, std::ostream& out, spdlog::logger& log) {
  CaaWeights weights;
  if (!rc.weights.empty()) {
    CaaConfig bundle_cfg;
    weights = load_weight_bundle(rc.weights, bundle_cfg);
    if (cmd.count("--layers") && rc.caa.num_layers != bundle_cfg.num_layers) {
      throw ShapeError("--layers " + std::to_string(rc.caa.num_layers) + " does not match the bundle's " +
                       std::to_string(bundle_cfg.num_layers));
    }
    if (cmd.count("--tce-kernel") && rc.caa.tce_kernel != bundle_cfg.tce_kernel) {
      throw ShapeError("--tce-kernel " + std::to_string(rc.caa.tce_kernel) + " does not match the bundle's " +
                       std::to_string(bundle_cfg.tce_kernel));
    }
    if (cmd.count("--mask-ratio")) bundle_cfg.mask_ratio = rc.caa.mask_ratio;
    if (cmd.count("--fusion-strength")) bundle_cfg.fusion_strength = rc.caa.fusion_strength;
    rc.caa = bundle_cfg;
    log.info("loaded weight bundle {}", rc.weights);
  } else {
    rc.caa.validate();
    weights = CaaWeights::random(rc.caa, rc.seed ^ kWeightSeedSalt);
  }
  rc.caa.validate();
  if (!rc.save_weights.empty()) save_weight_bundle(rc.save_weights, rc.caa, weights);

  rc.hvi.validate();
  const HviImage hvi = rgb_to_hvi(load_rgb(rc.input), rc.hvi);
  const auto [f_i, f_hv] = lift_features(hvi, FeatureStem::random(rc.channels, rc.seed));
  const CaaOutput res = caa_forward(f_i, f_hv, rc.caa, weights);

  const fs::path dir(rc.output);
  fs::create_directories(dir);
  save_tensor(dir / "input_f_i.vcrt", f_i);
  save_tensor(dir / "input_f_hv.vcrt", f_hv);
  save_tensor(dir / "f_i.vcrt", res.f_i);
  save_tensor(dir / "f_hv.vcrt", res.f_hv);

  const std::size_t expected = mask_count(rc.channels, rc.caa.mask_ratio);
  for (const CovReport& r : res.reports) {
    const std::string stem = "layer" + std::to_string(r.layer);
    write_grid(dir / (stem + ".cov.txt"), r.cov);
    write_grid(dir / (stem + ".mask.txt"), r.mask);
    std::size_t popcount = 0;
    for (double v : r.mask.values()) popcount += v != 0.0;
    out << stem << "\tmask_popcount=" << popcount << "\texpected=" << expected << '\n';
  }
  out << "vcf_loss=" << fmt_num(vcf_loss(res.reports).value) << '\n';
  out << "outputs=" << dir.string() << '\n';
  return kOk;
}

int cmd_loss_eval(const RunConfig& rc, std::ostream& out) {
  rc.hvi.validate();
  rc.caa.validate();
  rc.loss.validate();
  const RgbImage pred = load_rgb(rc.input);
  const RgbImage gt = load_rgb(rc.gt);
  if (pred.planes().shape() != gt.planes().shape()) {
    throw ShapeError("pred " + shape_string(pred.planes().shape()) + " and gt " +
                     shape_string(gt.planes().shape()) + " differ in size");
  }
  const HviImage pred_hvi = rgb_to_hvi(pred, rc.hvi);
  const HviImage gt_hvi = rgb_to_hvi(gt, rc.hvi);
  const RecLoss rec = rec_loss(pred, gt, pred_hvi, gt_hvi, rc.loss.lambda_hvi);

  // Channel filtering runs on the feature residual between prediction and
  // reference.
  const FeatureStem stem = FeatureStem::random(rc.channels, rc.seed);
  const auto [pi, phv] = lift_features(pred_hvi, stem);
  const auto [gi, ghv] = lift_features(gt_hvi, stem);
  const CaaOutput caa = caa_forward(axpby(1.0, pi, -1.0, gi), axpby(1.0, phv, -1.0, ghv), rc.caa,
                                    CaaWeights::random(rc.caa, rc.seed ^ kWeightSeedSalt));
  const double vcf = vcf_loss(caa.reports).value;

  const IdentityEnhancer enhancer;
  const Tensor pred_chroma = enhancer.enhance(pred_hvi.planes(), chroma_planes(pred_hvi)).second;
  const double cda = cda_loss(pred_chroma, chroma_planes(gt_hvi), rc.tau).value;

  const LossBundle bundle = make_loss_bundle(rec.value, vcf, cda, rc.loss);
  out << format_loss_record(bundle, rc.loss, rc.tau);
  return kOk;
}

struct MetricPair {
  std::string pred, gt;
};

std::vector<MetricPair> read_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path);
  std::vector<MetricPair> pairs;
  std::string line;
  int lineno = 0;
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).string(); };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected 'pred<TAB>gt'");
    }
    pairs.push_back({resolve(line.substr(0, tab)), resolve(line.substr(tab + 1))});
  }
  return pairs;
}

std::string metric_row(const MetricPair& pair, const RunConfig& rc, const std::optional<NiqeModel>& model,
                       const std::optional<BrisqueLinearModel>& brisque_model) {
  const LoadedImage pred = read_image(pair.pred);
  const LoadedImage gt = read_image(pair.gt);
  if (pred.rgb.planes().shape() != gt.rgb.planes().shape()) {
    throw ShapeError(pair.pred + " and " + pair.gt + " differ in size: " + shape_string(pred.rgb.planes().shape()) +
                     " vs " + shape_string(gt.rgb.planes().shape()));
  }
  double range = 1.0;
  if (rc.dynamic_range) {
    range = *rc.dynamic_range;
  } else if (pred.bit_depth == 8) {
    range = 255.0;
  } else if (pred.bit_depth == 16) {
    range = 65535.0;
  }
  const Tensor pred_y = luminance(pred.rgb);
  const double p = psnr(pred.rgb, gt.rgb, range);
  const double s = ssim(scale(pred_y, range), scale(luminance(gt.rgb), range), SsimParams::for_range(range));
  const double n = model ? niqe(pred_y, *model) : std::numeric_limits<double>::quiet_NaN();
  const auto feats = brisque_features(pred_y);

  std::string row = pair.pred + "\t" + fmt_num(p) + "\t" + fmt_num(s) + "\t" + fmt_num(n);
  for (double f : feats) row += "\t" + fmt_num(f);
  if (brisque_model) row += "\t" + fmt_num(brisque_score(feats, *brisque_model));
  return row;
}

int cmd_metrics(const RunConfig& rc, std::ostream& out, spdlog::logger& log) {
  if (rc.dynamic_range && !(*rc.dynamic_range > 0.0)) throw ConfigError("--dynamic-range must be positive");
  std::vector<MetricPair> pairs;
  if (!rc.manifest.empty()) {
    pairs = read_manifest(rc.manifest);
  } else {
    if (rc.input.empty() || rc.gt.empty()) throw ValidationError("metrics needs --pred and --gt, or --manifest");
    pairs.push_back({rc.input, rc.gt});
  }
  std::optional<NiqeModel> model;
  if (!rc.model.empty()) {
    model = load_niqe_model(rc.model);
    model->patch_size = rc.patch_size;
  }
  std::optional<BrisqueLinearModel> brisque_model;
  if (!rc.brisque_coeffs.empty()) brisque_model = load_brisque_linear_model(rc.brisque_coeffs);

  std::vector<std::string> rows(pairs.size());
  std::vector<std::exception_ptr> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        rows[i] = metric_row(pairs[i], rc, model, brisque_model);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t jobs = std::clamp<std::size_t>(rc.jobs, 1, std::max<std::size_t>(1, pairs.size()));
  log.debug("evaluating {} pairs on {} workers", pairs.size(), jobs);
  std::vector<std::thread> pool;
  for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  if (rc.header) {
    out << "#path\tpsnr\tssim\tniqe";
    for (std::size_t i = 1; i <= kBrisqueFeatureCount; ++i) out << "\tbrisque_f" << i;
    if (brisque_model) out << "\tbrisque_score";
    out << '\n';
  }
  for (const auto& r : rows) out << r << '\n';
  return kOk;
}

std::vector<fs::path> expand_images(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        const auto ext = e.path().extension().string();
        if (ext == ".png" || ext == ".PNG" || ext == ".pfm" || ext == ".PFM") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  return files;
}

int cmd_niqe_fit(const RunConfig& rc, std::ostream& out) {
  const auto files = expand_images(rc.inputs);
  if (files.empty()) throw ValidationError("niqe-fit needs at least one pristine image");
  std::vector<Tensor> images;
  for (const auto& f : files) images.push_back(luminance(read_image(f).rgb));
  const NiqeModel model = fit_niqe_model(images, rc.patch_size);
  save_niqe_model(rc.output, model);
  out << "fitted NIQE model on " << images.size() << " images, d=" << model.dim() << " -> " << rc.output << '\n';
  return kOk;
}

int cmd_selfcheck(const RunConfig& rc, std::ostream& out) {
  SelfcheckOptions opt;
  opt.seed = rc.seed;
  const auto results = run_selfcheck(opt);
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << format_check(r) << '\n';
    failed += !r.passed;
  }
  out << results.size() - failed << "/" << results.size() << " checks passed\n";
  return failed == 0 ? kOk : kNumeric;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto logger = make_logger(err);
  RunConfig rc;

  CLI::App app{"Variance-driven channel recalibration toolkit: HVI color space, CAA operators, "
               "alignment losses and image-quality metrics"};
  app.require_subcommand(1);

  auto* convert = app.add_subcommand("hvi-convert", "Convert an sRGB image to HVI planes");
  convert->add_option("input", rc.input, "PNG or PFM image")->required();
  convert->add_option("output", rc.output, "Output tensor file (sidecar written to <output>.meta)")->required();
  add_hvi_flags(convert, rc);

  auto* invert = app.add_subcommand("hvi-invert", "Convert HVI planes back to an sRGB image");
  invert->add_option("input", rc.input, "HVI tensor file with its .meta sidecar")->required();
  invert->add_option("output", rc.output, "Output image (.png or .pfm)")->required();
  invert->add_option("--alpha-s", rc.hvi.alpha_s, "Saturation scale");
  invert->add_option("--alpha-i", rc.hvi.alpha_i, "Intensity scale");
  invert->add_option("--bit-depth", rc.bit_depth, "PNG bit depth (8 or 16)")->capture_default_str();

  auto* demo = app.add_subcommand("caa-demo", "Run the channel adaptive adjustment on one image");
  demo->add_option("input", rc.input, "PNG or PFM image")->required();
  demo->add_option("--out-dir", rc.output, "Directory for tensors and per-layer grids")->required();
  demo->add_option("--weights", rc.weights, "Weight bundle directory (random weights from --seed otherwise)");
  demo->add_option("--save-weights", rc.save_weights, "Write the weights used to this bundle directory");
  add_caa_flags(demo, rc);
  add_hvi_flags(demo, rc);

  auto* loss = app.add_subcommand("loss-eval", "Evaluate the training objective on a prediction/reference pair");
  loss->add_option("pred", rc.input, "Predicted image")->required();
  loss->add_option("gt", rc.gt, "Reference image")->required();
  loss->add_option("--tau", rc.tau, "Softmax temperature")->capture_default_str();
  loss->add_option("--lambda-hvi", rc.loss.lambda_hvi, "HVI reconstruction weight")->capture_default_str();
  loss->add_option("--lambda-vcf", rc.loss.lambda_vcf, "Channel filtering loss weight")->capture_default_str();
  loss->add_option("--lambda-cda", rc.loss.lambda_cda, "Distribution alignment loss weight")->capture_default_str();
  loss->add_flag("--warmup", rc.loss.warmup, "Reconstruction loss only");
  add_caa_flags(loss, rc);
  add_hvi_flags(loss, rc);

  auto* metrics = app.add_subcommand("metrics", "PSNR, SSIM, NIQE and BRISQUE features");
  metrics->add_option("--pred", rc.input, "Predicted image");
  metrics->add_option("--gt", rc.gt, "Reference image");
  metrics->add_option("--manifest", rc.manifest, "File of 'pred<TAB>gt' lines ('#' comments)");
  metrics->add_option("--model", rc.model, "NIQE model file (niqe column is nan without it)");
  metrics->add_option("--patch-size", rc.patch_size, "NIQE patch size")->capture_default_str();
  metrics->add_option("--brisque-coeffs", rc.brisque_coeffs, "Linear BRISQUE regressor: bias then 36 weights");
  metrics->add_option("--dynamic-range", rc.dynamic_range, "Peak value L (default from bit depth)");
  metrics->add_option("--jobs", rc.jobs, "Worker threads")->capture_default_str();
  metrics->add_flag("--header", rc.header, "Print a column header line");

  auto* fit = app.add_subcommand("niqe-fit", "Fit a NIQE model from pristine images");
  fit->add_option("images", rc.inputs, "Images or directories of images")->required();
  fit->add_option("--out", rc.output, "Model file to write")->required();
  fit->add_option("--patch-size", rc.patch_size, "Patch size")->capture_default_str();

  auto* check = app.add_subcommand("selfcheck", "Run the numerical invariant suite");
  check->add_option("--seed", rc.seed, "Seed for random fixtures")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (*convert) return cmd_hvi_convert(rc, out);
    if (*invert) return cmd_hvi_invert(rc, *invert, out);
    if (*demo) return cmd_caa_demo(rc, *demo, out, *logger);
    if (*loss) return cmd_loss_eval(rc, out);
    if (*metrics) return cmd_metrics(rc, out, *logger);
    if (*fit) return cmd_niqe_fit(rc, out);
    if (*check) return cmd_selfcheck(rc, out);
  } catch (const IoError& e) {
    logger->error("{}", e.what());
    return kIo;
  } catch (const NumericError& e) {
    logger->error("{}", e.what());
    return kNumeric;
  } catch (const Error& e) {
    logger->error("{}", e.what());
    return kValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    logger->error("{}", e.what());
    return kIo;
  }
  return kValidation;
}

}  // namespace vcr::cli
