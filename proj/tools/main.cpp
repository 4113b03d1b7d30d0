#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "detbench/attacks.hpp"
#include "detbench/bench.hpp"
#include "detbench/dataset.hpp"
#include "detbench/errors.hpp"
#include "detbench/metrics.hpp"
#include "detbench/parallel.hpp"
#include "detbench/passive.hpp"
#include "detbench/perturb.hpp"
#include "detbench/serialize.hpp"
#include "detbench/smoothing.hpp"
#include "detbench/wmcodec.hpp"

namespace fs = std::filesystem;
using namespace detbench;

namespace {

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kScenarioFailures = 3 };

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  std::size_t workers = 1;
  std::string format = "csv";
};

Json config_or(const Globals& g, Json fallback) {
  return g.config.empty() ? fallback : read_json_file(g.config);
}

fs::path out_dir(const Globals& g) {
  fs::path dir = g.out.empty() ? fs::path(".") : fs::path(g.out);
  fs::create_directories(dir);
  return dir;
}

void write_image(const ImageTensor& img, const fs::path& path) {
  if (path.extension() == ".idbf") save_image_raw(img, path);
  else save_image(img, path);
}

DatasetSpec dataset_spec(const Globals& g, std::optional<std::size_t> n_images) {
  DatasetSpec spec = g.config.empty() ? DatasetSpec{} : dataset_spec_from_json(read_json_file(g.config));
  if (n_images) spec.n_images = *n_images;
  spec.seed = g.seed;
  spec.validate();
  return spec;
}

// A watermark detector file carries "w_t"; a passive model carries "weights".
struct LoadedDetector {
  std::optional<WatermarkDetectorConfig> watermark;
  std::optional<PassiveModel> passive;
};

LoadedDetector load_detector(const std::string& path) {
  const Json j = read_json_file(path);
  LoadedDetector d;
  if (j.contains("weights")) d.passive = passive_model_from_json(j);
  else d.watermark = detector_config_from_json(j);
  return d;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ------------------------------------------------------------------ commands

int cmd_gen_data(const Globals& g, std::optional<std::size_t> n_images) {
  const DatasetSpec spec = dataset_spec(g, n_images);
  const Dataset data = build_dataset(spec, g.workers);
  const fs::path dir = out_dir(g);
  write_dataset(data, dir);
  Json split = {{"train", Json::array()}, {"test", Json::array()}};
  for (const auto& item : data.train) split["train"].push_back(item.index);
  for (const auto& item : data.test) split["test"].push_back(item.index);
  write_json_file({{"spec", to_json(spec)}, {"split", split}}, dir / "dataset.json");
  std::cout << "wrote " << data.train.size() + data.test.size() << " images to " << dir.string() << "\n";
  return kOk;
}

struct TrainArgs {
  std::optional<std::size_t> n_images;
  std::string features = "frequency";
  double l2 = 1e-2;
  bool perturbations = false;
  std::size_t epochs = 4;
};

int cmd_train_passive(const Globals& g, const TrainArgs& a) {
  const Dataset data = build_dataset(dataset_spec(g, a.n_images), g.workers);
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  for (const auto& item : data.train) {
    images.push_back(item.image.tensor());
    labels.push_back(item.label);
  }
  PerturbationTraining cfg;
  cfg.kind = feature_kind_from_string(a.features);
  cfg.train.l2_penalty = a.l2;
  cfg.epochs = a.epochs;
  cfg.workers = g.workers;
  if (a.perturbations) cfg.ranges = SeenPerturbationRanges::defaults();
  const PassiveModel model = train_with_perturbations(images, labels, cfg, RngStream::derive(g.seed, {"train"}));

  std::vector<int> verdicts(data.test.size()), truth;
  parallel_for(data.test.size(), g.workers,
               [&](std::size_t i) { verdicts[i] = model.predict(data.test[i].image.tensor()); });
  for (const auto& item : data.test) truth.push_back(item.label);
  const ConfusionStats stats = confusion(verdicts, truth);
  const fs::path path = out_dir(g) / "model.json";
  write_json_file(to_json(model), path);
  std::cout << "test acc " << fmt(stats.acc.value_or(0.0)) << ", model written to " << path.string() << "\n";
  return kOk;
}

int cmd_tune_codec(const Globals& g, std::optional<std::size_t> n_images, std::size_t tune_images, double fpr) {
  const Dataset data = build_dataset(dataset_spec(g, n_images), g.workers);
  std::vector<ImageTensor> images;
  for (const auto& item : data.train)
    if (item.label == 1 && images.size() < tune_images) images.push_back(item.image.tensor());
  TuneOptions opts;
  opts.workers = g.workers;
  const TuneResult result = tune_robustness(CodecParams{}, SeenPerturbationRanges::defaults(), images, opts,
                                            RngStream::derive(g.seed, {"tune"}));
  RngStream rng = RngStream::derive(g.seed, {"w_t"});
  const auto cfg = WatermarkDetectorConfig::make(result.params, BitString::random(result.params.n_bits, rng), fpr);
  const fs::path dir = out_dir(g);
  write_json_file(to_json(result), dir / "tune.json");
  write_json_file(to_json(cfg), dir / "detector.json");
  std::cout << "strength " << fmt(result.params.strength) << ", chips " << result.params.chips_per_bit << ", tau "
            << cfg.tau_matches << "/" << result.params.n_bits << "\n";
  return kOk;
}

int cmd_calibrate(std::size_t n_bits, double fpr) {
  const std::size_t tau = calibrate_tau(n_bits, fpr);
  const Json j = {{"n_bits", n_bits},
                  {"fpr_target", fpr},
                  {"tau", tau},
                  {"tail_at_tau", binomial_tail(n_bits, tau)},
                  {"tail_below_tau", tau > 0 ? binomial_tail(n_bits, tau - 1) : 1.0}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_embed(const std::string& detector, const std::string& in, const std::string& out) {
  const LoadedDetector d = load_detector(detector);
  if (!d.watermark) throw ConfigError(detector + ": not a watermark detector");
  const WatermarkCodec codec(d.watermark->params);
  const ImageTensor x = load_image(in);
  const ImageTensor y = codec.embed(x, d.watermark->w_t);
  write_image(y, out);
  std::cout << "psnr " << fmt(psnr_capped(y, x)) << "\n";
  return kOk;
}

int cmd_detect(const Globals& g, const std::string& detector, bool smoothed, const std::vector<std::string>& inputs) {
  const LoadedDetector d = load_detector(detector);
  SmoothingConfig sm;
  if (smoothed) {
    if (!d.watermark) throw ConfigError("smoothing needs a watermark detector");
    const Json c = config_or(g, Json::object());
    if (c.contains("smoothing")) sm = smoothing_from_json(c["smoothing"]);
  }
  const bool json = report_format_from_string(g.format) == ReportFormat::Json;
  Json rows = Json::array();
  if (!json) std::cout << "path,label,statistic\n";
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ImageTensor x = load_image(inputs[i]);
    int label = 0;
    double stat = 0.0;
    if (d.passive) {
      stat = d.passive->predict_proba(x);
      label = d.passive->predict(x);
    } else if (smoothed) {
      const DetectionVerdict v = smoothed_detect(x, *d.watermark, sm, i);
      label = v.label;
      stat = v.statistic;
    } else {
      const DetectionVerdict v = detect(x, *d.watermark);
      label = v.label;
      stat = v.statistic;
    }
    if (json) rows.push_back({{"path", inputs[i]}, {"label", label}, {"statistic", stat}});
    else std::cout << inputs[i] << "," << label << "," << fmt(stat) << "\n";
  }
  if (json) std::cout << rows.dump(2) << "\n";
  return kOk;
}

int cmd_perturb(const Globals& g, const std::string& kind, double param, const std::string& in,
                const std::string& out) {
  PerturbationSpec spec;
  try {
    spec = {perturbation_from_string(kind), param};
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  RngStream rng = RngStream::derive(g.seed, {"perturb"});
  const ImageTensor x = load_image(in);
  const ImageTensor y = apply_perturbation(spec, x, rng);
  write_image(y, out);
  std::cout << "psnr " << fmt(psnr_capped(y, x)) << "\n";
  return kOk;
}

struct AttackArgs {
  std::string detector;
  std::string kind = "pgd";
  std::string mode = "removal";
  double linf = 0.01;
  std::size_t steps = 40;
  std::size_t queries = 10000;
  std::string init;
  bool smoothed = false;
  std::string in;
  std::string out;
};

int cmd_attack(const Globals& g, const AttackArgs& a) {
  const LoadedDetector d = load_detector(a.detector);
  AttackConfig cfg;
  cfg.mode = attack_mode_from_string(a.mode);
  cfg.kind = attack_kind_from_string(a.kind);
  cfg.linf_budget = a.linf;
  cfg.steps = a.steps;
  cfg.query_budget = a.queries;
  cfg.seed = g.seed;
  cfg.validate();

  std::unique_ptr<TargetHandle> target;
  if (d.passive) {
    target = std::make_unique<PassiveTarget>(*d.passive, cfg.mode);
  } else if (a.smoothed) {
    SmoothingConfig sm;
    const Json c = config_or(g, Json::object());
    if (c.contains("smoothing")) sm = smoothing_from_json(c["smoothing"]);
    target = std::make_unique<SmoothedTarget>(*d.watermark, sm, 0, cfg.mode);
  } else {
    target = std::make_unique<WatermarkTarget>(*d.watermark, cfg.mode);
  }

  const ImageTensor x = load_image(a.in);
  AttackResult r;
  if (cfg.kind == AttackKind::Pgd) {
    r = pgd_attack(*target, x, cfg);
  } else if (cfg.kind == AttackKind::Square) {
    r = square_attack(*target, x, cfg);
  } else {
    ImageTensor init;
    if (!a.init.empty()) init = load_image(a.init);
    else if (cfg.mode == AttackMode::Removal)
      init = make_removal_init(*target, x, {}, RngStream::derive(g.seed, {"attack", "init"}));
    else if (d.watermark) init = make_forgery_init(x, *d.watermark);
    else throw ConfigError("forgery against a passive detector needs --init");
    r = hopskipjump_attack(*target, x, init, cfg);
  }
  write_image(r.adversarial_image, a.out);
  const Json j = {{"success", r.success},
                  {"original_decision", r.original_decision},
                  {"final_decision", r.final_decision},
                  {"queries", r.queries_used},
                  {"linf", r.delta_linf},
                  {"l2", r.delta_l2},
                  {"psnr", psnr_capped(r.adversarial_image, x)},
                  {"ssim", ssim(r.adversarial_image, x)}};
  std::cout << j.dump(2) << "\n";
  return kOk;
}

int cmd_bench(const Globals& g, bool timings, bool dump_verdicts) {
  const ReportFormat format = report_format_from_string(g.format);
  BenchOptions opts;
  opts.seed = g.seed;
  opts.workers = g.workers;
  opts.timings = timings;
  opts.dump_verdicts = dump_verdicts;
  const BenchReport report = run_benchmark(config_or(g, default_bench_config()), opts);
  const fs::path path = out_dir(g) / (format == ReportFormat::Csv ? "report.csv" : "report.json");
  write_report(report, format, path);
  std::cout << report.rows.size() << " rows written to " << path.string() << "\n";
  for (const auto& f : report.failures) std::cerr << "scenario " << f.scenario << " failed: " << f.message << "\n";
  return report.failures.empty() ? kOk : kScenarioFailures;
}

int cmd_report(const Globals& g, const std::string& in) {
  const ReportFormat format = report_format_from_string(g.format);
  const BenchReport report = report_from_json(read_json_file(in));
  if (g.out.empty()) {
    if (format == ReportFormat::Csv) write_report_csv(report, std::cout);
    else std::cout << to_json(report).dump(2) << "\n";
  } else {
    const fs::path path = out_dir(g) / (format == ReportFormat::Csv ? "report.csv" : "report.json");
    write_report(report, format, path);
  }
  return report.failures.empty() ? kOk : kScenarioFailures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"detbench: robustness benchmark for AI-generated image detectors"};
  app.set_version_flag("--version", std::string(toolkit_version()));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--config", g.config, "JSON configuration");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "report format")->check(CLI::IsMember({"csv", "json"}));

  std::optional<std::size_t> n_images;
  auto* gen = app.add_subcommand("gen-data", "synthesize a labeled dataset (config: dataset spec)");
  gen->add_option("--images", n_images, "number of images");

  TrainArgs train;
  auto* tp = app.add_subcommand("train-passive", "train a passive logistic detector (config: dataset spec)");
  tp->add_option("--images", train.n_images, "number of images");
  tp->add_option("--features", train.features)->check(CLI::IsMember({"frequency", "spatial"}));
  tp->add_option("--l2", train.l2, "l2 penalty");
  tp->add_flag("--perturbation-training", train.perturbations, "train on seen perturbations");
  tp->add_option("--epochs", train.epochs);

  std::size_t tune_images = 24;
  double fpr = 1e-4;
  auto* tc = app.add_subcommand("tune-codec", "tune watermark strength and write a detector (config: dataset spec)");
  tc->add_option("--images", n_images, "number of images");
  tc->add_option("--tune-images", tune_images, "AI images used for tuning");
  tc->add_option("--fpr", fpr, "false positive target");

  std::size_t n_bits = 32;
  auto* cal = app.add_subcommand("calibrate", "minimal match threshold for an FPR target");
  cal->add_option("--bits", n_bits);
  cal->add_option("--fpr", fpr);

  std::string detector, in, out;
  auto* emb = app.add_subcommand("embed", "watermark an image");
  emb->add_option("--detector", detector)->required();
  emb->add_option("input", in)->required();
  emb->add_option("output", out)->required();

  bool smoothed = false;
  std::vector<std::string> inputs;
  auto* det = app.add_subcommand("detect", "classify images (config: smoothing section)");
  det->add_option("--detector", detector)->required();
  det->add_flag("--smoothed", smoothed, "median-smoothed watermark detector");
  det->add_option("inputs", inputs)->required();

  std::string kind;
  double param = 0.0;
  auto* per = app.add_subcommand("perturb", "apply one common perturbation");
  per->add_option("--kind", kind)->required();
  per->add_option("--param", param)->required();
  per->add_option("input", in)->required();
  per->add_option("output", out)->required();

  AttackArgs atk;
  auto* att = app.add_subcommand("attack", "run one attack against a detector");
  att->add_option("--detector", atk.detector)->required();
  att->add_option("--kind", atk.kind)->check(CLI::IsMember({"pgd", "hsj", "hopskipjump", "square"}));
  att->add_option("--mode", atk.mode)->check(CLI::IsMember({"removal", "forgery"}));
  att->add_option("--linf", atk.linf, "l-infinity budget");
  att->add_option("--steps", atk.steps);
  att->add_option("--queries", atk.queries, "query budget");
  att->add_option("--init", atk.init, "starting point for hsj");
  att->add_flag("--smoothed", atk.smoothed);
  att->add_option("input", atk.in)->required();
  att->add_option("output", atk.out)->required();

  bool timings = false, dump_verdicts = false;
  auto* bench = app.add_subcommand("bench", "run the scenario grid (config: run config, default built in)");
  bench->add_flag("--timings", timings, "record wall_ms");
  bench->add_flag("--dump-verdicts", dump_verdicts, "keep per-image verdicts (json)");

  std::string report_in;
  auto* rep = app.add_subcommand("report", "convert a JSON report");
  rep->add_option("report", report_in)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) return cmd_gen_data(g, n_images);
    if (*tp) return cmd_train_passive(g, train);
    if (*tc) return cmd_tune_codec(g, n_images, tune_images, fpr);
    if (*cal) return cmd_calibrate(n_bits, fpr);
    if (*emb) return cmd_embed(detector, in, out);
    if (*det) return cmd_detect(g, detector, smoothed, inputs);
    if (*per) return cmd_perturb(g, kind, param, in, out);
    if (*att) return cmd_attack(g, atk);
    if (*bench) return cmd_bench(g, timings, dump_verdicts);
    if (*rep) return cmd_report(g, report_in);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfig;
  }
  return kUsage;
}
