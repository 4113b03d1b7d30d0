#include "detbench/bench.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "detbench/errors.hpp"
#include "detbench/metrics.hpp"
#include "detbench/parallel.hpp"

namespace detbench {

std::string_view toolkit_version() noexcept { return DETBENCH_VERSION; }

// ---------------------------------------------------------------- Detectors

WatermarkDetector::WatermarkDetector(WatermarkDetectorConfig cfg) : cfg_(std::move(cfg)), codec_(cfg_.params) {
  cfg_.validate();
}

int WatermarkDetector::verdict(const ImageTensor& img, std::size_t) const { return detect(img, cfg_).label; }

ImageTensor WatermarkDetector::prepare_positive(const ImageTensor& ai) const { return codec_.embed(ai, cfg_.w_t); }

std::unique_ptr<TargetHandle> WatermarkDetector::target(AttackMode mode, const ImageTensor&, std::size_t) const {
  return std::make_unique<WatermarkTarget>(cfg_, mode);
}

SmoothedDetector::SmoothedDetector(WatermarkDetectorConfig cfg, SmoothingConfig sm)
    : cfg_(std::move(cfg)), sm_(sm), codec_(cfg_.params) {
  cfg_.validate();
  sm_.validate();
}

int SmoothedDetector::verdict(const ImageTensor& img, std::size_t image_index) const {
  return smoothed_detect(img, cfg_, sm_, image_index).label;
}

ImageTensor SmoothedDetector::prepare_positive(const ImageTensor& ai) const { return codec_.embed(ai, cfg_.w_t); }

std::unique_ptr<TargetHandle> SmoothedDetector::target(AttackMode mode, const ImageTensor&,
                                                       std::size_t image_index) const {
  return std::make_unique<SmoothedTarget>(cfg_, sm_, image_index, mode);
}

PassiveDetector::PassiveDetector(PassiveModel model) : model_(std::move(model)) { model_.validate(); }

int PassiveDetector::verdict(const ImageTensor& img, std::size_t) const { return model_.predict(img); }

std::unique_ptr<TargetHandle> PassiveDetector::target(AttackMode mode, const ImageTensor&, std::size_t) const {
  return std::make_unique<PassiveTarget>(model_, mode);
}

std::map<PerturbationKind, std::vector<double>> default_grids() {
  return {{PerturbationKind::JpegCompress, {100, 80, 60, 40, 20, 10}},
          {PerturbationKind::GaussianNoise, {0.02, 0.05, 0.1, 0.2}},
          {PerturbationKind::RayleighNoise, {0.02, 0.05, 0.1, 0.2}},
          {PerturbationKind::GaussianBlur, {0.5, 1, 2}},
          {PerturbationKind::Brightness, {-0.2, -0.1, -0.05, 0.05, 0.1, 0.2}},
          {PerturbationKind::Contrast, {0.6, 0.8, 1.2, 1.5}},
          {PerturbationKind::ElasticBlur, {1, 2, 4}}};
}

// ------------------------------------------------------------------ Context

namespace {

const Json& section(const Json& config, const char* name) {
  static const Json empty = Json::object();
  const auto it = config.find(name);
  return it == config.end() ? empty : *it;
}

std::string get_string(const Json& j, const char* key, const std::string& fallback = {}) {
  const auto it = j.find(key);
  if (it == j.end()) {
    if (fallback.empty()) throw ConfigError(std::string("missing key '") + key + "'");
    return fallback;
  }
  if (!it->is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

template <typename T>
T get_number(const Json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number() && !it->is_boolean()) throw ConfigError(std::string("'") + key + "' must be a number");
  return it->get<T>();
}

std::vector<ImageTensor> tensors_of(const std::vector<LabeledImage>& items, int label, std::size_t limit) {
  std::vector<ImageTensor> out;
  for (const auto& item : items)
    if (item.label == label && out.size() < limit) out.push_back(item.image.tensor());
  return out;
}

}  // namespace

BenchContext::BenchContext(Json config, BenchOptions options) : config_(std::move(config)), options_(options) {
  if (!config_.is_object()) throw ConfigError("bench config must be a JSON object");
  if (config_.contains("smoothing")) smoothing_ = smoothing_from_json(config_["smoothing"]);
  grids_ = default_grids();
  for (const auto& [name, values] : section(config_, "grids").items()) {
    PerturbationKind kind;
    try {
      kind = perturbation_from_string(name);
    } catch (const FormatError& e) {
      throw ConfigError(std::string("grids: ") + e.what());
    }
    if (!values.is_array() || values.empty()) throw ConfigError("grids: '" + name + "' must be a non-empty array");
    grids_[kind] = values.get<std::vector<double>>();
  }
  for (const auto& [name, spec] : section(config_, "detectors").items()) {
    if (!spec.is_object()) throw ConfigError("detectors: '" + name + "' must be an object");
    const std::string type = get_string(spec, "type");
    if (type != "watermark" && type != "smoothed" && type != "passive")
      throw ConfigError("detectors: '" + name + "' has unknown type '" + type + "'");
  }
  for (const auto& [name, spec] : section(config_, "datasets").items()) dataset_spec_from_json(spec);
}

const Dataset& BenchContext::dataset(const std::string& name) {
  if (auto it = datasets_.find(name); it != datasets_.end()) return it->second;
  const Json& specs = section(config_, "datasets");
  if (!specs.contains(name)) throw ConfigError("unknown dataset '" + name + "'");
  return datasets_.emplace(name, build_dataset(dataset_spec_from_json(specs[name]), options_.workers)).first->second;
}

const Detector& BenchContext::detector(const std::string& name) {
  if (auto it = detectors_.find(name); it != detectors_.end()) return *it->second;
  const Json& specs = section(config_, "detectors");
  if (!specs.contains(name)) throw ConfigError("unknown detector '" + name + "'");
  auto built = build_detector(name, specs[name]);
  return *detectors_.emplace(name, std::move(built)).first->second;
}

const Json* BenchContext::tuning(const std::string& name) const {
  const auto it = tuning_.find(name);
  return it == tuning_.end() ? nullptr : &it->second;
}

std::unique_ptr<Detector> BenchContext::build_detector(const std::string& name, const Json& spec) {
  const std::string type = get_string(spec, "type");
  if (type == "smoothed") {
    const Detector& base = detector(get_string(spec, "base"));
    if (!base.watermark()) throw ConfigError("detectors: '" + name + "' needs a watermark base");
    SmoothingConfig sm = smoothing_;
    if (spec.contains("smoothing")) sm = smoothing_from_json(spec["smoothing"]);
    return std::make_unique<SmoothedDetector>(*base.watermark(), sm);
  }
  if (type == "watermark") {
    CodecParams params = codec_params_from_json(spec.value("codec", Json::object()));
    if (spec.contains("tune")) {
      const Json& t = spec["tune"];
      TuneOptions opts;
      if (t.contains("strengths")) opts.strengths = t["strengths"].get<std::vector<double>>();
      if (t.contains("chips")) opts.chips = t["chips"].get<std::vector<std::size_t>>();
      opts.target_accuracy = get_number(t, "target_accuracy", opts.target_accuracy);
      opts.min_psnr = get_number(t, "min_psnr", opts.min_psnr);
      opts.workers = options_.workers;
      const auto n = get_number<std::size_t>(t, "images", 24);
      const auto images = tensors_of(dataset(get_string(spec, "dataset")).train, 1, n);
      const SeenPerturbationRanges seen =
          t.contains("ranges") ? seen_ranges_from_json(t["ranges"]) : SeenPerturbationRanges::defaults();
      const TuneResult result = tune_robustness(params, seen, images, opts,
                                                RngStream::derive(options_.seed, {"tune", name}));
      params = result.params;
      tuning_[name] = to_json(result);
    }
    BitString w_t;
    if (spec.contains("w_t")) {
      w_t = BitString::from_hex(get_string(spec, "w_t"), params.n_bits);
    } else {
      RngStream rng = RngStream::derive(options_.seed, {"detector", name, "w_t"});
      w_t = BitString::random(params.n_bits, rng);
    }
    return std::make_unique<WatermarkDetector>(
        WatermarkDetectorConfig::make(params, std::move(w_t), get_number(spec, "fpr_target", 1e-4)));
  }
  // passive
  if (spec.contains("model")) return std::make_unique<PassiveDetector>(passive_model_from_json(spec["model"]));
  const Dataset& data = dataset(get_string(spec, "dataset"));
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  for (const auto& item : data.train) {
    images.push_back(item.image.tensor());
    labels.push_back(item.label);
  }
  PerturbationTraining cfg;
  cfg.kind = feature_kind_from_string(get_string(spec, "features", "frequency"));
  cfg.feature_side = get_number<std::size_t>(spec, "feature_side", kDefaultFeatureSide);
  cfg.train.l2_penalty = get_number(spec, "l2_penalty", cfg.train.l2_penalty);
  cfg.train.max_iters = get_number<std::size_t>(spec, "max_iters", cfg.train.max_iters);
  cfg.train.tol = get_number(spec, "tol", cfg.train.tol);
  cfg.epochs = get_number<std::size_t>(spec, "epochs", cfg.epochs);
  cfg.workers = options_.workers;
  if (get_number(spec, "perturbation_training", false))
    cfg.ranges = spec.contains("ranges") ? seen_ranges_from_json(spec["ranges"]) : SeenPerturbationRanges::defaults();
  return std::make_unique<PassiveDetector>(
      train_with_perturbations(images, labels, cfg, RngStream::derive(options_.seed, {"train", name})));
}

// ---------------------------------------------------------------- Scenarios

namespace {

struct ImageOutcome {
  int verdict = 0;
  bool skipped = false;
  double psnr = kPsnrCap;
  double ssim = 1.0;
  double queries = 0.0;
  double wall_ms = 0.0;
};

struct Condition {
  enum class Type { Clean, Common, Attack } type = Type::Clean;
  PerturbationKind kind = PerturbationKind::Brightness;
  AttackConfig attack;
  std::vector<AttackMode> modes = {AttackMode::Removal, AttackMode::Forgery};
  std::size_t max_images = std::numeric_limits<std::size_t>::max();
  bool donor_forgery = false;
  std::vector<double> grid;
  std::string label;
};

Condition parse_condition(const Json& s, const BenchContext& ctx) {
  Condition c;
  const std::string type = get_string(s, "condition", "clean");
  c.max_images = get_number(s, "max_images", c.max_images);
  if (type == "clean") {
    c.grid = {0.0};
    c.label = "clean";
  } else if (type == "common") {
    try {
      c.kind = perturbation_from_string(get_string(s, "perturbation"));
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    c.type = Condition::Type::Common;
    c.grid = s.contains("grid") ? s["grid"].get<std::vector<double>>() : ctx.grids().at(c.kind);
    c.label = std::string(to_string(c.kind));
  } else if (type == "attack") {
    c.type = Condition::Type::Attack;
    c.attack = attack_config_from_json(s.value("attack", Json::object()));
    if (s.contains("modes")) {
      c.modes.clear();
      for (const auto& m : s["modes"]) c.modes.push_back(attack_mode_from_string(m.get<std::string>()));
    }
    c.donor_forgery = get_string(s, "forgery_init", "embed") == "donor";
    if (s.contains("grid")) {
      c.grid = s["grid"].get<std::vector<double>>();
    } else if (c.attack.kind == AttackKind::HopSkipJump) {
      c.grid = {static_cast<double>(c.attack.query_budget)};
    } else {
      c.grid = {c.attack.linf_budget};
    }
    c.label = std::string(to_string(c.attack.kind));
  } else {
    throw ConfigError("unknown condition '" + type + "'");
  }
  return c;
}

struct Subject {
  const LabeledImage* item;
  std::size_t position;  // among the scenario's images, for donors
};

void run_scenario(BenchContext& ctx, const Json& s, BenchReport& report) {
  const std::string name = get_string(s, "name");
  const std::string det_name = get_string(s, "detector");
  const Condition cond = parse_condition(s, ctx);
  const Detector& det = ctx.detector(det_name);
  std::string data_name;
  if (s.contains("dataset")) {
    data_name = get_string(s, "dataset");
  } else {
    // Smoothed detectors evaluate on the dataset of their base.
    const Json& detectors = section(ctx.config(), "detectors");
    std::string cur = det_name;
    while (data_name.empty()) {
      const Json& spec = detectors.at(cur);
      if (spec.contains("dataset")) data_name = get_string(spec, "dataset");
      else if (spec.contains("base")) cur = get_string(spec, "base");
      else throw ConfigError("scenario '" + name + "': detector has no dataset");
    }
  }
  const Dataset& data = ctx.dataset(data_name);

  std::vector<const LabeledImage*> subjects;
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& item : data.test) {
    if (cond.type == Condition::Type::Attack) {
      const AttackMode mode = item.label == 1 ? AttackMode::Removal : AttackMode::Forgery;
      if (std::find(cond.modes.begin(), cond.modes.end(), mode) == cond.modes.end()) continue;
      std::size_t& count = item.label == 1 ? n_pos : n_neg;
      if (count >= cond.max_images) continue;
      ++count;
    }
    subjects.push_back(&item);
  }
  std::vector<const LabeledImage*> donors;
  for (const auto& item : data.test)
    if (item.label == 1) donors.push_back(&item);

  const BenchOptions& opts = ctx.options();
  for (std::size_t g = 0; g < cond.grid.size(); ++g) {
    const double param = cond.grid[g];
    std::vector<ImageOutcome> outcomes(subjects.size());
    parallel_for(subjects.size(), opts.workers, [&](std::size_t k) {
      const auto start = std::chrono::steady_clock::now();
      const LabeledImage& item = *subjects[k];
      RngStream rng = RngStream::derive(opts.seed, {"bench", name, g, item.index});
      ImageTensor x = item.image.tensor();
      if (item.label == 1) x = det.prepare_positive(x);
      ImageOutcome& out = outcomes[k];
      ImageTensor y;
      if (cond.type == Condition::Type::Clean) {
        y = x;
      } else if (cond.type == Condition::Type::Common) {
        y = apply_perturbation({cond.kind, param}, x, rng);
      } else {
        const AttackMode mode = item.label == 1 ? AttackMode::Removal : AttackMode::Forgery;
        const auto target = det.target(mode, x, item.index);
        AttackConfig acfg = cond.attack;
        acfg.mode = mode;
        acfg.seed = rng.next_u64();
        if (acfg.kind == AttackKind::HopSkipJump) acfg.query_budget = static_cast<std::size_t>(param);
        else acfg.linf_budget = param;
        if (acfg.kind == AttackKind::Pgd) {
          const AttackResult r = pgd_attack(*target, x, acfg);
          y = r.adversarial_image;
          out.queries = static_cast<double>(r.queries_used);
        } else if (acfg.kind == AttackKind::Square) {
          const AttackResult r = square_attack(*target, x, acfg);
          y = r.adversarial_image;
          out.queries = static_cast<double>(r.queries_used);
        } else if (det.verdict(x, item.index) == target->goal()) {
          y = x;
        } else {
          std::optional<ImageTensor> init;
          try {
            if (mode == AttackMode::Removal) {
              init = make_removal_init(*target, x, {}, rng.child("init"));
            } else if (det.watermark() && !cond.donor_forgery) {
              init = make_forgery_init(x, *det.watermark());
            } else if (!donors.empty()) {
              const LabeledImage& donor = *donors[k % donors.size()];
              ImageTensor candidate = det.prepare_positive(donor.image.tensor());
              if (target->decision(candidate) == target->goal()) init = std::move(candidate);
            }
          } catch (const InfeasibleError&) {
          }
          if (!init) {
            out.skipped = true;
            return;
          }
          const AttackResult r = hopskipjump_attack(*target, x, *init, acfg);
          y = r.adversarial_image;
          out.queries = static_cast<double>(r.queries_used);
        }
      }
      out.verdict = det.verdict(y, item.index);
      out.psnr = psnr_capped(y, x);
      out.ssim = ssim(y, x);
      if (opts.timings)
        out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    });

    BenchRow row;
    row.scenario = name;
    row.detector = det_name;
    row.condition = cond.label;
    row.param = param;
    row.seed = opts.seed;
    std::vector<int> verdicts, labels;
    double psnr_sum = 0.0, ssim_sum = 0.0, queries = 0.0, wall = 0.0;
    const std::size_t row_index = report.rows.size();
    for (std::size_t k = 0; k < subjects.size(); ++k) {
      const ImageOutcome& o = outcomes[k];
      if (o.skipped) {
        ++row.skipped;
        continue;
      }
      verdicts.push_back(o.verdict);
      labels.push_back(subjects[k]->label);
      psnr_sum += o.psnr;
      ssim_sum += o.ssim;
      queries += o.queries;
      wall += o.wall_ms;
      if (opts.dump_verdicts) report.verdicts.push_back({row_index, subjects[k]->index, subjects[k]->label, o.verdict});
    }
    const ConfusionStats stats = confusion(verdicts, labels);
    row.fnr = stats.fnr;
    row.fpr = stats.fpr;
    row.acc = stats.acc;
    const double n = static_cast<double>(verdicts.size());
    if (n > 0) {
      row.psnr = psnr_sum / n;
      row.ssim = ssim_sum / n;
      row.queries = queries / n;
      row.wall_ms = wall / n;
    }
    report.rows.push_back(std::move(row));
  }
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string format_param(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> optional_from(const Json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

BenchReport run_benchmark(BenchContext& ctx) {
  BenchReport report;
  report.version = std::string(toolkit_version());
  report.seed = ctx.options().seed;
  report.config = ctx.config();
  const Json& scenarios = section(ctx.config(), "scenarios");
  if (!scenarios.is_array()) throw ConfigError("'scenarios' must be an array");
  for (const auto& s : scenarios) {
    if (!s.is_object()) throw ConfigError("each scenario must be an object");
    get_string(s, "name");
    get_string(s, "detector");
  }
  for (const auto& s : scenarios) {
    try {
      run_scenario(ctx, s, report);
    } catch (const std::exception& e) {
      report.failures.push_back({s["name"].get<std::string>(), e.what()});
    }
  }
  return report;
}

BenchReport run_benchmark(const Json& config, const BenchOptions& options) {
  BenchContext ctx(config, options);
  return run_benchmark(ctx);
}

Json default_bench_config() {
  return Json::parse(R"({
  "datasets": {
    "synthetic": {"source": "synthetic", "n_images": 200, "image_side": 256, "seed": 1}
  },
  "detectors": {
    "watermark": {"type": "watermark", "dataset": "synthetic", "tune": {"images": 12}},
    "smoothed": {"type": "smoothed", "base": "watermark"},
    "freqdetect": {"type": "passive", "dataset": "synthetic", "features": "frequency"}
  },
  "smoothing": {"n": 100, "sigma": 0.1, "seed": 1},
  "scenarios": [
    {"name": "clean-watermark", "detector": "watermark", "condition": "clean"},
    {"name": "clean-smoothed", "detector": "smoothed", "condition": "clean"},
    {"name": "clean-freqdetect", "detector": "freqdetect", "condition": "clean"},
    {"name": "jpeg-watermark", "detector": "watermark", "condition": "common", "perturbation": "jpeg"},
    {"name": "jpeg-freqdetect", "detector": "freqdetect", "condition": "common", "perturbation": "jpeg"},
    {"name": "noise-watermark", "detector": "watermark", "condition": "common", "perturbation": "gauss_noise"},
    {"name": "noise-freqdetect", "detector": "freqdetect", "condition": "common", "perturbation": "gauss_noise"},
    {"name": "pgd-watermark", "detector": "watermark", "condition": "attack",
     "attack": {"kind": "pgd", "steps": 10}, "grid": [0.003, 0.01], "max_images": 5}
  ]
})");
}

ReportFormat report_format_from_string(std::string_view name) {
  if (name == "csv") return ReportFormat::Csv;
  if (name == "json") return ReportFormat::Json;
  throw ConfigError("unknown report format '" + std::string(name) + "'");
}

void write_report_csv(const BenchReport& report, std::ostream& out) {
  out << "scenario,detector,condition,param,fnr,fpr,acc,psnr,ssim,queries,wall_ms,seed\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string{}; };
  for (const auto& r : report.rows)
    out << csv_field(r.scenario) << ',' << csv_field(r.detector) << ',' << csv_field(r.condition) << ','
        << format_param(r.param) << ',' << opt(r.fnr) << ',' << opt(r.fpr) << ',' << opt(r.acc) << ','
        << format_number(r.psnr) << ',' << format_number(r.ssim) << ',' << format_number(r.queries) << ','
        << format_number(r.wall_ms) << ',' << r.seed << '\n';
}

Json to_json(const BenchReport& report) {
  Json rows = Json::array();
  for (const auto& r : report.rows)
    rows.push_back({{"scenario", r.scenario},
                    {"detector", r.detector},
                    {"condition", r.condition},
                    {"param", r.param},
                    {"fnr", optional_json(r.fnr)},
                    {"fpr", optional_json(r.fpr)},
                    {"acc", optional_json(r.acc)},
                    {"psnr", r.psnr},
                    {"ssim", r.ssim},
                    {"queries", r.queries},
                    {"wall_ms", r.wall_ms},
                    {"seed", r.seed},
                    {"skipped", r.skipped}});
  Json verdicts = Json::array();
  for (const auto& v : report.verdicts)
    verdicts.push_back({{"row", v.row}, {"image", v.image_index}, {"label", v.label}, {"verdict", v.verdict}});
  Json failures = Json::array();
  for (const auto& f : report.failures) failures.push_back({{"scenario", f.scenario}, {"message", f.message}});
  return {{"version", report.version}, {"seed", report.seed},         {"config", report.config},
          {"rows", rows},              {"verdicts", verdicts},        {"failures", failures}};
}

BenchReport report_from_json(const Json& j) {
  BenchReport report;
  try {
    report.version = j.at("version").get<std::string>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.config = j.value("config", Json::object());
    for (const auto& r : j.at("rows")) {
      BenchRow row;
      row.scenario = r.at("scenario").get<std::string>();
      row.detector = r.at("detector").get<std::string>();
      row.condition = r.at("condition").get<std::string>();
      row.param = r.at("param").get<double>();
      row.fnr = optional_from(r, "fnr");
      row.fpr = optional_from(r, "fpr");
      row.acc = optional_from(r, "acc");
      row.psnr = r.at("psnr").get<double>();
      row.ssim = r.at("ssim").get<double>();
      row.queries = r.at("queries").get<double>();
      row.wall_ms = r.at("wall_ms").get<double>();
      row.seed = r.at("seed").get<std::uint64_t>();
      row.skipped = r.value("skipped", std::size_t{0});
      report.rows.push_back(std::move(row));
    }
    for (const auto& v : j.value("verdicts", Json::array()))
      report.verdicts.push_back({v.at("row").get<std::size_t>(), v.at("image").get<std::size_t>(),
                                 v.at("label").get<int>(), v.at("verdict").get<int>()});
    for (const auto& f : j.value("failures", Json::array()))
      report.failures.push_back({f.at("scenario").get<std::string>(), f.at("message").get<std::string>()});
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return report;
}

void write_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  if (format == ReportFormat::Csv) write_report_csv(report, out);
  else out << to_json(report).dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace detbench
