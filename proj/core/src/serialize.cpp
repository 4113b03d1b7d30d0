#include "detbench/serialize.hpp"

#include <fstream>

#include "detbench/errors.hpp"

namespace detbench {

namespace {

template <typename T>
T get(const Json& j, const char* key, T fallback) {
  if (!j.is_object()) throw ConfigError(std::string("expected an object holding '") + key + "'");
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("invalid value for '") + key + "': " + it->dump());
  }
}

template <typename T>
T require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
  return get<T>(j, key, T{});
}

}  // namespace

Json to_json(const CodecParams& p) {
  return {{"key", p.key},
          {"n_bits", p.n_bits},
          {"chips_per_bit", p.chips_per_bit},
          {"strength", p.strength},
          {"band", {p.band.lo, p.band.hi}},
          {"soft_sharpness", p.soft_sharpness},
          {"host_rejection", p.host_rejection}};
}

CodecParams codec_params_from_json(const Json& j) {
  CodecParams p;
  p.key = get(j, "key", p.key);
  p.n_bits = get(j, "n_bits", p.n_bits);
  p.chips_per_bit = get(j, "chips_per_bit", p.chips_per_bit);
  p.strength = get(j, "strength", p.strength);
  const auto band = get(j, "band", std::vector<double>{p.band.lo, p.band.hi});
  if (band.size() != 2) throw ConfigError("'band' must be [lo, hi]");
  p.band = {band[0], band[1]};
  p.soft_sharpness = get(j, "soft_sharpness", p.soft_sharpness);
  p.host_rejection = get(j, "host_rejection", p.host_rejection);
  try {
    p.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

Json to_json(const WatermarkDetectorConfig& cfg) {
  Json j = to_json(cfg.params);
  j["fpr_target"] = cfg.fpr_target;
  j["tau_matches"] = cfg.tau_matches;
  j["w_t"] = cfg.w_t.to_hex();
  return j;
}

WatermarkDetectorConfig detector_config_from_json(const Json& j) {
  const CodecParams params = codec_params_from_json(j);
  const double fpr = get(j, "fpr_target", 1e-4);
  BitString w_t;
  try {
    w_t = BitString::from_hex(require<std::string>(j, "w_t"), params.n_bits);
  } catch (const FormatError& e) {
    throw ConfigError(std::string("'w_t': ") + e.what());
  }
  WatermarkDetectorConfig cfg{params, std::move(w_t), 0, fpr};
  cfg.tau_matches = get<std::size_t>(j, "tau_matches", 0);
  if (cfg.tau_matches == 0) cfg.tau_matches = calibrate_tau(params.n_bits, fpr);
  cfg.validate();
  return cfg;
}

Json to_json(const PerturbationSpec& spec) { return {{"kind", std::string(to_string(spec.kind))}, {"param", spec.param}}; }

PerturbationSpec perturbation_from_json(const Json& j) {
  PerturbationSpec spec;
  try {
    spec.kind = perturbation_from_string(require<std::string>(j, "kind"));
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  spec.param = require<double>(j, "param");
  try {
    spec.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  return spec;
}

Json to_json(const SeenPerturbationRanges& ranges) {
  Json j = Json::object();
  for (const auto& [kind, range] : ranges.ranges) j[std::string(to_string(kind))] = {range.first, range.second};
  return j;
}

SeenPerturbationRanges seen_ranges_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("perturbation ranges must be an object");
  SeenPerturbationRanges ranges;
  for (const auto& [name, value] : j.items()) {
    PerturbationKind kind;
    try {
      kind = perturbation_from_string(name);
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number())
      throw ConfigError("range for '" + name + "' must be [lo, hi]");
    ranges.ranges[kind] = {value[0].get<double>(), value[1].get<double>()};
  }
  if (!ranges.empty()) ranges.validate();
  return ranges;
}

Json to_json(const PassiveModel& m) {
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  return {{"kind", std::string(to_string(m.kind))}, {"weights", vec(m.weights)}, {"bias", m.bias},
          {"mean", vec(m.mean)},                    {"std", vec(m.std)},         {"threshold", m.threshold},
          {"feature_side", m.feature_side},         {"dropped", m.dropped}};
}

PassiveModel passive_model_from_json(const Json& j) {
  auto vec = [](const std::vector<double>& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); };
  PassiveModel m;
  try {
    m.kind = feature_kind_from_string(require<std::string>(j, "kind"));
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  m.weights = vec(require<std::vector<double>>(j, "weights"));
  m.bias = require<double>(j, "bias");
  m.mean = vec(require<std::vector<double>>(j, "mean"));
  m.std = vec(require<std::vector<double>>(j, "std"));
  m.threshold = get(j, "threshold", 0.5);
  m.feature_side = get(j, "feature_side", kDefaultFeatureSide);
  m.dropped = get(j, "dropped", std::vector<std::size_t>{});
  m.validate();
  return m;
}

Json to_json(const AttackConfig& c) {
  return {{"mode", std::string(to_string(c.mode))},
          {"kind", std::string(to_string(c.kind))},
          {"linf_budget", c.linf_budget},
          {"steps", c.steps},
          {"restarts", c.restarts},
          {"query_budget", c.query_budget},
          {"seed", c.seed},
          {"hsj_initial_probes", c.hsj_initial_probes},
          {"hsj_tolerance", c.hsj_tolerance},
          {"square_initial_fraction", c.square_initial_fraction}};
}

AttackConfig attack_config_from_json(const Json& j) {
  AttackConfig c;
  try {
    c.mode = attack_mode_from_string(get<std::string>(j, "mode", "removal"));
    c.kind = attack_kind_from_string(get<std::string>(j, "kind", "pgd"));
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  c.linf_budget = get(j, "linf_budget", c.linf_budget);
  c.steps = get(j, "steps", c.steps);
  c.restarts = get(j, "restarts", c.restarts);
  c.query_budget = get(j, "query_budget", c.query_budget);
  c.seed = get(j, "seed", c.seed);
  c.hsj_initial_probes = get(j, "hsj_initial_probes", c.hsj_initial_probes);
  c.hsj_tolerance = get(j, "hsj_tolerance", c.hsj_tolerance);
  c.square_initial_fraction = get(j, "square_initial_fraction", c.square_initial_fraction);
  c.validate();
  return c;
}

Json to_json(const DatasetSpec& s) {
  return {{"source", std::string(to_string(s.source))},
          {"directory", s.directory.string()},
          {"n_images", s.n_images},
          {"natural",
           {{"spectral_slope", s.natural.spectral_slope},
            {"blob_count", s.natural.blob_count},
            {"gradient_amplitude", s.natural.gradient_amplitude}}},
          {"generated",
           {{"upsample_factor", s.generated.upsample_factor},
            {"artifact_amplitude", s.generated.artifact_amplitude},
            {"checker_amplitude", s.generated.checker_amplitude}}},
          {"image_side", s.image_side},
          {"train_fraction", s.train_fraction},
          {"seed", s.seed}};
}

DatasetSpec dataset_spec_from_json(const Json& j) {
  DatasetSpec s;
  try {
    s.source = dataset_source_from_string(get<std::string>(j, "source", "synthetic"));
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  s.directory = get<std::string>(j, "directory", "");
  s.n_images = get(j, "n_images", s.n_images);
  const Json natural = get(j, "natural", Json::object());
  s.natural.spectral_slope = get(natural, "spectral_slope", s.natural.spectral_slope);
  s.natural.blob_count = get(natural, "blob_count", s.natural.blob_count);
  s.natural.gradient_amplitude = get(natural, "gradient_amplitude", s.natural.gradient_amplitude);
  const Json generated = get(j, "generated", Json::object());
  s.generated.upsample_factor = get(generated, "upsample_factor", s.generated.upsample_factor);
  s.generated.artifact_amplitude = get(generated, "artifact_amplitude", s.generated.artifact_amplitude);
  s.generated.checker_amplitude = get(generated, "checker_amplitude", s.generated.checker_amplitude);
  s.image_side = get(j, "image_side", s.image_side);
  s.train_fraction = get(j, "train_fraction", s.train_fraction);
  s.seed = get(j, "seed", s.seed);
  s.validate();
  return s;
}

Json to_json(const SmoothingConfig& sm) { return {{"n", sm.n_samples}, {"sigma", sm.noise_std}, {"seed", sm.seed}}; }

SmoothingConfig smoothing_from_json(const Json& j) {
  SmoothingConfig sm;
  sm.n_samples = get(j, "n", sm.n_samples);
  sm.noise_std = get(j, "sigma", sm.noise_std);
  sm.seed = get(j, "seed", sm.seed);
  sm.validate();
  return sm;
}

Json to_json(const TuneResult& result) {
  Json sweep = Json::array();
  for (const auto& c : result.sweep)
    sweep.push_back({{"strength", c.strength},
                     {"chips_per_bit", c.chips_per_bit},
                     {"fits", c.fits},
                     {"clean_psnr", c.clean_psnr},
                     {"clean_accuracy", c.clean_accuracy},
                     {"mean_accuracy", c.mean_accuracy},
                     {"accuracy_per_perturbation", c.accuracy_per_perturbation},
                     {"qualifies", c.qualifies}});
  Json evaluated = Json::array();
  for (const auto& spec : result.evaluated) evaluated.push_back(to_json(spec));
  return {{"params", to_json(result.params)}, {"evaluated", evaluated}, {"sweep", sweep}};
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace detbench
