#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "detbench/attacks.hpp"
#include "detbench/dataset.hpp"
#include "detbench/serialize.hpp"

namespace detbench {

std::string_view toolkit_version() noexcept;

// A detector as the harness sees it.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string_view type() const noexcept = 0;
  virtual int verdict(const ImageTensor& img, std::size_t image_index) const = 0;
  // How an AI-generated image reaches this detector: watermarked or as is.
  virtual ImageTensor prepare_positive(const ImageTensor& ai) const { return ai; }
  virtual std::unique_ptr<TargetHandle> target(AttackMode mode, const ImageTensor& x, std::size_t image_index) const = 0;
  virtual const WatermarkDetectorConfig* watermark() const noexcept { return nullptr; }
};

class WatermarkDetector : public Detector {
 public:
  explicit WatermarkDetector(WatermarkDetectorConfig cfg);
  std::string_view type() const noexcept override { return "watermark"; }
  int verdict(const ImageTensor& img, std::size_t image_index) const override;
  ImageTensor prepare_positive(const ImageTensor& ai) const override;
  std::unique_ptr<TargetHandle> target(AttackMode mode, const ImageTensor& x, std::size_t image_index) const override;
  const WatermarkDetectorConfig* watermark() const noexcept override { return &cfg_; }

 private:
  WatermarkDetectorConfig cfg_;
  WatermarkCodec codec_;
};

class SmoothedDetector : public Detector {
 public:
  SmoothedDetector(WatermarkDetectorConfig cfg, SmoothingConfig sm);
  std::string_view type() const noexcept override { return "smoothed"; }
  int verdict(const ImageTensor& img, std::size_t image_index) const override;
  ImageTensor prepare_positive(const ImageTensor& ai) const override;
  std::unique_ptr<TargetHandle> target(AttackMode mode, const ImageTensor& x, std::size_t image_index) const override;
  const WatermarkDetectorConfig* watermark() const noexcept override { return &cfg_; }

 private:
  WatermarkDetectorConfig cfg_;
  SmoothingConfig sm_;
  WatermarkCodec codec_;
};

class PassiveDetector : public Detector {
 public:
  explicit PassiveDetector(PassiveModel model);
  std::string_view type() const noexcept override { return "passive"; }
  int verdict(const ImageTensor& img, std::size_t image_index) const override;
  std::unique_ptr<TargetHandle> target(AttackMode mode, const ImageTensor& x, std::size_t image_index) const override;
  const PassiveModel& model() const noexcept { return model_; }

 private:
  PassiveModel model_;
};

// Default sweep values per perturbation kind.
std::map<PerturbationKind, std::vector<double>> default_grids();

struct BenchRow {
  std::string scenario;
  std::string detector;
  std::string condition;
  double param = 0.0;
  std::optional<double> fnr;
  std::optional<double> fpr;
  std::optional<double> acc;
  double psnr = 0.0;
  double ssim = 0.0;
  double queries = 0.0;
  double wall_ms = 0.0;
  std::uint64_t seed = 0;
  std::size_t skipped = 0;  // images whose attack could not be initialized
};

struct ImageVerdict {
  std::size_t row = 0;
  std::size_t image_index = 0;
  int label = 0;
  int verdict = 0;
};

struct ScenarioFailure {
  std::string scenario;
  std::string message;
};

struct BenchReport {
  std::string version;
  std::uint64_t seed = 0;
  Json config;
  std::vector<BenchRow> rows;
  std::vector<ImageVerdict> verdicts;
  std::vector<ScenarioFailure> failures;
};

struct BenchOptions {
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool timings = false;        // wall_ms stays 0 otherwise, keeping reports reproducible
  bool dump_verdicts = false;
};

// Builds datasets and detectors named in `config` (sections datasets,
// detectors, smoothing, grids, scenarios). Detector construction is cached
// so several scenarios share one trained model.
class BenchContext {
 public:
  BenchContext(Json config, BenchOptions options);

  const Dataset& dataset(const std::string& name);
  const Detector& detector(const std::string& name);
  const std::map<PerturbationKind, std::vector<double>>& grids() const noexcept { return grids_; }
  const SmoothingConfig& smoothing() const noexcept { return smoothing_; }
  const Json& config() const noexcept { return config_; }
  const BenchOptions& options() const noexcept { return options_; }
  // Tuning record for a tuned watermark detector, if any.
  const Json* tuning(const std::string& name) const;

 private:
  std::unique_ptr<Detector> build_detector(const std::string& name, const Json& spec);

  Json config_;
  BenchOptions options_;
  SmoothingConfig smoothing_;
  std::map<PerturbationKind, std::vector<double>> grids_;
  std::map<std::string, Dataset> datasets_;
  std::map<std::string, std::unique_ptr<Detector>> detectors_;
  std::map<std::string, Json> tuning_;
};

BenchReport run_benchmark(const Json& config, const BenchOptions& options);
BenchReport run_benchmark(BenchContext& context);

// A small configuration covering every scenario type.
Json default_bench_config();

enum class ReportFormat { Csv, Json };
ReportFormat report_format_from_string(std::string_view name);

void write_report_csv(const BenchReport& report, std::ostream& out);
Json to_json(const BenchReport& report);
BenchReport report_from_json(const Json& j);
void write_report(const BenchReport& report, ReportFormat format, const std::filesystem::path& path);

}  // namespace detbench
