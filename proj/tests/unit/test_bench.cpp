#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "detbench/bench.hpp"
#include "detbench/errors.hpp"
#include "detbench/metrics.hpp"

using namespace detbench;

namespace {

Json small_config() {
  return Json::parse(R"({
  "datasets": {"d": {"source": "synthetic", "n_images": 16, "image_side": 64, "seed": 2}},
  "detectors": {
    "wm": {"type": "watermark", "dataset": "d", "codec": {"chips_per_bit": 8, "strength": 0.08}},
    "sm": {"type": "smoothed", "base": "wm"},
    "fd": {"type": "passive", "dataset": "d", "features": "frequency", "epochs": 1}
  },
  "smoothing": {"n": 9, "sigma": 0.05, "seed": 1},
  "scenarios": [
    {"name": "clean-wm", "detector": "wm"},
    {"name": "clean-sm", "detector": "sm"},
    {"name": "jpeg-fd", "detector": "fd", "condition": "common", "perturbation": "jpeg", "grid": [90, 30]},
    {"name": "noise-wm", "detector": "wm", "condition": "common", "perturbation": "gauss_noise", "grid": [0.02, 0.1, 0.3]},
    {"name": "pgd-wm", "detector": "wm", "condition": "attack", "attack": {"kind": "pgd", "steps": 5}, "grid": [0.01], "max_images": 2},
    {"name": "square-sm", "detector": "sm", "condition": "attack", "attack": {"kind": "square", "query_budget": 30}, "grid": [0.02], "max_images": 1},
    {"name": "hsj-wm", "detector": "wm", "condition": "attack", "attack": {"kind": "hopskipjump"}, "grid": [200], "max_images": 2}
  ]
})");
}

std::string csv_of(const BenchReport& r) {
  std::ostringstream out;
  write_report_csv(r, out);
  return out.str();
}

}  // namespace

TEST(Bench, EmptyReportHasHeaderOnly) {
  EXPECT_EQ(csv_of(BenchReport{}), "scenario,detector,condition,param,fnr,fpr,acc,psnr,ssim,queries,wall_ms,seed\n");
}

TEST(Bench, FormatNames) {
  EXPECT_EQ(report_format_from_string("csv"), ReportFormat::Csv);
  EXPECT_EQ(report_format_from_string("json"), ReportFormat::Json);
  EXPECT_THROW(report_format_from_string("xml"), ConfigError);
}

TEST(Bench, ConfigErrorsAtConstruction) {
  EXPECT_THROW(BenchContext(Json::array(), {}), ConfigError);
  Json c = small_config();
  c["detectors"]["wm"]["type"] = "oracle";
  EXPECT_THROW(BenchContext(c, {}), ConfigError);
  c = small_config();
  c["grids"]["sharpen"] = {1.0};
  EXPECT_THROW(BenchContext(c, {}), ConfigError);
  c = small_config();
  c["scenarios"][0].erase("detector");
  EXPECT_THROW(run_benchmark(c, {}), ConfigError);
}

class BenchRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    BenchOptions opts;
    opts.seed = 5;
    opts.dump_verdicts = true;
    report_ = new BenchReport(run_benchmark(small_config(), opts));
    opts.workers = 3;
    parallel_ = new BenchReport(run_benchmark(small_config(), opts));
  }
  static void TearDownTestSuite() {
    delete report_;
    delete parallel_;
  }
  static BenchReport* report_;
  static BenchReport* parallel_;
};

BenchReport* BenchRun::report_ = nullptr;
BenchReport* BenchRun::parallel_ = nullptr;

TEST_F(BenchRun, OneRowPerGridPoint) {
  ASSERT_TRUE(report_->failures.empty()) << report_->failures[0].message;
  EXPECT_EQ(report_->rows.size(), 1u + 1u + 2u + 3u + 1u + 1u + 1u);
  EXPECT_EQ(report_->rows[2].condition, "jpeg");
  EXPECT_EQ(report_->rows[2].param, 90);
  EXPECT_EQ(report_->rows[8].condition, "square");
  EXPECT_EQ(report_->rows[9].param, 200);
  EXPECT_EQ(report_->version, toolkit_version());
  for (const auto& row : report_->rows) EXPECT_EQ(row.wall_ms, 0.0);
}

TEST_F(BenchRun, RatesMatchDumpedVerdicts) {
  std::map<std::size_t, std::pair<std::vector<int>, std::vector<int>>> by_row;
  for (const auto& v : report_->verdicts) {
    by_row[v.row].first.push_back(v.verdict);
    by_row[v.row].second.push_back(v.label);
  }
  for (std::size_t r = 0; r < report_->rows.size(); ++r) {
    const auto& [verdicts, labels] = by_row[r];
    const ConfusionStats s = confusion(verdicts, labels);
    const BenchRow& row = report_->rows[r];
    EXPECT_EQ(s.fnr, row.fnr) << r;
    EXPECT_EQ(s.fpr, row.fpr) << r;
    EXPECT_EQ(s.acc, row.acc) << r;
  }
  // Attack rows only hold the requested number of images per class.
  ASSERT_EQ(report_->rows[7].condition, "pgd");
  EXPECT_EQ(by_row[7].first.size() + report_->rows[7].skipped, 4u);
}

TEST_F(BenchRun, CleanRowsHaveCappedPsnr) {
  EXPECT_EQ(report_->rows[0].psnr, kPsnrCap);
  EXPECT_EQ(report_->rows[0].ssim, 1.0);
  EXPECT_LT(report_->rows[5].psnr, report_->rows[4].psnr);
}

TEST_F(BenchRun, WorkerCountDoesNotChangeReport) {
  EXPECT_EQ(csv_of(*report_), csv_of(*parallel_));
  EXPECT_EQ(to_json(*report_).dump(), to_json(*parallel_).dump());
}

TEST_F(BenchRun, JsonRoundTrip) {
  const BenchReport back = report_from_json(to_json(*report_));
  EXPECT_EQ(csv_of(back), csv_of(*report_));
  EXPECT_EQ(back.verdicts.size(), report_->verdicts.size());
  EXPECT_EQ(to_json(back).dump(), to_json(*report_).dump());
}

TEST_F(BenchRun, WritesFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "detbench_bench_test";
  std::filesystem::create_directories(dir);
  write_report(*report_, ReportFormat::Csv, dir / "r.csv");
  std::ifstream in(dir / "r.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), csv_of(*report_));
  write_report(*report_, ReportFormat::Json, dir / "r.json");
  std::ifstream jin(dir / "r.json");
  EXPECT_EQ(csv_of(report_from_json(Json::parse(jin))), csv_of(*report_));
  std::filesystem::remove_all(dir);
}

TEST(Bench, FailedScenarioIsRecordedAndOthersRun) {
  Json c = small_config();
  c["scenarios"] = Json::parse(R"([
    {"name": "bad", "detector": "wm", "condition": "common", "perturbation": "nope"},
    {"name": "missing", "detector": "ghost"},
    {"name": "ok", "detector": "wm"}
  ])");
  const BenchReport r = run_benchmark(c, {});
  ASSERT_EQ(r.failures.size(), 2u);
  EXPECT_EQ(r.failures[0].scenario, "bad");
  EXPECT_EQ(r.failures[1].scenario, "missing");
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].scenario, "ok");
}

TEST(Bench, TimingsAreOptIn) {
  Json c = small_config();
  c["scenarios"] = Json::parse(R"([{"name": "n", "detector": "wm", "condition": "common", "perturbation": "gauss_blur", "grid": [2]}])");
  BenchOptions opts;
  opts.timings = true;
  const BenchReport r = run_benchmark(c, opts);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_GT(r.rows[0].wall_ms, 0.0);
}
