#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "detbench/attacks.hpp"
#include "detbench/dataset.hpp"
#include "detbench/passive.hpp"
#include "detbench/perturb.hpp"
#include "detbench/smoothing.hpp"
#include "detbench/wmcodec.hpp"

namespace detbench {

using Json = nlohmann::json;

// Readers throw ConfigError naming the offending key. Missing optional keys
// keep their defaults.
Json to_json(const CodecParams& p);
CodecParams codec_params_from_json(const Json& j);

Json to_json(const WatermarkDetectorConfig& cfg);
WatermarkDetectorConfig detector_config_from_json(const Json& j);

Json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const Json& j);

Json to_json(const SeenPerturbationRanges& ranges);
SeenPerturbationRanges seen_ranges_from_json(const Json& j);

Json to_json(const PassiveModel& model);
PassiveModel passive_model_from_json(const Json& j);

Json to_json(const AttackConfig& cfg);
AttackConfig attack_config_from_json(const Json& j);

Json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const Json& j);

Json to_json(const SmoothingConfig& sm);
SmoothingConfig smoothing_from_json(const Json& j);

Json to_json(const TuneResult& result);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const Json& j, const std::filesystem::path& path);

}  // namespace detbench
