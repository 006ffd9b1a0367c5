#pragma once

#include "brakesense/eval.hpp"
#include "brakesense/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace brakesense {

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::size_t subjects = 11;
  std::string output_dir = "out";
  SimulationConfig sim;
  PreprocessConfig pre;
  EvalProtocol protocol;  // protocol.seed is derived from `seed`, not read from the file
};

/// Every field must be present; unknown keys are rejected. Errors name the JSON path.
PipelineConfig parse_pipeline_config(const nlohmann::json& doc);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
nlohmann::json to_json(const PipelineConfig& config);

/// FNV-1a of the canonical JSON rendering.
std::uint64_t config_hash(const PipelineConfig& config);

/// Seed of the evaluation protocol for a root seed.
RngSeed protocol_seed(std::uint64_t root);

}  // namespace brakesense
