#pragma once

#include "stereovol/encoders.hpp"
#include "stereovol/io.hpp"
#include "stereovol/types.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace stereovol {

Json train_config_to_json(const TrainConfig& config);
/// Reads a TrainConfig from a JSON object; missing keys keep their defaults.
TrainConfig train_config_from_json(const Json& j);

Json encoder_spec_to_json(const EncoderSpec& spec);
EncoderSpec encoder_spec_from_json(const Json& j);

/// Run-level configuration read from a flat JSON object. Keys are the
/// TrainConfig field names plus the dotted keys below; anything else is
/// rejected.
///
///   image_encoder.name / .dim / .seed
///   text_encoder.name / .dim / .seed
///   paths.data_root / paths.cache_dir / paths.output_dir
///   priors_file      external prior table overriding train-split means
///   log_level        "quiet" | "info" | "debug"
struct GlobalConfig {
  TrainConfig train;
  EncoderSpec image_encoder{"hash-image", 64, 0};
  EncoderSpec text_encoder{"hash-text", 64, 1};
  std::optional<std::filesystem::path> data_root;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::filesystem::path> priors_file;
  std::string log_level = "info";

  void validate() const;
};

GlobalConfig global_config_from_json(const Json& j);
Json global_config_to_json(const GlobalConfig& config);
GlobalConfig read_global_config(const std::filesystem::path& path);

/// Multi-line description of every accepted key, for --help.
std::string config_schema_help();

} // namespace stereovol
