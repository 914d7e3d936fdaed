#pragma once

#include "stereovol/checkpoint.hpp"
#include "stereovol/encoders.hpp"
#include "stereovol/evaluation.hpp"
#include "stereovol/priors.hpp"
#include "stereovol/training.hpp"
#include "stereovol/types.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stereovol {

struct EncoderPair {
  std::shared_ptr<const ImageEncoder> image;
  std::shared_ptr<const TextEncoder> text;
};

/// Resolves both encoders through the registry. `cache_dir` falls back to the
/// STEREOVOL_CACHE_DIR environment variable.
EncoderPair make_encoders(const EncoderSpec& image, const EncoderSpec& text,
                          std::optional<std::filesystem::path> cache_dir = {});

/// One prediction per sample using its recorded views. Item ids must be
/// unique. Ground-truth classes outside the checkpoint vocabulary are allowed;
/// they only count as misclassified.
PredictionSet predict(const Checkpoint& ckpt, std::span<const StereoSample> samples, const ImageEncoder& image_encoder,
                      const TextEncoder& text_encoder);

struct ExperimentData {
  std::vector<StereoSample> train;
  std::vector<StereoSample> test;
  ClassVocabulary vocab;
  VolumePriorTable priors;
};

struct ExperimentResult {
  TrainResult training;
  PredictionSet predictions;
  MetricsReport metrics;
};

/// Train on data.train, predict data.test with the final parameters, score.
ExperimentResult run_experiment(const TrainConfig& config, const ExperimentData& data, const EncoderPair& encoders,
                                const EncoderSpec& image_spec, const EncoderSpec& text_spec);

/// A single-factor change to the training configuration.
///   full | stereo_only | text_only | prompt_template_<k> | n_images_<n>
struct AblationVariant {
  std::string name;
  std::optional<FusionInputs> inputs;
  std::optional<int> template_id;
  std::optional<int> n_images;

  static AblationVariant parse(const std::string& name); // throws InvalidConfig
  TrainConfig apply(TrainConfig config) const;
};

ExperimentResult run_ablation(const AblationVariant& variant, const TrainConfig& base, const ExperimentData& data,
                              const EncoderPair& encoders, const EncoderSpec& image_spec, const EncoderSpec& text_spec);

} // namespace stereovol
