#pragma once

#include "stereovol/checkpoint.hpp"
#include "stereovol/encoders.hpp"
#include "stereovol/io.hpp"
#include "stereovol/model.hpp"
#include "stereovol/priors.hpp"
#include "stereovol/types.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace stereovol {

struct AdamState {
  FusionModelParams first_moment;
  FusionModelParams second_moment;
  long step = 0;

  static AdamState zeros(const ModelDims& dims);
};

/// One bias-corrected Adam update, in place.
void adam_step(FusionModelParams& params, const FusionModelParams& grads, AdamState& state, double lr, double beta1,
               double beta2, double epsilon);

struct EpochRecord {
  int epoch = 0;
  double mse = 0.0;
  double ce = 0.0;
  double total = 0.0;
};

struct RunManifest {
  TrainConfig config;
  EncoderSpec image_encoder;
  EncoderSpec text_encoder;
  int template_id = 5;
  int volume_decimals = 1;
  std::map<std::string, std::string> dataset_digests;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  std::map<std::string, std::string> checkpoints;
  std::map<std::string, std::string> notes;

  Json to_json() const;
};

struct TrainInputs {
  std::span<const StereoSample> samples;
  const ClassVocabulary& vocab;
  const VolumePriorTable& priors;
  const ImageEncoder& image_encoder;
  const TextEncoder& text_encoder;
  EncoderSpec image_spec;
  EncoderSpec text_spec;
  std::map<std::string, std::string> dataset_digests;
};

struct TrainResult {
  FusionModelParams final_params;
  FusionModelParams best_params;
  RunManifest manifest;
};

/// Stereo features [F_1; ...; F_n] of one sample, using the first n views.
Vector stereo_feature(const StereoSample& sample, int n_images, ImageEmbeddingCache& cache);

/// Canonical digest of an in-memory sample list (ids, labels, volumes, image keys).
std::string digest_samples(std::span<const StereoSample> samples);

/// Adam on lambda * MSE + mu * CE for config.epochs epochs. Throws NonFiniteLoss
/// naming the epoch and batch when the loss or any parameter stops being finite.
TrainResult train(const TrainConfig& config, const TrainInputs& inputs,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Bundles a trained model with the metadata needed to run it.
Checkpoint make_checkpoint(const FusionModelParams& params, const TrainConfig& config, const TrainInputs& inputs);

/// Trains and writes final.ckpt, best.ckpt and run_manifest.json into `out_dir`.
TrainResult train_to_directory(const TrainConfig& config, const TrainInputs& inputs, const std::filesystem::path& out_dir,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

} // namespace stereovol
