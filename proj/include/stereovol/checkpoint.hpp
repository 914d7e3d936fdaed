#pragma once

#include "stereovol/encoders.hpp"
#include "stereovol/model.hpp"
#include "stereovol/priors.hpp"
#include "stereovol/types.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace stereovol {

/// Everything needed to run inference: weights, the training configuration,
/// encoder selection, vocabulary and the prior table used for prompts.
struct Checkpoint {
  FusionModelParams params;
  TrainConfig config;
  EncoderSpec image_encoder;
  EncoderSpec text_encoder;
  ClassVocabulary vocab;
  VolumePriorTable priors;
};

inline constexpr int kCheckpointVersion = 1;

/// Layout: the line "STEREOVOL-CHECKPOINT", one line of JSON header, then every
/// tensor of FusionModelParams::tensors() as little-endian float64.
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws CheckpointMismatch when the encoders differ in dimension from what
/// the checkpoint was trained with.
void check_encoders(const Checkpoint& ckpt, const ImageEncoder& image, const TextEncoder& text);

} // namespace stereovol
