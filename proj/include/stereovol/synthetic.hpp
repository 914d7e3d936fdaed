#pragma once

#include "stereovol/ingestion.hpp"
#include "stereovol/types.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace stereovol {

/// Toy multi-view dataset: each item is a light disk whose area is proportional
/// to a latent size in [size_min, size_max], shown on a background tinted by
/// its class. The disk shifts horizontally from frame to frame.
/// Volume = class base * size.
/// Each item gets a random brightness gain and every pixel Gaussian noise.
struct SyntheticSpec {
  int num_classes = 5;
  int items_per_class = 40;
  int frames_per_item = 6;
  int image_size = 32;
  double size_min = 0.5;
  double size_max = 1.5;
  double brightness_jitter = 0.15; // gain drawn from [1 - j, 1 + j] per item
  double pixel_noise = 0.03;       // standard deviation
  std::uint64_t seed = 0;
};

struct SyntheticClass {
  std::string name;
  double base_volume_ml = 0.0;
  std::array<float, 3> scene{}; // background tint
};

struct SyntheticDataset {
  std::vector<SyntheticClass> classes;
  std::vector<FrameSequence> sequences; // frames held in memory
  std::map<std::string, double> latent_size;

  ClassVocabulary vocabulary() const;
};

/// Disk of the given latent size, shifted by `shift_px` horizontally and
/// `dy_px` vertically, 4x4 supersampled.
Image render_disk(int image_size, const std::array<float, 3>& background, const std::array<float, 3>& object,
                  double size, double shift_px, double dy_px);

SyntheticDataset make_synthetic(const SyntheticSpec& spec);

/// Writes every frame as PNG under `dir` and a sequence file `dir/sequences.jsonl`
/// whose frame paths are relative to `dir`. Returns the sequences pointing at disk.
std::vector<FrameSequence> write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir);

} // namespace stereovol
