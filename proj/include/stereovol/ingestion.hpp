#pragma once

#include "stereovol/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace stereovol {

/// Frames of one object captured while the camera moves around it.
struct FrameSequence {
  std::string item_id;
  std::string class_label;
  std::vector<ImageRef> frames; // ordered by capture index
  std::optional<std::filesystem::path> mesh;
  std::optional<double> volume_ml;
  std::optional<std::string> split; // "train" or "test" when the dataset provides one
  std::optional<std::string> food_code;
};

struct PairPolicy {
  int min_gap = 1; // pairs satisfy right - left >= min_gap + 1
  std::uint64_t seed = 0;
};

using FramePair = std::pair<int, int>;

/// Uniformly samples one non-consecutive pair (i < j). Throws SequenceTooShort.
FramePair sample_stereo_pair(int n_frames, const PairPolicy& policy);
FramePair sample_stereo_pair(const FrameSequence& seq, const PairPolicy& policy);

/// All valid pairs in lexicographic order; when more than `max_pairs` exist an
/// evenly strided subset of that order is returned.
std::vector<FramePair> enumerate_training_pairs(int n_frames, int max_pairs, int min_gap = 1);
std::vector<FramePair> enumerate_training_pairs(const FrameSequence& seq, int max_pairs, int min_gap = 1);

/// n distinct frame indices, ascending. n == 2 delegates to sample_stereo_pair.
std::vector<int> sample_views(int n_frames, int n, const PairPolicy& policy);

struct SplitPolicy {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  int max_pairs = 8;
  int min_gap = 1;
  int n_views = 2; // records carry n_views - 2 extra frames beyond the pair when > 2
};

struct ManifestSplit {
  std::vector<StereoSample> train; // up to max_pairs records per item
  std::vector<StereoSample> test;  // exactly one record per item
};

/// Uses each sequence's `split` field when every sequence has one, otherwise a
/// seeded random split. Every sequence needs `volume_ml` set.
ManifestSplit build_manifest(const std::vector<FrameSequence>& sequences, const SplitPolicy& policy);

/// Sequence file: JSON Lines with item_id, class_label, frames (array of paths)
/// and optionally mesh, volume_ml, split, food_code.
std::vector<FrameSequence> read_sequences(const std::filesystem::path& path);
void write_sequences(const std::filesystem::path& path, const std::vector<FrameSequence>& sequences);

} // namespace stereovol
