#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stereovol {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// RGB image, row-major interleaved (H x W x 3), channel values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> rgb;

  Image() = default;
  Image(int h, int w, float fill = 0.0f);

  float& at(int y, int x, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  float at(int y, int x, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  bool empty() const noexcept { return height == 0 || width == 0; }
};

/// An image either held in memory or referenced by path and decoded on demand.
/// `key` identifies the image for embedding caches; it defaults to the path.
struct ImageRef {
  std::string key;
  std::filesystem::path path;
  std::shared_ptr<const Image> pixels;

  static ImageRef from_path(std::filesystem::path p);
  static ImageRef from_pixels(std::string key, std::shared_ptr<const Image> img);

  /// Returns the in-memory pixels or decodes `path`.
  std::shared_ptr<const Image> load() const;
};

struct StereoSample {
  std::string item_id;
  std::string class_label;
  ImageRef left;
  ImageRef right;
  double volume_ml = 0.0;
  int frame_left = 0;
  int frame_right = 0;
  // Additional views beyond the stereo pair; only used by the image-count ablation.
  std::vector<ImageRef> extra_views;
  std::vector<int> extra_frames;
  std::optional<std::string> food_code;

  /// All views in order: left, right, extras.
  std::vector<ImageRef> views() const;
};

/// Frozen-encoder output. Always finite.
class EmbeddingVector {
public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(Vector values);

  const Vector& values() const noexcept { return values_; }
  int dim() const noexcept { return static_cast<int>(values_.size()); }

private:
  Vector values_;
};

/// [F_1; F_2; ...; F_n], left view first.
Vector concat_views(std::span<const EmbeddingVector> views);

class ClassVocabulary {
public:
  ClassVocabulary() = default;
  explicit ClassVocabulary(std::vector<std::string> names);

  int size() const noexcept { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::string& name(int index) const;
  std::optional<int> find(const std::string& name) const;
  int index_of(const std::string& name) const; // throws UnknownClass
  bool contains(const std::string& name) const { return find(name).has_value(); }

  bool operator==(const ClassVocabulary& other) const { return names_ == other.names_; }

private:
  std::vector<std::string> names_;
  std::map<std::string, int> index_;
};

enum class FusionInputs { Full, StereoOnly, TextOnly };

std::string to_string(FusionInputs inputs);
FusionInputs fusion_inputs_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lambda_mse = 1.0;
  double mu_ce = 0.5;
  std::uint64_t seed = 0;
  int projection_dim = 512;
  int classifier_hidden = 0; // 0: single affine classifier
  int regression_hidden = 0; // 0: projection_dim / 2
  double teacher_forcing = 0.0;
  bool standardize_targets = false;
  FusionInputs fusion_inputs = FusionInputs::Full;
  int n_images = 2;
  int template_id = 5;
  int volume_decimals = 1;
  bool deterministic = true;

  int effective_regression_hidden() const
  {
    return regression_hidden > 0 ? regression_hidden : std::max(1, projection_dim / 2);
  }

  /// Throws InvalidConfig on any violated invariant.
  void validate() const;
};

/// Returns the sample unchanged iff all invariants hold.
const StereoSample& validate_sample(const StereoSample& sample, const ClassVocabulary& vocab);

} // namespace stereovol
