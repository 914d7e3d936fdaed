#include "stereovol/types.hpp"

#include "stereovol/error.hpp"
#include "stereovol/rng.hpp"

#include <cmath>

namespace stereovol {

Image::Image(int h, int w, float fill)
    : height(h), width(w), rgb(static_cast<std::size_t>(h) * w * 3, fill)
{
}

ImageRef ImageRef::from_path(std::filesystem::path p)
{
  ImageRef ref;
  ref.key = p.string();
  ref.path = std::move(p);
  return ref;
}

ImageRef ImageRef::from_pixels(std::string key, std::shared_ptr<const Image> img)
{
  ImageRef ref;
  ref.key = std::move(key);
  ref.pixels = std::move(img);
  return ref;
}

std::vector<ImageRef> StereoSample::views() const
{
  std::vector<ImageRef> out;
  out.reserve(2 + extra_views.size());
  out.push_back(left);
  out.push_back(right);
  out.insert(out.end(), extra_views.begin(), extra_views.end());
  return out;
}

EmbeddingVector::EmbeddingVector(Vector values) : values_(std::move(values))
{
  if (values_.size() == 0) {
    throw Error(ErrorCode::DimMismatch, "embedding must have positive dimension");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::DimMismatch, "embedding contains non-finite entries");
  }
}

Vector concat_views(std::span<const EmbeddingVector> views)
{
  Eigen::Index total = 0;
  for (const auto& v : views) {
    total += v.dim();
  }
  Vector out(total);
  Eigen::Index offset = 0;
  for (const auto& v : views) {
    out.segment(offset, v.dim()) = v.values();
    offset += v.dim();
  }
  return out;
}

ClassVocabulary::ClassVocabulary(std::vector<std::string> names) : names_(std::move(names))
{
  for (int i = 0; i < static_cast<int>(names_.size()); ++i) {
    if (names_[i].empty()) {
      throw Error(ErrorCode::InvalidConfig, "empty class name in vocabulary");
    }
    if (!index_.emplace(names_[i], i).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate class name '" + names_[i] + "'");
    }
  }
}

const std::string& ClassVocabulary::name(int index) const
{
  if (index < 0 || index >= size()) {
    throw Error(ErrorCode::IndexOutOfRange, "class index " + std::to_string(index));
  }
  return names_[index];
}

std::optional<int> ClassVocabulary::find(const std::string& name) const
{
  auto it = index_.find(name);
  if (it == index_.end()) {
    return std::nullopt;
  }
  return it->second;
}

int ClassVocabulary::index_of(const std::string& name) const
{
  auto idx = find(name);
  if (!idx) {
    throw Error(ErrorCode::UnknownClass, "'" + name + "' is not in the class vocabulary");
  }
  return *idx;
}

std::string to_string(FusionInputs inputs)
{
  switch (inputs) {
  case FusionInputs::Full: return "full";
  case FusionInputs::StereoOnly: return "stereo_only";
  case FusionInputs::TextOnly: return "text_only";
  }
  return "full";
}

FusionInputs fusion_inputs_from_string(const std::string& s)
{
  if (s == "full") return FusionInputs::Full;
  if (s == "stereo_only") return FusionInputs::StereoOnly;
  if (s == "text_only") return FusionInputs::TextOnly;
  throw Error(ErrorCode::InvalidConfig, "unknown fusion_inputs '" + s + "'");
}

void TrainConfig::validate() const
{
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
  if (epochs <= 0) fail("epochs must be positive");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be finite and >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) fail("adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) fail("adam_beta2 must be in [0, 1)");
  if (!(adam_epsilon > 0.0)) fail("adam_epsilon must be positive");
  if (!(lambda_mse >= 0.0) || !(mu_ce >= 0.0)) fail("loss weights must be >= 0");
  if (lambda_mse == 0.0 && mu_ce == 0.0) fail("lambda_mse and mu_ce cannot both be zero");
  if (projection_dim <= 0) fail("projection_dim must be positive");
  if (classifier_hidden < 0 || regression_hidden < 0) fail("hidden sizes must be >= 0");
  if (!(teacher_forcing >= 0.0 && teacher_forcing <= 1.0)) fail("teacher_forcing must be in [0, 1]");
  if (n_images <= 0) fail("n_images must be positive");
  if (template_id < 0 || template_id > 5) fail("template_id must be in [0, 5]");
  if (volume_decimals < 0 || volume_decimals > 6) fail("volume_decimals must be in [0, 6]");
}

const StereoSample& validate_sample(const StereoSample& sample, const ClassVocabulary& vocab)
{
  if (sample.class_label.empty() || !vocab.contains(sample.class_label)) {
    throw Error(ErrorCode::UnknownClass, "item '" + sample.item_id + "' has class '" + sample.class_label + "'");
  }
  if (!(sample.volume_ml > 0.0) || !std::isfinite(sample.volume_ml)) {
    throw Error(ErrorCode::NonPositiveVolume, "item '" + sample.item_id + "' volume " + std::to_string(sample.volume_ml));
  }
  if (sample.frame_left < 0 || sample.frame_right < 0) {
    throw Error(ErrorCode::DegenerateFramePair, "item '" + sample.item_id + "' has negative frame index");
  }
  if (sample.frame_left == sample.frame_right) {
    throw Error(ErrorCode::DegenerateFramePair,
                "item '" + sample.item_id + "' uses frame " + std::to_string(sample.frame_left) + " twice");
  }
  return sample;
}

double Rng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * M_PI * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

} // namespace stereovol
