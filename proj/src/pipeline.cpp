#include "stereovol/pipeline.hpp"

#include "stereovol/error.hpp"

#include <cstdlib>
#include <set>

namespace stereovol {

EncoderPair make_encoders(const EncoderSpec& image, const EncoderSpec& text,
                          std::optional<std::filesystem::path> cache_dir)
{
  if (!cache_dir) {
    if (const char* env = std::getenv(kCacheDirEnv); env && *env) {
      cache_dir = std::filesystem::path(env);
    }
  }
  const auto& registry = EncoderRegistry::instance();
  return {registry.make_image(image, cache_dir), registry.make_text(text, cache_dir)};
}

PredictionSet predict(const Checkpoint& ckpt, std::span<const StereoSample> samples, const ImageEncoder& image_encoder,
                      const TextEncoder& text_encoder)
{
  check_encoders(ckpt, image_encoder, text_encoder);
  std::set<std::string> ids;
  for (const auto& s : samples) {
    if (!ids.insert(s.item_id).second) {
      throw Error(ErrorCode::InvalidConfig, "prediction manifest lists item '" + s.item_id + "' more than once");
    }
  }

  const auto& params = ckpt.params;
  const PromptTemplate tmpl = PromptTemplate::builtin(ckpt.config.template_id);
  const PromptBank bank =
      PromptBank::build(ckpt.vocab, ckpt.priors, tmpl, ckpt.config.volume_decimals, text_encoder);
  const ModelContext ctx{ckpt.vocab, ckpt.priors, tmpl, ckpt.config.volume_decimals, ckpt.config.fusion_inputs};
  ImageEmbeddingCache cache(std::shared_ptr<const ImageEncoder>(&image_encoder, [](const ImageEncoder*) {}));

  PredictionSet out;
  out.records.reserve(samples.size());
  for (const auto& s : samples) {
    const auto views = s.views();
    if (static_cast<int>(views.size()) < params.dims.n_images) {
      throw Error(ErrorCode::DimMismatch, "item '" + s.item_id + "' has fewer views than the model uses");
    }
    std::vector<EmbeddingVector> embeddings;
    for (int k = 0; k < params.dims.n_images; ++k) {
      embeddings.push_back(cache.get(views[static_cast<std::size_t>(k)]));
    }
    const ForwardTrace t = forward(params, embeddings, ctx, bank);
    PredictionRecord r;
    r.item_id = s.item_id;
    r.class_label = s.class_label;
    r.predicted_class = t.predicted_label;
    r.volume_est_ml = t.volume_ml;
    r.volume_gt_ml = s.volume_ml;
    r.prompt = t.prompt;
    out.records.push_back(std::move(r));
  }
  return out;
}

ExperimentResult run_experiment(const TrainConfig& config, const ExperimentData& data, const EncoderPair& encoders,
                                const EncoderSpec& image_spec, const EncoderSpec& text_spec)
{
  const TrainInputs inputs{data.train, data.vocab, data.priors, *encoders.image, *encoders.text,
                           image_spec, text_spec, {}};
  ExperimentResult result;
  result.training = train(config, inputs);
  const Checkpoint ckpt = make_checkpoint(result.training.final_params, config, inputs);
  result.predictions = predict(ckpt, data.test, *encoders.image, *encoders.text);
  result.metrics = compute_metrics(result.predictions);
  return result;
}

namespace {

std::optional<int> suffix_int(const std::string& name, const std::string& prefix)
{
  if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) {
    return std::nullopt;
  }
  const std::string digits = name.substr(prefix.size());
  if (digits.find_first_not_of("0123456789") != std::string::npos || digits.size() > 6) {
    throw Error(ErrorCode::InvalidConfig, "bad ablation variant '" + name + "'");
  }
  return std::stoi(digits);
}

} // namespace

AblationVariant AblationVariant::parse(const std::string& name)
{
  AblationVariant v;
  v.name = name;
  if (name == "full" || name == "stereo_only" || name == "text_only") {
    v.inputs = fusion_inputs_from_string(name);
  } else if (auto k = suffix_int(name, "prompt_template_")) {
    if (*k < 0 || *k >= PromptTemplate::kBuiltinCount) {
      throw Error(ErrorCode::InvalidConfig, "no built-in prompt template " + std::to_string(*k));
    }
    v.template_id = *k;
  } else if (auto n = suffix_int(name, "n_images_")) {
    if (*n < 1) {
      throw Error(ErrorCode::InvalidConfig, "n_images must be positive");
    }
    v.n_images = *n;
  } else {
    throw Error(ErrorCode::InvalidConfig,
                "unknown ablation variant '" + name +
                    "' (expected full, stereo_only, text_only, prompt_template_<k> or n_images_<n>)");
  }
  return v;
}

TrainConfig AblationVariant::apply(TrainConfig config) const
{
  if (inputs) {
    config.fusion_inputs = *inputs;
  }
  if (template_id) {
    config.template_id = *template_id;
  }
  if (n_images) {
    config.n_images = *n_images;
  }
  config.validate();
  return config;
}

ExperimentResult run_ablation(const AblationVariant& variant, const TrainConfig& base, const ExperimentData& data,
                              const EncoderPair& encoders, const EncoderSpec& image_spec, const EncoderSpec& text_spec)
{
  return run_experiment(variant.apply(base), data, encoders, image_spec, text_spec);
}

} // namespace stereovol
