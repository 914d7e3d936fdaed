#include "stereovol/training.hpp"

#include "stereovol/config.hpp"
#include "stereovol/error.hpp"
#include "stereovol/rng.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace stereovol {

AdamState AdamState::zeros(const ModelDims& dims)
{
  return {FusionModelParams::zeros(dims), FusionModelParams::zeros(dims), 0};
}

void adam_step(FusionModelParams& params, const FusionModelParams& grads, AdamState& state, double lr, double beta1,
               double beta2, double epsilon)
{
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size()) {
    throw Error(ErrorCode::ShapeMismatch, "parameter, gradient and state tensors differ");
  }
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].size() != g[t].size() || p[t].size() != m[t].size() || p[t].size() != v[t].size()) {
      throw Error(ErrorCode::ShapeMismatch, "tensor " + std::to_string(t) + " differs in size");
    }
  }
  ++state.step;
  const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      const double gi = g[t][i];
      m[t][i] = beta1 * m[t][i] + (1.0 - beta1) * gi;
      v[t][i] = beta2 * v[t][i] + (1.0 - beta2) * gi * gi;
      const double m_hat = m[t][i] / correction1;
      const double v_hat = v[t][i] / correction2;
      p[t][i] -= lr * m_hat / (std::sqrt(v_hat) + epsilon);
    }
  }
}

Json RunManifest::to_json() const
{
  Json j;
  j["config"] = train_config_to_json(config);
  j["image_encoder"] = encoder_spec_to_json(image_encoder);
  j["text_encoder"] = encoder_spec_to_json(text_encoder);
  j["template_id"] = template_id;
  j["volume_decimals"] = volume_decimals;
  j["dataset_digests"] = dataset_digests;
  j["seed"] = config.seed;
  Json losses = Json::array();
  for (const auto& e : epochs) {
    losses.push_back({{"epoch", e.epoch}, {"mse", e.mse}, {"ce", e.ce}, {"total", e.total}});
  }
  j["epochs"] = losses;
  j["best_epoch"] = best_epoch;
  j["checkpoints"] = checkpoints;
  if (!notes.empty()) {
    j["notes"] = notes;
  }
  return j;
}

Vector stereo_feature(const StereoSample& sample, int n_images, ImageEmbeddingCache& cache)
{
  const auto views = sample.views();
  if (static_cast<int>(views.size()) < n_images) {
    throw Error(ErrorCode::DimMismatch, "item '" + sample.item_id + "' has " + std::to_string(views.size()) +
                                            " views, model uses " + std::to_string(n_images));
  }
  std::vector<EmbeddingVector> embeddings;
  embeddings.reserve(static_cast<std::size_t>(n_images));
  for (int k = 0; k < n_images; ++k) {
    embeddings.push_back(cache.get(views[static_cast<std::size_t>(k)]));
  }
  return concat_views(embeddings);
}

std::string digest_samples(std::span<const StereoSample> samples)
{
  std::string canon;
  for (const auto& s : samples) {
    canon += s.item_id + '\t' + s.class_label + '\t' + format_volume(s.volume_ml, 17);
    for (const auto& v : s.views()) {
      canon += '\t' + v.key;
    }
    canon += '\n';
  }
  return sha256_hex(canon);
}

namespace {

void standardize(FusionModelParams& params, std::span<const StereoSample> samples)
{
  // Statistics over distinct items.
  std::set<std::string> seen;
  std::vector<double> v;
  for (const auto& s : samples) {
    if (seen.insert(s.item_id).second) {
      v.push_back(s.volume_ml);
    }
  }
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) {
    var += (x - mean) * (x - mean);
  }
  var /= static_cast<double>(v.size());
  params.target_offset = mean;
  params.target_scale = var > 0.0 ? std::sqrt(var) : 1.0;
}

} // namespace

TrainResult train(const TrainConfig& config, const TrainInputs& in,
                  const std::function<void(const EpochRecord&)>& on_epoch)
{
  config.validate();
  if (in.samples.empty()) {
    throw Error(ErrorCode::DataEmpty, "training set is empty");
  }
  in.priors.check_covers(in.vocab);

  const ModelDims dims = make_dims(config, in.image_encoder.output_dim(), in.text_encoder.output_dim(), in.vocab.size());
  const int m = static_cast<int>(in.samples.size());

  // Frozen encoders: every view is embedded once.
  ImageEmbeddingCache cache(std::shared_ptr<const ImageEncoder>(&in.image_encoder, [](const ImageEncoder*) {}));
  Matrix stereo(dims.stereo_dim(), m);
  Vector volumes(m);
  std::vector<int> labels(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const auto& s = in.samples[static_cast<std::size_t>(i)];
    validate_sample(s, in.vocab);
    stereo.col(i) = stereo_feature(s, dims.n_images, cache);
    volumes(i) = s.volume_ml;
    labels[static_cast<std::size_t>(i)] = in.vocab.index_of(s.class_label);
  }

  const PromptTemplate tmpl = PromptTemplate::builtin(config.template_id);
  const PromptBank bank = PromptBank::build(in.vocab, in.priors, tmpl, config.volume_decimals, in.text_encoder);

  FusionModelParams params = FusionModelParams::init(dims, config.seed);
  if (config.standardize_targets) {
    standardize(params, in.samples);
  }
  AdamState state = AdamState::zeros(dims);
  const LossWeights weights{config.lambda_mse, config.mu_ce};

  TrainResult result;
  result.manifest.config = config;
  result.manifest.image_encoder = in.image_spec;
  result.manifest.text_encoder = in.text_spec;
  result.manifest.template_id = config.template_id;
  result.manifest.volume_decimals = config.volume_decimals;
  result.manifest.dataset_digests = in.dataset_digests;
  result.manifest.dataset_digests.emplace("train_samples", digest_samples(in.samples));

  Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
  Rng teacher_rng(derive_seed(config.seed, "teacher"));
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);

  double best_total = std::numeric_limits<double>::infinity();
  FusionModelParams grad;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    EpochRecord rec;
    rec.epoch = epoch;
    int batch_index = 0;
    for (int start = 0; start < m; start += config.batch_size, ++batch_index) {
      const int n = std::min(config.batch_size, m - start);
      Batch batch;
      batch.stereo.resize(dims.stereo_dim(), n);
      batch.volumes.resize(n);
      batch.labels.resize(static_cast<std::size_t>(n));
      if (config.teacher_forcing > 0.0) {
        batch.teacher_force.resize(static_cast<std::size_t>(n));
      }
      for (int k = 0; k < n; ++k) {
        const int idx = order[static_cast<std::size_t>(start + k)];
        batch.stereo.col(k) = stereo.col(idx);
        batch.volumes(k) = volumes(idx);
        batch.labels[static_cast<std::size_t>(k)] = labels[static_cast<std::size_t>(idx)];
        if (config.teacher_forcing > 0.0) {
          batch.teacher_force[static_cast<std::size_t>(k)] = teacher_rng.uniform() < config.teacher_forcing;
        }
      }
      const LossBreakdown loss = loss_and_gradient(params, bank.features, batch, config.fusion_inputs, weights, grad);
      if (!std::isfinite(loss.total)) {
        throw Error(ErrorCode::NonFiniteLoss,
                    "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_index) + " has non-finite loss");
      }
      adam_step(params, grad, state, config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_epsilon);
      if (!params.all_finite()) {
        throw Error(ErrorCode::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " +
                                                  std::to_string(batch_index) + " produced non-finite parameters");
      }
      rec.mse += loss.mse * n;
      rec.ce += loss.ce * n;
      rec.total += loss.total * n;
    }
    rec.mse /= m;
    rec.ce /= m;
    rec.total /= m;
    result.manifest.epochs.push_back(rec);
    if (rec.total < best_total) {
      best_total = rec.total;
      result.best_params = params;
      result.manifest.best_epoch = epoch;
    }
    if (on_epoch) {
      on_epoch(rec);
    }
  }
  result.final_params = std::move(params);
  return result;
}

Checkpoint make_checkpoint(const FusionModelParams& params, const TrainConfig& config, const TrainInputs& inputs)
{
  return Checkpoint{params, config, inputs.image_spec, inputs.text_spec, inputs.vocab, inputs.priors};
}

TrainResult train_to_directory(const TrainConfig& config, const TrainInputs& inputs, const std::filesystem::path& out_dir,
                               const std::function<void(const EpochRecord&)>& on_epoch)
{
  TrainResult result = train(config, inputs, on_epoch);
  std::filesystem::create_directories(out_dir);
  const auto final_path = out_dir / "final.ckpt";
  const auto best_path = out_dir / "best.ckpt";
  save_checkpoint(final_path, make_checkpoint(result.final_params, config, inputs));
  save_checkpoint(best_path, make_checkpoint(result.best_params, config, inputs));
  result.manifest.checkpoints["final"] = "final.ckpt";
  result.manifest.checkpoints["best"] = "best.ckpt";
  result.manifest.dataset_digests["final_checkpoint"] = sha256_file(final_path);
  write_json_file(out_dir / "run_manifest.json", result.manifest.to_json());
  return result;
}

} // namespace stereovol
