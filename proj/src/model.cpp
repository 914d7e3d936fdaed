#include "stereovol/model.hpp"

#include "stereovol/error.hpp"
#include "stereovol/rng.hpp"

#include <cmath>

namespace stereovol {

void ModelDims::validate() const
{
  if (image_dim < 1 || n_images < 1 || text_dim < 1 || projection_dim < 1 || regression_hidden < 1 ||
      classifier_hidden < 0) {
    throw Error(ErrorCode::ShapeMismatch, "model dimensions must be positive");
  }
  if (num_classes < 2) {
    throw Error(ErrorCode::ShapeMismatch, "classifier needs at least 2 classes");
  }
}

ModelDims make_dims(const TrainConfig& config, int image_dim, int text_dim, int num_classes)
{
  ModelDims d;
  d.image_dim = image_dim;
  d.n_images = config.n_images;
  d.text_dim = text_dim;
  d.projection_dim = config.projection_dim;
  d.classifier_hidden = config.classifier_hidden;
  d.regression_hidden = config.effective_regression_hidden();
  d.num_classes = num_classes;
  d.validate();
  return d;
}

namespace {

Affine zero_affine(int out, int in)
{
  return {Matrix::Zero(out, in), Vector::Zero(out)};
}

void init_affine(Affine& layer, Rng& rng)
{
  const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in()));
  for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      layer.weight(r, c) = rng.uniform(-bound, bound);
    }
  }
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
    layer.bias(r) = rng.uniform(-bound, bound);
  }
}

template<typename AffineT, typename Out>
void push_affine(AffineT& layer, Out& out)
{
  out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
  out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
}

Matrix relu(const Matrix& m)
{
  return m.cwiseMax(0.0);
}

void check_affine(const Affine& a, int out, int in, const char* what)
{
  if (a.weight.rows() != out || a.weight.cols() != in || a.bias.size() != out) {
    throw Error(ErrorCode::ShapeMismatch, std::string(what) + " has shape " + std::to_string(a.weight.rows()) + "x" +
                                              std::to_string(a.weight.cols()) + ", expected " + std::to_string(out) +
                                              "x" + std::to_string(in));
  }
}

} // namespace

FusionModelParams FusionModelParams::zeros(const ModelDims& dims)
{
  dims.validate();
  FusionModelParams p;
  p.dims = dims;
  if (dims.classifier_hidden > 0) {
    p.classifier.push_back(zero_affine(dims.classifier_hidden, dims.stereo_dim()));
    p.classifier.push_back(zero_affine(dims.num_classes, dims.classifier_hidden));
  } else {
    p.classifier.push_back(zero_affine(dims.num_classes, dims.stereo_dim()));
  }
  p.projection = zero_affine(dims.projection_dim, dims.combine_dim());
  p.regression_hidden = zero_affine(dims.regression_hidden, dims.projection_dim);
  p.regression_out = zero_affine(1, dims.regression_hidden);
  return p;
}

FusionModelParams FusionModelParams::init(const ModelDims& dims, std::uint64_t seed)
{
  FusionModelParams p = zeros(dims);
  Rng rng(derive_seed(seed, "init"));
  for (auto& layer : p.classifier) {
    init_affine(layer, rng);
  }
  init_affine(p.projection, rng);
  init_affine(p.regression_hidden, rng);
  init_affine(p.regression_out, rng);
  return p;
}

std::vector<std::span<double>> FusionModelParams::tensors()
{
  std::vector<std::span<double>> out;
  for (auto& layer : classifier) {
    push_affine(layer, out);
  }
  push_affine(projection, out);
  push_affine(regression_hidden, out);
  push_affine(regression_out, out);
  return out;
}

std::vector<std::span<const double>> FusionModelParams::tensors() const
{
  std::vector<std::span<const double>> out;
  for (const auto& layer : classifier) {
    push_affine(layer, out);
  }
  push_affine(projection, out);
  push_affine(regression_hidden, out);
  push_affine(regression_out, out);
  return out;
}

std::size_t FusionModelParams::parameter_count() const
{
  std::size_t n = 0;
  for (auto t : tensors()) {
    n += t.size();
  }
  return n;
}

bool FusionModelParams::all_finite() const
{
  for (auto t : tensors()) {
    for (double v : t) {
      if (!std::isfinite(v)) {
        return false;
      }
    }
  }
  return true;
}

void FusionModelParams::check_shapes() const
{
  dims.validate();
  if (dims.classifier_hidden > 0) {
    if (classifier.size() != 2) {
      throw Error(ErrorCode::ShapeMismatch, "classifier must have two layers");
    }
    check_affine(classifier[0], dims.classifier_hidden, dims.stereo_dim(), "classifier hidden");
    check_affine(classifier[1], dims.num_classes, dims.classifier_hidden, "classifier output");
  } else {
    if (classifier.size() != 1) {
      throw Error(ErrorCode::ShapeMismatch, "classifier must have one layer");
    }
    check_affine(classifier[0], dims.num_classes, dims.stereo_dim(), "classifier");
  }
  check_affine(projection, dims.projection_dim, dims.combine_dim(), "projection");
  check_affine(regression_hidden, dims.regression_hidden, dims.projection_dim, "regression hidden");
  check_affine(regression_out, 1, dims.regression_hidden, "regression output");
}

PromptBank PromptBank::build(const ClassVocabulary& vocab, const VolumePriorTable& priors, const PromptTemplate& tmpl,
                             int decimals, const TextEncoder& text_encoder)
{
  PromptBank bank;
  bank.features.resize(text_encoder.output_dim(), vocab.size());
  for (int c = 0; c < vocab.size(); ++c) {
    const std::string& label = vocab.name(c);
    bank.prompts.push_back(render_prompt(tmpl, label, prior_for_prediction(priors, label), decimals));
    const EmbeddingVector e = text_encoder.encode(bank.prompts.back());
    if (e.dim() != text_encoder.output_dim()) {
      throw Error(ErrorCode::DimMismatch, "text encoder returned wrong dimension");
    }
    bank.features.col(c) = e.values();
  }
  return bank;
}

namespace {

int argmax(const Eigen::Ref<const Vector>& v)
{
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

Vector classifier_logits(const FusionModelParams& p, const Vector& stereo)
{
  Vector x = stereo;
  for (std::size_t l = 0; l < p.classifier.size(); ++l) {
    x = p.classifier[l].weight * x + p.classifier[l].bias;
    if (l + 1 < p.classifier.size()) {
      x = x.cwiseMax(0.0);
    }
  }
  return x;
}

template<typename TextFn>
ForwardTrace forward_impl(const FusionModelParams& params, std::span<const EmbeddingVector> views,
                          const ModelContext& ctx, TextFn&& text_for)
{
  const auto& d = params.dims;
  if (static_cast<int>(views.size()) != d.n_images) {
    throw Error(ErrorCode::DimMismatch,
                "model expects " + std::to_string(d.n_images) + " views, got " + std::to_string(views.size()));
  }
  for (const auto& v : views) {
    if (v.dim() != d.image_dim) {
      throw Error(ErrorCode::DimMismatch,
                  "image embedding has dim " + std::to_string(v.dim()) + ", model expects " + std::to_string(d.image_dim));
    }
  }
  if (ctx.vocab.size() != d.num_classes) {
    throw Error(ErrorCode::DimMismatch, "vocabulary size does not match classifier");
  }

  ForwardTrace t;
  for (const auto& v : views) {
    t.views.push_back(v.values());
  }
  t.stereo = concat_views(views);
  t.class_logits = classifier_logits(params, t.stereo);
  t.predicted_class = argmax(t.class_logits);
  t.predicted_label = ctx.vocab.name(t.predicted_class);
  t.prior_ml = prior_for_prediction(ctx.priors, t.predicted_label);
  auto [prompt, text] = text_for(t.predicted_class, t.predicted_label, t.prior_ml);
  t.prompt = std::move(prompt);
  t.text = std::move(text);
  if (t.text.size() != d.text_dim) {
    throw Error(ErrorCode::DimMismatch, "text embedding has dim " + std::to_string(t.text.size()));
  }

  t.combine.resize(d.combine_dim());
  t.combine.head(d.stereo_dim()) = ctx.inputs == FusionInputs::TextOnly ? Vector::Zero(d.stereo_dim()) : t.stereo;
  t.combine.tail(d.text_dim) = ctx.inputs == FusionInputs::StereoOnly ? Vector::Zero(d.text_dim) : t.text;
  t.fused = (params.projection.weight * t.combine + params.projection.bias).cwiseMax(0.0);
  const Vector hidden = (params.regression_hidden.weight * t.fused + params.regression_hidden.bias).cwiseMax(0.0);
  const double out = params.regression_out.weight.row(0).dot(hidden) + params.regression_out.bias(0);
  t.volume_ml = params.target_offset + params.target_scale * out;
  return t;
}

} // namespace

ForwardTrace forward(const FusionModelParams& params, std::span<const EmbeddingVector> views,
                     const ModelContext& ctx, const TextEncoder& text_encoder)
{
  return forward_impl(params, views, ctx, [&](int, const std::string& label, double prior) {
    std::string prompt = render_prompt(ctx.tmpl, label, prior, ctx.decimals);
    Vector text = text_encoder.encode(prompt).values();
    return std::pair{std::move(prompt), std::move(text)};
  });
}

ForwardTrace forward(const FusionModelParams& params, std::span<const EmbeddingVector> views,
                     const ModelContext& ctx, const PromptBank& bank)
{
  return forward_impl(params, views, ctx, [&](int c, const std::string&, double) {
    return std::pair{bank.prompts.at(static_cast<std::size_t>(c)), Vector(bank.features.col(c))};
  });
}

double mse_loss(std::span<const double> estimates, std::span<const double> targets)
{
  if (estimates.size() != targets.size()) {
    throw Error(ErrorCode::LengthMismatch, "estimates and targets differ in length");
  }
  if (estimates.empty()) {
    throw Error(ErrorCode::EmptyBatch, "mse of an empty batch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    const double d = targets[i] - estimates[i];
    sum += d * d;
  }
  return sum / static_cast<double>(estimates.size());
}

namespace {

// Column-wise softmax probabilities and the per-column log-sum-exp.
Matrix softmax_columns(const Matrix& logits, Vector& log_z)
{
  Matrix p(logits.rows(), logits.cols());
  log_z.resize(logits.cols());
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    const double m = logits.col(i).maxCoeff();
    const Vector e = (logits.col(i).array() - m).exp().matrix();
    const double z = e.sum();
    p.col(i) = e / z;
    log_z(i) = m + std::log(z);
  }
  return p;
}

} // namespace

double ce_loss(const Matrix& logits, std::span<const int> targets)
{
  if (static_cast<std::size_t>(logits.cols()) != targets.size()) {
    throw Error(ErrorCode::LengthMismatch, "logit columns and targets differ in length");
  }
  if (targets.empty()) {
    throw Error(ErrorCode::EmptyBatch, "cross-entropy of an empty batch");
  }
  if (logits.rows() < 2) {
    throw Error(ErrorCode::IndexOutOfRange, "cross-entropy needs at least 2 classes");
  }
  Vector log_z;
  softmax_columns(logits, log_z);
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] < 0 || targets[i] >= logits.rows()) {
      throw Error(ErrorCode::IndexOutOfRange, "target class " + std::to_string(targets[i]));
    }
    sum += log_z(static_cast<Eigen::Index>(i)) - logits(targets[i], static_cast<Eigen::Index>(i));
  }
  return sum / static_cast<double>(targets.size());
}

double combined_loss(double mse, double ce, double lambda, double mu)
{
  return lambda * mse + mu * ce;
}

BatchActivations forward_batch(const FusionModelParams& params, const Matrix& text_features, const Batch& batch,
                               FusionInputs inputs)
{
  const auto& d = params.dims;
  const int n = batch.size();
  if (n == 0) {
    throw Error(ErrorCode::EmptyBatch, "empty batch");
  }
  if (batch.stereo.rows() != d.stereo_dim()) {
    throw Error(ErrorCode::DimMismatch, "batch stereo features have " + std::to_string(batch.stereo.rows()) +
                                            " rows, model expects " + std::to_string(d.stereo_dim()));
  }
  if (text_features.rows() != d.text_dim || text_features.cols() != d.num_classes) {
    throw Error(ErrorCode::DimMismatch, "text feature bank has wrong shape");
  }
  if (batch.volumes.size() != n || static_cast<int>(batch.labels.size()) != n) {
    throw Error(ErrorCode::LengthMismatch, "batch fields differ in length");
  }

  BatchActivations a;
  Matrix x = batch.stereo;
  for (std::size_t l = 0; l < params.classifier.size(); ++l) {
    Matrix pre = (params.classifier[l].weight * x).colwise() + params.classifier[l].bias;
    x = l + 1 < params.classifier.size() ? relu(pre) : pre;
    a.classifier_pre.push_back(std::move(pre));
  }
  const Matrix& logits = a.classifier_pre.back();

  a.predicted.resize(n);
  a.prompt_class.resize(n);
  a.combine.resize(d.combine_dim(), n);
  for (int i = 0; i < n; ++i) {
    a.predicted[i] = argmax(logits.col(i));
    const bool forced = !batch.teacher_force.empty() && batch.teacher_force[static_cast<std::size_t>(i)];
    a.prompt_class[i] = forced ? batch.labels[static_cast<std::size_t>(i)] : a.predicted[i];
    if (inputs == FusionInputs::TextOnly) {
      a.combine.col(i).head(d.stereo_dim()).setZero();
    } else {
      a.combine.col(i).head(d.stereo_dim()) = batch.stereo.col(i);
    }
    if (inputs == FusionInputs::StereoOnly) {
      a.combine.col(i).tail(d.text_dim).setZero();
    } else {
      a.combine.col(i).tail(d.text_dim) = text_features.col(a.prompt_class[i]);
    }
  }
  a.projection_pre = (params.projection.weight * a.combine).colwise() + params.projection.bias;
  a.fused = relu(a.projection_pre);
  a.hidden_pre = (params.regression_hidden.weight * a.fused).colwise() + params.regression_hidden.bias;
  a.hidden = relu(a.hidden_pre);
  a.output = (params.regression_out.weight * a.hidden).row(0).transpose().array() + params.regression_out.bias(0);
  return a;
}

namespace {

Vector standardized_targets(const FusionModelParams& p, const Vector& volumes)
{
  return ((volumes.array() - p.target_offset) / p.target_scale).matrix();
}

LossBreakdown losses_from(const FusionModelParams& params, const BatchActivations& a, const Batch& batch,
                          const LossWeights& w)
{
  const Vector t = standardized_targets(params, batch.volumes);
  LossBreakdown out;
  out.mse = mse_loss(std::span<const double>(a.output.data(), static_cast<std::size_t>(a.output.size())),
                     std::span<const double>(t.data(), static_cast<std::size_t>(t.size())));
  out.ce = ce_loss(a.classifier_pre.back(), batch.labels);
  out.total = combined_loss(out.mse, out.ce, w.lambda, w.mu);
  return out;
}

} // namespace

LossBreakdown batch_loss(const FusionModelParams& params, const Matrix& text_features, const Batch& batch,
                         FusionInputs inputs, const LossWeights& weights)
{
  return losses_from(params, forward_batch(params, text_features, batch, inputs), batch, weights);
}

LossBreakdown loss_and_gradient(const FusionModelParams& params, const Matrix& text_features, const Batch& batch,
                                FusionInputs inputs, const LossWeights& weights, FusionModelParams& grad)
{
  const BatchActivations a = forward_batch(params, text_features, batch, inputs);
  const LossBreakdown loss = losses_from(params, a, batch, weights);
  const int n = batch.size();
  const double inv_n = 1.0 / n;

  grad = FusionModelParams::zeros(params.dims);
  grad.target_offset = params.target_offset;
  grad.target_scale = params.target_scale;

  // Regression branch: d(lambda * MSE)/d(output) = lambda * 2/N * (output - target).
  const Vector t = standardized_targets(params, batch.volumes);
  const Eigen::RowVectorXd d_out = (weights.lambda * 2.0 * inv_n * (a.output - t)).transpose();
  grad.regression_out.weight = d_out * a.hidden.transpose();
  grad.regression_out.bias(0) = d_out.sum();

  const Matrix d_hidden_pre =
      (params.regression_out.weight.transpose() * d_out).cwiseProduct((a.hidden_pre.array() > 0.0).cast<double>().matrix());
  grad.regression_hidden.weight = d_hidden_pre * a.fused.transpose();
  grad.regression_hidden.bias = d_hidden_pre.rowwise().sum();

  const Matrix d_proj_pre = (params.regression_hidden.weight.transpose() * d_hidden_pre)
                                .cwiseProduct((a.projection_pre.array() > 0.0).cast<double>().matrix());
  grad.projection.weight = d_proj_pre * a.combine.transpose();
  grad.projection.bias = d_proj_pre.rowwise().sum();

  // Classifier branch: d(mu * CE)/d(logits) = mu/N * (softmax - onehot).
  Vector log_z;
  Matrix d_logits = softmax_columns(a.classifier_pre.back(), log_z);
  for (int i = 0; i < n; ++i) {
    d_logits(batch.labels[static_cast<std::size_t>(i)], i) -= 1.0;
  }
  d_logits *= weights.mu * inv_n;

  Matrix upstream = d_logits;
  for (std::size_t l = params.classifier.size(); l-- > 0;) {
    const Matrix input = l == 0 ? batch.stereo : relu(a.classifier_pre[l - 1]);
    grad.classifier[l].weight = upstream * input.transpose();
    grad.classifier[l].bias = upstream.rowwise().sum();
    if (l > 0) {
      upstream = (params.classifier[l].weight.transpose() * upstream)
                     .cwiseProduct((a.classifier_pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return loss;
}

std::uint64_t fusion_head_flops(const ModelDims& d)
{
  auto affine = [](std::uint64_t in, std::uint64_t out) { return 2 * in * out; };
  const std::uint64_t s = static_cast<std::uint64_t>(d.stereo_dim());
  const std::uint64_t c = static_cast<std::uint64_t>(d.num_classes);
  const std::uint64_t k = static_cast<std::uint64_t>(d.projection_dim);
  const std::uint64_t r = static_cast<std::uint64_t>(d.regression_hidden);
  std::uint64_t flops = 0;
  if (d.classifier_hidden > 0) {
    const std::uint64_t h = static_cast<std::uint64_t>(d.classifier_hidden);
    flops += affine(s, h) + h + affine(h, c);
  } else {
    flops += affine(s, c);
  }
  flops += affine(static_cast<std::uint64_t>(d.combine_dim()), k) + k;
  flops += affine(k, r) + r + affine(r, 1);
  return flops;
}

} // namespace stereovol
