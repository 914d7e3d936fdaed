#pragma once

#include "stereovol/encoders.hpp"
#include "stereovol/priors.hpp"
#include "stereovol/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stereovol {

struct ModelDims {
  int image_dim = 768;
  int n_images = 2;
  int text_dim = 768;
  int projection_dim = 512;
  int classifier_hidden = 0; // 0: single affine layer
  int regression_hidden = 256;
  int num_classes = 2;

  int stereo_dim() const noexcept { return n_images * image_dim; }
  int combine_dim() const noexcept { return stereo_dim() + text_dim; }

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

ModelDims make_dims(const TrainConfig& config, int image_dim, int text_dim, int num_classes);

struct Affine {
  Matrix weight; // out x in
  Vector bias;   // out

  int in() const noexcept { return static_cast<int>(weight.cols()); }
  int out() const noexcept { return static_cast<int>(weight.rows()); }
};

/// Trainable weights: classifier on the stereo feature, projection of
/// [stereo; text] with ReLU, and a two-layer regression head.
struct FusionModelParams {
  ModelDims dims;
  std::vector<Affine> classifier; // one layer, or hidden + output
  Affine projection;
  Affine regression_hidden;
  Affine regression_out;
  // Fixed affine map from head output to mL; identity unless targets are standardized.
  double target_offset = 0.0;
  double target_scale = 1.0;

  static FusionModelParams zeros(const ModelDims& dims);
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
  static FusionModelParams init(const ModelDims& dims, std::uint64_t seed);

  /// Every trainable tensor as a flat span, in a fixed order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;
  std::size_t parameter_count() const;
  bool all_finite() const;
  /// Shape agreement with `dims`; throws ShapeMismatch.
  void check_shapes() const;
};

/// Prompt and text embedding for every class, computed once since priors are
/// fixed during a run. Column c of `features` encodes `prompts[c]`.
struct PromptBank {
  std::vector<std::string> prompts;
  Matrix features; // text_dim x C

  static PromptBank build(const ClassVocabulary& vocab, const VolumePriorTable& priors, const PromptTemplate& tmpl,
                          int decimals, const TextEncoder& text_encoder);
};

struct ForwardTrace {
  std::vector<Vector> views; // F_L, F_R (, further views)
  Vector stereo;             // [F_L; F_R]
  Vector class_logits;
  int predicted_class = -1;
  std::string predicted_label;
  double prior_ml = 0.0;
  std::string prompt;
  Vector text;
  Vector combine; // [stereo; text], with a zeroed branch under ablation
  Vector fused;
  double volume_ml = 0.0;
};

struct ModelContext {
  const ClassVocabulary& vocab;
  const VolumePriorTable& priors;
  PromptTemplate tmpl;
  int decimals = 1;
  FusionInputs inputs = FusionInputs::Full;
};

/// Single-item pipeline with the prompt rendered and encoded live.
ForwardTrace forward(const FusionModelParams& params, std::span<const EmbeddingVector> views,
                     const ModelContext& ctx, const TextEncoder& text_encoder);

/// Same as above with text features taken from a prompt bank.
ForwardTrace forward(const FusionModelParams& params, std::span<const EmbeddingVector> views,
                     const ModelContext& ctx, const PromptBank& bank);

// Losses ---------------------------------------------------------------------

double mse_loss(std::span<const double> estimates, std::span<const double> targets);
/// Mean negative log-softmax of the target class. `logits` is C x N, one column per sample.
double ce_loss(const Matrix& logits, std::span<const int> targets);
double combined_loss(double mse, double ce, double lambda, double mu);

struct LossWeights {
  double lambda = 1.0;
  double mu = 0.5;
};

struct LossBreakdown {
  double mse = 0.0;
  double ce = 0.0;
  double total = 0.0;
};

struct Batch {
  Matrix stereo;                   // stereo_dim x N
  Vector volumes;                  // mL
  std::vector<int> labels;         // ground-truth class indices
  std::vector<char> teacher_force; // empty, or 1 where the ground-truth class selects the prompt

  int size() const noexcept { return static_cast<int>(stereo.cols()); }
};

/// Intermediate activations of a batch forward pass.
struct BatchActivations {
  std::vector<Matrix> classifier_pre; // pre-activation of each classifier layer (last = logits)
  std::vector<int> predicted;
  std::vector<int> prompt_class;
  Matrix combine;
  Matrix projection_pre;
  Matrix fused;
  Matrix hidden_pre;
  Matrix hidden;
  Vector output; // head output in model units
};

BatchActivations forward_batch(const FusionModelParams& params, const Matrix& text_features, const Batch& batch,
                               FusionInputs inputs);

LossBreakdown batch_loss(const FusionModelParams& params, const Matrix& text_features, const Batch& batch,
                         FusionInputs inputs, const LossWeights& weights);

/// Gradient of lambda * MSE + mu * CE with respect to every trainable tensor.
/// The classifier only sees the CE term; the prompt path is treated as constant.
LossBreakdown loss_and_gradient(const FusionModelParams& params, const Matrix& text_features, const Batch& batch,
                                FusionInputs inputs, const LossWeights& weights, FusionModelParams& grad);

/// Floating-point operations of one forward pass through classifier,
/// projection and regression head (2 per multiply-accumulate, 1 per ReLU).
std::uint64_t fusion_head_flops(const ModelDims& dims);

} // namespace stereovol
