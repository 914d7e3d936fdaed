#include "stereovol/error.hpp"
#include "stereovol/model.hpp"
#include "stereovol/rng.hpp"
#include "stereovol/training.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

using namespace stereovol;

namespace {

ModelDims micro_dims(int classifier_hidden = 0)
{
  ModelDims d;
  d.image_dim = 8;
  d.n_images = 2;
  d.text_dim = 8;
  d.projection_dim = 8;
  d.regression_hidden = 4;
  d.classifier_hidden = classifier_hidden;
  d.num_classes = 3;
  return d;
}

Batch random_batch(Rng& rng, const ModelDims& d, int n, bool teacher = false)
{
  Batch b;
  b.stereo = testkit::random_matrix(rng, d.stereo_dim(), n);
  b.volumes = testkit::random_vector(rng, n, 2.0);
  for (int i = 0; i < n; ++i) {
    b.labels.push_back(static_cast<int>(rng.index(static_cast<std::uint64_t>(d.num_classes))));
    if (teacher) {
      b.teacher_force.push_back(static_cast<char>(rng.index(2)));
    }
  }
  return b;
}

struct World {
  ClassVocabulary vocab{{"apple", "banana", "cherry"}};
  VolumePriorTable priors;
  HashTextEncoder text{8, 3};
  World() { priors.entries = {{"apple", 200.0}, {"banana", 120.0}, {"cherry", 8.0}}; }
  ModelContext ctx(FusionInputs inputs = FusionInputs::Full, int tmpl = 5)
  {
    return ModelContext{vocab, priors, PromptTemplate::builtin(tmpl), 1, inputs};
  }
};

std::vector<EmbeddingVector> random_views(Rng& rng, int n, int d)
{
  std::vector<EmbeddingVector> v;
  for (int i = 0; i < n; ++i) {
    v.emplace_back(testkit::random_vector(rng, d));
  }
  return v;
}

} // namespace

TEST(Losses, MseHandCases)
{
  const std::vector<double> a{1, 2}, b{1, 2};
  EXPECT_EQ(mse_loss(a, b), 0.0);
  EXPECT_EQ(mse_loss(std::vector<double>{0}, std::vector<double>{3}), 9.0);
  EXPECT_EQ(mse_loss(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 0}), 14.0 / 3.0);
  EXPECT_THROW(mse_loss(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
  EXPECT_THROW(mse_loss(std::vector<double>{}, std::vector<double>{}), Error);
}

TEST(Losses, CrossEntropyUniformIsLogC)
{
  for (int c = 2; c <= 10; ++c) {
    Matrix logits = Matrix::Constant(c, 3, 0.7);
    std::vector<int> t{0, c - 1, c / 2};
    EXPECT_NEAR(ce_loss(logits, t), std::log(static_cast<double>(c)), 1e-12);
  }
}

TEST(Losses, CrossEntropyLargeMarginVanishes)
{
  Matrix logits(3, 1);
  logits << -5.0, 20.0, 0.0;
  EXPECT_LT(ce_loss(logits, std::vector<int>{1}), 1e-3);
  logits(1, 0) = 1e6; // no overflow
  EXPECT_TRUE(std::isfinite(ce_loss(logits, std::vector<int>{0})));
}

TEST(Losses, CrossEntropyTwoSampleHandCase)
{
  Matrix logits(2, 2);
  logits << 1.0, 0.0,
            2.0, 3.0;
  // sample 0 target 0: -log(e^1 / (e^1 + e^2)) = log(1 + e)
  // sample 1 target 1: -log(e^3 / (e^0 + e^3)) = log(1 + e^-3)
  const double expected = 0.5 * (std::log(1.0 + std::exp(1.0)) + std::log(1.0 + std::exp(-3.0)));
  EXPECT_NEAR(ce_loss(logits, std::vector<int>{0, 1}), expected, 1e-14);
}

TEST(Losses, CrossEntropyRejectsBadTargets)
{
  Matrix logits = Matrix::Zero(3, 1);
  try {
    ce_loss(logits, std::vector<int>{3});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IndexOutOfRange);
  }
  EXPECT_THROW(ce_loss(Matrix::Zero(1, 1), std::vector<int>{0}), Error);
}

TEST(Losses, CombinedWeightedSum)
{
  EXPECT_EQ(combined_loss(2.0, 4.0, 1.0, 0.5), 4.0);
  EXPECT_EQ(combined_loss(0.0, 0.0, 3.0, 7.0), 0.0);
  EXPECT_EQ(combined_loss(5.0, 6.0, 0.0, 0.0), 0.0);
}

TEST(Forward, ZeroViewsGiveZeroStereo)
{
  World w;
  const auto d = micro_dims();
  const auto p = FusionModelParams::init(d, 1);
  std::vector<EmbeddingVector> views{EmbeddingVector(Vector::Zero(8)), EmbeddingVector(Vector::Zero(8))};
  const auto t = forward(p, views, w.ctx(), w.text);
  EXPECT_EQ(t.stereo, Vector::Zero(16));
}

TEST(Forward, ZeroRegressionWeightsGiveBias)
{
  World w;
  Rng rng(1);
  auto p = FusionModelParams::init(micro_dims(), 2);
  p.regression_out.weight.setZero();
  p.regression_out.bias(0) = 42.5;
  for (int i = 0; i < 20; ++i) {
    EXPECT_EQ(forward(p, random_views(rng, 2, 8), w.ctx(), w.text).volume_ml, 42.5);
  }
}

TEST(Forward, TraceInvariantsAndDeterminism)
{
  World w;
  Rng rng(2);
  const auto d = micro_dims();
  const auto p = FusionModelParams::init(d, 3);
  for (int i = 0; i < 30; ++i) {
    const auto views = random_views(rng, 2, 8);
    const auto a = forward(p, views, w.ctx(), w.text);
    const auto b = forward(p, views, w.ctx(), w.text);
    ASSERT_EQ(a.volume_ml, b.volume_ml);
    ASSERT_EQ(a.prompt, b.prompt);
    ASSERT_EQ(a.stereo.head(8), views[0].values());
    ASSERT_EQ(a.stereo.tail(8), views[1].values());
    ASSERT_EQ(a.combine.size(), d.combine_dim());
    ASSERT_EQ(a.combine.head(16), a.stereo);
    ASSERT_EQ(a.combine.tail(8), a.text);
    ASSERT_EQ(a.fused.size(), d.projection_dim);
    Eigen::Index best;
    a.class_logits.maxCoeff(&best);
    ASSERT_EQ(a.predicted_class, best);
    ASSERT_EQ(a.prompt, render_prompt(PromptTemplate::builtin(5), a.predicted_label, a.prior_ml, 1));
    ASSERT_EQ(a.prior_ml, w.priors.at(a.predicted_label));
    ASSERT_EQ(a.text, w.text.encode(a.prompt).values());
    ASSERT_TRUE(std::isfinite(a.volume_ml));
  }
}

TEST(Forward, PromptBankMatchesLiveEncoding)
{
  World w;
  Rng rng(3);
  const auto p = FusionModelParams::init(micro_dims(), 4);
  const auto bank = PromptBank::build(w.vocab, w.priors, PromptTemplate::builtin(5), 1, w.text);
  for (int i = 0; i < 20; ++i) {
    const auto views = random_views(rng, 2, 8);
    const auto live = forward(p, views, w.ctx(), w.text);
    const auto cached = forward(p, views, w.ctx(), bank);
    ASSERT_EQ(live.volume_ml, cached.volume_ml);
    ASSERT_EQ(live.prompt, cached.prompt);
  }
}

TEST(Forward, ViewOrderMatters)
{
  World w;
  Rng rng(4);
  const auto p = FusionModelParams::init(micro_dims(), 5);
  auto views = random_views(rng, 2, 8);
  const auto a = forward(p, views, w.ctx(), w.text);
  std::swap(views[0], views[1]);
  const auto b = forward(p, views, w.ctx(), w.text);
  EXPECT_NE(a.stereo, b.stereo);
  views[1] = views[0];
  const auto c = forward(p, views, w.ctx(), w.text);
  EXPECT_EQ(c.stereo.head(8), c.stereo.tail(8));
}

TEST(Forward, DimMismatch)
{
  World w;
  const auto p = FusionModelParams::init(micro_dims(), 6);
  std::vector<EmbeddingVector> wrong{EmbeddingVector(Vector::Ones(7)), EmbeddingVector(Vector::Ones(7))};
  try {
    forward(p, wrong, w.ctx(), w.text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DimMismatch);
  }
  std::vector<EmbeddingVector> one{EmbeddingVector(Vector::Ones(8))};
  EXPECT_THROW(forward(p, one, w.ctx(), w.text), Error);
  HashTextEncoder wide(9, 0);
  std::vector<EmbeddingVector> two{EmbeddingVector(Vector::Ones(8)), EmbeddingVector(Vector::Ones(8))};
  EXPECT_THROW(forward(p, two, w.ctx(), wide), Error);
}

TEST(Forward, AblationZeroesBranch)
{
  World w;
  Rng rng(5);
  const auto p = FusionModelParams::init(micro_dims(), 7);
  const auto views = random_views(rng, 2, 8);
  const auto s = forward(p, views, w.ctx(FusionInputs::StereoOnly), w.text);
  EXPECT_EQ(s.combine.tail(8), Vector::Zero(8));
  const auto t = forward(p, views, w.ctx(FusionInputs::TextOnly), w.text);
  EXPECT_EQ(t.combine.head(16), Vector::Zero(16));
}

TEST(Forward, ArgmaxInvariantUnderShiftAndScale)
{
  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const auto d = micro_dims();
    auto p = FusionModelParams::init(d, rng.next());
    const auto b = random_batch(rng, d, 5);
    const Matrix text = testkit::random_matrix(rng, 8, 3);
    const auto base = forward_batch(p, text, b, FusionInputs::Full).predicted;
    const double shift = rng.uniform(-10, 10);
    const double scale = rng.uniform(0.01, 10);
    p.classifier.back().weight *= scale;
    p.classifier.back().bias = (p.classifier.back().bias * scale).array() + shift * scale;
    ASSERT_EQ(forward_batch(p, text, b, FusionInputs::Full).predicted, base);
  }
}

TEST(Forward, PromptSensitivityAfterTraining)
{
  World w;
  Rng rng(7);
  const auto d = micro_dims();
  auto p = FusionModelParams::init(d, 8);
  const auto bank = PromptBank::build(w.vocab, w.priors, PromptTemplate::builtin(5), 1, w.text);
  auto state = AdamState::zeros(d);
  const auto batch = random_batch(rng, d, 16);
  FusionModelParams g;
  for (int step = 0; step < 50; ++step) {
    loss_and_gradient(p, bank.features, batch, FusionInputs::Full, {}, g);
    adam_step(p, g, state, 1e-2, 0.9, 0.999, 1e-8);
  }
  const auto views = random_views(rng, 2, 8);
  const double a = forward(p, views, w.ctx(FusionInputs::Full, 5), w.text).volume_ml;
  const double b = forward(p, views, w.ctx(FusionInputs::Full, 1), w.text).volume_ml;
  EXPECT_NE(a, b);
}

TEST(Gradient, RegressionBiasSignConvention)
{
  Rng rng(8);
  const auto d = micro_dims();
  const auto p = FusionModelParams::zeros(d);
  auto b = random_batch(rng, d, 6);
  b.volumes = (testkit::random_vector(rng, 6).array() + 3.0).matrix();
  FusionModelParams g;
  const double lambda = 1.7;
  loss_and_gradient(p, Matrix::Zero(8, 3), b, FusionInputs::Full, {lambda, 0.5}, g);
  EXPECT_NEAR(g.regression_out.bias(0), -2.0 * b.volumes.mean() * lambda, 1e-12);
}

TEST(Gradient, MuZeroMeansNoClassifierGradient)
{
  Rng rng(9);
  const auto d = micro_dims(5);
  const auto p = FusionModelParams::init(d, 10);
  const auto b = random_batch(rng, d, 7);
  FusionModelParams g;
  loss_and_gradient(p, testkit::random_matrix(rng, 8, 3), b, FusionInputs::Full, {1.0, 0.0}, g);
  for (const auto& layer : g.classifier) {
    EXPECT_EQ(layer.weight.norm(), 0.0);
    EXPECT_EQ(layer.bias.norm(), 0.0);
  }
  EXPECT_NE(g.regression_out.bias(0), 0.0);
}

TEST(Gradient, LambdaZeroMeansOnlyClassifierGradient)
{
  Rng rng(10);
  const auto d = micro_dims();
  const auto p = FusionModelParams::init(d, 11);
  FusionModelParams g;
  loss_and_gradient(p, testkit::random_matrix(rng, 8, 3), random_batch(rng, d, 5), FusionInputs::Full, {0.0, 1.0}, g);
  EXPECT_EQ(g.projection.weight.norm(), 0.0);
  EXPECT_EQ(g.regression_out.bias.norm(), 0.0);
  EXPECT_GT(g.classifier[0].weight.norm(), 0.0);
}

TEST(Gradient, NaiveLossAgreesWithLibraryLoss)
{
  Rng rng(11);
  for (int t = 0; t < 50; ++t) {
    const auto d = micro_dims(t % 2 ? 4 : 0);
    const auto p = FusionModelParams::init(d, rng.next());
    const auto b = random_batch(rng, d, 1 + static_cast<int>(rng.index(8)), true);
    const Matrix text = testkit::random_matrix(rng, 8, 3);
    const auto inputs = static_cast<FusionInputs>(rng.index(3));
    const auto lib = batch_loss(p, text, b, inputs, {1.0, 0.5});
    const auto ref = oracle::naive_forward(p, text, b, inputs, {1.0, 0.5});
    ASSERT_TRUE(testkit::close_rel(lib.mse, ref.mse, 1e-12, 1e-15));
    ASSERT_TRUE(testkit::close_rel(lib.ce, ref.ce, 1e-12, 1e-15));
  }
}

TEST(Gradient, FiniteDifferencesOnMicroModel)
{
  Rng rng(12);
  oracle::GradCheck total;
  for (int draw = 0; draw < 100; ++draw) {
    const auto d = micro_dims(draw % 4 == 3 ? 5 : 0);
    auto p = FusionModelParams::init(d, rng.next());
    const auto b = random_batch(rng, d, 1 + static_cast<int>(rng.index(6)), draw % 2 == 1);
    const Matrix text = testkit::random_matrix(rng, 8, 3);
    const auto inputs = static_cast<FusionInputs>(rng.index(3));
    const LossWeights w{rng.uniform(0.1, 2.0), rng.uniform(0.1, 2.0)};
    FusionModelParams g;
    loss_and_gradient(p, text, b, inputs, w, g);
    const auto r = oracle::check_gradients(p, g, text, b, inputs, w);
    total.checked += r.checked;
    total.skipped += r.skipped;
    total.failed += r.failed;
    total.worst_rel = std::max(total.worst_rel, r.worst_rel);
  }
  EXPECT_EQ(total.failed, 0u) << "worst relative error " << total.worst_rel;
  EXPECT_GT(total.checked, 20 * total.skipped);
}

TEST(Gradient, StandardizedTargets)
{
  Rng rng(13);
  const auto d = micro_dims();
  auto p = FusionModelParams::init(d, 14);
  p.target_offset = 150.0;
  p.target_scale = 40.0;
  auto b = random_batch(rng, d, 4);
  b.volumes = (testkit::random_vector(rng, 4, 50.0).array() + 150.0).matrix();
  const Matrix text = testkit::random_matrix(rng, 8, 3);
  FusionModelParams g;
  loss_and_gradient(p, text, b, FusionInputs::Full, {}, g);
  const auto r = oracle::check_gradients(p, g, text, b, FusionInputs::Full, {});
  EXPECT_EQ(r.failed, 0u);
}

TEST(Flops, InstrumentedCounterMatchesClosedForm)
{
  Rng rng(14);
  for (int t = 0; t < 30; ++t) {
    ModelDims d;
    d.image_dim = 1 + static_cast<int>(rng.index(12));
    d.n_images = 1 + static_cast<int>(rng.index(4));
    d.text_dim = 1 + static_cast<int>(rng.index(12));
    d.projection_dim = 1 + static_cast<int>(rng.index(16));
    d.regression_hidden = 1 + static_cast<int>(rng.index(8));
    d.classifier_hidden = t % 3 == 0 ? 1 + static_cast<int>(rng.index(6)) : 0;
    d.num_classes = 2 + static_cast<int>(rng.index(5));
    const auto p = FusionModelParams::init(d, rng.next());
    Batch b = random_batch(rng, d, 1);
    const Matrix text = testkit::random_matrix(rng, d.text_dim, d.num_classes);
    const auto r = oracle::naive_forward(p, text, b, FusionInputs::Full, {});
    ASSERT_EQ(r.flops, fusion_head_flops(d));
    const auto lib = forward_batch(p, text, b, FusionInputs::Full);
    ASSERT_TRUE(testkit::close_rel(lib.output(0), r.outputs[0], 1e-12, 1e-14));
  }
}

TEST(Flops, MoreViewsCostMore)
{
  ModelDims one;
  one.image_dim = 768;
  one.text_dim = 768;
  one.projection_dim = 512;
  one.regression_hidden = 256;
  one.num_classes = 100;
  one.n_images = 1;
  ModelDims two = one;
  two.n_images = 2;
  const auto diff = fusion_head_flops(two) - fusion_head_flops(one);
  EXPECT_EQ(diff, 2ull * 768 * 100 + 2ull * 768 * 512);
}

TEST(Params, ShapesCountAndInit)
{
  const auto d = micro_dims();
  const auto p = FusionModelParams::init(d, 1);
  EXPECT_NO_THROW(p.check_shapes());
  // classifier 16*3+3, projection 24*8+8, hidden 8*4+4, out 4+1
  EXPECT_EQ(p.parameter_count(), 51u + 200u + 36u + 5u);
  const double bound = 1.0 / std::sqrt(24.0);
  EXPECT_LE(p.projection.weight.cwiseAbs().maxCoeff(), bound);
  EXPECT_TRUE(p.all_finite());
  const auto q = FusionModelParams::init(d, 1);
  EXPECT_EQ(p.projection.weight, q.projection.weight);
  auto bad = p;
  bad.projection.weight.resize(3, 3);
  EXPECT_THROW(bad.check_shapes(), Error);
  auto nan = p;
  nan.regression_out.bias(0) = std::nan("");
  EXPECT_FALSE(nan.all_finite());
}

TEST(Params, DimsValidation)
{
  ModelDims d = micro_dims();
  d.num_classes = 1;
  EXPECT_THROW(d.validate(), Error);
  TrainConfig c;
  c.projection_dim = 10;
  const auto m = make_dims(c, 4, 6, 3);
  EXPECT_EQ(m.regression_hidden, 5);
  EXPECT_EQ(m.combine_dim(), 14);
}
