#include "stereovol/error.hpp"
#include "stereovol/rng.hpp"
#include "stereovol/types.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

using namespace stereovol;

namespace {

template<typename F>
ErrorCode code_of(F&& f)
{
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

StereoSample apple()
{
  auto img = std::make_shared<const Image>(4, 4, 0.5f);
  return testkit::in_memory_sample("a1", "apple", 180.0, img, img);
}

} // namespace

TEST(ValidateSample, PassesValidSampleThrough)
{
  ClassVocabulary vocab({"apple", "pear"});
  const auto s = apple();
  const auto& out = validate_sample(s, vocab);
  EXPECT_EQ(&out, &s);
}

TEST(ValidateSample, RejectsZeroVolume)
{
  ClassVocabulary vocab({"apple"});
  auto s = apple();
  s.volume_ml = 0.0;
  EXPECT_EQ(code_of([&] { validate_sample(s, vocab); }), ErrorCode::NonPositiveVolume);
  s.volume_ml = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { validate_sample(s, vocab); }), ErrorCode::NonPositiveVolume);
}

TEST(ValidateSample, RejectsRepeatedFrame)
{
  ClassVocabulary vocab({"apple"});
  auto s = apple();
  s.frame_left = 7;
  s.frame_right = 7;
  EXPECT_EQ(code_of([&] { validate_sample(s, vocab); }), ErrorCode::DegenerateFramePair);
}

TEST(ValidateSample, RejectsUnknownClass)
{
  ClassVocabulary vocab({"pear"});
  EXPECT_EQ(code_of([&] { validate_sample(apple(), vocab); }), ErrorCode::UnknownClass);
}

TEST(ClassVocabulary, IndexesAndRejectsDuplicates)
{
  ClassVocabulary vocab({"apple", "pear", "fig"});
  EXPECT_EQ(vocab.size(), 3);
  EXPECT_EQ(vocab.index_of("fig"), 2);
  EXPECT_EQ(vocab.name(1), "pear");
  EXPECT_FALSE(vocab.find("kiwi").has_value());
  EXPECT_EQ(code_of([&] { vocab.index_of("kiwi"); }), ErrorCode::UnknownClass);
  EXPECT_EQ(code_of([&] { vocab.name(3); }), ErrorCode::IndexOutOfRange);
  EXPECT_EQ(code_of([] { ClassVocabulary({"a", "a"}); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { ClassVocabulary({""}); }), ErrorCode::InvalidConfig);
}

TEST(EmbeddingVector, RejectsEmptyAndNonFinite)
{
  EXPECT_THROW(EmbeddingVector{Vector()}, Error);
  Vector v = Vector::Ones(3);
  v(1) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(EmbeddingVector{v}, Error);
}

TEST(ConcatViews, OrderedLeftFirst)
{
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int d = 1 + static_cast<int>(rng.index(9));
    EmbeddingVector l(testkit::random_vector(rng, d));
    EmbeddingVector r(testkit::random_vector(rng, d));
    std::vector<EmbeddingVector> lr{l, r};
    std::vector<EmbeddingVector> rl{r, l};
    const Vector a = concat_views(lr);
    ASSERT_EQ(a.size(), 2 * d);
    EXPECT_EQ(a.head(d), l.values());
    EXPECT_EQ(a.tail(d), r.values());
    EXPECT_NE(a, concat_views(rl));
  }
}

TEST(TrainConfig, DefaultsAreValid)
{
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.lambda_mse, 1.0);
  EXPECT_EQ(c.mu_ce, 0.5);
  EXPECT_EQ(c.batch_size, 64);
  EXPECT_EQ(c.epochs, 100);
  EXPECT_EQ(c.effective_regression_hidden(), 256);
}

TEST(TrainConfig, RejectsEachBrokenField)
{
  auto broken = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return code_of([&] { c.validate(); });
  };
  EXPECT_EQ(broken([](TrainConfig& c) { c.epochs = 0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.batch_size = -1; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.learning_rate = -1e-3; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.adam_beta1 = 1.0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.adam_epsilon = 0.0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.lambda_mse = 0.0; c.mu_ce = 0.0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.teacher_forcing = 1.5; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.template_id = 6; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(broken([](TrainConfig& c) { c.n_images = 0; }), ErrorCode::InvalidConfig);
}

TEST(FusionInputs, StringRoundTrip)
{
  for (auto f : {FusionInputs::Full, FusionInputs::StereoOnly, FusionInputs::TextOnly}) {
    EXPECT_EQ(fusion_inputs_from_string(to_string(f)), f);
  }
  EXPECT_THROW(fusion_inputs_from_string("both"), Error);
}

TEST(ErrorFamilies, ExitCodesAreDistinct)
{
  std::set<int> codes;
  for (auto f : {ErrorFamily::Config, ErrorFamily::Data, ErrorFamily::Model, ErrorFamily::Numerical,
                 ErrorFamily::External, ErrorFamily::Io}) {
    const int c = exit_code_for(f);
    EXPECT_GT(c, 1);
    codes.insert(c);
  }
  EXPECT_EQ(codes.size(), 6u);
  EXPECT_EQ(family_of(ErrorCode::NonFiniteLoss), ErrorFamily::Numerical);
  EXPECT_EQ(family_of(ErrorCode::TransportFailure), ErrorFamily::External);
}

TEST(Rng, UniformStaysInRangeAndIndexIsUnbiasedEnough)
{
  Rng rng(11);
  std::array<int, 5> counts{};
  for (int i = 0; i < 50000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    ++counts[rng.index(5)];
  }
  for (int c : counts) {
    EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
  }
}

TEST(Rng, NormalMoments)
{
  Rng rng(5);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Rng, SameSeedSameStream)
{
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(a.next(), b.next());
  }
  EXPECT_NE(derive_seed(1, "x"), derive_seed(1, "y"));
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}
