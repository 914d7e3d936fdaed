#include "stereovol/error.hpp"
#include "stereovol/vlm.hpp"

#include "fixtures.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <mutex>

using namespace stereovol;

namespace {

ErrorCode code_of(const std::function<void()>& f)
{
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

// Scripted answers per item, optionally failing the first few calls.
class FakeTransport final : public ChatTransport {
public:
  std::map<std::string, std::string> answers;
  std::map<std::string, int> failures_left;

  std::string name() const override { return "fake"; }
  std::string complete(const VlmQuery& q) override
  {
    std::lock_guard lock(mutex_);
    ++calls;
    seen_prompts.push_back(q.prompt);
    if (auto it = failures_left.find(q.item_id); it != failures_left.end() && it->second > 0) {
      --it->second;
      throw Error(ErrorCode::TransportFailure, "scripted failure");
    }
    return answers.at(q.item_id);
  }

  int calls = 0;
  std::vector<std::string> seen_prompts;

private:
  std::mutex mutex_;
};

std::vector<StereoSample> samples(int n)
{
  std::vector<StereoSample> out;
  auto img = std::make_shared<const Image>(2, 2, 0.5f);
  for (int i = 0; i < n; ++i) {
    out.push_back(testkit::in_memory_sample("item" + std::to_string(100 + i), i % 2 ? "banana" : "apple",
                                            10.0 + i, img, img));
  }
  return out;
}

VlmRunOptions no_sleep(VlmMode mode, std::vector<std::chrono::milliseconds>* slept = nullptr)
{
  VlmRunOptions o;
  o.mode = mode;
  static std::mutex m;
  o.sleep = [slept](std::chrono::milliseconds d) {
    if (slept) {
      std::lock_guard lock(m);
      slept->push_back(d);
    }
  };
  return o;
}

} // namespace

TEST(VlmPrompt, ListingsAreExact)
{
  EXPECT_EQ(render_vlm_prompt(VlmMode::SingleNoContext), fixtures::kVlmSingleNoContext);
  EXPECT_EQ(render_vlm_prompt(VlmMode::SingleWithContext, std::string("a banana")), fixtures::kVlmSingleBanana);
  EXPECT_EQ(render_vlm_prompt(VlmMode::Stereo), fixtures::kVlmStereo);
}

TEST(VlmPrompt, ContextRules)
{
  EXPECT_EQ(code_of([] { render_vlm_prompt(VlmMode::SingleWithContext); }), ErrorCode::MissingContext);
  EXPECT_EQ(code_of([] { render_vlm_prompt(VlmMode::SingleWithContext, std::string()); }), ErrorCode::MissingContext);
  EXPECT_EQ(code_of([] { render_vlm_prompt(VlmMode::Stereo, std::string("a banana")); }), ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { render_vlm_prompt(VlmMode::SingleNoContext, std::string("x")); }), ErrorCode::InvalidConfig);
}

TEST(VlmPrompt, DefaultContextText)
{
  EXPECT_EQ(default_context_text("banana"), "a banana");
  EXPECT_EQ(default_context_text("apple"), "an apple");
  EXPECT_EQ(default_context_text("ice_cream"), "an ice cream");
}

TEST(VlmMode, StringRoundTrip)
{
  for (auto m : {VlmMode::SingleNoContext, VlmMode::SingleWithContext, VlmMode::Stereo}) {
    EXPECT_EQ(vlm_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(vlm_mode_from_string("mono"), Error);
}

TEST(VlmParse, SingleNumber)
{
  EXPECT_EQ(parse_vlm_volume("118.5", VlmMode::SingleNoContext), 118.5);
  EXPECT_EQ(parse_vlm_volume("  42\n", VlmMode::SingleWithContext), 42.0);
  EXPECT_EQ(parse_vlm_volume("1e3", VlmMode::SingleNoContext), 1000.0);
  for (const char* bad : {"about 118 mL", "118 mL", "", "118.5.", "\"118\"", "nan", "inf"}) {
    EXPECT_EQ(code_of([&] { parse_vlm_volume(bad, VlmMode::SingleNoContext); }), ErrorCode::UnparseableResponse)
        << bad;
  }
  EXPECT_EQ(code_of([] { parse_vlm_volume("-3", VlmMode::SingleNoContext); }), ErrorCode::NonPositiveVolume);
  EXPECT_EQ(code_of([] { parse_vlm_volume("0", VlmMode::SingleNoContext); }), ErrorCode::NonPositiveVolume);
}

TEST(VlmParse, StereoJson)
{
  EXPECT_EQ(parse_vlm_volume(R"({"volume_ml": 250, "explanation": "Round fruit, fist sized."})", VlmMode::Stereo),
            250.0);
  EXPECT_EQ(parse_vlm_volume(" {\"volume_ml\": 12.5}\n", VlmMode::Stereo), 12.5);
  for (const char* bad : {R"({"volume_ml": 250, "confidence": 0.9})", R"(Sure! {"volume_ml": 250})",
                          R"(```json
{"volume_ml": 250}
```)",
                          R"({"volume_ml": "250"})", R"({"explanation": "x"})", R"([250])",
                          R"({"volume_ml": 250, "explanation": 3})", "250"}) {
    EXPECT_EQ(code_of([&] { parse_vlm_volume(bad, VlmMode::Stereo); }), ErrorCode::UnparseableResponse) << bad;
  }
  EXPECT_EQ(code_of([] { parse_vlm_volume(R"({"volume_ml": -1})", VlmMode::Stereo); }),
            ErrorCode::NonPositiveVolume);
}

TEST(VlmQuery, ImagesAndFingerprint)
{
  const auto s = samples(2);
  const auto stereo = VlmQuery::make(s[0], VlmMode::Stereo);
  ASSERT_EQ(stereo.images.size(), 2u);
  EXPECT_EQ(stereo.images[0].key, s[0].left.key);
  EXPECT_EQ(stereo.images[1].key, s[0].right.key);
  const auto single = VlmQuery::make(s[0], VlmMode::SingleNoContext);
  ASSERT_EQ(single.images.size(), 1u);
  const auto ctx = VlmQuery::make(s[1], VlmMode::SingleWithContext);
  EXPECT_EQ(*ctx.context_text, "a banana");

  EXPECT_EQ(stereo.fingerprint(), VlmQuery::make(s[0], VlmMode::Stereo).fingerprint());
  EXPECT_EQ(stereo.fingerprint().size(), 64u);
  EXPECT_NE(stereo.fingerprint(), single.fingerprint());
  EXPECT_NE(stereo.fingerprint(), VlmQuery::make(s[1], VlmMode::Stereo).fingerprint());
  EXPECT_NE(VlmQuery::make(s[1], VlmMode::SingleWithContext, std::string("a plantain")).fingerprint(),
            ctx.fingerprint());

  auto broken = single;
  broken.images.push_back(s[0].right);
  EXPECT_THROW(broken.validate(), Error);
}

TEST(VlmRun, RecordThenReplayGivesSameResult)
{
  const auto s = samples(6);
  FakeTransport fake;
  for (std::size_t i = 0; i < s.size(); ++i) {
    fake.answers[s[i].item_id] = "{\"volume_ml\": " + std::to_string(20 + i) + ", \"explanation\": \"ok\"}";
  }
  fake.answers[s[3].item_id] = "I cannot tell.";
  RecordingTransport rec(fake);
  const auto first = run_vlm_baseline(s, rec, no_sleep(VlmMode::Stereo));
  const auto dir = testkit::temp_dir("tape");
  rec.save(dir / "tape.jsonl");
  EXPECT_EQ(rec.entries().size(), 6u);

  auto replay = ReplayTransport::load(dir / "tape.jsonl");
  const auto second = run_vlm_baseline(s, replay, no_sleep(VlmMode::Stereo));
  EXPECT_EQ(serialize_predictions(first.predictions), serialize_predictions(second.predictions));
  EXPECT_EQ(first.n_missing, 1u);
  EXPECT_EQ(second.n_missing, 1u);
  EXPECT_EQ(first.predictions.size(), 5u);

  auto other_mode = ReplayTransport::load(dir / "tape.jsonl");
  const auto miss = run_vlm_baseline(s, other_mode, no_sleep(VlmMode::SingleNoContext));
  EXPECT_EQ(miss.n_missing, 6u);
}

TEST(VlmRun, TapeIndependentOfCallOrder)
{
  const auto s = samples(12);
  FakeTransport fake;
  for (const auto& x : s) {
    fake.answers[x.item_id] = "5";
  }
  RecordingTransport a(fake), b(fake);
  auto serial = no_sleep(VlmMode::SingleNoContext);
  serial.concurrency = 1;
  auto parallel = serial;
  parallel.concurrency = 5;
  run_vlm_baseline(s, a, serial);
  run_vlm_baseline(s, b, parallel);
  const auto dir = testkit::temp_dir("tape-order");
  a.save(dir / "a.jsonl");
  b.save(dir / "b.jsonl");
  EXPECT_EQ(read_text_file(dir / "a.jsonl"), read_text_file(dir / "b.jsonl"));
}

TEST(VlmRun, RetriesTransportFailuresWithBackoff)
{
  const auto s = samples(3);
  FakeTransport fake;
  for (const auto& x : s) {
    fake.answers[x.item_id] = "7.5";
  }
  fake.failures_left[s[0].item_id] = 2;
  fake.failures_left[s[1].item_id] = 10;
  std::vector<std::chrono::milliseconds> slept;
  auto opts = no_sleep(VlmMode::SingleNoContext, &slept);
  opts.concurrency = 1;
  const auto r = run_vlm_baseline(s, fake, opts);
  EXPECT_EQ(r.predictions.size(), 2u);
  EXPECT_EQ(r.n_missing, 1u);
  EXPECT_EQ(r.outcomes[0].attempts, 3);
  EXPECT_EQ(r.outcomes[1].attempts, 4);
  EXPECT_EQ(r.outcomes[2].attempts, 1);
  EXPECT_EQ(r.total_attempts, 8u);
  using ms = std::chrono::milliseconds;
  const std::vector<ms> want{ms(500), ms(1000), ms(500), ms(1000), ms(2000)};
  EXPECT_EQ(slept, want);
  const auto m = r.manifest(opts, fake);
  EXPECT_EQ(m["n_missing"], 1);
  EXPECT_EQ(m["total_attempts"], 8);
  EXPECT_EQ(m["transport"], "fake");
}

TEST(VlmRun, UnparseableAnswersAreNotRetried)
{
  const auto s = samples(1);
  FakeTransport fake;
  fake.answers[s[0].item_id] = "roughly 30";
  const auto r = run_vlm_baseline(s, fake, no_sleep(VlmMode::SingleNoContext));
  EXPECT_EQ(fake.calls, 1);
  EXPECT_EQ(r.n_missing, 1u);
  EXPECT_NE(r.outcomes[0].error.find("roughly 30"), std::string::npos);
}

TEST(RetryPolicy, BackoffCapped)
{
  RetryPolicy p;
  EXPECT_EQ(p.backoff(2).count(), 500);
  EXPECT_EQ(p.backoff(3).count(), 1000);
  EXPECT_EQ(p.backoff(6).count(), 8000);
  EXPECT_EQ(p.backoff(10).count(), 8000);
}

TEST(VlmRun, ConcurrentResultsSortedById)
{
  auto s = samples(40);
  Rng rng(3);
  rng.shuffle(s);
  FakeTransport fake;
  for (const auto& x : s) {
    fake.answers[x.item_id] = std::to_string(x.volume_ml * 2);
  }
  auto opts = no_sleep(VlmMode::SingleWithContext);
  opts.concurrency = 8;
  const auto r = run_vlm_baseline(s, fake, opts);
  ASSERT_EQ(r.predictions.size(), 40u);
  for (std::size_t i = 0; i < r.predictions.size(); ++i) {
    const auto& p = r.predictions.records[i];
    EXPECT_EQ(p.volume_est_ml, 2 * p.volume_gt_ml);
    if (i > 0) {
      EXPECT_LT(r.predictions.records[i - 1].item_id, p.item_id);
    }
    EXPECT_EQ(p.prompt, render_vlm_prompt(VlmMode::SingleWithContext, default_context_text(p.class_label)));
  }
  EXPECT_EQ(fake.calls, 40);
}

TEST(VlmRun, RejectsBadOptionsAndDuplicates)
{
  auto s = samples(2);
  FakeTransport fake;
  auto opts = no_sleep(VlmMode::Stereo);
  opts.concurrency = 0;
  EXPECT_THROW(run_vlm_baseline(s, fake, opts), Error);
  opts.concurrency = 1;
  opts.retry.max_attempts = 0;
  EXPECT_THROW(run_vlm_baseline(s, fake, opts), Error);
  s.push_back(s[0]);
  EXPECT_THROW(run_vlm_baseline(s, fake, no_sleep(VlmMode::Stereo)), Error);
}

TEST(HttpSettings, MissingEndpointIsUnavailable)
{
  ::unsetenv(kVlmEndpointEnv);
  EXPECT_EQ(code_of([] { HttpSettings::from_env(); }), ErrorCode::BackendUnavailable);
  ::setenv(kVlmEndpointEnv, "http://127.0.0.1:9/v1/chat/completions", 1);
  ::setenv(kVlmModelEnv, "test-model", 1);
  const auto h = HttpSettings::from_env();
  EXPECT_EQ(h.model, "test-model");
  ::unsetenv(kVlmEndpointEnv);
  ::unsetenv(kVlmModelEnv);
}
