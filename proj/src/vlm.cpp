#include "stereovol/vlm.hpp"

#include "stereovol/error.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <set>
#include <thread>

namespace stereovol {

std::string to_string(VlmMode mode)
{
  switch (mode) {
  case VlmMode::SingleNoContext:
    return "single_no_context";
  case VlmMode::SingleWithContext:
    return "single_with_context";
  case VlmMode::Stereo:
    return "stereo";
  }
  return "stereo";
}

VlmMode vlm_mode_from_string(const std::string& s)
{
  if (s == "single_no_context") {
    return VlmMode::SingleNoContext;
  }
  if (s == "single_with_context") {
    return VlmMode::SingleWithContext;
  }
  if (s == "stereo") {
    return VlmMode::Stereo;
  }
  throw Error(ErrorCode::InvalidConfig,
              "unknown VLM mode '" + s + "' (expected single_no_context, single_with_context or stereo)");
}

namespace {

constexpr std::string_view kSingleHead = "Answer with ONLY a single floating-point number (milliliters). No units, no extra text.\n";
constexpr std::string_view kSingleTail =
    "\nReturn ONLY a single floating-point number (milliliters), no units, no words, no punctuation, no JSON, no code "
    "fences.";

constexpr std::string_view kStereo =
    "You are given TWO images of the SAME object, captured from different viewpoints.\n"
    "Use both images jointly (stereo cues, parallax, shape consistency) to estimate the object's volume in "
    "milliliters.\n"
    "Assume similar scale and camera distance; modest viewpoint change is present.\n"
    "RESPONSE FORMAT (STRICT JSON, one object, no code fences, no extra text):\n"
    "{\n"
    "  \"volume_ml\": <float>,\n"
    "  \"explanation\": \"<2-4 concise sentences on the visual cues you used>\"\n"
    "}\n"
    "Rules:\n"
    "- Return ONLY the JSON object above (no markdown, no reasoning sections, no additional keys).\n"
    "- \"volume_ml\" MUST be a single floating-point number (no units, no commas).\n"
    "Return ONLY the final JSON object; do not include chain-of-thought or extra text.";

std::string_view trim(std::string_view s)
{
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) {
    return {};
  }
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

double positive_finite(double v, std::string_view response)
{
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::UnparseableResponse, "non-finite volume in response '" + std::string(response) + "'");
  }
  if (!(v > 0.0)) {
    throw Error(ErrorCode::NonPositiveVolume, "response gives non-positive volume " + std::to_string(v));
  }
  return v;
}

} // namespace

std::string render_vlm_prompt(VlmMode mode, const std::optional<std::string>& context_text)
{
  if (mode == VlmMode::SingleWithContext) {
    if (!context_text || context_text->empty()) {
      throw Error(ErrorCode::MissingContext, "single_with_context prompt needs context text");
    }
    return std::string(kSingleHead) + "Given this is an image of " + *context_text +
           ", estimate its volume in milliliters." + std::string(kSingleTail);
  }
  if (context_text) {
    throw Error(ErrorCode::InvalidConfig, "context text is only used by single_with_context");
  }
  if (mode == VlmMode::SingleNoContext) {
    return std::string(kSingleHead) + "Estimate the object's volume in milliliters from the image." +
           std::string(kSingleTail);
  }
  return std::string(kStereo);
}

double parse_vlm_volume(std::string_view response, VlmMode mode)
{
  const std::string_view body = trim(response);
  if (mode != VlmMode::Stereo) {
    double v = 0.0;
    const char* first = body.data();
    const char* last = body.data() + body.size();
    if (!body.empty() && *first == '+') {
      ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (body.empty() || ec != std::errc{} || ptr != last) {
      throw Error(ErrorCode::UnparseableResponse, "expected a single number, got '" + std::string(response) + "'");
    }
    return positive_finite(v, response);
  }

  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception&) {
    throw Error(ErrorCode::UnparseableResponse, "response is not one JSON object: '" + std::string(response) + "'");
  }
  if (!j.is_object() || !j.contains("volume_ml")) {
    throw Error(ErrorCode::UnparseableResponse, "response lacks \"volume_ml\"");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "volume_ml") {
      if (!value.is_number()) {
        throw Error(ErrorCode::UnparseableResponse, "\"volume_ml\" is not a number");
      }
    } else if (key == "explanation") {
      if (!value.is_string()) {
        throw Error(ErrorCode::UnparseableResponse, "\"explanation\" is not a string");
      }
    } else {
      throw Error(ErrorCode::UnparseableResponse, "unexpected key \"" + key + "\" in response");
    }
  }
  return positive_finite(j.at("volume_ml").get<double>(), response);
}

std::string default_context_text(const std::string& class_label)
{
  std::string name = class_label;
  std::replace(name.begin(), name.end(), '_', ' ');
  const bool vowel = !name.empty() && std::string_view("aeiouAEIOU").find(name.front()) != std::string_view::npos;
  return (vowel ? "an " : "a ") + name;
}

VlmQuery VlmQuery::make(const StereoSample& sample, VlmMode mode, const std::optional<std::string>& context_text)
{
  VlmQuery q;
  q.item_id = sample.item_id;
  q.mode = mode;
  q.images.push_back(sample.left);
  if (mode == VlmMode::Stereo) {
    q.images.push_back(sample.right);
  }
  if (mode == VlmMode::SingleWithContext) {
    q.context_text = context_text ? *context_text : default_context_text(sample.class_label);
  }
  q.prompt = render_vlm_prompt(mode, q.context_text);
  q.validate();
  return q;
}

void VlmQuery::validate() const
{
  const std::size_t want = mode == VlmMode::Stereo ? 2 : 1;
  if (images.size() != want) {
    throw Error(ErrorCode::InvalidConfig, to_string(mode) + " query needs " + std::to_string(want) + " image(s)");
  }
  if (context_text.has_value() != (mode == VlmMode::SingleWithContext)) {
    throw Error(mode == VlmMode::SingleWithContext ? ErrorCode::MissingContext : ErrorCode::InvalidConfig,
                "context text must be present exactly in single_with_context mode");
  }
}

std::string VlmQuery::fingerprint() const
{
  std::string canon = to_string(mode) + '\n' + prompt;
  for (const auto& img : images) {
    canon += '\n' + img.key;
  }
  return sha256_hex(canon);
}

Json tape_entry_to_json(const TapeEntry& e)
{
  return Json{{"fingerprint", e.fingerprint}, {"item_id", e.item_id}, {"mode", e.mode},
              {"prompt", e.prompt},           {"images", e.images},   {"response", e.response}};
}

TapeEntry tape_entry_from_json(const Json& j)
{
  try {
    TapeEntry e;
    e.fingerprint = j.at("fingerprint").get<std::string>();
    e.item_id = j.value("item_id", std::string{});
    e.mode = j.value("mode", std::string{});
    e.prompt = j.value("prompt", std::string{});
    e.images = j.value("images", std::vector<std::string>{});
    e.response = j.at("response").get<std::string>();
    return e;
  } catch (const Json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("tape entry: ") + ex.what());
  }
}

ReplayTransport::ReplayTransport(std::vector<TapeEntry> entries)
{
  for (auto& e : entries) {
    responses_[e.fingerprint] = std::move(e.response);
  }
}

ReplayTransport ReplayTransport::load(const std::filesystem::path& tape)
{
  std::vector<TapeEntry> entries;
  for (const auto& j : read_jsonl(tape)) {
    entries.push_back(tape_entry_from_json(j));
  }
  return ReplayTransport(std::move(entries));
}

std::string ReplayTransport::complete(const VlmQuery& query)
{
  auto it = responses_.find(query.fingerprint());
  if (it == responses_.end()) {
    throw Error(ErrorCode::TransportFailure, "no recorded response for item '" + query.item_id + "'");
  }
  return it->second;
}

std::string RecordingTransport::complete(const VlmQuery& query)
{
  std::string response = inner_.complete(query);
  TapeEntry e;
  e.fingerprint = query.fingerprint();
  e.item_id = query.item_id;
  e.mode = to_string(query.mode);
  e.prompt = query.prompt;
  for (const auto& img : query.images) {
    e.images.push_back(img.key);
  }
  e.response = response;
  std::lock_guard lock(mutex_);
  entries_[e.fingerprint] = std::move(e);
  return response;
}

std::vector<TapeEntry> RecordingTransport::entries() const
{
  std::lock_guard lock(mutex_);
  std::vector<TapeEntry> out;
  for (const auto& [_, e] : entries_) {
    out.push_back(e);
  }
  return out;
}

void RecordingTransport::save(const std::filesystem::path& tape) const
{
  std::vector<Json> records;
  for (const auto& e : entries()) {
    records.push_back(tape_entry_to_json(e));
  }
  write_text_file(tape, to_jsonl(records));
}

std::chrono::milliseconds RetryPolicy::backoff(int attempt) const
{
  double ms = static_cast<double>(initial_backoff.count());
  for (int k = 2; k < attempt; ++k) {
    ms *= multiplier;
  }
  ms = std::min(ms, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

Json VlmRunResult::manifest(const VlmRunOptions& options, const ChatTransport& transport) const
{
  Json j;
  j["mode"] = to_string(options.mode);
  j["transport"] = transport.name();
  j["transport_settings"] = transport.describe();
  j["concurrency"] = options.concurrency;
  j["retry"] = {{"max_attempts", options.retry.max_attempts},
                {"initial_backoff_ms", options.retry.initial_backoff.count()},
                {"multiplier", options.retry.multiplier},
                {"max_backoff_ms", options.retry.max_backoff.count()}};
  j["n_items"] = outcomes.size();
  j["n_parsed"] = predictions.size();
  j["n_missing"] = n_missing;
  j["total_attempts"] = total_attempts;
  Json items = Json::array();
  for (const auto& o : outcomes) {
    Json item{{"item_id", o.item_id}, {"attempts", o.attempts}};
    if (o.volume_ml) {
      item["volume_ml"] = *o.volume_ml;
    } else {
      item["error"] = o.error;
    }
    items.push_back(item);
  }
  j["items"] = items;
  return j;
}

VlmRunResult run_vlm_baseline(std::span<const StereoSample> samples, ChatTransport& transport,
                              const VlmRunOptions& options)
{
  if (options.concurrency < 1) {
    throw Error(ErrorCode::InvalidConfig, "concurrency must be at least 1");
  }
  if (options.retry.max_attempts < 1) {
    throw Error(ErrorCode::InvalidConfig, "max_attempts must be at least 1");
  }
  std::set<std::string> ids;
  std::vector<VlmQuery> queries;
  for (const auto& s : samples) {
    if (!ids.insert(s.item_id).second) {
      throw Error(ErrorCode::InvalidConfig, "item '" + s.item_id + "' listed more than once");
    }
    std::optional<std::string> context;
    if (options.mode == VlmMode::SingleWithContext) {
      context = options.context_text ? options.context_text(s) : default_context_text(s.class_label);
    }
    queries.push_back(VlmQuery::make(s, options.mode, context));
  }

  const auto sleep = options.sleep ? options.sleep : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  std::vector<VlmItemOutcome> outcomes(queries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < queries.size(); i = next++) {
      VlmItemOutcome& o = outcomes[i];
      o.item_id = queries[i].item_id;
      for (int attempt = 1; attempt <= options.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
          sleep(options.retry.backoff(attempt));
        }
        o.attempts = attempt;
        try {
          o.response = transport.complete(queries[i]);
        } catch (const Error& e) {
          o.error = e.what();
          if (e.code() == ErrorCode::TransportFailure) {
            continue;
          }
          break;
        }
        try {
          o.volume_ml = parse_vlm_volume(o.response, options.mode);
          o.error.clear();
        } catch (const Error& e) {
          o.error = e.what();
        }
        break;
      }
    }
  };
  const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(options.concurrency),
                                                               std::max<std::size_t>(queries.size(), 1)));
  std::vector<std::thread> threads;
  for (int t = 1; t < n_threads; ++t) {
    threads.emplace_back(worker);
  }
  worker();
  for (auto& t : threads) {
    t.join();
  }

  VlmRunResult result;
  std::map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    by_id[outcomes[i].item_id] = i;
  }
  for (const auto& [id, i] : by_id) {
    const auto& o = outcomes[i];
    const auto& s = samples[i];
    result.total_attempts += static_cast<std::size_t>(o.attempts);
    if (o.volume_ml) {
      PredictionRecord r;
      r.item_id = s.item_id;
      r.class_label = s.class_label;
      r.volume_est_ml = *o.volume_ml;
      r.volume_gt_ml = s.volume_ml;
      r.prompt = queries[i].prompt;
      result.predictions.records.push_back(std::move(r));
    } else {
      ++result.n_missing;
    }
    result.outcomes.push_back(o);
  }
  return result;
}

} // namespace stereovol
