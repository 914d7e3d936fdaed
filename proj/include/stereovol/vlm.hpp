#pragma once

#include "stereovol/evaluation.hpp"
#include "stereovol/io.hpp"
#include "stereovol/types.hpp"

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stereovol {

enum class VlmMode { SingleNoContext, SingleWithContext, Stereo };

std::string to_string(VlmMode mode);
VlmMode vlm_mode_from_string(const std::string& s); // single_no_context | single_with_context | stereo

/// Exact prompt text. `context_text` is required for, and only accepted by,
/// the with-context mode (MissingContext / InvalidConfig otherwise).
std::string render_vlm_prompt(VlmMode mode, const std::optional<std::string>& context_text = {});

/// Single-image modes accept one bare number (surrounding whitespace allowed).
/// Stereo mode accepts exactly one JSON object with a numeric "volume_ml" and
/// an optional string "explanation". Throws UnparseableResponse or
/// NonPositiveVolume.
double parse_vlm_volume(std::string_view response, VlmMode mode);

struct VlmQuery {
  std::string item_id;
  VlmMode mode = VlmMode::Stereo;
  std::vector<ImageRef> images;
  std::optional<std::string> context_text;
  std::string prompt;

  /// Stereo mode takes both views of the sample, single modes the left view.
  static VlmQuery make(const StereoSample& sample, VlmMode mode, const std::optional<std::string>& context_text = {});
  void validate() const;
  /// Stable identity of the request: prompt plus image keys.
  std::string fingerprint() const;
};

/// "a banana", "an apple"; underscores become spaces.
std::string default_context_text(const std::string& class_label);

class ChatTransport {
public:
  virtual ~ChatTransport() = default;
  virtual std::string name() const = 0;
  /// Raw assistant text. Throws TransportFailure on retryable failures.
  /// Must be safe to call from several threads.
  virtual std::string complete(const VlmQuery& query) = 0;
  /// Settings recorded in the run manifest (model, decoding parameters).
  virtual Json describe() const { return Json::object(); }
};

/// Tape file: JSON Lines {"fingerprint", "item_id", "mode", "prompt", "images", "response"}.
struct TapeEntry {
  std::string fingerprint;
  std::string item_id;
  std::string mode;
  std::string prompt;
  std::vector<std::string> images;
  std::string response;
};

Json tape_entry_to_json(const TapeEntry& e);
TapeEntry tape_entry_from_json(const Json& j);

/// Answers from a recorded tape; unknown requests throw TransportFailure.
class ReplayTransport final : public ChatTransport {
public:
  explicit ReplayTransport(std::vector<TapeEntry> entries);
  static ReplayTransport load(const std::filesystem::path& tape);

  std::string name() const override { return "replay"; }
  std::string complete(const VlmQuery& query) override;

private:
  std::map<std::string, std::string> responses_;
};

/// Forwards to another transport and keeps every successful exchange.
class RecordingTransport final : public ChatTransport {
public:
  explicit RecordingTransport(ChatTransport& inner) : inner_(inner) {}

  std::string name() const override { return "record(" + inner_.name() + ")"; }
  std::string complete(const VlmQuery& query) override;
  Json describe() const override { return inner_.describe(); }

  /// Entries sorted by fingerprint, so the tape is independent of call order.
  std::vector<TapeEntry> entries() const;
  void save(const std::filesystem::path& tape) const;

private:
  ChatTransport& inner_;
  mutable std::mutex mutex_;
  std::map<std::string, TapeEntry> entries_;
};

inline constexpr const char* kVlmEndpointEnv = "STEREOVOL_VLM_ENDPOINT"; // full chat-completions URL
inline constexpr const char* kVlmTokenEnv = "STEREOVOL_VLM_TOKEN";
inline constexpr const char* kVlmModelEnv = "STEREOVOL_VLM_MODEL";

struct HttpSettings {
  std::string endpoint;
  std::string token;
  std::string model;
  std::optional<double> temperature; // endpoint default when absent
  std::chrono::seconds timeout{120};

  /// Reads the environment; throws BackendUnavailable when the endpoint is unset.
  static HttpSettings from_env();
};

/// OpenAI-style chat-completions client; images are sent as base64 data URLs.
std::unique_ptr<ChatTransport> make_http_transport(const HttpSettings& settings);

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  /// Wait before attempt `attempt` (2, 3, ...).
  std::chrono::milliseconds backoff(int attempt) const;
};

struct VlmRunOptions {
  VlmMode mode = VlmMode::Stereo;
  int concurrency = 4;
  RetryPolicy retry;
  std::function<std::string(const StereoSample&)> context_text; // default_context_text when empty
  std::function<void(std::chrono::milliseconds)> sleep;         // std::this_thread::sleep_for when empty
};

struct VlmItemOutcome {
  std::string item_id;
  int attempts = 0;
  std::optional<double> volume_ml;
  std::string response;
  std::string error;
};

struct VlmRunResult {
  PredictionSet predictions; // parsed items only, sorted by item_id
  std::vector<VlmItemOutcome> outcomes;
  std::size_t n_missing = 0;
  std::size_t total_attempts = 0;

  Json manifest(const VlmRunOptions& options, const ChatTransport& transport) const;
};

/// Queries every sample with bounded concurrency. Transport failures are
/// retried with exponential backoff; unparseable answers are recorded as
/// missing and left out of the prediction set.
VlmRunResult run_vlm_baseline(std::span<const StereoSample> samples, ChatTransport& transport,
                              const VlmRunOptions& options);

} // namespace stereovol
