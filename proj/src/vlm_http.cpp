#include "stereovol/error.hpp"
#include "stereovol/vlm.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

namespace stereovol {

HttpSettings HttpSettings::from_env()
{
  auto env = [](const char* name) -> std::string {
    const char* v = std::getenv(name);
    return v ? v : "";
  };
  HttpSettings s;
  s.endpoint = env(kVlmEndpointEnv);
  if (s.endpoint.empty()) {
    throw Error(ErrorCode::BackendUnavailable, std::string(kVlmEndpointEnv) + " is not set");
  }
  s.token = env(kVlmTokenEnv);
  s.model = env(kVlmModelEnv);
  if (s.model.empty()) {
    s.model = "gpt-5";
  }
  return s;
}

namespace {

std::string mime_for(const std::filesystem::path& p)
{
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".jpg" || ext == ".jpeg") {
    return "image/jpeg";
  }
  if (ext == ".webp") {
    return "image/webp";
  }
  return "image/png";
}

std::string data_url(const ImageRef& ref)
{
  if (!ref.pixels && !ref.path.empty()) {
    return "data:" + mime_for(ref.path) + ";base64," + base64_encode(read_text_file(ref.path));
  }
  return "data:image/png;base64," + base64_encode(encode_png(*ref.load()));
}

class HttpTransport final : public ChatTransport {
public:
  explicit HttpTransport(HttpSettings settings) : settings_(std::move(settings))
  {
    const auto scheme_end = settings_.endpoint.find("://");
    const auto path_start =
        settings_.endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (scheme_end == std::string::npos || path_start == std::string::npos) {
      throw Error(ErrorCode::InvalidConfig, "endpoint must be a full URL, got '" + settings_.endpoint + "'");
    }
    base_ = settings_.endpoint.substr(0, path_start);
    path_ = settings_.endpoint.substr(path_start);
  }

  std::string name() const override { return "http"; }

  Json describe() const override
  {
    Json j{{"endpoint", settings_.endpoint}, {"model", settings_.model}};
    j["temperature"] = settings_.temperature ? Json(*settings_.temperature) : Json("endpoint default");
    return j;
  }

  std::string complete(const VlmQuery& query) override
  {
    Json content = Json::array();
    content.push_back({{"type", "text"}, {"text", query.prompt}});
    for (const auto& img : query.images) {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(img)}}}});
    }
    Json body{{"model", settings_.model}, {"messages", Json::array({{{"role", "user"}, {"content", content}}})}};
    if (settings_.temperature) {
      body["temperature"] = *settings_.temperature;
    }

    httplib::Client client(base_);
    client.set_connection_timeout(settings_.timeout);
    client.set_read_timeout(settings_.timeout);
    httplib::Headers headers;
    if (!settings_.token.empty()) {
      headers.emplace("Authorization", "Bearer " + settings_.token);
    }
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::TransportFailure, "request failed: " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::TransportFailure, "endpoint returned HTTP " + std::to_string(res->status));
    }
    try {
      return Json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::TransportFailure, std::string("malformed completion payload: ") + e.what());
    }
  }

private:
  HttpSettings settings_;
  std::string base_;
  std::string path_;
};

} // namespace

std::unique_ptr<ChatTransport> make_http_transport(const HttpSettings& settings)
{
  return std::make_unique<HttpTransport>(settings);
}

} // namespace stereovol
