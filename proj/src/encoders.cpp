#include "stereovol/encoders.hpp"

#include "stereovol/error.hpp"
#include "stereovol/io.hpp"
#include "stereovol/rng.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>

namespace stereovol {

EmbeddingVector ImageEncoder::encode(const ImageRef& ref) const
{
  return encode(*ref.load());
}

HashImageEncoder::HashImageEncoder(int dim, std::uint64_t seed, int grid) : dim_(dim), grid_(grid)
{
  if (dim < 1) {
    throw Error(ErrorCode::InvalidConfig, "hash-image encoder dim must be >= 1");
  }
  if (grid < 1) {
    throw Error(ErrorCode::InvalidConfig, "hash-image encoder grid must be >= 1");
  }
  const int in = 3 * grid * grid + 1;
  const double scale = std::sqrt(3.0 / in);
  projection_.resize(dim, in);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < in; ++c) {
      const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(r) * in + c + 1));
      const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
      projection_(r, c) = (2.0 * u - 1.0) * scale;
    }
  }
  // Each of the 3 * grid^2 cell means moves by at most max|delta pixel|.
  lipschitz_ = projection_.leftCols(in - 1).norm() * std::sqrt(3.0) * grid;
}

EmbeddingVector HashImageEncoder::encode(const Image& image) const
{
  if (image.empty()) {
    throw Error(ErrorCode::DecodeFailure, "empty image");
  }
  const int cells = grid_ * grid_;
  Vector stats = Vector::Zero(3 * cells + 1);
  std::vector<int> counts(cells, 0);
  for (int y = 0; y < image.height; ++y) {
    const int cy = static_cast<int>(static_cast<long>(y) * grid_ / image.height);
    for (int x = 0; x < image.width; ++x) {
      const int cx = static_cast<int>(static_cast<long>(x) * grid_ / image.width);
      const int cell = cy * grid_ + cx;
      ++counts[cell];
      for (int c = 0; c < 3; ++c) {
        stats(3 * cell + c) += image.at(y, x, c);
      }
    }
  }
  for (int cell = 0; cell < cells; ++cell) {
    if (counts[cell] > 0) {
      stats.segment(3 * cell, 3) /= counts[cell];
    }
  }
  stats(3 * cells) = 1.0;
  return EmbeddingVector(projection_ * stats);
}

HashTextEncoder::HashTextEncoder(int dim, std::uint64_t seed) : dim_(dim), seed_(seed)
{
  if (dim < 1) {
    throw Error(ErrorCode::InvalidConfig, "hash-text encoder dim must be >= 1");
  }
}

void HashTextEncoder::add_feature(Vector& acc, std::string_view feature, double weight) const
{
  const std::uint64_t h = splitmix64(fnv1a64(feature) ^ seed_);
  const auto idx = static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_));
  acc(idx) += (h >> 63) ? -weight : weight;
}

EmbeddingVector HashTextEncoder::encode(const std::string& prompt) const
{
  if (prompt.empty()) {
    throw Error(ErrorCode::InvalidConfig, "prompt must be non-empty");
  }
  Vector acc = Vector::Zero(dim_);
  add_feature(acc, "<s>", 1.0);

  std::string token;
  auto flush = [&] {
    while (!token.empty() && std::string_view(".,:;|").find(token.back()) != std::string_view::npos) {
      token.pop_back();
    }
    if (token.empty()) {
      return;
    }
    add_feature(acc, "w:" + token, 1.0);
    const std::string padded = "<" + token + ">";
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      add_feature(acc, "c:" + padded.substr(i, 3), 0.5);
    }
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec == std::errc() && ptr == token.data() + token.size() && std::isfinite(value) && value >= 0.0) {
      const double w = std::log1p(value);
      for (int k = 0; k < 4; ++k) {
        add_feature(acc, "num:" + std::to_string(k), w);
      }
    }
    token.clear();
  };
  for (char ch : prompt) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  flush();
  return EmbeddingVector(acc / acc.norm());
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path, int expected_dim)
{
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::BackendUnavailable, "embedding store '" + path.string() + "' not found");
  }
  EmbeddingStore store;
  store.dim_ = expected_dim;
  for (const auto& r : read_jsonl(path)) {
    const auto values = r.at("values").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != expected_dim) {
      throw Error(ErrorCode::DimMismatch, "store '" + path.string() + "' has a " + std::to_string(values.size()) +
                                              "-d entry, expected " + std::to_string(expected_dim));
    }
    store.table_.insert_or_assign(r.at("key").get<std::string>(),
                                  EmbeddingVector(Eigen::Map<const Vector>(values.data(), expected_dim)));
  }
  return store;
}

const EmbeddingVector* EmbeddingStore::find(const std::string& key) const
{
  auto it = table_.find(key);
  return it == table_.end() ? nullptr : &it->second;
}

StoredImageEncoder::StoredImageEncoder(std::string name, std::shared_ptr<const EmbeddingStore> store)
    : name_(std::move(name)), store_(std::move(store))
{
}

EmbeddingVector StoredImageEncoder::encode(const Image&) const
{
  throw Error(ErrorCode::BackendUnavailable, name_ + " only serves precomputed embeddings keyed by image path");
}

EmbeddingVector StoredImageEncoder::encode(const ImageRef& ref) const
{
  if (const auto* e = store_->find(ref.key)) {
    return *e;
  }
  throw Error(ErrorCode::BackendUnavailable, name_ + " has no embedding for '" + ref.key + "'");
}

StoredTextEncoder::StoredTextEncoder(std::string name, std::shared_ptr<const EmbeddingStore> store)
    : name_(std::move(name)), store_(std::move(store))
{
}

EmbeddingVector StoredTextEncoder::encode(const std::string& prompt) const
{
  if (prompt.empty()) {
    throw Error(ErrorCode::InvalidConfig, "prompt must be non-empty");
  }
  if (const auto* e = store_->find(prompt)) {
    return *e;
  }
  throw Error(ErrorCode::BackendUnavailable, name_ + " has no embedding for prompt '" + prompt + "'");
}

EncoderRegistry::EncoderRegistry()
{
  image_["hash-image"] = [](const EncoderSpec& s) {
    return std::make_shared<const HashImageEncoder>(s.dim, s.seed);
  };
  text_["hash-text"] = [](const EncoderSpec& s) {
    return std::make_shared<const HashTextEncoder>(s.dim, s.seed);
  };
}

EncoderRegistry& EncoderRegistry::instance()
{
  static EncoderRegistry registry;
  return registry;
}

void EncoderRegistry::register_image(const std::string& name, ImageFactory factory)
{
  image_[name] = std::move(factory);
}

void EncoderRegistry::register_text(const std::string& name, TextFactory factory)
{
  text_[name] = std::move(factory);
}

namespace {

std::filesystem::path store_path(const std::string& name, const std::optional<std::filesystem::path>& cache_dir)
{
  std::filesystem::path dir;
  if (cache_dir) {
    dir = *cache_dir;
  } else if (const char* env = std::getenv(kCacheDirEnv)) {
    dir = env;
  } else {
    throw Error(ErrorCode::BackendUnavailable,
                "backend '" + name + "' needs precomputed embeddings; set " + kCacheDirEnv);
  }
  return dir / (name + ".jsonl");
}

} // namespace

std::shared_ptr<const ImageEncoder> EncoderRegistry::make_image(const EncoderSpec& spec,
                                                                std::optional<std::filesystem::path> cache_dir) const
{
  if (auto it = image_.find(spec.name); it != image_.end()) {
    return it->second(spec);
  }
  auto store = std::make_shared<const EmbeddingStore>(EmbeddingStore::load(store_path(spec.name, cache_dir), spec.dim));
  return std::make_shared<const StoredImageEncoder>(spec.name, std::move(store));
}

std::shared_ptr<const TextEncoder> EncoderRegistry::make_text(const EncoderSpec& spec,
                                                              std::optional<std::filesystem::path> cache_dir) const
{
  if (auto it = text_.find(spec.name); it != text_.end()) {
    return it->second(spec);
  }
  auto store = std::make_shared<const EmbeddingStore>(EmbeddingStore::load(store_path(spec.name, cache_dir), spec.dim));
  return std::make_shared<const StoredTextEncoder>(spec.name, std::move(store));
}

const EmbeddingVector& ImageEmbeddingCache::get(const ImageRef& ref)
{
  auto it = cache_.find(ref.key);
  if (it == cache_.end()) {
    EmbeddingVector e = encoder_->encode(ref);
    if (e.dim() != encoder_->output_dim()) {
      throw Error(ErrorCode::DimMismatch, "encoder '" + encoder_->name() + "' returned wrong dimension");
    }
    it = cache_.emplace(ref.key, std::move(e)).first;
  }
  return it->second;
}

} // namespace stereovol
