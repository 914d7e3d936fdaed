#pragma once

#include "stereovol/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>

namespace stereovol {

/// Frozen image backbone. encode() is a pure function of the pixels, so the
/// same instance serves both views of a stereo pair.
class ImageEncoder {
public:
  virtual ~ImageEncoder() = default;

  virtual std::string name() const = 0;
  virtual int output_dim() const = 0;
  bool frozen() const noexcept { return true; }

  virtual EmbeddingVector encode(const Image& image) const = 0;
  /// Default decodes the reference and calls encode(Image).
  virtual EmbeddingVector encode(const ImageRef& ref) const;
};

class TextEncoder {
public:
  virtual ~TextEncoder() = default;

  virtual std::string name() const = 0;
  virtual int output_dim() const = 0;

  /// Throws InvalidConfig on an empty prompt.
  virtual EmbeddingVector encode(const std::string& prompt) const = 0;
};

/// Deterministic image backend for tests and synthetic data: per-channel means
/// over a grid x grid partition of the image plus a constant term, multiplied
/// by a seeded hash-generated matrix. Linear in the pixels, so
/// ||e(a) - e(b)|| <= lipschitz_bound() * max|a - b|.
class HashImageEncoder final : public ImageEncoder {
public:
  HashImageEncoder(int dim, std::uint64_t seed, int grid = 4);

  std::string name() const override { return "hash-image"; }
  int output_dim() const override { return dim_; }
  EmbeddingVector encode(const Image& image) const override;

  double lipschitz_bound() const noexcept { return lipschitz_; }
  int grid() const noexcept { return grid_; }

private:
  int dim_;
  int grid_;
  Matrix projection_; // dim x (3 * grid^2 + 1)
  double lipschitz_;
};

/// Deterministic text backend: signed feature hashing of word tokens and
/// character trigrams, numeric tokens additionally contribute log(1 + value)
/// along a fixed direction; output is L2-normalized.
class HashTextEncoder final : public TextEncoder {
public:
  HashTextEncoder(int dim, std::uint64_t seed);

  std::string name() const override { return "hash-text"; }
  int output_dim() const override { return dim_; }
  EmbeddingVector encode(const std::string& prompt) const override;

private:
  void add_feature(Vector& acc, std::string_view feature, double weight) const;

  int dim_;
  std::uint64_t seed_;
};

/// Embeddings computed offline by a pretrained model and stored as JSON Lines
/// records {"key": ..., "values": [...]}. Image keys are image paths, text keys
/// are the exact prompt strings.
class EmbeddingStore {
public:
  static EmbeddingStore load(const std::filesystem::path& path, int expected_dim);

  int dim() const noexcept { return dim_; }
  const EmbeddingVector* find(const std::string& key) const;
  std::size_t size() const noexcept { return table_.size(); }

private:
  int dim_ = 0;
  std::unordered_map<std::string, EmbeddingVector> table_;
};

class StoredImageEncoder final : public ImageEncoder {
public:
  StoredImageEncoder(std::string name, std::shared_ptr<const EmbeddingStore> store);

  std::string name() const override { return name_; }
  int output_dim() const override { return store_->dim(); }
  EmbeddingVector encode(const Image& image) const override;
  EmbeddingVector encode(const ImageRef& ref) const override;

private:
  std::string name_;
  std::shared_ptr<const EmbeddingStore> store_;
};

class StoredTextEncoder final : public TextEncoder {
public:
  StoredTextEncoder(std::string name, std::shared_ptr<const EmbeddingStore> store);

  std::string name() const override { return name_; }
  int output_dim() const override { return store_->dim(); }
  EmbeddingVector encode(const std::string& prompt) const override;

private:
  std::string name_;
  std::shared_ptr<const EmbeddingStore> store_;
};

struct EncoderSpec {
  std::string name;
  int dim = 768;
  std::uint64_t seed = 0;
};

/// Environment variable naming the directory that holds `<name>.jsonl`
/// embedding stores for pretrained backends.
inline constexpr const char* kCacheDirEnv = "STEREOVOL_CACHE_DIR";

/// Name-keyed factories. "hash-image" and "hash-text" are built in; any other
/// name resolves to an embedding store `<cache_dir>/<name>.jsonl`, throwing
/// BackendUnavailable when it is missing.
class EncoderRegistry {
public:
  using ImageFactory = std::function<std::shared_ptr<const ImageEncoder>(const EncoderSpec&)>;
  using TextFactory = std::function<std::shared_ptr<const TextEncoder>(const EncoderSpec&)>;

  static EncoderRegistry& instance();

  void register_image(const std::string& name, ImageFactory factory);
  void register_text(const std::string& name, TextFactory factory);

  std::shared_ptr<const ImageEncoder> make_image(const EncoderSpec& spec,
                                                 std::optional<std::filesystem::path> cache_dir = {}) const;
  std::shared_ptr<const TextEncoder> make_text(const EncoderSpec& spec,
                                               std::optional<std::filesystem::path> cache_dir = {}) const;

private:
  EncoderRegistry();

  std::map<std::string, ImageFactory> image_;
  std::map<std::string, TextFactory> text_;
};

/// Memoizes image embeddings by ImageRef key. Output-invariant.
class ImageEmbeddingCache {
public:
  explicit ImageEmbeddingCache(std::shared_ptr<const ImageEncoder> encoder) : encoder_(std::move(encoder)) {}

  const EmbeddingVector& get(const ImageRef& ref);
  const ImageEncoder& encoder() const noexcept { return *encoder_; }

private:
  std::shared_ptr<const ImageEncoder> encoder_;
  std::unordered_map<std::string, EmbeddingVector> cache_;
};

} // namespace stereovol
