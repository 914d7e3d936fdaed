#include "stereovol/checkpoint.hpp"

#include "stereovol/config.hpp"
#include "stereovol/error.hpp"
#include "stereovol/io.hpp"

#include <bit>
#include <cstring>

namespace stereovol {

static_assert(std::endian::native == std::endian::little, "checkpoint tensors are stored little-endian");

namespace {

constexpr std::string_view kMagic = "STEREOVOL-CHECKPOINT\n";

Json dims_to_json(const ModelDims& d)
{
  return Json{{"image_dim", d.image_dim},
              {"n_images", d.n_images},
              {"text_dim", d.text_dim},
              {"projection_dim", d.projection_dim},
              {"classifier_hidden", d.classifier_hidden},
              {"regression_hidden", d.regression_hidden},
              {"num_classes", d.num_classes}};
}

ModelDims dims_from_json(const Json& j)
{
  ModelDims d;
  d.image_dim = j.at("image_dim").get<int>();
  d.n_images = j.at("n_images").get<int>();
  d.text_dim = j.at("text_dim").get<int>();
  d.projection_dim = j.at("projection_dim").get<int>();
  d.classifier_hidden = j.at("classifier_hidden").get<int>();
  d.regression_hidden = j.at("regression_hidden").get<int>();
  d.num_classes = j.at("num_classes").get<int>();
  return d;
}

} // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt)
{
  ckpt.params.check_shapes();
  Json header;
  header["version"] = kCheckpointVersion;
  header["dims"] = dims_to_json(ckpt.params.dims);
  header["target_offset"] = ckpt.params.target_offset;
  header["target_scale"] = ckpt.params.target_scale;
  header["config"] = train_config_to_json(ckpt.config);
  header["image_encoder"] = encoder_spec_to_json(ckpt.image_encoder);
  header["text_encoder"] = encoder_spec_to_json(ckpt.text_encoder);
  header["vocab"] = ckpt.vocab.names();
  header["priors"] = prior_table_to_json(ckpt.priors);
  Json sizes = Json::array();
  for (auto t : ckpt.params.tensors()) {
    sizes.push_back(t.size());
  }
  header["tensor_sizes"] = sizes;

  std::string out(kMagic);
  out += header.dump();
  out += '\n';
  for (auto t : ckpt.params.tensors()) {
    const auto* bytes = reinterpret_cast<const char*>(t.data());
    out.append(bytes, t.size() * sizeof(double));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes)
{
  if (bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::CheckpointMismatch, "not a stereovol checkpoint");
  }
  bytes.remove_prefix(kMagic.size());
  const auto eol = bytes.find('\n');
  if (eol == std::string_view::npos) {
    throw Error(ErrorCode::CheckpointMismatch, "truncated checkpoint header");
  }
  Checkpoint ckpt;
  std::vector<std::size_t> sizes;
  try {
    const Json header = Json::parse(bytes.substr(0, eol));
    if (header.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::CheckpointMismatch, "unsupported checkpoint version " + header.at("version").dump());
    }
    ckpt.params = FusionModelParams::zeros(dims_from_json(header.at("dims")));
    ckpt.params.target_offset = header.at("target_offset").get<double>();
    ckpt.params.target_scale = header.at("target_scale").get<double>();
    ckpt.config = train_config_from_json(header.at("config"));
    ckpt.image_encoder = encoder_spec_from_json(header.at("image_encoder"));
    ckpt.text_encoder = encoder_spec_from_json(header.at("text_encoder"));
    ckpt.vocab = ClassVocabulary(header.at("vocab").get<std::vector<std::string>>());
    ckpt.priors = prior_table_from_json(header.at("priors"));
    sizes = header.at("tensor_sizes").get<std::vector<std::size_t>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::CheckpointMismatch, std::string("bad checkpoint header: ") + e.what());
  }
  bytes.remove_prefix(eol + 1);

  auto tensors = ckpt.params.tensors();
  if (sizes.size() != tensors.size()) {
    throw Error(ErrorCode::CheckpointMismatch, "tensor count does not match dims");
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (sizes[i] != tensors[i].size()) {
      throw Error(ErrorCode::CheckpointMismatch, "tensor " + std::to_string(i) + " size does not match dims");
    }
    total += sizes[i];
  }
  if (bytes.size() != total * sizeof(double)) {
    throw Error(ErrorCode::CheckpointMismatch, "checkpoint payload has " + std::to_string(bytes.size()) +
                                                   " bytes, expected " + std::to_string(total * sizeof(double)));
  }
  for (auto t : tensors) {
    std::memcpy(t.data(), bytes.data(), t.size() * sizeof(double));
    bytes.remove_prefix(t.size() * sizeof(double));
  }
  if (ckpt.vocab.size() != ckpt.params.dims.num_classes) {
    throw Error(ErrorCode::CheckpointMismatch, "vocabulary size does not match classifier");
  }
  if (ckpt.image_encoder.dim != ckpt.params.dims.image_dim || ckpt.text_encoder.dim != ckpt.params.dims.text_dim) {
    throw Error(ErrorCode::CheckpointMismatch, "encoder dims do not match model dims");
  }
  ckpt.priors.check_covers(ckpt.vocab);
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
  write_text_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
  return parse_checkpoint(read_text_file(path));
}

void check_encoders(const Checkpoint& ckpt, const ImageEncoder& image, const TextEncoder& text)
{
  if (image.output_dim() != ckpt.params.dims.image_dim) {
    throw Error(ErrorCode::CheckpointMismatch, "image encoder '" + image.name() + "' produces " +
                                                   std::to_string(image.output_dim()) + "-d features, checkpoint expects " +
                                                   std::to_string(ckpt.params.dims.image_dim));
  }
  if (text.output_dim() != ckpt.params.dims.text_dim) {
    throw Error(ErrorCode::CheckpointMismatch, "text encoder '" + text.name() + "' produces " +
                                                   std::to_string(text.output_dim()) + "-d features, checkpoint expects " +
                                                   std::to_string(ckpt.params.dims.text_dim));
  }
}

} // namespace stereovol
