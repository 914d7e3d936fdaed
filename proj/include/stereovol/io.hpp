#pragma once

#include "stereovol/types.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stereovol {

using Json = nlohmann::json;

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& value);

/// One JSON object per non-blank line.
std::vector<Json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<Json>& records);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Decodes any format OpenCV reads; throws DecodeFailure.
Image decode_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& image);
std::string encode_png(const Image& image);

std::string base64_encode(std::string_view bytes);

// Dataset manifest: JSON Lines with fields item_id, class_label, left_image,
// right_image, volume_ml, frame_left, frame_right (optional: extra_images,
// extra_frames, food_code).
Json sample_to_json(const StereoSample& sample);
StereoSample sample_from_json(const Json& record);

/// Relative image paths are resolved against `data_root`, or the manifest's
/// directory when it is absent.
std::vector<StereoSample> read_manifest(const std::filesystem::path& path,
                                        const std::optional<std::filesystem::path>& data_root = {});
void write_manifest(const std::filesystem::path& path, const std::vector<StereoSample>& samples);

ClassVocabulary read_vocabulary(const std::filesystem::path& path);
void write_vocabulary(const std::filesystem::path& path, const ClassVocabulary& vocab);

} // namespace stereovol
