#include "stereovol/io.hpp"

#include "stereovol/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stereovol {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view content)
{
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  }
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) {
    throw Error(ErrorCode::Io, "short write to '" + path.string() + "'");
  }
}

Json read_json_file(const fs::path& path)
{
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const Json& value)
{
  write_text_file(path, value.dump(2) + "\n");
}

std::vector<Json> read_jsonl(const fs::path& path)
{
  std::istringstream in(read_text_file(path));
  std::vector<Json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      continue;
    }
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_jsonl(const std::vector<Json>& records)
{
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::string sha256_hex(std::string_view bytes)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::Io, "sha256 failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string sha256_file(const fs::path& path)
{
  return sha256_hex(read_text_file(path));
}

Image decode_image(const fs::path& path)
{
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw Error(ErrorCode::DecodeFailure, "cannot decode image '" + path.string() + "'");
  }
  Image img(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0f;
      img.at(y, x, 1) = row[x][1] / 255.0f;
      img.at(y, x, 2) = row[x][0] / 255.0f;
    }
  }
  return img;
}

namespace {

cv::Mat to_bgr8(const Image& image)
{
  cv::Mat bgr(image.height, image.width, CV_8UC3);
  auto to_byte = [](float v) {
    return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  for (int y = 0; y < image.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width; ++x) {
      row[x] = cv::Vec3b(to_byte(image.at(y, x, 2)), to_byte(image.at(y, x, 1)), to_byte(image.at(y, x, 0)));
    }
  }
  return bgr;
}

} // namespace

void write_image(const fs::path& path, const Image& image)
{
  const cv::Mat bgr = to_bgr8(image);
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  if (!cv::imwrite(path.string(), bgr)) {
    throw Error(ErrorCode::Io, "cannot write image '" + path.string() + "'");
  }
}

std::string encode_png(const Image& image)
{
  std::vector<unsigned char> buf;
  if (!cv::imencode(".png", to_bgr8(image), buf)) {
    throw Error(ErrorCode::Io, "cannot encode image as PNG");
  }
  return std::string(buf.begin(), buf.end());
}

std::string base64_encode(std::string_view bytes)
{
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(bytes.data()), static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::shared_ptr<const Image> ImageRef::load() const
{
  if (pixels) {
    return pixels;
  }
  if (path.empty()) {
    throw Error(ErrorCode::DecodeFailure, "image reference '" + key + "' has neither pixels nor path");
  }
  return std::make_shared<const Image>(decode_image(path));
}

Json sample_to_json(const StereoSample& s)
{
  Json j;
  j["item_id"] = s.item_id;
  j["class_label"] = s.class_label;
  j["left_image"] = s.left.path.string();
  j["right_image"] = s.right.path.string();
  j["volume_ml"] = s.volume_ml;
  j["frame_left"] = s.frame_left;
  j["frame_right"] = s.frame_right;
  if (!s.extra_views.empty()) {
    Json extra = Json::array();
    for (const auto& v : s.extra_views) {
      extra.push_back(v.path.string());
    }
    j["extra_images"] = extra;
    j["extra_frames"] = s.extra_frames;
  }
  if (s.food_code) {
    j["food_code"] = *s.food_code;
  }
  return j;
}

StereoSample sample_from_json(const Json& r)
{
  try {
    StereoSample s;
    s.item_id = r.at("item_id").get<std::string>();
    s.class_label = r.at("class_label").get<std::string>();
    s.left = ImageRef::from_path(r.at("left_image").get<std::string>());
    s.right = ImageRef::from_path(r.at("right_image").get<std::string>());
    s.volume_ml = r.at("volume_ml").get<double>();
    s.frame_left = r.at("frame_left").get<int>();
    s.frame_right = r.at("frame_right").get<int>();
    if (r.contains("extra_images")) {
      for (const auto& p : r.at("extra_images")) {
        s.extra_views.push_back(ImageRef::from_path(p.get<std::string>()));
      }
      s.extra_frames = r.at("extra_frames").get<std::vector<int>>();
      if (s.extra_frames.size() != s.extra_views.size()) {
        throw Error(ErrorCode::Parse, "extra_images and extra_frames differ in length");
      }
    }
    if (r.contains("food_code")) {
      s.food_code = r.at("food_code").get<std::string>();
    }
    return s;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("manifest record: ") + e.what());
  }
}

std::vector<StereoSample> read_manifest(const fs::path& path, const std::optional<fs::path>& data_root)
{
  const fs::path base = data_root ? *data_root : path.parent_path();
  auto resolve = [&](ImageRef& ref) {
    if (ref.path.is_relative()) {
      ref = ImageRef::from_path((base / ref.path).lexically_normal());
    }
  };
  std::vector<StereoSample> out;
  for (const auto& record : read_jsonl(path)) {
    StereoSample s = sample_from_json(record);
    resolve(s.left);
    resolve(s.right);
    for (auto& v : s.extra_views) {
      resolve(v);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_manifest(const fs::path& path, const std::vector<StereoSample>& samples)
{
  // Relative image paths are rewritten relative to the manifest's directory.
  const fs::path dir = fs::absolute(path).parent_path();
  auto rebase = [&](ImageRef& ref) {
    if (!ref.path.empty() && ref.path.is_relative()) {
      ref = ImageRef::from_path(fs::absolute(ref.path).lexically_proximate(dir));
    }
  };
  std::vector<Json> records;
  records.reserve(samples.size());
  for (StereoSample s : samples) {
    rebase(s.left);
    rebase(s.right);
    for (auto& v : s.extra_views) {
      rebase(v);
    }
    records.push_back(sample_to_json(s));
  }
  write_text_file(path, to_jsonl(records));
}

ClassVocabulary read_vocabulary(const fs::path& path)
{
  std::istringstream in(read_text_file(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (!line.empty()) {
      names.push_back(line);
    }
  }
  return ClassVocabulary(std::move(names));
}

void write_vocabulary(const fs::path& path, const ClassVocabulary& vocab)
{
  std::string out;
  for (const auto& n : vocab.names()) {
    out += n;
    out += '\n';
  }
  write_text_file(path, out);
}

} // namespace stereovol
