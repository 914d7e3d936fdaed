#include "stereovol/synthetic.hpp"

#include "stereovol/error.hpp"
#include "stereovol/io.hpp"
#include "stereovol/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace stereovol {

namespace {

const std::vector<SyntheticClass>& palette()
{
  static const std::vector<SyntheticClass> classes{
      {"apple", 220.0, {0.45f, 0.25f, 0.25f}},    {"lime", 60.0, {0.25f, 0.45f, 0.25f}},
      {"plum", 400.0, {0.25f, 0.25f, 0.45f}},     {"banana", 110.0, {0.45f, 0.42f, 0.22f}},
      {"beet", 70.0, {0.42f, 0.22f, 0.42f}},      {"kiwi", 150.0, {0.22f, 0.42f, 0.42f}},
      {"coconut", 700.0, {0.38f, 0.38f, 0.38f}},  {"olive", 12.0, {0.30f, 0.35f, 0.20f}},
  };
  return classes;
}

constexpr std::array<float, 3> kObject{0.9f, 0.9f, 0.9f};
// Disk radius in pixels at size 1, per 32 pixels of image width.
constexpr double kUnitRadius = 7.5;

} // namespace

ClassVocabulary SyntheticDataset::vocabulary() const
{
  std::vector<std::string> names;
  for (const auto& c : classes) {
    names.push_back(c.name);
  }
  return ClassVocabulary(names);
}

Image render_disk(int image_size, const std::array<float, 3>& background, const std::array<float, 3>& object,
                  double size, double shift_px, double dy_px)
{
  Image img(image_size, image_size);
  const double scale = image_size / 32.0;
  const double r = kUnitRadius * scale * std::sqrt(size);
  const double cx = 0.5 * image_size + shift_px;
  const double cy = 0.5 * image_size + dy_px;
  constexpr int kSub = 4;
  for (int y = 0; y < image_size; ++y) {
    for (int x = 0; x < image_size; ++x) {
      int inside = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double px = x + (sx + 0.5) / kSub - cx;
          const double py = y + (sy + 0.5) / kSub - cy;
          inside += px * px + py * py <= r * r;
        }
      }
      const float cover = static_cast<float>(inside) / (kSub * kSub);
      for (int c = 0; c < 3; ++c) {
        const auto k = static_cast<std::size_t>(c);
        img.at(y, x, c) = background[k] + cover * (object[k] - background[k]);
      }
    }
  }
  return img;
}

SyntheticDataset make_synthetic(const SyntheticSpec& spec)
{
  if (spec.num_classes < 1 || spec.num_classes > static_cast<int>(palette().size())) {
    throw Error(ErrorCode::InvalidConfig, "synthetic data supports 1.." + std::to_string(palette().size()) + " classes");
  }
  if (spec.items_per_class < 1 || spec.frames_per_item < 3 || spec.image_size < 8 ||
      !(spec.size_min > 0.0 && spec.size_max >= spec.size_min) || !(spec.brightness_jitter >= 0.0 && spec.brightness_jitter < 1.0) ||
      !(spec.pixel_noise >= 0.0)) {
    throw Error(ErrorCode::InvalidConfig, "invalid synthetic data parameters");
  }
  SyntheticDataset data;
  data.classes.assign(palette().begin(), palette().begin() + spec.num_classes);
  Rng rng(derive_seed(spec.seed, "synthetic"));
  const double scale = spec.image_size / 32.0;
  for (const auto& cls : data.classes) {
    for (int k = 0; k < spec.items_per_class; ++k) {
      char id[64];
      std::snprintf(id, sizeof id, "%s_%03d", cls.name.c_str(), k);
      const double size = rng.uniform(spec.size_min, spec.size_max);
      const double dy = rng.uniform(-1.5, 1.5) * scale;
      const double gain = rng.uniform(1.0 - spec.brightness_jitter, 1.0 + spec.brightness_jitter);
      FrameSequence seq;
      seq.item_id = id;
      seq.class_label = cls.name;
      seq.volume_ml = cls.base_volume_ml * size;
      for (int f = 0; f < spec.frames_per_item; ++f) {
        const double shift = (f - 0.5 * (spec.frames_per_item - 1)) * scale;
        Image frame = render_disk(spec.image_size, cls.scene, kObject, size, shift, dy);
        for (float& v : frame.rgb) {
          v = std::clamp(static_cast<float>(gain * v + spec.pixel_noise * rng.normal()), 0.0f, 1.0f);
        }
        auto img = std::make_shared<const Image>(std::move(frame));
        char key[96];
        std::snprintf(key, sizeof key, "synthetic/%s/%02d", id, f);
        seq.frames.push_back(ImageRef::from_pixels(key, std::move(img)));
      }
      data.latent_size[seq.item_id] = size;
      data.sequences.push_back(std::move(seq));
    }
  }
  return data;
}

std::vector<FrameSequence> write_synthetic(const SyntheticDataset& data, const std::filesystem::path& dir)
{
  std::filesystem::create_directories(dir / "frames");
  std::vector<FrameSequence> out;
  std::vector<FrameSequence> relative;
  for (const auto& seq : data.sequences) {
    FrameSequence disk = seq;
    FrameSequence rel = seq;
    disk.frames.clear();
    rel.frames.clear();
    for (std::size_t f = 0; f < seq.frames.size(); ++f) {
      char name[96];
      std::snprintf(name, sizeof name, "frames/%s_%02zu.png", seq.item_id.c_str(), f);
      write_image(dir / name, *seq.frames[f].load());
      disk.frames.push_back(ImageRef::from_path(dir / name));
      rel.frames.push_back(ImageRef::from_path(name));
    }
    out.push_back(std::move(disk));
    relative.push_back(std::move(rel));
  }
  write_sequences(dir / "sequences.jsonl", relative);
  return out;
}

} // namespace stereovol
