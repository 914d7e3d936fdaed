#include "stereovol/ingestion.hpp"

#include "stereovol/error.hpp"
#include "stereovol/io.hpp"
#include "stereovol/rng.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace stereovol {

namespace {

// Number of pairs (i < j < n) with j - i >= gap.
std::uint64_t count_pairs(int n, int gap)
{
  if (n <= gap) {
    return 0;
  }
  const std::uint64_t m = static_cast<std::uint64_t>(n - gap);
  return m * (m + 1) / 2;
}

void require_frames(int n_frames, int min_gap)
{
  if (min_gap < 1) {
    throw Error(ErrorCode::InvalidConfig, "min_gap must be >= 1");
  }
  if (n_frames < min_gap + 2) {
    throw Error(ErrorCode::SequenceTooShort,
                std::to_string(n_frames) + " frames cannot give a pair with gap > " + std::to_string(min_gap));
  }
}

} // namespace

FramePair sample_stereo_pair(int n_frames, const PairPolicy& policy)
{
  require_frames(n_frames, policy.min_gap);
  const int gap = policy.min_gap + 1;
  Rng rng(policy.seed);
  std::uint64_t k = rng.index(count_pairs(n_frames, gap));
  // Walk the gaps d = gap .. n-1; gap d has n - d pairs.
  for (int d = gap; d < n_frames; ++d) {
    const auto here = static_cast<std::uint64_t>(n_frames - d);
    if (k < here) {
      const int i = static_cast<int>(k);
      return {i, i + d};
    }
    k -= here;
  }
  throw Error(ErrorCode::SequenceTooShort, "unreachable pair index");
}

FramePair sample_stereo_pair(const FrameSequence& seq, const PairPolicy& policy)
{
  PairPolicy item_policy = policy;
  item_policy.seed = derive_seed(policy.seed, seq.item_id);
  try {
    return sample_stereo_pair(static_cast<int>(seq.frames.size()), item_policy);
  } catch (const Error& e) {
    throw Error(e.code(), "item '" + seq.item_id + "': " + e.what());
  }
}

std::vector<FramePair> enumerate_training_pairs(int n_frames, int max_pairs, int min_gap)
{
  if (max_pairs < 1) {
    throw Error(ErrorCode::InvalidConfig, "max_pairs must be >= 1");
  }
  require_frames(n_frames, min_gap);
  std::vector<FramePair> all;
  for (int i = 0; i < n_frames; ++i) {
    for (int j = i + min_gap + 1; j < n_frames; ++j) {
      all.emplace_back(i, j);
    }
  }
  if (static_cast<int>(all.size()) <= max_pairs) {
    return all;
  }
  std::vector<FramePair> picked;
  picked.reserve(max_pairs);
  const std::size_t total = all.size();
  for (int k = 0; k < max_pairs; ++k) {
    picked.push_back(all[static_cast<std::size_t>(k) * total / static_cast<std::size_t>(max_pairs)]);
  }
  return picked;
}

std::vector<FramePair> enumerate_training_pairs(const FrameSequence& seq, int max_pairs, int min_gap)
{
  try {
    return enumerate_training_pairs(static_cast<int>(seq.frames.size()), max_pairs, min_gap);
  } catch (const Error& e) {
    throw Error(e.code(), "item '" + seq.item_id + "': " + e.what());
  }
}

std::vector<int> sample_views(int n_frames, int n, const PairPolicy& policy)
{
  if (n < 1) {
    throw Error(ErrorCode::InvalidConfig, "view count must be >= 1");
  }
  if (n == 2) {
    auto [i, j] = sample_stereo_pair(n_frames, policy);
    return {i, j};
  }
  if (n_frames < n) {
    throw Error(ErrorCode::SequenceTooShort,
                std::to_string(n_frames) + " frames cannot give " + std::to_string(n) + " distinct views");
  }
  Rng rng(policy.seed);
  if (n == 1) {
    return {static_cast<int>(rng.index(static_cast<std::uint64_t>(n_frames)))};
  }
  const int offset = static_cast<int>(rng.index(static_cast<std::uint64_t>(n_frames)));
  std::vector<int> out;
  out.reserve(n);
  for (int k = 0; k < n; ++k) {
    const long step = static_cast<long>(k) * n_frames / n;
    out.push_back(static_cast<int>((offset + step) % n_frames));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

StereoSample make_record(const FrameSequence& seq, int left, int right, int n_views, std::uint64_t seed)
{
  StereoSample s;
  s.item_id = seq.item_id;
  s.class_label = seq.class_label;
  s.left = seq.frames.at(left);
  s.right = seq.frames.at(right);
  s.volume_ml = *seq.volume_ml;
  s.frame_left = left;
  s.frame_right = right;
  s.food_code = seq.food_code;
  if (n_views > 2) {
    std::vector<int> rest;
    for (int f = 0; f < static_cast<int>(seq.frames.size()); ++f) {
      if (f != left && f != right) {
        rest.push_back(f);
      }
    }
    const auto extra = static_cast<std::size_t>(n_views - 2);
    if (rest.size() < extra) {
      throw Error(ErrorCode::SequenceTooShort, "item '" + seq.item_id + "' has " + std::to_string(seq.frames.size()) +
                                                   " frames, " + std::to_string(n_views) + " views requested");
    }
    Rng rng(derive_seed(seed, seq.item_id + "#" + std::to_string(left) + "," + std::to_string(right)));
    rng.shuffle(rest);
    rest.resize(extra);
    std::sort(rest.begin(), rest.end());
    for (int f : rest) {
      s.extra_views.push_back(seq.frames.at(static_cast<std::size_t>(f)));
      s.extra_frames.push_back(f);
    }
  }
  return s;
}

} // namespace

ManifestSplit build_manifest(const std::vector<FrameSequence>& sequences, const SplitPolicy& policy)
{
  if (sequences.empty()) {
    throw Error(ErrorCode::DataEmpty, "no sequences to split");
  }
  if (!(policy.train_fraction > 0.0 && policy.train_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidConfig, "train_fraction must be in (0, 1]");
  }

  std::vector<const FrameSequence*> ordered;
  std::set<std::string> seen;
  for (const auto& seq : sequences) {
    if (!seen.insert(seq.item_id).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate item_id '" + seq.item_id + "'");
    }
    if (!seq.volume_ml || !(*seq.volume_ml > 0.0)) {
      throw Error(ErrorCode::NonPositiveVolume, "item '" + seq.item_id + "' has no positive volume");
    }
    ordered.push_back(&seq);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const FrameSequence* a, const FrameSequence* b) { return a->item_id < b->item_id; });

  std::set<std::string> train_ids;
  const bool given = std::all_of(ordered.begin(), ordered.end(), [](const FrameSequence* s) { return s->split.has_value(); });
  if (given) {
    for (const auto* s : ordered) {
      if (*s->split == "train") {
        train_ids.insert(s->item_id);
      } else if (*s->split != "test") {
        throw Error(ErrorCode::InvalidConfig, "item '" + s->item_id + "' has split '" + *s->split + "'");
      }
    }
  } else {
    std::vector<std::string> ids;
    for (const auto* s : ordered) {
      ids.push_back(s->item_id);
    }
    Rng rng(derive_seed(policy.seed, "split"));
    rng.shuffle(ids);
    const auto n_train = static_cast<std::size_t>(std::llround(policy.train_fraction * static_cast<double>(ids.size())));
    train_ids.insert(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min(n_train, ids.size())));
  }

  ManifestSplit out;
  const PairPolicy pair_policy{policy.min_gap, policy.seed};
  for (const auto* s : ordered) {
    if (train_ids.count(s->item_id)) {
      for (auto [i, j] : enumerate_training_pairs(*s, policy.max_pairs, policy.min_gap)) {
        out.train.push_back(make_record(*s, i, j, policy.n_views, policy.seed));
      }
    } else {
      auto [i, j] = sample_stereo_pair(*s, pair_policy);
      out.test.push_back(make_record(*s, i, j, policy.n_views, policy.seed));
    }
  }
  return out;
}

std::vector<FrameSequence> read_sequences(const std::filesystem::path& path)
{
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_relative() ? (base / fp).lexically_normal() : fp;
  };
  std::vector<FrameSequence> out;
  for (const auto& r : read_jsonl(path)) {
    try {
      FrameSequence seq;
      seq.item_id = r.at("item_id").get<std::string>();
      seq.class_label = r.at("class_label").get<std::string>();
      for (const auto& f : r.at("frames")) {
        seq.frames.push_back(ImageRef::from_path(resolve(f.get<std::string>())));
      }
      if (r.contains("mesh")) seq.mesh = resolve(r.at("mesh").get<std::string>());
      if (r.contains("volume_ml")) seq.volume_ml = r.at("volume_ml").get<double>();
      if (r.contains("split")) seq.split = r.at("split").get<std::string>();
      if (r.contains("food_code")) seq.food_code = r.at("food_code").get<std::string>();
      out.push_back(std::move(seq));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
    }
  }
  return out;
}

void write_sequences(const std::filesystem::path& path, const std::vector<FrameSequence>& sequences)
{
  std::vector<Json> records;
  for (const auto& s : sequences) {
    Json j;
    j["item_id"] = s.item_id;
    j["class_label"] = s.class_label;
    Json frames = Json::array();
    for (const auto& f : s.frames) {
      frames.push_back(f.path.string());
    }
    j["frames"] = frames;
    if (s.mesh) j["mesh"] = s.mesh->string();
    if (s.volume_ml) j["volume_ml"] = *s.volume_ml;
    if (s.split) j["split"] = *s.split;
    if (s.food_code) j["food_code"] = *s.food_code;
    records.push_back(std::move(j));
  }
  write_text_file(path, to_jsonl(records));
}

} // namespace stereovol
