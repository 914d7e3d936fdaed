#include "stereovol/priors.hpp"

#include "stereovol/error.hpp"

#include <cmath>
#include <cstdio>
#include <set>

namespace stereovol {

double VolumePriorTable::at(const std::string& class_label) const
{
  auto it = entries.find(class_label);
  if (it == entries.end()) {
    throw Error(ErrorCode::UnknownClass, "no volume prior for class '" + class_label + "'");
  }
  return it->second;
}

void VolumePriorTable::check_covers(const ClassVocabulary& vocab) const
{
  for (const auto& name : vocab.names()) {
    (void)at(name);
  }
}

VolumePriorTable build_prior_table(std::span<const StereoSample> train, const ClassVocabulary& vocab)
{
  struct Acc {
    double sum = 0.0;
    double comp = 0.0;
    int count = 0;
  };
  std::vector<Acc> acc(static_cast<std::size_t>(vocab.size()));
  std::set<std::string> seen;
  for (const auto& s : train) {
    if (!seen.insert(s.item_id).second) {
      continue;
    }
    auto& a = acc[static_cast<std::size_t>(vocab.index_of(s.class_label))];
    const double t = a.sum + s.volume_ml;
    a.comp += std::abs(a.sum) >= std::abs(s.volume_ml) ? (a.sum - t) + s.volume_ml : (s.volume_ml - t) + a.sum;
    a.sum = t;
    ++a.count;
  }
  VolumePriorTable table;
  table.source = VolumePriorTable::Source::TrainSplit;
  for (int c = 0; c < vocab.size(); ++c) {
    const auto& a = acc[static_cast<std::size_t>(c)];
    if (a.count == 0) {
      throw Error(ErrorCode::EmptyClass, "class '" + vocab.name(c) + "' has no training items");
    }
    table.entries[vocab.name(c)] = (a.sum + a.comp) / a.count;
  }
  return table;
}

double prior_for_prediction(const VolumePriorTable& table, const std::string& predicted_class)
{
  return table.at(predicted_class);
}

Json prior_table_to_json(const VolumePriorTable& table)
{
  Json j;
  j["source"] = table.source == VolumePriorTable::Source::TrainSplit ? "train-split computed" : "external";
  j["entries"] = table.entries;
  return j;
}

VolumePriorTable prior_table_from_json(const Json& j)
{
  VolumePriorTable table;
  try {
    const auto source = j.at("source").get<std::string>();
    if (source == "train-split computed") {
      table.source = VolumePriorTable::Source::TrainSplit;
    } else if (source == "external") {
      table.source = VolumePriorTable::Source::External;
    } else {
      throw Error(ErrorCode::Parse, "unknown prior source '" + source + "'");
    }
    table.entries = j.at("entries").get<std::map<std::string, double>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("prior table: ") + e.what());
  }
  for (const auto& [name, v] : table.entries) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw Error(ErrorCode::NonPositiveVolume, "prior for '" + name + "' is not positive");
    }
  }
  return table;
}

VolumePriorTable read_prior_table(const std::filesystem::path& path)
{
  return prior_table_from_json(read_json_file(path));
}

void write_prior_table(const std::filesystem::path& path, const VolumePriorTable& table)
{
  write_json_file(path, prior_table_to_json(table));
}

namespace {

std::size_t count_occurrences(const std::string& haystack, const std::string& needle)
{
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

} // namespace

PromptTemplate::PromptTemplate(int id, std::string pattern) : id_(id), pattern_(std::move(pattern))
{
  if (count_occurrences(pattern_, "{class}") != 1 || count_occurrences(pattern_, "{volume}") != 1) {
    throw Error(ErrorCode::InvalidTemplate, "template must contain {class} and {volume} exactly once: '" + pattern_ + "'");
  }
}

PromptTemplate PromptTemplate::builtin(int id)
{
  switch (id) {
  case 0: return {0, "These are stereo image pairs of {class} whose approximate volume is {volume} mL."};
  case 1: return {1, "Detected object: {class} estimated volume: {volume} mL"};
  case 2: return {2, "Object identified as {class} with volume approximately {volume} mL"};
  case 3: return {3, "Classification: {class} | Volume estimate: {volume} mL"};
  case 4: return {4, "This appears to be a {class} measuring roughly {volume} mL in volume"};
  case 5: return {5, "The object is {class} and the approximate volume is {volume} mL"};
  default: throw Error(ErrorCode::InvalidTemplate, "no built-in template " + std::to_string(id));
  }
}

std::string format_volume(double volume_ml, int decimals)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, volume_ml);
  return buf;
}

std::string render_prompt(const PromptTemplate& tmpl, const std::string& class_label, double mean_volume_ml,
                          int decimals)
{
  if (!(mean_volume_ml > 0.0) || !std::isfinite(mean_volume_ml)) {
    throw Error(ErrorCode::NonPositiveVolume, "prompt volume must be positive");
  }
  std::string out = tmpl.pattern();
  out.replace(out.find("{class}"), 7, class_label);
  // Search after substitution of the class; the class text could itself contain "{volume}".
  const auto cls_pos = tmpl.pattern().find("{class}");
  const auto vol_pos_in_pattern = tmpl.pattern().find("{volume}");
  auto vol_pos = vol_pos_in_pattern;
  if (vol_pos_in_pattern > cls_pos) {
    vol_pos = vol_pos_in_pattern - 7 + class_label.size();
  }
  out.replace(vol_pos, 8, format_volume(mean_volume_ml, decimals));
  return out;
}

} // namespace stereovol
