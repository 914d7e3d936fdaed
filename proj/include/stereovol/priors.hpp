#pragma once

#include "stereovol/io.hpp"
#include "stereovol/types.hpp"

#include <map>
#include <span>
#include <string>

namespace stereovol {

/// Class label -> mean volume (mL), the class-conditional prior injected into
/// the text prompt.
struct VolumePriorTable {
  enum class Source { TrainSplit, External };

  std::map<std::string, double> entries;
  Source source = Source::TrainSplit;

  /// Exact stored value; throws UnknownClass.
  double at(const std::string& class_label) const;
  /// Throws UnknownClass if any vocabulary class is missing.
  void check_covers(const ClassVocabulary& vocab) const;

  bool operator==(const VolumePriorTable&) const = default;
};

/// Per-class arithmetic mean over distinct items (repeated pair records of one
/// item count once). Throws EmptyClass for a vocabulary class with no items.
VolumePriorTable build_prior_table(std::span<const StereoSample> train, const ClassVocabulary& vocab);

double prior_for_prediction(const VolumePriorTable& table, const std::string& predicted_class);

// {"source": "train-split computed" | "external", "entries": {class: mL}}
Json prior_table_to_json(const VolumePriorTable& table);
VolumePriorTable prior_table_from_json(const Json& j);
VolumePriorTable read_prior_table(const std::filesystem::path& path);
void write_prior_table(const std::filesystem::path& path, const VolumePriorTable& table);

/// Sentence pattern with exactly one `{class}` and one `{volume}` placeholder.
class PromptTemplate {
public:
  PromptTemplate(int id, std::string pattern);

  /// Built-in templates: 0 is the stereo-pair sentence, 1..5 the phrasing
  /// variants (5 is the default).
  static PromptTemplate builtin(int id);
  static constexpr int kBuiltinCount = 6;

  int id() const noexcept { return id_; }
  const std::string& pattern() const noexcept { return pattern_; }

private:
  int id_;
  std::string pattern_;
};

/// Fixed-point rendering with `decimals` digits after the point.
std::string format_volume(double volume_ml, int decimals);

std::string render_prompt(const PromptTemplate& tmpl, const std::string& class_label, double mean_volume_ml,
                          int decimals);

} // namespace stereovol
