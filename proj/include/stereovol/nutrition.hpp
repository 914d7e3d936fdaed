#pragma once

#include "stereovol/evaluation.hpp"
#include "stereovol/io.hpp"

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stereovol {

inline constexpr std::size_t kNutrientCount = 4;
/// Column names, in the order used by NutrientValues.
const std::array<std::string, kNutrientCount>& nutrient_names(); // energy_kcal, protein_g, carbohydrate_g, fat_g

using NutrientValues = std::array<double, kNutrientCount>;

/// Nutrients of `reference_volume_ml` of one food.
struct NutrientProfile {
  std::string food_code;
  double reference_volume_ml = 100.0;
  NutrientValues values{};

  void validate() const; // throws InvalidConfig
};

/// Linear scaling by estimate / reference volume. Throws NonPositiveVolume.
NutrientValues scale_nutrients(const NutrientProfile& profile, double volume_ml);

/// Per-nutrient mean absolute error. Throws LengthMismatch or EmptyBatch.
NutrientValues nutrient_mae(std::span<const NutrientValues> estimates, std::span<const NutrientValues> truth);

/// Local nutrient database:
///   {"profiles": {food_code: {"reference_volume_ml": x, "energy_kcal": ...,
///                             "protein_g": ..., "carbohydrate_g": ..., "fat_g": ...}},
///    "items": {item_id: {"food_code": code, optional ground-truth nutrients}}}
/// Items without ground-truth nutrients use the profile scaled by the
/// ground-truth volume.
struct NutrientDatabase {
  std::map<std::string, NutrientProfile> profiles;
  std::map<std::string, std::string> item_food_code;
  std::map<std::string, NutrientValues> item_truth;

  const NutrientProfile& profile(const std::string& food_code) const; // throws UnknownClass

  static NutrientDatabase from_json(const Json& j);
  Json to_json() const;
};

NutrientDatabase read_nutrient_database(const std::filesystem::path& path);

struct NutritionItem {
  std::string item_id;
  std::string food_code;
  double volume_est_ml = 0.0;
  double volume_gt_ml = 0.0;
  NutrientValues estimate{};
  NutrientValues truth{};
};

struct NutritionReport {
  std::vector<NutritionItem> items;
  double volume_mae_ml = 0.0;
  NutrientValues mae{};
  std::size_t n_clipped = 0;

  Json to_json() const;
};

/// Scales each predicted item's profile by its estimate. With `clip_negative`
/// non-positive estimates give zero nutrients and are counted; without it they
/// throw NonPositiveVolume.
NutritionReport nutrition_report(const PredictionSet& preds, const NutrientDatabase& db, bool clip_negative = true);

} // namespace stereovol
