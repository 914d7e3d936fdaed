#include "stereovol/nutrition.hpp"

#include "stereovol/error.hpp"

#include <cmath>

namespace stereovol {

const std::array<std::string, kNutrientCount>& nutrient_names()
{
  static const std::array<std::string, kNutrientCount> names{"energy_kcal", "protein_g", "carbohydrate_g", "fat_g"};
  return names;
}

void NutrientProfile::validate() const
{
  if (!(reference_volume_ml > 0.0) || !std::isfinite(reference_volume_ml)) {
    throw Error(ErrorCode::InvalidConfig, "food code '" + food_code + "' has non-positive reference volume");
  }
  for (std::size_t k = 0; k < kNutrientCount; ++k) {
    if (!(values[k] >= 0.0) || !std::isfinite(values[k])) {
      throw Error(ErrorCode::InvalidConfig, "food code '" + food_code + "' has invalid " + nutrient_names()[k]);
    }
  }
}

NutrientValues scale_nutrients(const NutrientProfile& profile, double volume_ml)
{
  if (!(volume_ml > 0.0)) {
    throw Error(ErrorCode::NonPositiveVolume, "cannot scale nutrients by volume " + std::to_string(volume_ml));
  }
  NutrientValues out{};
  const double factor = volume_ml / profile.reference_volume_ml;
  for (std::size_t k = 0; k < kNutrientCount; ++k) {
    out[k] = profile.values[k] * factor;
  }
  return out;
}

NutrientValues nutrient_mae(std::span<const NutrientValues> estimates, std::span<const NutrientValues> truth)
{
  if (estimates.size() != truth.size()) {
    throw Error(ErrorCode::LengthMismatch, "nutrient estimates and ground truth differ in length");
  }
  if (estimates.empty()) {
    throw Error(ErrorCode::EmptyBatch, "nutrient MAE of no items");
  }
  NutrientValues out{};
  for (std::size_t k = 0; k < kNutrientCount; ++k) {
    std::vector<double> err;
    err.reserve(estimates.size());
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      err.push_back(std::abs(estimates[i][k] - truth[i][k]));
    }
    out[k] = compensated_mean(err);
  }
  return out;
}

const NutrientProfile& NutrientDatabase::profile(const std::string& food_code) const
{
  auto it = profiles.find(food_code);
  if (it == profiles.end()) {
    throw Error(ErrorCode::UnknownClass, "no nutrient profile for food code '" + food_code + "'");
  }
  return it->second;
}

namespace {

NutrientValues values_from_json(const Json& j)
{
  NutrientValues v{};
  for (std::size_t k = 0; k < kNutrientCount; ++k) {
    v[k] = j.at(nutrient_names()[k]).get<double>();
  }
  return v;
}

Json values_to_json(const NutrientValues& v)
{
  Json j;
  for (std::size_t k = 0; k < kNutrientCount; ++k) {
    j[nutrient_names()[k]] = v[k];
  }
  return j;
}

} // namespace

NutrientDatabase NutrientDatabase::from_json(const Json& j)
{
  try {
    NutrientDatabase db;
    for (const auto& [code, p] : j.at("profiles").items()) {
      NutrientProfile profile;
      profile.food_code = code;
      profile.reference_volume_ml = p.value("reference_volume_ml", 100.0);
      profile.values = values_from_json(p);
      profile.validate();
      db.profiles.emplace(code, profile);
    }
    if (j.contains("items")) {
      for (const auto& [id, item] : j.at("items").items()) {
        db.item_food_code[id] = item.at("food_code").get<std::string>();
        if (item.contains(nutrient_names()[0])) {
          db.item_truth[id] = values_from_json(item);
        }
      }
    }
    return db;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("nutrient database: ") + e.what());
  }
}

Json NutrientDatabase::to_json() const
{
  Json j;
  Json p = Json::object();
  for (const auto& [code, profile] : profiles) {
    Json entry = values_to_json(profile.values);
    entry["reference_volume_ml"] = profile.reference_volume_ml;
    p[code] = entry;
  }
  j["profiles"] = p;
  Json items = Json::object();
  for (const auto& [id, code] : item_food_code) {
    Json entry = Json::object();
    if (auto it = item_truth.find(id); it != item_truth.end()) {
      entry = values_to_json(it->second);
    }
    entry["food_code"] = code;
    items[id] = entry;
  }
  j["items"] = items;
  return j;
}

NutrientDatabase read_nutrient_database(const std::filesystem::path& path)
{
  return NutrientDatabase::from_json(read_json_file(path));
}

Json NutritionReport::to_json() const
{
  Json j;
  j["n_items"] = items.size();
  j["n_clipped"] = n_clipped;
  j["volume_mae_ml"] = volume_mae_ml;
  Json mae_json;
  for (std::size_t k = 0; k < kNutrientCount; ++k) {
    mae_json[nutrient_names()[k]] = mae[k];
  }
  j["mae"] = mae_json;
  Json rows = Json::array();
  for (const auto& it : items) {
    rows.push_back({{"item_id", it.item_id},
                    {"food_code", it.food_code},
                    {"volume_est_ml", it.volume_est_ml},
                    {"volume_gt_ml", it.volume_gt_ml},
                    {"estimate", values_to_json(it.estimate)},
                    {"truth", values_to_json(it.truth)}});
  }
  j["items"] = rows;
  return j;
}

NutritionReport nutrition_report(const PredictionSet& preds, const NutrientDatabase& db, bool clip_negative)
{
  NutritionReport report;
  std::vector<NutrientValues> est, truth;
  std::vector<double> vol_err;
  for (const auto& r : preds.records) {
    auto code = db.item_food_code.find(r.item_id);
    if (code == db.item_food_code.end()) {
      throw Error(ErrorCode::UnknownClass, "item '" + r.item_id + "' has no food code in the nutrient database");
    }
    const NutrientProfile& profile = db.profile(code->second);
    NutritionItem item;
    item.item_id = r.item_id;
    item.food_code = code->second;
    item.volume_est_ml = r.volume_est_ml;
    item.volume_gt_ml = r.volume_gt_ml;
    if (r.volume_est_ml > 0.0) {
      item.estimate = scale_nutrients(profile, r.volume_est_ml);
    } else if (clip_negative) {
      item.volume_est_ml = 0.0;
      ++report.n_clipped;
    } else {
      item.estimate = scale_nutrients(profile, r.volume_est_ml); // throws
    }
    if (auto t = db.item_truth.find(r.item_id); t != db.item_truth.end()) {
      item.truth = t->second;
    } else {
      item.truth = scale_nutrients(profile, r.volume_gt_ml);
    }
    est.push_back(item.estimate);
    truth.push_back(item.truth);
    vol_err.push_back(std::abs(item.volume_est_ml - item.volume_gt_ml));
    report.items.push_back(std::move(item));
  }
  report.mae = nutrient_mae(est, truth);
  report.volume_mae_ml = compensated_mean(vol_err);
  return report;
}

} // namespace stereovol
