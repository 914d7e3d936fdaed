#pragma once

#include "stereovol/io.hpp"
#include "stereovol/priors.hpp"
#include "stereovol/types.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace stereovol {

struct PredictionRecord {
  std::string item_id;
  std::string class_label;
  std::string predicted_class;
  double volume_est_ml = 0.0; // raw model output, may be negative
  double volume_gt_ml = 0.0;
  std::string prompt;
};

struct PredictionSet {
  std::vector<PredictionRecord> records;

  /// Throws ZeroGroundTruth or InvalidConfig (duplicate item ids).
  void validate() const;
  std::size_t size() const noexcept { return records.size(); }
};

Json prediction_to_json(const PredictionRecord& r);
PredictionRecord prediction_from_json(const Json& j);
PredictionSet read_predictions(const std::filesystem::path& path);
/// JSON Lines, records in the set's order.
std::string serialize_predictions(const PredictionSet& set);
void write_predictions(const std::filesystem::path& path, const PredictionSet& set);

struct MetricsReport {
  double mae_ml = 0.0;
  double mape_percent = 0.0;
  double pearson_r = 0.0;
  double r_squared = 0.0;
  double cosine_similarity = 0.0;
  std::size_t n_items = 0;
  std::size_t n_clipped = 0;
  std::optional<double> classification_accuracy; // absent when no item carries a predicted class

  Json to_json() const;
  static MetricsReport from_json(const Json& j);
};

struct MetricsOptions {
  bool clip_negative = true; // negative estimates are scored as 0 mL
};

/// Neumaier-compensated arithmetic mean.
double compensated_mean(std::span<const double> values);

/// MAE, MAPE (percent), Pearson r (0 when either side is constant), R^2 (0
/// when the ground truth is constant) and cosine similarity.
MetricsReport compute_metrics(const PredictionSet& preds, const MetricsOptions& options = {});

/// Every prediction is the mean of `train_volumes`.
PredictionSet baseline_dataset_mean(std::span<const double> train_volumes, std::span<const StereoSample> test);

/// Every prediction is the prior of the item's ground-truth class.
PredictionSet baseline_category_mean(const VolumePriorTable& priors, std::span<const StereoSample> test);

/// One volume per distinct item id, in first-seen order.
std::vector<double> distinct_item_volumes(std::span<const StereoSample> samples);

struct KdeSeries {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> density;
};

/// Gaussian KDE with Silverman's rule-of-thumb bandwidth,
/// 0.9 * min(sd, IQR / 1.34) * n^(-1/5), evaluated on a grid that extends five
/// bandwidths past the data.
KdeSeries gaussian_kde(std::span<const double> samples);

struct ErrorDistribution {
  std::vector<std::pair<double, double>> cdf; // (absolute error mL, fraction <= it), one point per distinct value
  KdeSeries kde;                              // signed percentage error 100 * (est - gt) / gt
};

ErrorDistribution error_distribution_series(const PredictionSet& preds, const MetricsOptions& options = {});

/// Writes metrics.json, cdf.csv and kde.csv into `out_dir`.
void write_evaluation(const std::filesystem::path& out_dir, const MetricsReport& metrics, const ErrorDistribution& dist);

} // namespace stereovol
