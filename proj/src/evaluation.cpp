#include "stereovol/evaluation.hpp"

#include "stereovol/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace stereovol {

void PredictionSet::validate() const
{
  std::set<std::string> ids;
  for (const auto& r : records) {
    if (!ids.insert(r.item_id).second) {
      throw Error(ErrorCode::InvalidConfig, "duplicate item_id '" + r.item_id + "' in prediction set");
    }
    if (!(r.volume_gt_ml > 0.0)) {
      throw Error(ErrorCode::ZeroGroundTruth, "item '" + r.item_id + "' has non-positive ground truth");
    }
  }
}

Json prediction_to_json(const PredictionRecord& r)
{
  Json j;
  j["item_id"] = r.item_id;
  j["class_label"] = r.class_label;
  j["predicted_class"] = r.predicted_class;
  j["volume_est_ml"] = r.volume_est_ml;
  j["volume_gt_ml"] = r.volume_gt_ml;
  if (!r.prompt.empty()) {
    j["prompt"] = r.prompt;
  }
  return j;
}

PredictionRecord prediction_from_json(const Json& j)
{
  try {
    PredictionRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    r.class_label = j.value("class_label", std::string{});
    r.predicted_class = j.value("predicted_class", std::string{});
    r.volume_est_ml = j.at("volume_est_ml").get<double>();
    r.volume_gt_ml = j.at("volume_gt_ml").get<double>();
    r.prompt = j.value("prompt", std::string{});
    return r;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("prediction record: ") + e.what());
  }
}

PredictionSet read_predictions(const std::filesystem::path& path)
{
  PredictionSet set;
  for (const auto& j : read_jsonl(path)) {
    set.records.push_back(prediction_from_json(j));
  }
  return set;
}

std::string serialize_predictions(const PredictionSet& set)
{
  std::vector<Json> records;
  for (const auto& r : set.records) {
    records.push_back(prediction_to_json(r));
  }
  return to_jsonl(records);
}

void write_predictions(const std::filesystem::path& path, const PredictionSet& set)
{
  write_text_file(path, serialize_predictions(set));
}

Json MetricsReport::to_json() const
{
  Json j;
  j["mae_ml"] = mae_ml;
  j["mape_percent"] = mape_percent;
  j["pearson_r"] = pearson_r;
  j["r_squared"] = r_squared;
  j["cosine_similarity"] = cosine_similarity;
  j["n_items"] = n_items;
  j["n_clipped"] = n_clipped;
  if (classification_accuracy) {
    j["classification_accuracy"] = *classification_accuracy;
  }
  return j;
}

MetricsReport MetricsReport::from_json(const Json& j)
{
  try {
    MetricsReport m;
    m.mae_ml = j.at("mae_ml").get<double>();
    m.mape_percent = j.at("mape_percent").get<double>();
    m.pearson_r = j.at("pearson_r").get<double>();
    m.r_squared = j.at("r_squared").get<double>();
    m.cosine_similarity = j.at("cosine_similarity").get<double>();
    m.n_items = j.value("n_items", std::size_t{0});
    m.n_clipped = j.value("n_clipped", std::size_t{0});
    if (j.contains("classification_accuracy")) {
      m.classification_accuracy = j.at("classification_accuracy").get<double>();
    }
    return m;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("metrics: ") + e.what());
  }
}

namespace {

class NeumaierSum {
public:
  void add(double x)
  {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

bool all_equal(std::span<const double> v)
{
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

} // namespace

double compensated_mean(std::span<const double> values)
{
  if (values.empty()) {
    throw Error(ErrorCode::TooFewItems, "mean of no values");
  }
  NeumaierSum s;
  for (double v : values) {
    s.add(v);
  }
  return s.value() / static_cast<double>(values.size());
}

MetricsReport compute_metrics(const PredictionSet& preds, const MetricsOptions& options)
{
  preds.validate();
  const std::size_t n = preds.size();
  if (n < 2) {
    throw Error(ErrorCode::TooFewItems, "metrics need at least 2 items, got " + std::to_string(n));
  }
  MetricsReport m;
  m.n_items = n;
  std::vector<double> est(n), gt(n);
  std::size_t with_class = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = preds.records[i];
    est[i] = r.volume_est_ml;
    if (options.clip_negative && est[i] < 0.0) {
      est[i] = 0.0;
      ++m.n_clipped;
    }
    gt[i] = r.volume_gt_ml;
    if (!r.predicted_class.empty()) {
      ++with_class;
      correct += r.predicted_class == r.class_label;
    }
  }
  if (with_class > 0) {
    m.classification_accuracy = static_cast<double>(correct) / static_cast<double>(with_class);
  }

  NeumaierSum abs_err, pct_err, ss_res, dot, est_sq, gt_sq;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = std::abs(est[i] - gt[i]);
    abs_err.add(e);
    pct_err.add(e / gt[i]);
    ss_res.add((gt[i] - est[i]) * (gt[i] - est[i]));
    dot.add(est[i] * gt[i]);
    est_sq.add(est[i] * est[i]);
    gt_sq.add(gt[i] * gt[i]);
  }
  const double nn = static_cast<double>(n);
  m.mae_ml = abs_err.value() / nn;
  m.mape_percent = 100.0 * pct_err.value() / nn;

  const double est_mean = compensated_mean(est);
  const double gt_mean = compensated_mean(gt);
  NeumaierSum cov, est_var, gt_var, ss_tot;
  for (std::size_t i = 0; i < n; ++i) {
    const double de = est[i] - est_mean;
    const double dg = gt[i] - gt_mean;
    cov.add(de * dg);
    est_var.add(de * de);
    gt_var.add(dg * dg);
    ss_tot.add(dg * dg);
  }
  const bool est_const = all_equal(est);
  const bool gt_const = all_equal(gt);
  if (est_const || gt_const) {
    m.pearson_r = 0.0;
  } else {
    m.pearson_r = std::clamp(cov.value() / std::sqrt(est_var.value() * gt_var.value()), -1.0, 1.0);
  }
  m.r_squared = gt_const ? 0.0 : 1.0 - ss_res.value() / ss_tot.value();

  const double norms = std::sqrt(est_sq.value()) * std::sqrt(gt_sq.value());
  m.cosine_similarity = norms > 0.0 ? std::clamp(dot.value() / norms, -1.0, 1.0) : 0.0;
  return m;
}

std::vector<double> distinct_item_volumes(std::span<const StereoSample> samples)
{
  std::set<std::string> seen;
  std::vector<double> out;
  for (const auto& s : samples) {
    if (seen.insert(s.item_id).second) {
      out.push_back(s.volume_ml);
    }
  }
  return out;
}

namespace {

PredictionSet constant_predictions(std::span<const StereoSample> test, auto&& value_for)
{
  PredictionSet out;
  std::set<std::string> seen;
  for (const auto& s : test) {
    if (!seen.insert(s.item_id).second) {
      continue;
    }
    PredictionRecord r;
    r.item_id = s.item_id;
    r.class_label = s.class_label;
    r.volume_est_ml = value_for(s);
    r.volume_gt_ml = s.volume_ml;
    out.records.push_back(std::move(r));
  }
  return out;
}

} // namespace

PredictionSet baseline_dataset_mean(std::span<const double> train_volumes, std::span<const StereoSample> test)
{
  if (train_volumes.empty()) {
    throw Error(ErrorCode::DataEmpty, "dataset-mean baseline needs training volumes");
  }
  const double mean = compensated_mean(train_volumes);
  return constant_predictions(test, [&](const StereoSample&) { return mean; });
}

PredictionSet baseline_category_mean(const VolumePriorTable& priors, std::span<const StereoSample> test)
{
  return constant_predictions(test, [&](const StereoSample& s) { return priors.at(s.class_label); });
}

KdeSeries gaussian_kde(std::span<const double> samples)
{
  const std::size_t n = samples.size();
  if (n < 2) {
    throw Error(ErrorCode::TooFewItems, "KDE needs at least 2 samples");
  }
  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  const double mean = compensated_mean(x);
  NeumaierSum ss;
  for (double v : x) {
    ss.add((v - mean) * (v - mean));
  }
  const double sd = std::sqrt(ss.value() / static_cast<double>(n - 1));
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    return x[lo] + (pos - static_cast<double>(lo)) * (x[hi] - x[lo]);
  };
  const double iqr_scale = (quantile(0.75) - quantile(0.25)) / 1.34;
  double spread = std::min(sd, iqr_scale);
  if (!(spread > 0.0)) {
    spread = std::max(sd, iqr_scale);
  }
  if (!(spread > 0.0)) {
    spread = 1e-3 * std::max(1.0, std::abs(mean)); // all samples equal
  }

  KdeSeries out;
  out.bandwidth = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  const double h = out.bandwidth;
  const double lo = x.front() - 5.0 * h;
  const double hi = x.back() + 5.0 * h;
  const auto points = static_cast<std::size_t>(
      std::clamp(std::ceil((hi - lo) / (h / 8.0)) + 1.0, 512.0, 65536.0));
  const double step = (hi - lo) / static_cast<double>(points - 1);
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));
  out.grid.resize(points);
  out.density.resize(points);
  for (std::size_t g = 0; g < points; ++g) {
    const double at = lo + step * static_cast<double>(g);
    // Kernel mass beyond 9 bandwidths is below 1e-17 and skipped.
    auto first = std::lower_bound(x.begin(), x.end(), at - 9.0 * h);
    auto last = std::upper_bound(x.begin(), x.end(), at + 9.0 * h);
    double sum = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (at - *it) / h;
      sum += std::exp(-0.5 * u * u);
    }
    out.grid[g] = at;
    out.density[g] = sum * norm;
  }
  return out;
}

ErrorDistribution error_distribution_series(const PredictionSet& preds, const MetricsOptions& options)
{
  preds.validate();
  const std::size_t n = preds.size();
  if (n < 2) {
    throw Error(ErrorCode::TooFewItems, "error distribution needs at least 2 items");
  }
  std::vector<double> abs_err, pct_err;
  for (const auto& r : preds.records) {
    double est = r.volume_est_ml;
    if (options.clip_negative && est < 0.0) {
      est = 0.0;
    }
    abs_err.push_back(std::abs(est - r.volume_gt_ml));
    pct_err.push_back(100.0 * (est - r.volume_gt_ml) / r.volume_gt_ml);
  }
  std::sort(abs_err.begin(), abs_err.end());
  ErrorDistribution out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n && abs_err[i + 1] == abs_err[i]) {
      continue; // ties collapse onto their last occurrence
    }
    out.cdf.emplace_back(abs_err[i], static_cast<double>(i + 1) / static_cast<double>(n));
  }
  out.kde = gaussian_kde(pct_err);
  return out;
}

void write_evaluation(const std::filesystem::path& out_dir, const MetricsReport& metrics, const ErrorDistribution& dist)
{
  std::filesystem::create_directories(out_dir);
  write_json_file(out_dir / "metrics.json", metrics.to_json());
  char buf[96];
  std::string cdf = "abs_error_ml,cumulative_fraction\n";
  for (auto [e, f] : dist.cdf) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", e, f);
    cdf += buf;
  }
  write_text_file(out_dir / "cdf.csv", cdf);
  std::string kde = "pct_error,density\n";
  for (std::size_t i = 0; i < dist.kde.grid.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", dist.kde.grid[i], dist.kde.density[i]);
    kde += buf;
  }
  write_text_file(out_dir / "kde.csv", kde);
}

} // namespace stereovol
