#pragma once

#include "stereovol/ingestion.hpp"
#include "stereovol/model.hpp"
#include "stereovol/pipeline.hpp"
#include "stereovol/priors.hpp"
#include "stereovol/synthetic.hpp"
#include "stereovol/rng.hpp"
#include "stereovol/types.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

namespace stereovol::testkit {

inline std::filesystem::path temp_dir(const std::string& tag)
{
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("stereovol-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline Vector random_vector(Rng& rng, int n, double scale = 1.0)
{
  Vector v(n);
  for (int i = 0; i < n; ++i) {
    v(i) = scale * rng.uniform(-1.0, 1.0);
  }
  return v;
}

inline Matrix random_matrix(Rng& rng, int rows, int cols, double scale = 1.0)
{
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j) {
    for (int i = 0; i < rows; ++i) {
      m(i, j) = scale * rng.uniform(-1.0, 1.0);
    }
  }
  return m;
}

inline bool close_rel(double a, double b, double rel, double abs_floor = 0.0)
{
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

inline StereoSample in_memory_sample(const std::string& id, const std::string& cls, double volume,
                                     std::shared_ptr<const Image> left, std::shared_ptr<const Image> right)
{
  StereoSample s;
  s.item_id = id;
  s.class_label = cls;
  s.volume_ml = volume;
  s.left = ImageRef::from_pixels(id + "/L", std::move(left));
  s.right = ImageRef::from_pixels(id + "/R", std::move(right));
  s.frame_left = 0;
  s.frame_right = 2;
  return s;
}

/// Synthetic sequences split into train pairs and one test pair per item, with
/// priors from the training split.
inline ExperimentData synthetic_experiment(const SyntheticSpec& spec, const SplitPolicy& policy = {})
{
  const auto data = make_synthetic(spec);
  auto split = build_manifest(data.sequences, policy);
  ExperimentData out;
  out.vocab = data.vocabulary();
  out.priors = build_prior_table(split.train, out.vocab);
  out.train = std::move(split.train);
  out.test = std::move(split.test);
  return out;
}

/// First record of every item.
inline std::vector<StereoSample> one_per_item(const std::vector<StereoSample>& samples)
{
  std::vector<StereoSample> out;
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (seen.insert(s.item_id).second) {
      out.push_back(s);
    }
  }
  return out;
}

/// Random prediction set of n items. Shapes rotate through wide-range volumes,
/// near-perfect estimates, negative estimates, constant estimates, constant
/// ground truth and heavy ties.
inline PredictionSet random_predictions(Rng& rng, std::size_t n, int shape)
{
  PredictionSet set;
  const double gt_const = std::exp(rng.uniform(0.0, 7.0));
  const double est_const = rng.uniform(-50.0, 500.0);
  for (std::size_t i = 0; i < n; ++i) {
    PredictionRecord r;
    r.item_id = "item" + std::to_string(i);
    r.class_label = "c" + std::to_string(rng.index(4));
    double gt = std::exp(rng.uniform(-2.0, 9.0));
    double est = gt * std::exp(rng.normal() * 0.5);
    switch (shape % 6) {
    case 1: est = gt * (1.0 + 1e-3 * rng.normal()); break;
    case 2: est = gt + rng.uniform(-2.0, 1.0) * gt; break;
    case 3: est = est_const; break;
    case 4: gt = gt_const; break;
    case 5:
      gt = 1.0 + static_cast<double>(rng.index(5));
      est = static_cast<double>(rng.index(7)) - 1.0;
      break;
    default: break;
    }
    r.volume_est_ml = est;
    r.volume_gt_ml = gt;
    set.records.push_back(std::move(r));
  }
  return set;
}

} // namespace stereovol::testkit
