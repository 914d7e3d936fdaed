#pragma once

#include "stereovol/evaluation.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stereovol {

struct MethodMetrics {
  std::string method;
  MetricsReport metrics;
};

enum class Direction { LowerIsBetter, HigherIsBetter };

struct MetricColumn {
  std::string header;
  Direction direction;
  double MetricsReport::*field;
};

/// MAE and MAPE (lower is better), then r, R^2 and cosine similarity.
const std::vector<MetricColumn>& metric_columns();

/// Percent change of `ours` against the best other value of a column, where
/// best is the minimum for lower-is-better and the maximum otherwise.
/// Empty when there is no other method or the best value is zero.
std::optional<double> relative_improvement(double ours, std::span<const double> others, Direction direction);

struct ComparisonTable {
  std::vector<MethodMetrics> rows;
  std::size_t ours = 0; // row index the improvement row is computed for

  /// Aligned plain-text table with arrow markers and, with more than one row,
  /// a final improvement row.
  std::string render_text() const;
  std::string render_csv() const;
  Json to_json() const;
};

/// `ours` names the method to compare; defaults to the last row.
ComparisonTable make_comparison(std::vector<MethodMetrics> rows, const std::optional<std::string>& ours = {});

} // namespace stereovol
