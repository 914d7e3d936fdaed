#include "stereovol/report.hpp"

#include "stereovol/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace stereovol {

const std::vector<MetricColumn>& metric_columns()
{
  static const std::vector<MetricColumn> columns{
      {"MAE (mL)", Direction::LowerIsBetter, &MetricsReport::mae_ml},
      {"MAPE (%)", Direction::LowerIsBetter, &MetricsReport::mape_percent},
      {"r", Direction::HigherIsBetter, &MetricsReport::pearson_r},
      {"R^2", Direction::HigherIsBetter, &MetricsReport::r_squared},
      {"cos", Direction::HigherIsBetter, &MetricsReport::cosine_similarity},
  };
  return columns;
}

std::optional<double> relative_improvement(double ours, std::span<const double> others, Direction direction)
{
  if (others.empty()) {
    return std::nullopt;
  }
  const double best = direction == Direction::LowerIsBetter ? *std::min_element(others.begin(), others.end())
                                                            : *std::max_element(others.begin(), others.end());
  if (best == 0.0) {
    return std::nullopt;
  }
  return (ours - best) / std::abs(best) * 100.0;
}

ComparisonTable make_comparison(std::vector<MethodMetrics> rows, const std::optional<std::string>& ours)
{
  if (rows.empty()) {
    throw Error(ErrorCode::InvalidConfig, "report needs at least one metrics file");
  }
  ComparisonTable table;
  table.rows = std::move(rows);
  table.ours = table.rows.size() - 1;
  if (ours) {
    auto it = std::find_if(table.rows.begin(), table.rows.end(), [&](const auto& r) { return r.method == *ours; });
    if (it == table.rows.end()) {
      throw Error(ErrorCode::InvalidConfig, "no method named '" + *ours + "' in report");
    }
    table.ours = static_cast<std::size_t>(it - table.rows.begin());
  }
  return table;
}

namespace {

std::string fmt(double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string fmt_pct(std::optional<double> v)
{
  if (!v) {
    return "n/a";
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "(%+.1f%%)", *v);
  return buf;
}

std::vector<std::optional<double>> improvements(const ComparisonTable& t)
{
  std::vector<std::optional<double>> out;
  for (const auto& col : metric_columns()) {
    std::vector<double> others;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (i != t.ours) {
        others.push_back(t.rows[i].metrics.*col.field);
      }
    }
    out.push_back(relative_improvement(t.rows[t.ours].metrics.*col.field, others, col.direction));
  }
  return out;
}

} // namespace

std::string ComparisonTable::render_text() const
{
  const auto& cols = metric_columns();
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Method"};
  for (const auto& c : cols) {
    header.push_back(c.header + (c.direction == Direction::LowerIsBetter ? " ↓" : " ↑"));
  }
  cells.push_back(header);
  for (const auto& r : rows) {
    std::vector<std::string> line{r.method};
    for (const auto& c : cols) {
      line.push_back(fmt(r.metrics.*c.field));
    }
    cells.push_back(line);
  }
  if (rows.size() > 1) {
    std::vector<std::string> line{"Improvement (" + rows[ours].method + ")"};
    for (const auto& v : improvements(*this)) {
      line.push_back(fmt_pct(v));
    }
    cells.push_back(line);
  }

  // Display width counts code points so the arrows align.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> w(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size(); ++i) {
      w[i] = std::max(w[i], width(line[i]));
    }
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      const std::string pad(w[i] - width(cells[r][i]), ' ');
      out += i == 0 ? cells[r][i] + pad : "  " + pad + cells[r][i];
    }
    out += '\n';
    if (r == 0 || (rows.size() > 1 && r == cells.size() - 2)) {
      std::size_t total = 0;
      for (auto x : w) {
        total += x + 2;
      }
      out += std::string(total - 2, '-') + '\n';
    }
  }
  return out;
}

std::string ComparisonTable::render_csv() const
{
  std::string out = "method";
  for (const auto& c : metric_columns()) {
    out += "," + c.header;
  }
  out += '\n';
  char buf[64];
  for (const auto& r : rows) {
    out += r.method;
    for (const auto& c : metric_columns()) {
      std::snprintf(buf, sizeof buf, ",%.17g", r.metrics.*c.field);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

Json ComparisonTable::to_json() const
{
  Json j;
  Json methods = Json::array();
  for (const auto& r : rows) {
    Json m = r.metrics.to_json();
    m["method"] = r.method;
    methods.push_back(m);
  }
  j["methods"] = methods;
  j["ours"] = rows[ours].method;
  if (rows.size() > 1) {
    Json imp;
    const auto values = improvements(*this);
    for (std::size_t i = 0; i < values.size(); ++i) {
      imp[metric_columns()[i].header] = values[i] ? Json(*values[i]) : Json(nullptr);
    }
    j["improvement_percent"] = imp;
  }
  return j;
}

} // namespace stereovol
