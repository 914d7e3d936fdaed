#include "stereovol/error.hpp"
#include "stereovol/report.hpp"

#include <gtest/gtest.h>

#include <array>
#include <sstream>

using namespace stereovol;

namespace {

MetricsReport metrics(double mae, double mape, double r, double r2, double cos)
{
  MetricsReport m;
  m.mae_ml = mae;
  m.mape_percent = mape;
  m.pearson_r = r;
  m.r_squared = r2;
  m.cosine_similarity = cos;
  m.n_items = 10;
  return m;
}

std::vector<std::string> lines(const std::string& s)
{
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) {
    out.push_back(l);
  }
  return out;
}

} // namespace

TEST(RelativeImprovement, LowerIsBetter)
{
  const std::array<double, 2> others{90.59, 120.0};
  EXPECT_NEAR(*relative_improvement(47.95, others, Direction::LowerIsBetter), -47.0692, 1e-3);
}

TEST(RelativeImprovement, HigherIsBetterUsesMaximum)
{
  const std::array<double, 2> others{0.5, 0.8};
  EXPECT_NEAR(*relative_improvement(0.9, others, Direction::HigherIsBetter), 12.5, 1e-12);
}

TEST(RelativeImprovement, EmptyOrZeroBest)
{
  EXPECT_FALSE(relative_improvement(1.0, {}, Direction::LowerIsBetter));
  const std::array<double, 1> zero{0.0};
  EXPECT_FALSE(relative_improvement(1.0, zero, Direction::HigherIsBetter));
  const std::array<double, 1> same{3.0};
  EXPECT_EQ(*relative_improvement(3.0, same, Direction::LowerIsBetter), 0.0);
}

TEST(ComparisonTable, SingleRowHasNoImprovementRow)
{
  const auto t = make_comparison({{"ours", metrics(1, 2, 0.5, 0.25, 0.9)}});
  const auto text = t.render_text();
  EXPECT_EQ(text.find("Improvement"), std::string::npos);
  EXPECT_EQ(lines(text).size(), 3u);
  EXPECT_FALSE(t.to_json().contains("improvement_percent"));
}

TEST(ComparisonTable, ImprovementRowRendered)
{
  const auto t = make_comparison({{"category_mean", metrics(90.59, 80, 0.5, 0.2, 0.9)},
                                  {"ours", metrics(47.95, 40, 0.9, 0.8, 0.99)}});
  const auto text = t.render_text();
  EXPECT_NE(text.find("(-47.1%)"), std::string::npos) << text;
  EXPECT_NE(text.find("(-50.0%)"), std::string::npos) << text;
  EXPECT_NE(text.find("(+80.0%)"), std::string::npos) << text;
  EXPECT_NE(text.find("Improvement (ours)"), std::string::npos);
  EXPECT_NE(text.find("MAE (mL) ↓"), std::string::npos);
  EXPECT_NE(text.find("R^2 ↑"), std::string::npos);
  const auto j = t.to_json();
  EXPECT_EQ(j["ours"], "ours");
  EXPECT_NEAR(j["improvement_percent"]["MAE (mL)"].get<double>(), -47.0692, 1e-3);
}

TEST(ComparisonTable, ColumnsAlign)
{
  const auto t = make_comparison({{"a", metrics(1, 2, 0.5, 0.25, 0.9)},
                                  {"a much longer name", metrics(1000.5, 2, 0.5, 0.25, 0.9)}});
  const auto ls = lines(t.render_text());
  auto width = [](const std::string& s) {
    return std::count_if(s.begin(), s.end(), [](char ch) { return (ch & 0xC0) != 0x80; });
  };
  for (const auto& l : ls) {
    EXPECT_EQ(width(l), width(ls[0])) << l;
  }
}

TEST(ComparisonTable, IdenticalRowsGiveZero)
{
  const auto m = metrics(5, 6, 0.7, 0.4, 0.95);
  const auto t = make_comparison({{"x", m}, {"y", m}});
  const auto text = t.render_text();
  EXPECT_NE(text.find("(+0.0%)"), std::string::npos) << text;
  for (const auto& [k, v] : t.to_json()["improvement_percent"].items()) {
    EXPECT_EQ(v.get<double>(), 0.0) << k;
  }
}

TEST(ComparisonTable, OursByNameAndErrors)
{
  const auto t = make_comparison({{"ours", metrics(1, 1, 1, 1, 1)}, {"base", metrics(2, 2, 0.5, 0.5, 0.5)}},
                                 std::string("ours"));
  EXPECT_EQ(t.ours, 0u);
  EXPECT_NE(t.render_text().find("(-50.0%)"), std::string::npos);
  EXPECT_THROW(make_comparison({{"ours", metrics(1, 1, 1, 1, 1)}}, std::string("theirs")), Error);
  EXPECT_THROW(make_comparison({}), Error);
}

TEST(ComparisonTable, ZeroBestIsNotAvailable)
{
  const auto t = make_comparison({{"base", metrics(2, 2, 0.0, 0.0, 0.0)}, {"ours", metrics(1, 1, 1, 1, 1)}});
  EXPECT_NE(t.render_text().find("n/a"), std::string::npos);
  EXPECT_TRUE(t.to_json()["improvement_percent"]["r"].is_null());
}

TEST(ComparisonTable, CsvRoundTripsValues)
{
  const auto t = make_comparison({{"m", metrics(1.0 / 3.0, 2, 0.5, 0.25, 0.9)}});
  const auto ls = lines(t.render_csv());
  ASSERT_EQ(ls.size(), 2u);
  EXPECT_EQ(ls[0], "method,MAE (mL),MAPE (%),r,R^2,cos");
  const auto first = ls[1].substr(2, ls[1].find(',', 2) - 2);
  EXPECT_EQ(std::stod(first), 1.0 / 3.0);
}
