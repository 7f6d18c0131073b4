#include <doctest.h>

#include <algorithm>
#include <fstream>

#include "cotfaith/analysis.hpp"
#include "cotfaith/csv.hpp"
#include "cotfaith/report.hpp"
#include "cotfaith/seed.hpp"

using namespace cotfaith;

namespace {

Vector<double> vec(std::initializer_list<double> v) {
  Vector<double> out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

MetricSummary summary(std::uint64_t params, std::string bench, std::size_t hits, std::size_t total) {
  MetricSummary s;
  s.model_family = "llama";
  s.parameter_count = params;
  s.dataset = std::move(bench);
  s.n_examples = total;
  s.unfaithfulness_lanham.value = Ratio{hits, total};
  return s;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("two points fit exactly") {
  const auto f = fit_linear(vec({0, 1}), vec({1, 3}));
  CHECK(f.slope == doctest::Approx(2.0));
  CHECK(f.intercept == doctest::Approx(1.0));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.n_points == 2);
}

TEST_CASE("a symmetric tent has zero slope") {
  const auto f = fit_linear(vec({0, 1, 2}), vec({0, 1, 0}));
  CHECK(f.slope == doctest::Approx(0.0));
  CHECK(f.r_squared == doctest::Approx(0.0));
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(fit_linear(vec({1}), vec({2})), DegenerateFit);
  CHECK_THROWS_AS(fit_linear(vec({1, 1, 1}), vec({2, 3, 4})), DegenerateFit);
  const auto flat = fit_linear(vec({0, 1, 2}), vec({5, 5, 5}));
  CHECK(flat.r_squared == 1.0);
}

TEST_CASE("the same-ordering table fixture is nearly uncorrelated") {
  std::ifstream in(FIXTURE_DIR "/same_ordering_tables.csv");
  REQUIRE(in);
  const CsvTable table = read_csv(in);
  CHECK(table.rows.size() == 120);
  const auto fit = regress_columns(table, "accuracy_cot", "unfaithfulness", false);
  CHECK(fit.n_points == 120);
  CHECK(fit.r_squared <= 0.1);
  CHECK_FALSE(fit.weighted);
  const auto weighted = regress_columns(table, "accuracy_cot", "unfaithfulness", true);
  CHECK(weighted.weighted);
  CHECK(weighted.r_squared != fit.r_squared);
}

TEST_CASE("affine maps of y carry through the fit") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vector<double> x(30), y(30);
    for (int i = 0; i < 30; ++i) {
      x(i) = rng.unit() * 10.0;
      y(i) = 0.7 * x(i) + rng.unit() * 4.0;
    }
    const double a = 1.0 + rng.unit() * 3.0, b = rng.unit() * 5.0 - 2.5;
    const auto base = fit_linear(x, y);
    const Vector<double> y2 = (a * y.array() + b).matrix();
    const auto mapped = fit_linear(x, y2);
    CHECK(mapped.slope == doctest::Approx(a * base.slope).epsilon(1e-10));
    CHECK(mapped.intercept == doctest::Approx(a * base.intercept + b).epsilon(1e-10));
    CHECK(mapped.r_squared == doctest::Approx(base.r_squared).epsilon(1e-10));
    const double r = pearson_r(x, y);
    CHECK(std::abs(base.r_squared - r * r) < 1e-12);
  }
}

TEST_CASE("single-precision scalars work too") {
  Eigen::VectorXf x(3), y(3);
  x << 0.f, 1.f, 2.f;
  y << 1.f, 3.f, 5.f;
  const auto f = fit_linear(x, y);
  CHECK(f.slope == doctest::Approx(2.0f));
}

TEST_CASE("scaling series: three sizes by two benchmarks") {
  std::vector<MetricSummary> in{summary(7, "aqua", 1, 2),  summary(7, "logiqa", 1, 4),
                                summary(13, "aqua", 3, 4), summary(13, "logiqa", 1, 4),
                                summary(70, "aqua", 4, 4), summary(70, "logiqa", 2, 4)};
  const auto s = scaling_series(in, MetricField::unfaithfulness);
  CHECK(s.family == "llama");
  CHECK(s.points.size() == 6);
  REQUIRE(s.levels.size() == 3);
  CHECK(s.levels[0].mean == doctest::Approx((0.5 + 0.25) / 2));
  CHECK(s.levels[1].mean == doctest::Approx((0.75 + 0.25) / 2));
  CHECK(s.levels[2].mean == doctest::Approx((1.0 + 0.5) / 2));
  CHECK(s.levels[0].stddev == doctest::Approx(0.125));
  CHECK(s.levels[2].log10_parameters == doctest::Approx(std::log10(70.0)));

  std::reverse(in.begin(), in.end());
  const auto r = scaling_series(in, MetricField::unfaithfulness);
  for (std::size_t i = 0; i < 3; ++i) CHECK(r.levels[i].mean == s.levels[i].mean);
}

TEST_CASE("scaling series edge cases") {
  const std::vector<MetricSummary> one{summary(7, "aqua", 1, 2), summary(13, "aqua", 1, 4)};
  for (const auto& l : scaling_series(one, MetricField::unfaithfulness).levels) CHECK(l.stddev == 0.0);
  CHECK(scaling_series({}, MetricField::unfaithfulness).levels.empty());
  const std::vector<MetricSummary> dup{summary(7, "aqua", 1, 2), summary(7, "aqua", 1, 4)};
  CHECK_THROWS_AS(scaling_series(dup, MetricField::unfaithfulness), AmbiguityError);
  auto other = summary(13, "aqua", 1, 2);
  other.model_family = "pythia";
  const std::vector<MetricSummary> mixed{summary(7, "aqua", 1, 2), other};
  CHECK_THROWS_AS(scaling_series(mixed, MetricField::unfaithfulness), AmbiguityError);
}

TEST_CASE("metric field names") {
  CHECK(metric_field_from_string("accuracy_cot") == MetricField::accuracy_cot);
  CHECK(to_string(MetricField::unfaithfulness_normalized) == "unfaithfulness_normalized");
  CHECK_THROWS(metric_field_from_string("vibes"));
}

}  // TEST_SUITE
