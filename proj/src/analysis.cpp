#include "cotfaith/analysis.hpp"

#include <map>
#include <set>

namespace cotfaith {

namespace {

constexpr std::pair<MetricField, std::string_view> kFieldNames[] = {
    {MetricField::accuracy_nocot, "accuracy_nocot"},
    {MetricField::accuracy_cot, "accuracy_cot"},
    {MetricField::unfaithfulness, "unfaithfulness"},
    {MetricField::normalization_term, "normalization_term"},
    {MetricField::unfaithfulness_normalized, "unfaithfulness_normalized"},
    {MetricField::letter_consistency, "letter_consistency"},
    {MetricField::answer_consistency, "answer_consistency"},
};

std::optional<double> ratio_value(const Measured<Ratio>& m) {
  if (!m.value) return std::nullopt;
  return m.value->value();
}

}  // namespace

std::string_view to_string(MetricField f) {
  for (const auto& [field, name] : kFieldNames) {
    if (field == f) return name;
  }
  return "unknown";
}

MetricField metric_field_from_string(std::string_view text) {
  for (const auto& [field, name] : kFieldNames) {
    if (name == text) return field;
  }
  throw UsageError("unknown metric '" + std::string(text) + "'");
}

std::optional<double> select_metric(const MetricSummary& s, MetricField f) {
  switch (f) {
    case MetricField::accuracy_nocot: return ratio_value(s.acc_nocot);
    case MetricField::accuracy_cot: return ratio_value(s.acc_cot);
    case MetricField::unfaithfulness: return ratio_value(s.unfaithfulness_lanham);
    case MetricField::normalization_term: return ratio_value(s.normalization);
    case MetricField::unfaithfulness_normalized: return s.unfaithfulness_normalized.value;
    case MetricField::letter_consistency: return ratio_value(s.letter_consistency);
    case MetricField::answer_consistency: return ratio_value(s.answer_consistency);
  }
  return std::nullopt;
}

ScalingSeries scaling_series(std::span<const MetricSummary> summaries, MetricField metric) {
  ScalingSeries series;
  series.metric = metric;
  std::set<std::pair<std::uint64_t, std::string>> seen;
  for (const auto& s : summaries) {
    if (series.family.empty()) {
      series.family = s.model_family;
    } else if (s.model_family != series.family) {
      throw AmbiguityError("scaling_series: mixed model families '" + series.family + "' and '" +
                           s.model_family + "'");
    }
    if (!s.parameter_count || *s.parameter_count == 0) {
      throw DataFault("scaling_series: summary for '" + s.model_id +
                      "' has no positive parameter count");
    }
    if (!seen.emplace(*s.parameter_count, s.dataset).second) {
      throw AmbiguityError("scaling_series: duplicate (" + std::to_string(*s.parameter_count) +
                           ", " + s.dataset + ")");
    }
    if (auto v = select_metric(s, metric)) {
      series.points.push_back({*s.parameter_count, *v, s.dataset});
    }
  }
  std::sort(series.points.begin(), series.points.end(), [](const auto& a, const auto& b) {
    return std::tie(a.parameter_count, a.benchmark) < std::tie(b.parameter_count, b.benchmark);
  });

  for (std::size_t i = 0; i < series.points.size();) {
    std::size_t j = i;
    while (j < series.points.size() &&
           series.points[j].parameter_count == series.points[i].parameter_count) {
      ++j;
    }
    Vector<double> v(static_cast<Eigen::Index>(j - i));
    for (std::size_t k = i; k < j; ++k) v(static_cast<Eigen::Index>(k - i)) = series.points[k].value;
    ScalingLevel level;
    level.parameter_count = series.points[i].parameter_count;
    level.log10_parameters = std::log10(static_cast<double>(level.parameter_count));
    level.n = j - i;
    level.mean = v.mean();
    level.stddev = std::sqrt((v.array() - level.mean).square().mean());
    series.levels.push_back(level);
    i = j;
  }
  return series;
}

}  // namespace cotfaith
