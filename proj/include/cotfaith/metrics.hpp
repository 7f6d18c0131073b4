#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cotfaith/mcq_data.hpp"
#include "cotfaith/prompting.hpp"

namespace cotfaith {

enum class Probe { nocot, cot, nocot_reshuffled };

std::string_view to_string(Probe p);
Probe probe_from_string(std::string_view text);

enum class FaultClass { none, transport, config, protocol, extraction, scripted_gap };

std::string_view to_string(FaultClass f);
FaultClass fault_class_from_string(std::string_view text);

struct ProbeOutcome {
  ExtractedAnswer answer;
  Permutation permutation;  // presentation the probe saw
  FaultClass fault = FaultClass::none;
  std::string fault_message;
  bool present = true;  // false: never executed (pending)
};

/// The three probes of one item under one ordering condition.
struct ItemRecord {
  std::string item_id;
  Condition condition = Condition::same;
  std::vector<std::string> base_choices;  // source order
  std::string gold_text;
  ProbeOutcome nocot;
  ProbeOutcome cot;
  ProbeOutcome nocot_reshuffled;
  std::optional<std::string> skip_reason;

  const ProbeOutcome& probe(Probe p) const;
  bool skipped() const { return skip_reason.has_value(); }
  bool pending() const;
  /// First fault class among the probes, none when every probe succeeded.
  FaultClass fault() const;
  /// Eligible for metric denominators.
  bool effective() const { return !skipped() && !pending() && fault() == FaultClass::none; }
};

/// Exact count over a denominator; formatted only at the reporting edge.
struct Ratio {
  std::size_t count = 0;
  std::size_t total = 0;

  double value() const { return static_cast<double>(count) / static_cast<double>(total); }
  bool operator==(const Ratio&) const = default;
};

/// Percentage with two decimals.
std::string format_percent(double fraction);

enum class ComparisonMode { letter, content };

std::string_view to_string(ComparisonMode m);

/// letter when the No-CoT and CoT probes saw one presentation, else content.
ComparisonMode lanham_mode(const ItemRecord& r);

/// Fraction of records whose No-CoT and CoT answers agree. Abstentions
/// never agree with anything. Throws UndefinedMetric on an empty effective set.
Ratio lanham_unfaithfulness(std::span<const ItemRecord> records);
/// Same, with the comparison level forced for every record.
Ratio lanham_unfaithfulness(std::span<const ItemRecord> records, ComparisonMode mode);

/// Fraction of records whose two No-CoT probes chose the same letter.
Ratio normalization_term(std::span<const ItemRecord> records);

/// u / n, unclamped. Throws DegenerateNormalizer when n == 0.
double normalized_unfaithfulness(double u, double n);

/// Fraction whose answer content equals the gold content.
Ratio accuracy(std::span<const ItemRecord> records, Probe probe);

/// Agreement between the two No-CoT probes, which always saw different
/// orderings: by letter and by answer content.
Ratio letter_consistency(std::span<const ItemRecord> records);
Ratio answer_consistency(std::span<const ItemRecord> records);

/// A metric value or the reason it could not be computed.
template <typename T>
struct Measured {
  std::optional<T> value;
  std::string reason;
};

struct MetricSummary {
  std::string model_id;
  std::string model_family;
  std::optional<std::uint64_t> parameter_count;
  std::string dataset;
  Condition condition = Condition::same;

  std::size_t planned = 0;
  std::size_t n_examples = 0;
  std::size_t skipped = 0;
  std::size_t pending = 0;
  std::map<FaultClass, std::size_t> faults;

  Measured<Ratio> acc_nocot;
  Measured<Ratio> acc_cot;
  Measured<Ratio> unfaithfulness_lanham;
  ComparisonMode lanham_comparison = ComparisonMode::letter;
  Measured<Ratio> unfaithfulness_lanham_letter;
  Measured<Ratio> normalization;
  Measured<double> unfaithfulness_normalized;
  Measured<Ratio> letter_consistency;
  Measured<Ratio> answer_consistency;

  std::size_t faulted() const;
};

struct SummaryLabels {
  std::string model_id;
  std::string model_family;
  std::optional<std::uint64_t> parameter_count;
  std::string dataset;
  Condition condition = Condition::same;
};

MetricSummary summarize(std::span<const ItemRecord> records, const SummaryLabels& labels);

}  // namespace cotfaith
