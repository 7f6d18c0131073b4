// Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <array>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cotfaith/addition_task.hpp"
#include "cotfaith/harness.hpp"
#include "cotfaith/metrics.hpp"
#include "cotfaith/prompting.hpp"
#include "cotfaith/report.hpp"
#include "recount.hpp"
#include "support.hpp"

using namespace cotfaith;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

struct Criterion {
  int number;
  std::string title;
  double budget_seconds;  // 0: no time bound
  std::function<Outcome()> check;
};

std::string run_command(const std::string& cmd, int& status) {
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    status = -1;
    return out;
  }
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) out.append(buf.data(), n);
  status = pclose(pipe);
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

/// Runs a mock over a synthetic dataset to completion and scores it.
MetricSummary mock_summary(const fs::path& dir, std::size_t items, const std::string& mock,
                           Condition condition = Condition::same) {
  const fs::path dataset = dir / "items.jsonl";
  testing::write_jsonl(dataset, testing::make_dataset(items, 4, "synthetic"));
  RunInputs in;
  in.dataset_path = dataset;
  in.mock = mock;
  in.conditions = {condition};
  in.sample_cap = items;
  in.run_seed = 1;
  in.run_id = "run";
  const RunPlan plan = plan_run(in);
  auto client = make_client(plan.manifest, plan.dataset);
  execute_run(plan, *client, dir / "run");
  return score_run(dir / "run").front();
}

bool within(double v, double centre, double tol) { return std::abs(v - centre) <= tol; }

Outcome metric_identities() {
  const auto s = mock_summary(testing::scratch_dir("acc1"), 200, "fixed_letter:A");
  const Ratio u = *s.unfaithfulness_lanham.value, n = *s.normalization.value;
  const double normalized = *s.unfaithfulness_normalized.value;
  Outcome o;
  o.ok = u.count == u.total && n.count == n.total && u.value() == 1.0 && n.value() == 1.0 &&
         normalized == 1.0 && s.n_examples == 200;
  o.detail = "unfaithfulness=" + std::to_string(u.count) + "/" + std::to_string(u.total) + " normalization=" +
             std::to_string(n.count) + "/" + std::to_string(n.total) + fmt(" normalized=%.17g", normalized);
  return o;
}

Outcome bias_rates() {
  const auto s = mock_summary(testing::scratch_dir("acc2"), 2000, "uniform_random:3");
  const double u = s.unfaithfulness_lanham.value->value();
  const double n = s.normalization.value->value();
  const double q = *s.unfaithfulness_normalized.value;
  return {within(u, 0.25, 0.03) && within(n, 0.25, 0.03) && within(q, 1.0, 0.15) && s.n_examples == 2000,
          fmt("unfaithfulness=%.4f normalization=%.4f normalized=%.4f", u, n, q)};
}

Outcome normalization_separates() {
  // Coincidence rate: among the 23 non-identity orderings of 4 choices, the
  // fraction that leave a given position in place.
  std::array<int, 4> perm{0, 1, 2, 3};
  int non_identity = 0, fixing = 0;
  do {
    if (perm == std::array<int, 4>{0, 1, 2, 3}) continue;
    ++non_identity;
    fixing += perm[0] == 0;
  } while (std::next_permutation(perm.begin(), perm.end()));
  const double rate = double(fixing) / non_identity;

  const std::size_t items = 2000;
  const auto oracle = mock_summary(testing::scratch_dir("acc3a"), items, "content_oracle:1.0:5");
  const auto fixed = mock_summary(testing::scratch_dir("acc3b"), 300, "fixed_letter:C");
  const double u = oracle.unfaithfulness_lanham.value->value();
  const double n = oracle.normalization.value->value();
  const double q = *oracle.unfaithfulness_normalized.value;
  const double tol = 3.0 * std::sqrt(rate * (1 - rate) / items);
  const bool ok = u == 1.0 && within(n, rate, tol) && q > 1.0 && *fixed.unfaithfulness_normalized.value == 1.0;
  return {ok, fmt("oracle unfaithfulness=%.4f normalization=%.4f (enumerated %.4f)", u, n, rate) + fmt(" normalized=%.3f", q) +
                  fmt(", fixed-letter normalized=%.4f, tolerance %.4f", *fixed.unfaithfulness_normalized.value, tol)};
}

Outcome table_regression() {
  int status = 0;
  const std::string out = run_command(std::string("\"") + CLI_PATH + "\" regress --summaries \"" FIXTURE_DIR
                                      "/same_ordering_tables.csv\" --x accuracy_cot --y unfaithfulness",
                                      status);
  const auto pos = out.find("r_squared ");
  const auto npos = out.find("n_points ");
  if (status != 0 || pos == std::string::npos || npos == std::string::npos) {
    return {false, "regress failed: " + out};
  }
  const double r2 = std::stod(out.substr(pos + 10));
  const long n = std::stol(out.substr(npos + 9));
  return {r2 <= 0.1 && n >= 100, fmt("R^2=%.4f over %.0f rows", r2, double(n))};
}

Outcome table_rows() {
  const std::vector<std::string> base{"w", "x", "y", "z"};
  const Permutation p{1, 0, 3, 2};  // A shows x (gold), B shows w
  std::vector<ItemRecord> agree, correct;
  for (std::size_t i = 0; i < 254; ++i) {
    ItemRecord r;
    r.item_id = "i" + std::to_string(i);
    r.base_choices = base;
    r.gold_text = "x";
    r.nocot = {testing::answer_for(base, p, 'A'), p};
    r.cot = {testing::answer_for(base, p, i < 102 ? 'A' : 'B'), p};
    r.nocot_reshuffled = {testing::answer_for(base, {2, 3, 0, 1}, 'A'), {2, 3, 0, 1}};
    agree.push_back(r);
    r.cot = {testing::answer_for(base, p, i < 96 ? 'A' : 'B'), p};
    correct.push_back(r);
  }
  const std::string u = format_percent(lanham_unfaithfulness(agree).value());
  const std::string a = format_percent(accuracy(correct, Probe::cot).value());
  return {u == "40.16" && a == "37.80", "unfaithfulness " + u + ", CoT accuracy " + a};
}

Outcome addition_cli() {
  const fs::path dir = testing::scratch_dir("acc6");
  int s1 = 0, s2 = 0;
  const std::string base = std::string("\"") + CLI_PATH + "\" gen-addition --digits 2 --operands 16 --count 2000 --seed 7 --out ";
  run_command(base + "\"" + (dir / "a.jsonl").string() + "\"", s1);
  run_command(base + "\"" + (dir / "b.jsonl").string() + "\"", s2);
  if (s1 != 0 || s2 != 0) return {false, "gen-addition exited non-zero"};
  const std::string a = slurp(dir / "a.jsonl");
  const bool identical = a == slurp(dir / "b.jsonl");
  std::istringstream in(a);
  const auto problems = read_problems(in);
  bool ranges = true, roundtrip = true;
  for (const auto& p : problems) {
    ranges = ranges && p.operands.size() == 16;
    for (auto v : p.operands) ranges = ranges && v >= 10 && v <= 99;
    roundtrip = roundtrip && grade(p, parse_answer_tag("<answer>" + std::to_string(p.true_sum) + "</answer>")) ==
                                 Grade::correct;
  }
  return {problems.size() == 2000 && identical && ranges && roundtrip,
          std::to_string(problems.size()) + " problems, identical=" + (identical ? "yes" : "no") +
              ", ranges=" + (ranges ? "ok" : "bad") + ", round-trip=" + (roundtrip ? "ok" : "bad")};
}

Outcome oracle_equivalence() {
  Rng rng(123456);
  std::size_t mismatches = 0, checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto records = testing::random_records(rng, 1 + rng.below(50));
    const auto c = testing::recount(records);
    if (c.total == 0) {
      try {
        lanham_unfaithfulness(records);
        ++mismatches;
      } catch (const UndefinedMetric&) {
      }
      continue;
    }
    ++checked;
    mismatches += lanham_unfaithfulness(records) != Ratio{c.eq1, c.total};
    mismatches += lanham_unfaithfulness(records, ComparisonMode::letter) != Ratio{c.eq1_letter, c.total};
    mismatches += normalization_term(records) != Ratio{c.eq2, c.total};
    mismatches += letter_consistency(records) != Ratio{c.eq2, c.total};
    mismatches += answer_consistency(records) != Ratio{c.answer_same, c.total};
    mismatches += accuracy(records, Probe::nocot) != Ratio{c.acc_nocot, c.total};
    mismatches += accuracy(records, Probe::cot) != Ratio{c.acc_cot, c.total};
    const auto s = summarize(records, {"m", "f", std::nullopt, "d", Condition::same});
    mismatches += s.n_examples != c.total;
    mismatches += s.n_examples + s.faulted() + s.skipped + s.pending != records.size();
  }
  return {mismatches == 0, "1000 sets (" + std::to_string(checked) + " with scorable records), " +
                                std::to_string(mismatches) + " mismatches"};
}

Outcome determinism_resume() {
  const fs::path dir = testing::scratch_dir("acc8");
  testing::write_jsonl(dir / "items.jsonl", testing::make_dataset(60, 4, "synthetic"));
  RunInputs in;
  in.dataset_path = dir / "items.jsonl";
  in.mock = "content_oracle:0.7:9";
  in.conditions = {Condition::original, Condition::same, Condition::different};
  in.run_seed = 3;

  in.run_id = "whole";
  const RunPlan whole = plan_run(in);
  auto client = make_client(whole.manifest, whole.dataset);
  execute_run(whole, *client, dir / "whole");

  in.run_id = "parts";
  const RunPlan parts = plan_run(in);
  std::mt19937_64 pick(std::random_device{}());
  const std::size_t k = 1 + pick() % (parts.work.size() - 1);
  execute_run(parts, *client, dir / "parts", {.stop_after = k});
  const RunState resumed = resume_run(dir / "parts", {}, client);

  const std::string a = summary_csv(score_run(dir / "whole"));
  const std::string b = summary_csv(score_run(dir / "parts"));
  return {resumed.complete() && a == b && whole.manifest.digest() == parts.manifest.digest(),
          "interrupted after " + std::to_string(k) + " of " + std::to_string(parts.work.size()) +
              " probes; summary CSV " + (a == b ? "identical" : "differs")};
}

Outcome extraction_protocol() {
  const McqItem item = testing::make_item("x", {"p", "q", "r", "s"}, 0);
  const auto bundle = render_mcq_prompt(identity_presentation(item), false, PromptStyle::chat_turns);

  CompletionResult ranked;
  ranked.text = "B";
  ranked.token_logprobs = TokenLogprobs{{{"B", -0.2}, {"A", -1.9}, {"D", -2.6}, {"C", -3.1}}};
  const auto a = extract_letter(bundle, ranked);

  CompletionResult echoed;
  echoed.text = "So the right answer is (C";
  const auto b = extract_letter(bundle, echoed);

  const AdditionProblem p{"p", 2, {12, 34}, 46};
  const auto parsed = parse_answer_tag("The total is 46.");
  const Grade g = grade(p, parsed);

  const bool ok = a.letter == 'B' && a.method == ExtractionMethod::logprob_argmax && b.letter == 'C' &&
                  b.method == ExtractionMethod::text_parse && !parsed && g == Grade::unparseable &&
                  g != Grade::correct;
  return {ok, std::string("argmax->") + (a.letter ? *a.letter : '-') + ", fallback->" +
                  (b.letter ? *b.letter : '-') + ", tagless->" + std::string(to_string(g))};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "metric identities under a fixed-letter mock", 1.0, metric_identities},
      {2, "bias rates under a uniform random mock", 10.0, bias_rates},
      {3, "normalization separates letter bias from stability", 0.0, normalization_separates},
      {4, "same-ordering table regression", 1.0, table_regression},
      {5, "aggregation arithmetic and two-decimal formatting", 0.0, table_rows},
      {6, "addition generator via the command line", 1.0, addition_cli},
      {7, "metric operations equal a brute-force recount", 30.0, oracle_equivalence},
      {8, "interrupted and resumed run matches an uninterrupted one", 10.0, determinism_resume},
      {9, "answer extraction protocol", 0.0, extraction_protocol},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs > c.budget_seconds) {
      o.ok = false;
      o.detail += fmt(" (over the %.0f s budget)", c.budget_seconds);
    }
    failures += !o.ok;
    std::printf("%s criterion %d: %s [%.3f s] %s\n", o.ok ? "PASS" : "FAIL", c.number, c.title.c_str(), secs,
                o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
