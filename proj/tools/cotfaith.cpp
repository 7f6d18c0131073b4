// Command-line front end: run, resume, score, report, regress, gen-addition.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cotfaith/addition_task.hpp"
#include "cotfaith/csv.hpp"
#include "cotfaith/error.hpp"
#include "cotfaith/harness.hpp"
#include "cotfaith/report.hpp"

namespace fs = std::filesystem;
using namespace cotfaith;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kTransport = 3 };

struct RunArgs {
  std::string manifest;
  std::string dataset;
  std::string endpoint;
  std::string mock;
  std::string model;
  std::string family;
  std::uint64_t param_count = 0;
  std::vector<std::string> conditions{"same"};
  std::size_t sample_cap = 500;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> sample_seed;
  double top_p = 0.95;
  double temperature = 0.8;
  int max_tokens = 512;
  int max_in_flight = 4;
  double rps = 0.0;
  std::string style = "chat_turns";
  std::string extraction = "greedy";
  std::string templates;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string run_id;
  std::optional<std::size_t> stop_after;
  bool retry_faulted = false;
};

fs::path run_dir_for(const std::string& runs_dir, const std::string& id) {
  const fs::path direct(id);
  if (fs::exists(manifest_path(direct))) return direct;
  return fs::path(runs_dir) / id;
}

int finish_run(const RunState& state, const fs::path& dir) {
  std::printf("run %s\n", state.run_id.c_str());
  std::printf("directory %s\n", dir.string().c_str());
  std::printf("probes done %zu, faulted %zu, pending %zu (sent this call: %zu)\n",
              state.count(ProbeStatus::done), state.count(ProbeStatus::faulted),
              state.count(ProbeStatus::pending), state.executed);
  if (!state.skipped.empty()) std::printf("items skipped %zu\n", state.skipped.size());
  bool transport = false;
  bool config = false;
  for (const auto& f : state.faults) {
    std::fprintf(stderr, "fault %s [%s] %s\n", f.key.str().c_str(),
                 std::string(to_string(f.fault)).c_str(), f.message.c_str());
    transport |= f.fault == FaultClass::transport;
    config |= f.fault == FaultClass::config;
  }
  if (transport) return kTransport;
  if (config) return kUsage;
  return kOk;
}

int do_run(const RunArgs& a, const std::string& runs_dir) {
  RunPlan plan;
  if (!a.manifest.empty()) {
    std::ifstream in(a.manifest);
    if (!in) throw UsageError("cannot read manifest '" + a.manifest + "'");
    plan = replay_manifest(RunManifest::from_json(nlohmann::json::parse(in)), a.run_id);
  } else {
    if (a.dataset.empty()) throw UsageError("run needs --dataset or --manifest");
    RunInputs in;
    in.dataset_path = a.dataset;
    if (!a.endpoint.empty()) in.endpoint_url = a.endpoint;
    if (!a.mock.empty()) in.mock = a.mock;
    in.model_name = a.model;
    in.api_key_env = a.api_key_env;
    in.model_family = a.family;
    if (a.param_count) in.parameter_count = a.param_count;
    in.conditions.clear();
    for (const auto& c : a.conditions) in.conditions.push_back(condition_from_string(c));
    in.sample_cap = a.sample_cap;
    in.sample_seed = a.sample_seed.value_or(a.seed);
    in.run_seed = a.seed;
    in.decoding = Decoding{a.top_p, a.temperature, a.max_tokens};
    in.limits.max_in_flight = a.max_in_flight;
    in.limits.requests_per_second = a.rps;
    in.style = prompt_style_from_string(a.style);
    in.extraction.mode = extraction_mode_from_string(a.extraction);
    if (!a.templates.empty()) in.templates_path = a.templates;
    in.run_id = a.run_id;
    plan = plan_run(in);
  }
  const fs::path dir = fs::path(runs_dir) / plan.manifest.run_id;
  auto client = make_client(plan.manifest, plan.dataset);
  ExecuteOptions opts;
  opts.stop_after = a.stop_after;
  opts.retry_faulted = a.retry_faulted;
  return finish_run(execute_run(plan, *client, dir, opts), dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chain-of-thought faithfulness evaluation harness"};
  app.set_version_flag("--version", std::string(harness_version()));
  app.require_subcommand(1);
  std::string runs_dir = "runs";
  app.add_option("--runs-dir", runs_dir, "Directory holding run directories")->capture_default_str();

  RunArgs ra;
  auto* run = app.add_subcommand("run", "Plan and execute an evaluation run");
  run->add_option("--manifest", ra.manifest, "Replay the plan stored in a manifest file");
  run->add_option("--dataset", ra.dataset, "Multiple-choice dataset (JSONL)");
  auto* endpoint = run->add_option("--endpoint", ra.endpoint, "OpenAI-compatible base URL");
  auto* mock = run->add_option("--mock", ra.mock,
                               "fixed_letter:L | uniform_random:SEED | content_oracle:ACC:SEED | scripted:PATH");
  endpoint->excludes(mock);
  run->add_option("--model", ra.model, "Model name sent to the endpoint");
  run->add_option("--model-family", ra.family, "Family label for scaling plots");
  run->add_option("--param-count", ra.param_count, "Parameter count for scaling plots");
  run->add_option("--conditions", ra.conditions, "original, same, different")
      ->delimiter(',')
      ->capture_default_str();
  run->add_option("--sample-cap", ra.sample_cap)->capture_default_str();
  run->add_option("--seed", ra.seed, "Run seed (also the sampling seed unless --sample-seed)")
      ->capture_default_str();
  run->add_option("--sample-seed", ra.sample_seed);
  run->add_option("--top-p", ra.top_p)->capture_default_str();
  run->add_option("--temperature", ra.temperature)->capture_default_str();
  run->add_option("--max-tokens", ra.max_tokens, "Reasoning length limit")->capture_default_str();
  run->add_option("--max-in-flight", ra.max_in_flight)->capture_default_str();
  run->add_option("--rps", ra.rps, "Requests per second, 0 for no pacing")->capture_default_str();
  run->add_option("--style", ra.style, "chat_turns or direct")->capture_default_str();
  run->add_option("--extraction", ra.extraction, "greedy or sampled")->capture_default_str();
  run->add_option("--templates", ra.templates, "Prompt template file");
  run->add_option("--api-key-env", ra.api_key_env)->capture_default_str();
  run->add_option("--run-id", ra.run_id);
  run->add_option("--stop-after", ra.stop_after, "Dispatch at most this many probes");

  std::string resume_id;
  std::optional<std::size_t> resume_stop;
  bool resume_retry = false;
  auto* resume = app.add_subcommand("resume", "Continue an interrupted run");
  resume->add_option("--run-id", resume_id)->required();
  resume->add_option("--stop-after", resume_stop);
  resume->add_flag("--retry-faulted", resume_retry, "Re-execute probes that faulted");

  std::string score_id, score_out;
  auto* score = app.add_subcommand("score", "Summarize a run as CSV");
  score->add_option("--run-id", score_id)->required();
  score->add_option("--out", score_out, "Write the CSV here instead of stdout");

  std::vector<std::string> summaries;
  std::string rx = "accuracy_cot", ry = "unfaithfulness";
  bool weighted = false;
  auto* regress = app.add_subcommand("regress", "Least-squares fit over two summary columns");
  regress->add_option("--summaries", summaries, "Summary CSV files")->required();
  regress->add_option("--x", rx)->capture_default_str();
  regress->add_option("--y", ry)->capture_default_str();
  regress->add_flag("--weighted", weighted, "Weight rows by n_examples");

  std::vector<std::string> report_runs;
  std::string report_out;
  ReportOptions ropts;
  auto* report = app.add_subcommand("report", "Summary CSV, plots and a text report");
  report->add_option("--runs", report_runs, "Run ids or run directories")->required();
  report->add_option("--out", report_out)->required();
  report->add_flag("--allow-mixed-conditions", ropts.allow_mixed_conditions);
  report->add_flag("--weighted", ropts.weighted, "Weight the scatter fit by n_examples");

  int digits = 2, operands = 16;
  std::size_t count = 2000;
  std::uint64_t add_seed = 0;
  std::string add_out = "-";
  auto* gen = app.add_subcommand("gen-addition", "Generate multi-operand addition problems");
  gen->add_option("--digits", digits)->capture_default_str();
  gen->add_option("--operands", operands)->capture_default_str();
  gen->add_option("--count", count)->capture_default_str();
  gen->add_option("--seed", add_seed)->capture_default_str();
  gen->add_option("--out", add_out, "Output JSONL, '-' for stdout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*run) return do_run(ra, runs_dir);

    if (*resume) {
      const fs::path dir = run_dir_for(runs_dir, resume_id);
      ExecuteOptions opts;
      opts.stop_after = resume_stop;
      opts.retry_faulted = resume_retry;
      return finish_run(resume_run(dir, opts), dir);
    }

    if (*score) {
      const auto rows = score_run(run_dir_for(runs_dir, score_id));
      const std::string csv = summary_csv(rows);
      if (score_out.empty()) {
        std::cout << csv;
      } else {
        std::ofstream out(score_out, std::ios::binary);
        out << csv;
        if (!out) throw DataFault("cannot write '" + score_out + "'");
      }
      return kOk;
    }

    if (*regress) {
      CsvTable table;
      for (const auto& path : summaries) {
        std::ifstream in(path);
        if (!in) throw DataFault("cannot read '" + path + "'");
        CsvTable part = read_csv(in);
        if (table.header.empty()) {
          table.header = part.header;
        } else if (part.header != table.header) {
          throw DataFault("'" + path + "' has a different header");
        }
        table.rows.insert(table.rows.end(), part.rows.begin(), part.rows.end());
      }
      const auto fit = regress_columns(table, rx, ry, weighted);
      std::printf("fit %s\n", fit.provenance.c_str());
      std::printf("n_points %zu\n", fit.n_points);
      std::printf("slope %.6f\n", fit.slope);
      std::printf("intercept %.6f\n", fit.intercept);
      std::printf("r_squared %.6f\n", fit.r_squared);
      return kOk;
    }

    if (*report) {
      std::vector<ScoredRun> runs;
      for (const auto& id : report_runs) {
        const fs::path dir = run_dir_for(runs_dir, id);
        runs.push_back({load_manifest(dir), score_run(dir)});
      }
      for (const auto& p : write_report(runs, report_out, ropts)) std::printf("%s\n", p.string().c_str());
      return kOk;
    }

    if (*gen) {
      const auto problems = gen_problems(digits, operands, count, add_seed);
      if (add_out == "-") {
        write_problems(std::cout, problems);
      } else {
        std::ofstream out(add_out, std::ios::binary);
        write_problems(out, problems);
        if (!out) throw DataFault("cannot write '" + add_out + "'");
      }
      return kOk;
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const ConfigFault& e) {
    std::fprintf(stderr, "endpoint configuration: %s\n", e.what());
    return kUsage;
  } catch (const TransportFault& e) {
    std::fprintf(stderr, "transport: %s\n", e.what());
    return kTransport;
  } catch (const Error& e) {
    std::fprintf(stderr, "data: %s\n", e.what());
    return kData;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "data: %s\n", e.what());
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "data: %s\n", e.what());
    return kData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal: %s\n", e.what());
    return kData;
  }
  return kUsage;
}
