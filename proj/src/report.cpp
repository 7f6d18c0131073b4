#include "cotfaith/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cotfaith/error.hpp"

namespace cotfaith {

namespace fs = std::filesystem;

namespace {

std::string cell(const Measured<Ratio>& m) { return m.value ? format_percent(m.value->value()) : ""; }
std::string cell(const Measured<double>& m) { return m.value ? format_percent(*m.value) : ""; }

std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::size_t fault_count(const MetricSummary& s, FaultClass f) {
  auto it = s.faults.find(f);
  return it == s.faults.end() ? 0 : it->second;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// Comment bodies may not contain "--".
std::string comment_safe(std::string s) {
  for (auto pos = s.find("--"); pos != std::string::npos; pos = s.find("--", pos)) {
    s.replace(pos, 2, "- -");
  }
  return s;
}

struct Frame {
  double width = 640, height = 480, left = 70, right = 20, top = 20, bottom = 60;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * (width - left - right); }
  double py(double y) const { return height - bottom - (y - y0) / (y1 - y0) * (height - top - bottom); }
};

void pad_range(double& lo, double& hi) {
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;
}

void open_svg(std::ostringstream& out, const Frame& f) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
      << f.height << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void axes(std::ostringstream& out, const Frame& f, const std::string& x_label,
          const std::string& y_label, bool log_x) {
  const double ox = f.left, oy = f.height - f.bottom;
  out << "<path d=\"M " << fixed(ox) << ' ' << fixed(oy) << " H " << fixed(f.width - f.right)
      << " M " << fixed(ox) << ' ' << fixed(oy) << " V " << fixed(f.top)
      << "\" stroke=\"black\" fill=\"none\"/>\n";
  auto tick = [&](double v) { return log_x ? "1e" + fixed(v, 1) : fixed(v, 1); };
  out << "<text x=\"" << fixed(ox) << "\" y=\"" << fixed(oy + 18) << "\" font-size=\"11\">"
      << tick(f.x0) << "</text>\n";
  out << "<text x=\"" << fixed(f.width - f.right) << "\" y=\"" << fixed(oy + 18)
      << "\" font-size=\"11\" text-anchor=\"end\">" << tick(f.x1) << "</text>\n";
  out << "<text x=\"" << fixed(ox - 6) << "\" y=\"" << fixed(oy) << "\" font-size=\"11\" text-anchor=\"end\">"
      << fixed(f.y0, 1) << "</text>\n";
  out << "<text x=\"" << fixed(ox - 6) << "\" y=\"" << fixed(f.top + 10)
      << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(f.y1, 1) << "</text>\n";
  out << "<text x=\"" << fixed((ox + f.width - f.right) / 2) << "\" y=\"" << fixed(f.height - 15)
      << "\" font-size=\"13\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"15\" y=\"" << fixed((f.top + oy) / 2) << "\" font-size=\"13\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 15 " << fixed((f.top + oy) / 2) << ")\">" << xml_escape(y_label)
      << "</text>\n";
}

double parse_number(const std::string& text, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end) {
    throw DataFault("row " + std::to_string(row) + ", column '" + column + "': '" + text +
                    "' is not a number");
  }
  return v;
}

void write_file(const fs::path& path, const std::string& content, std::vector<fs::path>& written) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw DataFault("cannot write '" + path.string() + "'");
  written.push_back(path);
}

ScalingSeries as_percent(ScalingSeries s) {
  for (auto& p : s.points) p.value *= 100.0;
  for (auto& l : s.levels) {
    l.mean *= 100.0;
    l.stddev *= 100.0;
  }
  return s;
}

}  // namespace

const std::vector<std::string>& summary_header() {
  static const std::vector<std::string> header{
      "dataset",          "model_id",           "model_family",
      "parameter_count",  "condition",          "n_examples",
      "accuracy_nocot",   "accuracy_cot",       "unfaithfulness",
      "unfaithfulness_mode", "unfaithfulness_letter", "normalization_term",
      "unfaithfulness_normalized", "letter_consistency", "answer_consistency",
      "planned",          "skipped",            "pending",
      "faults_transport", "faults_config",      "faults_protocol",
      "faults_extraction", "faults_scripted_gap"};
  return header;
}

std::vector<std::string> summary_row(const MetricSummary& s) {
  return {s.dataset,
          s.model_id,
          s.model_family,
          s.parameter_count ? std::to_string(*s.parameter_count) : "",
          std::string(to_string(s.condition)),
          std::to_string(s.n_examples),
          cell(s.acc_nocot),
          cell(s.acc_cot),
          cell(s.unfaithfulness_lanham),
          s.unfaithfulness_lanham.value ? std::string(to_string(s.lanham_comparison)) : "",
          cell(s.unfaithfulness_lanham_letter),
          cell(s.normalization),
          cell(s.unfaithfulness_normalized),
          cell(s.letter_consistency),
          cell(s.answer_consistency),
          std::to_string(s.planned),
          std::to_string(s.skipped),
          std::to_string(s.pending),
          std::to_string(fault_count(s, FaultClass::transport)),
          std::to_string(fault_count(s, FaultClass::config)),
          std::to_string(fault_count(s, FaultClass::protocol)),
          std::to_string(fault_count(s, FaultClass::extraction)),
          std::to_string(fault_count(s, FaultClass::scripted_gap))};
}

std::string summary_csv(std::span<const MetricSummary> summaries) {
  std::string out = csv_line(summary_header());
  for (const auto& s : summaries) out += csv_line(summary_row(s));
  return out;
}

std::string scatter_svg(std::span<const ScatterPoint> points, const RegressionFit<double>& fit,
                        const std::string& x_label, const std::string& y_label) {
  Frame f;
  if (!points.empty()) {
    f.x0 = f.x1 = points.front().x;
    f.y0 = f.y1 = points.front().y;
  }
  for (const auto& p : points) {
    f.x0 = std::min(f.x0, p.x);
    f.x1 = std::max(f.x1, p.x);
    f.y0 = std::min(f.y0, p.y);
    f.y1 = std::max(f.y1, p.y);
  }
  const double lx0 = f.x0, lx1 = f.x1;
  f.y0 = std::min({f.y0, fit.predict(lx0), fit.predict(lx1)});
  f.y1 = std::max({f.y1, fit.predict(lx0), fit.predict(lx1)});
  pad_range(f.x0, f.x1);
  pad_range(f.y0, f.y1);

  std::ostringstream out;
  open_svg(out, f);
  out << "<!-- points\nx,y,label\n";
  for (const auto& p : points) out << p.x << ',' << p.y << ',' << comment_safe(p.label) << '\n';
  out << "fit slope=" << fit.slope << " intercept=" << fit.intercept << " r_squared=" << fit.r_squared
      << " n=" << fit.n_points << (fit.weighted ? " weighted" : " unweighted") << "\n-->\n";
  axes(out, f, x_label, y_label, false);
  for (const auto& p : points) {
    out << "<circle cx=\"" << fixed(f.px(p.x)) << "\" cy=\"" << fixed(f.py(p.y))
        << "\" r=\"3.5\" fill=\"steelblue\" fill-opacity=\"0.7\"/>\n";
  }
  out << "<line x1=\"" << fixed(f.px(lx0)) << "\" y1=\"" << fixed(f.py(fit.predict(lx0))) << "\" x2=\""
      << fixed(f.px(lx1)) << "\" y2=\"" << fixed(f.py(fit.predict(lx1)))
      << "\" stroke=\"firebrick\" stroke-width=\"1.5\"/>\n";
  out << "<text x=\"" << fixed(f.width - f.right) << "\" y=\"" << fixed(f.top + 10)
      << "\" font-size=\"12\" text-anchor=\"end\">R^2 = " << fixed(fit.r_squared, 3) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string scaling_svg(std::span<const ScalingSeries> series, const std::string& y_label) {
  static constexpr const char* kColors[] = {"steelblue", "firebrick", "seagreen", "darkorange",
                                            "purple", "saddlebrown"};
  Frame f;
  bool first = true;
  for (const auto& s : series) {
    for (const auto& l : s.levels) {
      const double lo = l.mean - l.stddev, hi = l.mean + l.stddev;
      if (first) {
        f.x0 = f.x1 = l.log10_parameters;
        f.y0 = lo;
        f.y1 = hi;
        first = false;
      }
      f.x0 = std::min(f.x0, l.log10_parameters);
      f.x1 = std::max(f.x1, l.log10_parameters);
      f.y0 = std::min(f.y0, lo);
      f.y1 = std::max(f.y1, hi);
    }
  }
  pad_range(f.x0, f.x1);
  pad_range(f.y0, f.y1);

  std::ostringstream out;
  open_svg(out, f);
  out << "<!-- levels\nfamily,parameter_count,log10_parameters,mean,stddev,n\n";
  for (const auto& s : series) {
    for (const auto& l : s.levels) {
      out << comment_safe(s.family) << ',' << l.parameter_count << ',' << l.log10_parameters << ','
          << l.mean << ',' << l.stddev << ',' << l.n << '\n';
    }
  }
  out << "-->\n";
  axes(out, f, "parameters (log10)", y_label, true);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    const char* color = kColors[i % std::size(kColors)];
    if (s.levels.empty()) continue;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" points=\"";
    for (const auto& l : s.levels) out << fixed(f.px(l.log10_parameters)) << ',' << fixed(f.py(l.mean)) << ' ';
    out << "\"/>\n";
    for (const auto& l : s.levels) {
      const double x = f.px(l.log10_parameters);
      out << "<path d=\"M " << fixed(x) << ' ' << fixed(f.py(l.mean - l.stddev)) << " V "
          << fixed(f.py(l.mean + l.stddev)) << "\" stroke=\"" << color << "\"/>\n";
      out << "<circle cx=\"" << fixed(x) << "\" cy=\"" << fixed(f.py(l.mean)) << "\" r=\"3.5\" fill=\""
          << color << "\"/>\n";
    }
    out << "<text x=\"" << fixed(f.left + 10) << "\" y=\"" << fixed(f.top + 14 + 14 * i)
        << "\" font-size=\"12\" fill=\"" << color << "\">" << xml_escape(s.family) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

RegressionFit<double> regress_columns(const CsvTable& table, const std::string& x,
                                      const std::string& y, bool weighted) {
  const auto xi = table.column(x);
  const auto yi = table.column(y);
  if (!xi) throw UsageError("no column named '" + x + "'");
  if (!yi) throw UsageError("no column named '" + y + "'");
  const auto wi = table.column("n_examples");
  if (weighted && !wi) throw UsageError("weighted regression needs an n_examples column");

  std::vector<double> xs, ys, ws;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw DataFault("row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) +
                      " fields, header has " + std::to_string(table.header.size()));
    }
    if (row[*xi].empty() || row[*yi].empty()) continue;
    xs.push_back(parse_number(row[*xi], r + 1, x));
    ys.push_back(parse_number(row[*yi], r + 1, y));
    if (weighted) ws.push_back(parse_number(row[*wi], r + 1, "n_examples"));
  }
  const auto n = static_cast<Eigen::Index>(xs.size());
  const Eigen::Map<const Vector<double>> vx(xs.data(), n), vy(ys.data(), n);
  RegressionFit<double> fit;
  if (weighted) {
    fit = fit_linear_weighted(vx, vy, Eigen::Map<const Vector<double>>(ws.data(), n));
    fit.weighted = true;
  } else {
    fit = fit_linear(vx, vy);
  }
  fit.provenance = y + " ~ " + x + (weighted ? " (weighted by n_examples)" : "");
  return fit;
}

std::vector<fs::path> write_report(std::span<const ScoredRun> runs, const fs::path& out_dir,
                                   const ReportOptions& options) {
  std::vector<MetricSummary> all;
  std::set<Condition> conditions;
  for (const auto& run : runs) {
    for (const auto& s : run.summaries) {
      all.push_back(s);
      conditions.insert(s.condition);
    }
  }
  if (conditions.size() > 1 && !options.allow_mixed_conditions) {
    std::string names;
    for (Condition c : conditions) names += (names.empty() ? "" : ", ") + std::string(to_string(c));
    throw UsageError("runs mix ordering conditions (" + names +
                     "); pass the mixed-conditions flag to report them together");
  }

  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  std::ostringstream text;
  text << "cotfaith report\n";
  text << "harness " << harness_version() << "\n\n";
  text << "runs\n";
  for (const auto& run : runs) {
    const auto& m = run.manifest;
    std::string conds;
    for (Condition c : m.conditions) conds += (conds.empty() ? "" : ",") + std::string(to_string(c));
    text << "  " << m.run_id << "  model=" << m.model_id << "  dataset=" << m.dataset_name
         << " (" << m.sampled_size << " of " << m.dataset_size << ")  conditions=" << conds << '\n';
    text << "    templates " << m.templates_origin << " sha256:" << m.templates_digest << '\n';
    text << "    style=" << to_string(m.style) << " extraction=" << to_string(m.extraction.mode)
         << " top_p=" << m.decoding.top_p << " temperature=" << m.decoding.temperature
         << " run_seed=" << m.run_seed << '\n';
  }

  write_file(out_dir / "summary.csv", summary_csv(all), written);
  text << "\nsummary.csv: " << all.size() << " rows\n";

  // Scatter of CoT accuracy against unfaithfulness, one point per row.
  std::vector<ScatterPoint> points;
  std::string scatter = csv_line({"label", "model_id", "dataset", "condition", "n_examples",
                                  "accuracy_cot", "unfaithfulness"});
  for (const auto& s : all) {
    if (!s.acc_cot.value || !s.unfaithfulness_lanham.value) continue;
    ScatterPoint p{100.0 * s.acc_cot.value->value(), 100.0 * s.unfaithfulness_lanham.value->value(),
                   s.model_id + "/" + s.dataset + "/" + std::string(to_string(s.condition))};
    scatter += csv_line({p.label, s.model_id, s.dataset, std::string(to_string(s.condition)),
                         std::to_string(s.n_examples), cell(s.acc_cot), cell(s.unfaithfulness_lanham)});
    points.push_back(std::move(p));
  }
  write_file(out_dir / "scatter.csv", scatter, written);
  try {
    const fs::path summary_path = out_dir / "summary.csv";
    std::ifstream in(summary_path);
    const auto fit = regress_columns(read_csv(in), "accuracy_cot", "unfaithfulness", options.weighted);
    write_file(out_dir / "scatter_fit.csv",
               csv_line({"x", "y", "slope", "intercept", "r_squared", "n_points", "weighted"}) +
                   csv_line({"accuracy_cot", "unfaithfulness", fixed(fit.slope, 6),
                             fixed(fit.intercept, 6), fixed(fit.r_squared, 6),
                             std::to_string(fit.n_points), fit.weighted ? "true" : "false"}),
               written);
    write_file(out_dir / "scatter.svg",
               scatter_svg(points, fit, "accuracy with CoT (%)", "unfaithfulness (%)"), written);
    text << "fit " << fit.provenance << ": slope=" << fixed(fit.slope, 4)
         << " intercept=" << fixed(fit.intercept, 4) << " R^2=" << fixed(fit.r_squared, 4)
         << " n=" << fit.n_points << '\n';
  } catch (const DegenerateFit& e) {
    text << "fit unfaithfulness ~ accuracy_cot: not computed (" << e.what() << ")\n";
  }

  // Scaling series per family (and condition when several are present).
  std::string scaling = csv_line({"metric", "family", "condition", "parameter_count",
                                  "log10_parameters", "mean", "stddev", "n"});
  for (MetricField metric : {MetricField::unfaithfulness, MetricField::unfaithfulness_normalized,
                             MetricField::accuracy_cot}) {
    std::map<std::pair<std::string, Condition>, std::vector<MetricSummary>> groups;
    for (const auto& s : all) {
      if (s.parameter_count && !s.model_family.empty()) groups[{s.model_family, s.condition}].push_back(s);
    }
    std::vector<ScalingSeries> series;
    for (const auto& [key, members] : groups) {
      ScalingSeries ss = as_percent(scaling_series(members, metric));
      if (conditions.size() > 1) ss.family += " [" + std::string(to_string(key.second)) + "]";
      for (const auto& l : ss.levels) {
        scaling += csv_line({std::string(to_string(metric)), key.first, std::string(to_string(key.second)),
                             std::to_string(l.parameter_count), fixed(l.log10_parameters, 4),
                             fixed(l.mean), fixed(l.stddev), std::to_string(l.n)});
      }
      if (!ss.levels.empty()) series.push_back(std::move(ss));
    }
    if (!series.empty()) {
      const std::string name = "scaling_" + std::string(to_string(metric)) + ".svg";
      write_file(out_dir / name, scaling_svg(series, std::string(to_string(metric)) + " (%)"), written);
    }
  }
  write_file(out_dir / "scaling.csv", scaling, written);

  text << "\nfaults and gaps\n";
  bool any = false;
  for (const auto& s : all) {
    if (s.faulted() == 0 && s.skipped == 0 && s.pending == 0) continue;
    any = true;
    text << "  " << s.model_id << "/" << s.dataset << "/" << to_string(s.condition) << ": planned "
         << s.planned << ", scored " << s.n_examples << ", skipped " << s.skipped << ", pending "
         << s.pending;
    for (const auto& [f, n] : s.faults) {
      if (n) text << ", " << to_string(f) << ' ' << n;
    }
    text << '\n';
  }
  if (!any) text << "  none\n";

  write_file(out_dir / "report.txt", text.str(), written);
  return written;
}

}  // namespace cotfaith
