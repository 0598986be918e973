#include "slicever/report.h"

#include <iomanip>
#include <sstream>

namespace slicever::report {

namespace {

using experiment::ReportBundle;

struct Row {
  std::string label;
  std::string precision, recall, f1, support;
};

std::string fixed2(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << v;
  return out.str();
}

std::vector<Row> metric_rows(const metrics::ClassificationReport& r) {
  std::vector<Row> rows;
  for (SliceId s : kAllSlices) {
    const auto& m = r.per_class[index_of(s)];
    rows.push_back({std::string(slice_label(s)), fixed2(m.precision), fixed2(m.recall), fixed2(m.f1),
                    std::to_string(m.support)});
  }
  // Accuracy sits in the F1 column, as in the usual classification report.
  rows.push_back({"Accuracy", "", "", fixed2(r.accuracy), std::to_string(r.total)});
  for (const auto& [label, m] : {std::pair{"Macro Avg.", r.macro}, std::pair{"Weighted Avg.", r.weighted}}) {
    rows.push_back({label, fixed2(m.precision), fixed2(m.recall), fixed2(m.f1), std::to_string(m.support)});
  }
  return rows;
}

std::string title(const ReportBundle& b) {
  std::string t = "Slice verifier metrics, " + b.scenario + "-oriented agent (" +
                  std::string(experiment::run_mode_name(b.mode)) + ", seed " + std::to_string(b.seed) + ")";
  return t;
}

std::vector<std::string> summary_lines(const ReportBundle& b) {
  std::vector<std::string> lines;
  const auto& e = b.events;
  if (b.latency) {
    lines.push_back("latency_us: p50 " + std::to_string(b.latency->p50) + ", p95 " + std::to_string(b.latency->p95) +
                    ", p99 " + std::to_string(b.latency->p99) + ", max " + std::to_string(b.latency->max) +
                    " (over budget: " + std::to_string(e.over_budget) + ")");
  }
  lines.push_back("verdicts: " + std::to_string(e.verdicts) + ", misclass " + std::to_string(e.misclass) +
                  ", conflict " + std::to_string(e.conflict) + ", drift-flagged " + std::to_string(e.drift_flagged));
  if (e.drift_evaluations > 0) {
    lines.push_back("drift evaluations: " + std::to_string(e.drift_evaluations) + ", over threshold " +
                    std::to_string(e.drift_over_threshold) + ", in breach " + std::to_string(e.drift_breached));
  }
  if (b.loop) {
    const auto& l = *b.loop;
    std::string rates;
    std::string buffers;
    for (SliceId s : kAllSlices) {
      const auto i = index_of(s);
      const std::string sep = rates.empty() ? "" : ", ";
      rates += sep + std::string(slice_label(s)) + " " + fixed2(l.mean_bitrate_mbps[i]);
      buffers += sep + std::string(slice_label(s)) + " " + fixed2(l.mean_buffer_bytes[i]);
    }
    lines.push_back("windows: " + std::to_string(l.windows) + ", mean reward " + fixed2(l.mean_reward) +
                    ", rejected actions " + std::to_string(e.rejected_actions) + ", dropped messages " +
                    std::to_string(e.dropped_messages));
    lines.push_back("mean bitrate (Mbps): " + rates);
    lines.push_back("mean dl buffer (bytes): " + buffers);
  }
  lines.push_back("dataset: train " + std::to_string(b.dataset.train_size) + ", evaluated " +
                  std::to_string(b.dataset.eval_size) + ", imputed cells " + std::to_string(b.dataset.imputed));
  if (b.escalations.empty()) {
    lines.push_back("escalations: none");
  } else {
    std::string list;
    for (const auto& x : b.escalations) {
      list += (list.empty() ? "" : ", ") + x.reason + "@" + std::to_string(x.window_id);
    }
    lines.push_back("escalations: " + list);
  }
  return lines;
}

std::string render_text(const ReportBundle& b) {
  std::ostringstream out;
  out << title(b) << "\n\n";
  out << std::left << std::setw(14) << "" << std::right << std::setw(10) << "Precision" << std::setw(10) << "Recall"
      << std::setw(10) << "F1-Score" << std::setw(10) << "Support" << "\n";
  for (const auto& r : metric_rows(b.report)) {
    out << std::left << std::setw(14) << r.label << std::right << std::setw(10) << r.precision << std::setw(10)
        << r.recall << std::setw(10) << r.f1 << std::setw(10) << r.support << "\n";
  }
  out << "\n";
  for (const auto& line : summary_lines(b)) out << line << "\n";
  return out.str();
}

std::string render_markdown(const ReportBundle& b) {
  std::ostringstream out;
  out << "## " << title(b) << "\n\n";
  out << "| | Precision | Recall | F1-Score | Support |\n";
  out << "|---|---:|---:|---:|---:|\n";
  for (const auto& r : metric_rows(b.report)) {
    out << "| " << r.label << " | " << r.precision << " | " << r.recall << " | " << r.f1 << " | " << r.support
        << " |\n";
  }
  out << "\n";
  for (const auto& line : summary_lines(b)) out << "- " << line << "\n";
  return out.str();
}

}  // namespace

std::optional<Format> parse_format(std::string_view s) {
  if (s == "text") return Format::kText;
  if (s == "markdown") return Format::kMarkdown;
  if (s == "json") return Format::kJson;
  return std::nullopt;
}

std::string render_report(const ReportBundle& bundle, Format format) {
  switch (format) {
    case Format::kMarkdown:
      return render_markdown(bundle);
    case Format::kJson:
      return experiment::to_json(bundle).dump(2) + "\n";
    case Format::kText:
      break;
  }
  return render_text(bundle);
}

}  // namespace slicever::report
