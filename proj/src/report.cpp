#include "pace/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "pace/errors.hpp"
#include "pace/failure_analysis.hpp"

namespace fs = std::filesystem;

namespace pace {
namespace {

TaxonomyRow taxonomy_row(std::string phase, const nlohmann::ordered_json& payload) {
  TaxonomyRow row;
  row.phase = std::move(phase);
  if (!payload.contains("taxonomy")) return row;
  for (auto c : kAllFailureCategories)
    row.counts[static_cast<std::size_t>(c)] = payload["taxonomy"].value(std::string(to_string(c)), 0);
  return row;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

}  // namespace

std::string format_multiplier(double baseline, double evolved) {
  if (baseline <= 0.0) return "n/a";
  return fmt(std::round(evolved / baseline * 10.0) / 10.0, 1);
}

ReportBundle build_report(std::span<const TrajectoryEvent> events) {
  ReportBundle b;
  std::optional<double> vanilla_cost, final_cost;
  std::optional<std::size_t> initial_event, final_event, last_round, saturation_round;
  std::set<int> steps_with_saturation;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const auto& p = e.payload;
    switch (e.action) {
      case Action::evaluate_on_task: {
        const auto phase = p.value("phase", std::string());
        const double u = p.value("utility", 0.0);
        if (phase == "initial") {
          initial_event = i;
          vanilla_cost = p.value("cost_per_query", 0.0);
        } else if (phase == "final") {
          final_event = i;
          final_cost = p.value("cost_per_query", 0.0);
        } else if (phase == "post_commit" && p.value("rolled_back", false)) {
          ++b.filtering.rolled_back;
        }
        // A rolled-back commit is plotted at the utility it was measured at.
        const double shown = phase == "post_commit" ? p.value("candidate_utility", u) : u;
        b.curve.push_back(CurvePoint{e.step, e.outer_step, shown, phase,
                                     phase == "post_commit" && !p.value("rolled_back", false)});
        break;
      }
      case Action::optimize_prompt_on_task:
        last_round = i;
        b.curve.push_back(CurvePoint{e.step, e.outer_step, p.value("utility", 0.0), "prompt_round", false});
        break;
      case Action::get_evolution_credit:
        if (p.value("saturated", false) && !saturation_round && last_round) saturation_round = last_round;
        break;
      case Action::adjust_logic:
        if (p.value("stage", std::string()) == "proposal") {
          ++b.filtering.proposed;
          if (e.outcome == "executable") {
            ++b.filtering.executable;
          } else {
            ++b.filtering.non_executable;
          }
        } else if (e.label == "accepted") {
          ++b.filtering.accepted;
        } else if (e.label == "rejected") {
          ++b.filtering.rejected;
          if (p.value("utility_new", 0.0) - p.value("utility_old", 0.0) <= 0.0) ++b.filtering.rejected_regression;
        }
        break;
      case Action::read_logic: {
        // A structural round fails when none of its proposals was executable.
        bool executable = false;
        for (std::size_t j = i + 1; j < events.size(); ++j) {
          if (events[j].action == Action::read_logic || events[j].action == Action::optimize_prompt_on_task) break;
          if (events[j].action == Action::adjust_logic && events[j].outcome == "executable") executable = true;
        }
        if (!executable) ++b.filtering.failed_rounds;
        break;
      }
      case Action::compare_variants: {
        const bool paired = i + 1 < events.size() && events[i + 1].action == Action::adjust_logic &&
                            events[i + 1].payload.value("stage", std::string()) == "verdict";
        if (!paired) ++b.unpaired_comparisons;
        break;
      }
      default:
        break;
    }
  }

  if (initial_event) {
    b.accuracy.vanilla = events[*initial_event].payload.value("utility", 0.0);
    b.taxonomy.push_back(taxonomy_row("vanilla", events[*initial_event].payload));
  }
  const auto pe_event = saturation_round ? saturation_round : final_event;
  if (pe_event) {
    b.accuracy.prompt_evolved = events[*pe_event].payload.value("utility", 0.0);
    b.taxonomy.push_back(taxonomy_row("prompt_evolved", events[*pe_event].payload));
  }
  if (final_event) {
    b.accuracy.pace = events[*final_event].payload.value("utility", 0.0);
    b.taxonomy.push_back(taxonomy_row("pace", events[*final_event].payload));
  }
  if (vanilla_cost) b.usage.push_back(UsageRow{"vanilla", *vanilla_cost, 1.0});
  if (final_cost) {
    const double m = vanilla_cost && *vanilla_cost > 0.0 ? *final_cost / *vanilla_cost : 1.0;
    b.usage.push_back(UsageRow{"pace", *final_cost, m});
  }
  return b;
}

std::string curve_svg(const std::vector<CurvePoint>& curve) {
  constexpr double kW = 640, kH = 360, kPad = 48;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">step</text>\n";
  svg << "<text x=\"14\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << kH / 2
      << ")\">validated utility</text>\n";
  if (!curve.empty()) {
    double lo = 1.0, hi = 0.0;
    for (const auto& p : curve) {
      lo = std::min(lo, p.utility);
      hi = std::max(hi, p.utility);
    }
    lo = std::max(0.0, lo - 0.05);
    hi = std::min(1.0, hi + 0.05);
    if (hi <= lo) hi = lo + 0.1;
    const double n = static_cast<double>(std::max<std::size_t>(1, curve.size() - 1));
    auto x = [&](std::size_t i) { return kPad + (kW - 2 * kPad) * static_cast<double>(i) / n; };
    auto y = [&](double u) { return kH - kPad - (kH - 2 * kPad) * (u - lo) / (hi - lo); };
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) svg << fmt(x(i), 1) << "," << fmt(y(curve[i].utility), 1) << " ";
    svg << "\"/>\n";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      if (curve[i].commit)
        svg << "<circle cx=\"" << fmt(x(i), 1) << "\" cy=\"" << fmt(y(curve[i].utility), 1)
            << "\" r=\"6\" fill=\"#d62728\"/>\n";
    }
    svg << "<text x=\"" << kPad - 4 << "\" y=\"" << fmt(y(lo), 1) << "\" text-anchor=\"end\" font-size=\"10\">"
        << fmt(lo, 2) << "</text>\n";
    svg << "<text x=\"" << kPad - 4 << "\" y=\"" << fmt(y(hi), 1) << "\" text-anchor=\"end\" font-size=\"10\">"
        << fmt(hi, 2) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

ReportBundle emit_report(std::span<const TrajectoryEvent> events, const std::string& out_dir, bool plot) {
  auto b = build_report(events);
  const fs::path dir(out_dir);
  fs::create_directories(dir);

  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  write_file(dir / "accuracy.csv", "variant,utility\nvanilla," + opt(b.accuracy.vanilla) + "\nprompt_evolved," +
                                       opt(b.accuracy.prompt_evolved) + "\npace," + opt(b.accuracy.pace) + "\n");

  std::string taxonomy = "phase,extraction_runtime,format_constraint,reasoning_content\n";
  for (const auto& r : b.taxonomy)
    taxonomy += r.phase + "," + std::to_string(r.counts[0]) + "," + std::to_string(r.counts[1]) + "," +
                std::to_string(r.counts[2]) + "\n";
  write_file(dir / "taxonomy.csv", taxonomy);

  const auto& f = b.filtering;
  write_file(dir / "filtering.csv",
             "proposed,executable,accepted,rejected,rejected_regression,non_executable,rolled_back\n" +
                 std::to_string(f.proposed) + "," + std::to_string(f.executable) + "," + std::to_string(f.accepted) +
                 "," + std::to_string(f.rejected) + "," + std::to_string(f.rejected_regression) + "," +
                 std::to_string(f.non_executable) + "," + std::to_string(f.rolled_back) + "\n");

  std::string usage = "variant,cost_per_query,multiplier\n";
  const double base = b.usage.empty() ? 0.0 : b.usage.front().cost_per_query;
  for (const auto& u : b.usage)
    usage += u.variant + "," + fmt(u.cost_per_query, 1) + "," + format_multiplier(base, u.cost_per_query) + "\n";
  write_file(dir / "usage.csv", usage);

  std::string curve = "step,outer_step,source,utility,commit\n";
  for (const auto& p : b.curve)
    curve += std::to_string(p.step) + "," + std::to_string(p.outer_step) + "," + p.source + "," + fmt(p.utility) +
             "," + (p.commit ? "1" : "0") + "\n";
  write_file(dir / "curve.csv", curve);

  if (plot) write_file(dir / "curve.svg", curve_svg(b.curve));
  return b;
}

}  // namespace pace
