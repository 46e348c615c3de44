#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pace/control_evolution.hpp"
#include "pace/trajectory.hpp"

namespace pace {

struct PhaseAccuracy {
  std::optional<double> vanilla;
  std::optional<double> prompt_evolved;
  std::optional<double> pace;
};

struct TaxonomyRow {
  std::string phase;
  std::array<int, 3> counts{};

  int total() const { return counts[0] + counts[1] + counts[2]; }
  double share(std::size_t category) const {
    return total() == 0 ? 0.0 : static_cast<double>(counts[category]) / static_cast<double>(total());
  }
};

struct CurvePoint {
  long long step = 0;
  int outer_step = 0;
  double utility = 0.0;
  std::string source;
  bool commit = false;
};

struct UsageRow {
  std::string variant;
  double cost_per_query = 0.0;
  double multiplier = 1.0;
};

struct ReportBundle {
  PhaseAccuracy accuracy;
  std::vector<TaxonomyRow> taxonomy;
  ProposalStats filtering;
  std::vector<UsageRow> usage;
  std::vector<CurvePoint> curve;
  // Compare events that lack a following verdict event.
  int unpaired_comparisons = 0;
};

// Ratio evolved / baseline rounded to one decimal, e.g. (470, 1710) -> "3.6".
std::string format_multiplier(double baseline, double evolved);

// Pure function of the event stream.
ReportBundle build_report(std::span<const TrajectoryEvent> events);

// Writes accuracy.csv, taxonomy.csv, filtering.csv, usage.csv, curve.csv and, when asked,
// curve.svg into `out_dir`.
ReportBundle emit_report(std::span<const TrajectoryEvent> events, const std::string& out_dir, bool plot = false);

std::string curve_svg(const std::vector<CurvePoint>& curve);

}  // namespace pace
