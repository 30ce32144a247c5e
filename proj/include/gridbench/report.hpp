#pragma once

#include <cstdint>
#include <string>

#include "gridbench/stats.hpp"
#include "json.hpp"

namespace gridbench::report {

struct Canvas {
  int width = 720;
  int height = 420;
};

struct EstimationPlotSpec {
  std::string title;
  std::string group_a_name;
  std::string group_b_name;
  stats::PairedSamples samples;
  stats::ComparisonResult comparison;
  std::uint64_t jitter_seed = 0;
  Canvas canvas;
};

// Fixed formatting shared by every numeric label in the plots.
std::string format_label(double value);

// Gardner-Altman plot: both groups as swarms on a shared value axis, and the
// mean difference with its bootstrap interval on a floating difference axis
// whose zero sits at the mean of group b. Throws EmptySamples.
std::string gardner_altman_svg(const EstimationPlotSpec& spec);

// Plain-text tables of per-dataset metrics and, when present, the comparison
// block. Accepts any study record document.
std::string text_summary(const nlohmann::json& record);

}  // namespace gridbench::report
