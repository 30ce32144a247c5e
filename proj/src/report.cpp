#include "gridbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>

namespace gridbench::report {

namespace {

using nlohmann::json;

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string escape_xml(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Round step (1, 2 or 5 times a power of ten) giving about `count` ticks.
double nice_step(double span, int count) {
  double raw = span / count;
  double power = std::pow(10.0, std::floor(std::log10(raw)));
  double f = raw / power;
  double nice = f < 1.5 ? 1.0 : f < 3.5 ? 2.0 : f < 7.5 ? 5.0 : 10.0;
  return nice * power;
}

struct SwarmPoint {
  double x;
  double y;
};

// Greedy 1-D non-overlap: points go in value order to the nearest free slot
// around the centre line; a seeded coin picks which side is tried first.
std::vector<SwarmPoint> swarm(const std::vector<double>& ys, double centre, double radius, Rng& rng) {
  std::vector<std::size_t> order(ys.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ys[a] < ys[b]; });
  std::vector<SwarmPoint> placed(ys.size());
  std::vector<SwarmPoint> done;
  const double gap = 2.0 * radius;
  for (std::size_t idx : order) {
    bool right_first = rng.next_u64() & 1U;
    for (int k = 0;; ++k) {
      int step = (k + 1) / 2;
      bool right = (k % 2 == 1) == right_first;
      double x = centre + (right ? 1.0 : -1.0) * step * gap * 0.9;
      bool clear = true;
      for (const auto& p : done)
        if (std::hypot(p.x - x, p.y - ys[idx]) < gap) {
          clear = false;
          break;
        }
      if (clear || k > 200) {
        placed[idx] = {x, ys[idx]};
        done.push_back(placed[idx]);
        break;
      }
    }
  }
  return placed;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

const char* const kMetricOrder[][2] = {
    {"classification", "false_positive_rate"}, {"classification", "auc"},
    {"classification", "balanced_accuracy"},   {"classification", "mcc"},
    {"explanation", "explanation_error"},      {"explanation", "sens_max"},
    {"explanation", "auc_morf"},               {"robustness", "delta_adv_mean"},
    {"robustness", "lipschitz_lower"},
};

}  // namespace

std::string format_label(double value) {
  if (value == 0.0) value = 0.0;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", value);
  return buf;
}

std::string gardner_altman_svg(const EstimationPlotSpec& spec) {
  const auto& a = spec.samples.a;
  const auto& b = spec.samples.b;
  if (a.empty() || b.empty()) throw Error(ErrorCode::kEmptySamples, "both groups need values");
  const auto& cmp = spec.comparison;
  const double mean_a = stats::mean(a), mean_b = stats::mean(b);
  const double effect = cmp.point_estimate;
  const double ci_low = cmp.bootstrap_ci.low, ci_high = cmp.bootstrap_ci.high;

  // Shared value scale; the difference axis is offset so 0 sits at mean_b.
  double lo = std::min(*std::min_element(a.begin(), a.end()), *std::min_element(b.begin(), b.end()));
  double hi = std::max(*std::max_element(a.begin(), a.end()), *std::max_element(b.begin(), b.end()));
  lo = std::min({lo, mean_b + ci_low, mean_b + effect});
  hi = std::max({hi, mean_b + ci_high, mean_b + effect});
  double span = hi - lo;
  if (!(span > 0.0)) span = std::max(std::abs(hi), 1.0) * 0.1;
  lo -= 0.1 * span;
  hi += 0.1 * span;

  const double w = spec.canvas.width, h = spec.canvas.height;
  const double top = 48.0, bottom = h - 56.0;
  const double left_x0 = 72.0, left_x1 = 0.62 * w;
  const double right_x0 = 0.72 * w, right_x1 = w - 72.0;
  auto y_of = [&](double v) { return bottom - (v - lo) / (hi - lo) * (bottom - top); };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << spec.canvas.width
      << "\" height=\"" << spec.canvas.height << "\" viewBox=\"0 0 " << spec.canvas.width << ' '
      << spec.canvas.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << spec.canvas.width << "\" height=\"" << spec.canvas.height
      << "\" fill=\"white\"/>\n";
  if (!spec.title.empty())
    svg << "<text class=\"title\" x=\"" << px(w / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">"
        << escape_xml(spec.title) << "</text>\n";

  // Value axis with ticks.
  svg << "<g class=\"value-axis\" stroke=\"black\">\n"
      << "<line x1=\"" << px(left_x0) << "\" y1=\"" << px(top) << "\" x2=\"" << px(left_x0) << "\" y2=\""
      << px(bottom) << "\"/>\n";
  double step = nice_step(hi - lo, 5);
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12 * std::abs(hi); t += step) {
    double y = y_of(t);
    svg << "<line x1=\"" << px(left_x0 - 5) << "\" y1=\"" << px(y) << "\" x2=\"" << px(left_x0) << "\" y2=\""
        << px(y) << "\"/>\n"
        << "<text class=\"tick\" stroke=\"none\" x=\"" << px(left_x0 - 8) << "\" y=\"" << px(y + 4)
        << "\" text-anchor=\"end\">" << format_label(std::abs(t) < step * 1e-9 ? 0.0 : t) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text class=\"axis-label\" x=\"18\" y=\"" << px((top + bottom) / 2) << "\" transform=\"rotate(-90 18 "
      << px((top + bottom) / 2) << ")\" text-anchor=\"middle\">" << escape_xml(spec.samples.metric_name)
      << "</text>\n";

  // Swarms.
  Rng rng(spec.jitter_seed);
  const double radius = 4.5;
  const double centre_a = left_x0 + 0.3 * (left_x1 - left_x0);
  const double centre_b = left_x0 + 0.75 * (left_x1 - left_x0);
  auto to_pixels = [&](const std::vector<double>& values) {
    std::vector<double> ys;
    for (double v : values) ys.push_back(y_of(v));
    return ys;
  };
  auto pa = swarm(to_pixels(a), centre_a, radius, rng);
  auto pb = swarm(to_pixels(b), centre_b, radius, rng);
  svg << "<g class=\"swarm\" stroke=\"none\">\n";
  for (const auto& p : pa)
    svg << "<circle class=\"swarm-point\" cx=\"" << px(p.x) << "\" cy=\"" << px(p.y) << "\" r=\"" << px(radius)
        << "\" fill=\"#1f77b4\"/>\n";
  for (const auto& p : pb)
    svg << "<circle class=\"swarm-point\" cx=\"" << px(p.x) << "\" cy=\"" << px(p.y) << "\" r=\"" << px(radius)
        << "\" fill=\"#ff7f0e\"/>\n";
  svg << "</g>\n";
  svg << "<text class=\"group-label\" x=\"" << px(centre_a) << "\" y=\"" << px(bottom + 22)
      << "\" text-anchor=\"middle\">" << escape_xml(spec.group_a_name) << " (n=" << a.size() << ")</text>\n"
      << "<text class=\"group-label\" x=\"" << px(centre_b) << "\" y=\"" << px(bottom + 22)
      << "\" text-anchor=\"middle\">" << escape_xml(spec.group_b_name) << " (n=" << b.size() << ")</text>\n";

  // Mean reference lines run across to the difference axis.
  svg << "<g class=\"mean-lines\" stroke=\"#888888\" stroke-dasharray=\"4 3\">\n"
      << "<line x1=\"" << px(centre_a - 20) << "\" y1=\"" << px(y_of(mean_a)) << "\" x2=\"" << px(right_x1)
      << "\" y2=\"" << px(y_of(mean_a)) << "\"/>\n"
      << "<line x1=\"" << px(centre_b - 20) << "\" y1=\"" << px(y_of(mean_b)) << "\" x2=\"" << px(right_x1)
      << "\" y2=\"" << px(y_of(mean_b)) << "\"/>\n"
      << "</g>\n";

  // Difference axis.
  const double axis_x = right_x1 - 8.0;
  const double effect_x = (right_x0 + axis_x) / 2.0;
  svg << "<g class=\"difference-axis\" stroke=\"black\">\n"
      << "<line x1=\"" << px(axis_x) << "\" y1=\"" << px(top) << "\" x2=\"" << px(axis_x) << "\" y2=\""
      << px(bottom) << "\"/>\n"
      << "<line x1=\"" << px(axis_x) << "\" y1=\"" << px(y_of(mean_b)) << "\" x2=\"" << px(axis_x + 5)
      << "\" y2=\"" << px(y_of(mean_b)) << "\"/>\n"
      << "<text class=\"tick\" stroke=\"none\" x=\"" << px(axis_x + 8) << "\" y=\"" << px(y_of(mean_b) + 4)
      << "\">0</text>\n"
      << "</g>\n";
  svg << "<line class=\"ci-bar\" x1=\"" << px(effect_x) << "\" y1=\"" << px(y_of(mean_b + ci_low)) << "\" x2=\""
      << px(effect_x) << "\" y2=\"" << px(y_of(mean_b + ci_high)) << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
  svg << "<circle class=\"effect-point\" cx=\"" << px(effect_x) << "\" cy=\"" << px(y_of(mean_b + effect))
      << "\" r=\"5\" fill=\"black\"/>\n";
  svg << "<text class=\"effect-label\" x=\"" << px((right_x0 + right_x1) / 2) << "\" y=\"" << px(bottom + 22)
      << "\" text-anchor=\"middle\">mean difference " << format_label(effect) << "</text>\n";
  svg << "<text class=\"ci-label\" x=\"" << px((right_x0 + right_x1) / 2) << "\" y=\"" << px(bottom + 38)
      << "\" text-anchor=\"middle\">" << format_label(cmp.bootstrap_ci.level * 100.0) << "% CI ["
      << format_label(ci_low) << ", " << format_label(ci_high) << "] " << escape_xml(cmp.bootstrap_ci.method)
      << "</text>\n";
  if (cmp.cohens_d)
    svg << "<text class=\"d-label\" x=\"" << px((right_x0 + right_x1) / 2) << "\" y=\"" << px(top - 8)
        << "\" text-anchor=\"middle\">d = " << format_label(*cmp.cohens_d) << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string text_summary(const json& record) {
  std::ostringstream out;
  out << "Study " << record.value("study_id", "?") << "\n";
  if (record.contains("created_at")) out << "Created: " << record["created_at"].get<std::string>() << "\n";
  if (record.contains("reproducibility_digest"))
    out << "Reproducibility digest: " << record["reproducibility_digest"].get<std::string>() << "\n";
  if (record.contains("environment")) {
    const auto& env = record["environment"];
    out << "Environment: " << env.value("cpu_model", "unknown") << ", " << env.value("logical_cores", 0)
        << " cores, " << env.value("ram_bytes", std::uint64_t{0}) << " bytes RAM, " << env.value("os", "unknown")
        << ", gridbench " << env.value("artifact_version", "?") << "\n";
  }

  std::vector<std::string> algorithms;
  if (record.contains("statistics")) {
    algorithms.push_back(record["statistics"].value("algorithm_a", "A"));
    algorithms.push_back(record["statistics"].value("algorithm_b", "B"));
  } else if (record.contains("metrics")) {
    for (const auto& m : record["metrics"]) {
      std::string name = m.value("algorithm", "");
      if (std::find(algorithms.begin(), algorithms.end(), name) == algorithms.end()) algorithms.push_back(name);
    }
  }

  if (record.contains("datasets") && !record["datasets"].empty()) {
    out << "\nDatasets\n";
    out << "  " << pad("name", 20) << pad("rows", 8) << pad("train", 8) << pad("test", 8) << "content hash\n";
    for (const auto& d : record["datasets"]) {
      out << "  " << pad(d.value("name", ""), 20) << pad(std::to_string(d.value("n_rows", 0)), 8)
          << pad(std::to_string(d.value("n_train", 0)), 8) << pad(std::to_string(d.value("n_test", 0)), 8)
          << d.value("content_hash", "").substr(0, 16) << "\n";
    }
  }

  if (record.contains("metrics") && !record["metrics"].empty()) {
    // (metric, dataset) -> algorithm -> value
    std::vector<std::string> datasets;
    std::map<std::pair<std::string, std::string>, std::map<std::string, double>> table;
    for (const auto& m : record["metrics"]) {
      std::string ds = m.value("dataset", "");
      if (std::find(datasets.begin(), datasets.end(), ds) == datasets.end()) datasets.push_back(ds);
      for (const auto& [section, key] : kMetricOrder)
        if (m.contains(section) && m[section].contains(key))
          table[{key, ds}][m.value("algorithm", "")] = m[section][key].get<double>();
    }
    out << "\nMetrics\n";
    out << "  " << pad("metric", 20) << pad("dataset", 20);
    for (const auto& alg : algorithms) out << pad(alg, 18);
    out << "\n";
    for (const auto& [section, key] : kMetricOrder) {
      for (const auto& ds : datasets) {
        auto it = table.find({key, ds});
        if (it == table.end()) continue;
        out << "  " << pad(key, 20) << pad(ds, 20);
        for (const auto& alg : algorithms) {
          auto v = it->second.find(alg);
          out << pad(v == it->second.end() ? "-" : fmt(v->second), 18);
        }
        out << "\n";
      }
    }
  }

  if (record.contains("comparison") && !record["comparison"].empty()) {
    stats::EffectBuckets buckets;
    if (record.contains("statistics") && record["statistics"].contains("effect_buckets")) {
      const auto& eb = record["statistics"]["effect_buckets"];
      buckets.small_upper = eb.value("small_upper", buckets.small_upper);
      buckets.medium_upper = eb.value("medium_upper", buckets.medium_upper);
    }
    out << "\nComparison";
    if (algorithms.size() == 2) out << " (" << algorithms[0] << " minus " << algorithms[1] << ")";
    out << "\n";
    out << "  " << pad("metric", 20) << pad("wilcoxon W", 12) << pad("p", 12) << pad("cohen's d", 12)
        << pad("effect", 10) << "bootstrap CI\n";
    for (const auto& c : record["comparison"]) {
      out << "  " << pad(c.value("metric", ""), 20);
      const auto& w = c["wilcoxon"];
      if (w.contains("incomputable")) {
        out << pad("n/a", 12) << pad(w["incomputable"].get<std::string>(), 12);
      } else {
        out << pad(fmt(w["statistic"].get<double>()), 12) << pad(fmt(w["p_value"].get<double>()), 12);
      }
      const auto& d = c["cohens_d"];
      if (d.contains("incomputable")) {
        out << pad("n/a", 12) << pad(d["incomputable"].get<std::string>(), 10);
      } else {
        double value = d["value"].get<double>();
        out << pad(fmt(value), 12) << pad(std::string(to_string(stats::effect_label(value, buckets))), 10);
      }
      const auto& ci = c["bootstrap_ci"];
      out << fmt(ci["level"].get<double>() * 100.0) << "% [" << fmt(ci["low"].get<double>()) << ", "
          << fmt(ci["high"].get<double>()) << "] " << ci["method"].get<std::string>() << "\n";
    }
  }
  return out.str();
}

}  // namespace gridbench::report
