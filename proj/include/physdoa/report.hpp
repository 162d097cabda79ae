#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "physdoa/evaluate.hpp"

namespace physdoa {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

/// Minimal SVG line chart.
std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel);

void write_text(const std::filesystem::path& p, const std::string& text);
void write_json_file(const std::filesystem::path& p, const nlohmann::json& j);

/// Azimuth and elevation traces of an estimate against the truth, in degrees.
std::string svg_doa_trace(const SceneEval& e, double frame_seconds, const std::string& title);

/// Loss curves from a loss.jsonl log.
std::string svg_loss_curves(const std::filesystem::path& loss_log);

std::string svg_kappa_curve(const KappaCurve& c);

/// Writes <stem>.json plus one trace plot per scene (up to max_traces).
void write_eval_report(const EvalReport& r, const std::filesystem::path& out_dir, const std::string& stem,
                       double frame_seconds, std::size_t max_traces = 4);

}  // namespace physdoa
