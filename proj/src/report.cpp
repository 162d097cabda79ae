#include "physdoa/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "physdoa/vmf.hpp"

namespace physdoa {

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

}  // namespace

std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                          const std::string& ylabel) {
  const double W = 720, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title) << "</text>\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
    << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
    o << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    o << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
    o << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(yv) << "\" y2=\"" << py(yv)
      << "\" stroke=\"#ddd\"/>\n";
  }
  o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << esc(xlabel) << "</text>\n";
  o << "<text transform=\"translate(16," << (T + H - B) / 2 << ") rotate(-90)\" text-anchor=\"middle\">" << esc(ylabel)
    << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % 6];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) o << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
    o << "\"/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
        o << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    const double ly = T + 14 + 18 * static_cast<double>(k);
    o << "<line x1=\"" << W - R + 10 << "\" x2=\"" << W - R + 30 << "\" y1=\"" << ly << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << W - R + 35 << "\" y=\"" << ly + 4 << "\">" << esc(s.label) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << text;
}

void write_json_file(const std::filesystem::path& p, const nlohmann::json& j) { write_text(p, j.dump(1) + "\n"); }

std::string svg_doa_trace(const SceneEval& e, double frame_seconds, const std::string& title) {
  Series az_est{"azimuth est.", {}, {}, true}, az_true{"azimuth truth", {}, {}, false};
  Series el_est{"elevation est.", {}, {}, true}, el_true{"elevation truth", {}, {}, false};
  for (std::size_t t = 0; t < e.estimate.size(); ++t) {
    const double x = static_cast<double>(t) * frame_seconds;
    const DoaAngles a = to_angles(e.estimate[t].normalized()), b = to_angles(e.truth[t].normalized());
    az_true.x.push_back(x);
    az_true.y.push_back(rad2deg(b.azimuth));
    el_true.x.push_back(x);
    el_true.y.push_back(rad2deg(b.elevation));
    if (e.mask[t] > 0.0) {
      az_est.x.push_back(x);
      az_est.y.push_back(rad2deg(a.azimuth));
      el_est.x.push_back(x);
      el_est.y.push_back(rad2deg(a.elevation));
    }
  }
  return svg_line_plot({az_true, az_est, el_true, el_est}, title, "time (s)", "degrees");
}

std::string svg_loss_curves(const std::filesystem::path& loss_log) {
  std::ifstream in(loss_log);
  if (!in) throw IoError("cannot open " + loss_log.string());
  Series phys{"physics", {}, {}, false}, kl{"kl", {}, {}, false}, total{"total", {}, {}, false};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const double s = j.at("step").get<double>();
    phys.x.push_back(s);
    phys.y.push_back(j.at("physics").get<double>());
    kl.x.push_back(s);
    kl.y.push_back(j.at("kl").get<double>());
    total.x.push_back(s);
    total.y.push_back(j.at("total").get<double>());
  }
  return svg_line_plot({phys, kl, total}, "training loss", "step", "loss");
}

std::string svg_kappa_curve(const KappaCurve& c) {
  Series s{"mean kappa", {}, {}, true};
  for (const auto& p : c.points) {
    s.x.push_back(p.condition);
    s.y.push_back(p.mean_kappa);
  }
  const bool snr = c.mode == KappaMode::Snr;
  return svg_line_plot({s}, snr ? "concentration vs SNR (RT60 " + fmt(c.fixed) + " s)"
                                : "concentration vs RT60 (SNR " + fmt(c.fixed) + " dB)",
                       snr ? "SNR (dB)" : "RT60 (s)", "mean kappa");
}

void write_eval_report(const EvalReport& r, const std::filesystem::path& out_dir, const std::string& stem,
                       double frame_seconds, std::size_t max_traces) {
  nlohmann::json j = r;
  write_json_file(out_dir / (stem + ".json"), j);
  for (std::size_t i = 0; i < std::min(max_traces, r.scenes.size()); ++i)
    write_text(out_dir / (stem + "_trace_" + r.scenes[i].id + ".svg"),
               svg_doa_trace(r.scenes[i], frame_seconds, r.method + " " + r.scenes[i].id));
}

}  // namespace physdoa
