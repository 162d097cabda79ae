#include "physdoa/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include <nlohmann/json.hpp>

namespace physdoa {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

nlohmann::json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

std::uint64_t corruption_seed(int run, std::size_t scene) {
  return static_cast<std::uint64_t>(run) * 1000003ull + scene;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Pooled RMS over every active frame of every scene.
double pooled_rms(const std::vector<SceneEval>& scenes, std::size_t* active = nullptr) {
  double s = 0.0;
  std::size_t n = 0;
  for (const auto& e : scenes)
    for (std::size_t t = 0; t < e.mask.size(); ++t)
      if (e.mask[t] > 0.0) {
        s += e.error_deg[t] * e.error_deg[t];
        ++n;
      }
  if (active) *active = n;
  if (n == 0) throw MetricError("no active frames in the evaluation set");
  return std::sqrt(s / static_cast<double>(n));
}

void fill_errors(SceneEval& e) {
  e.error_deg.resize(e.estimate.size());
  for (std::size_t t = 0; t < e.estimate.size(); ++t) e.error_deg[t] = angular_error_deg(e.estimate[t], e.truth[t]);
}

}  // namespace

double angular_error_deg(const Vec3& a, const Vec3& b) {
  const double na = a.norm(), nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw MetricError("zero direction vector");
  return rad2deg(std::acos(std::clamp(a.dot(b) / (na * nb), -1.0, 1.0)));
}

double rms_angular_error(const std::vector<Vec3>& est, const std::vector<Vec3>& truth, const std::vector<double>& mask) {
  if (est.size() != truth.size() || est.size() != mask.size()) throw ShapeError("estimate, truth and mask lengths differ");
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 0; t < est.size(); ++t) {
    if (mask[t] <= 0.0) continue;
    const double e = angular_error_deg(est[t], truth[t]);
    s += e * e;
    ++n;
  }
  if (n == 0) throw MetricError("no active frames");
  return std::sqrt(s / static_cast<double>(n));
}

void to_json(nlohmann::json& j, const EvalReport& r) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : r.scenes) {
    nlohmann::json e = {{"id", s.id}, {"mask", s.mask}, {"error_deg", s.error_deg}};
    nlohmann::json est = nlohmann::json::array(), tru = nlohmann::json::array();
    for (const auto& v : s.estimate) est.push_back(vec_json(v));
    for (const auto& v : s.truth) tru.push_back(vec_json(v));
    e["estimate"] = est;
    e["truth"] = tru;
    if (!s.kappa.empty()) e["kappa"] = s.kappa;
    scenes.push_back(e);
  }
  j = {{"method", r.method},
       {"rms_deg", r.rms_deg},
       {"run_rms_deg", r.run_rms_deg},
       {"rms_std_deg", r.rms_std_deg},
       {"corrupt_percent", r.corrupt_percent},
       {"baseline_rms_deg", r.baseline_rms_deg},
       {"relative_increase_pct", r.relative_increase_pct},
       {"mean_kappa", r.mean_kappa},
       {"kappa_std", r.kappa_std},
       {"active_frames", r.active_frames},
       {"wall_seconds", r.wall_seconds},
       {"audio_seconds", r.audio_seconds},
       {"rtf", r.rtf},
       {"params", r.params},
       {"config", r.config},
       {"scenes", scenes}};
}

SceneEval encode_clip(const Encoder& encoder, const PreparedClip& clip, const std::vector<PairMetadata>& metadata) {
  const PosteriorSequence q = encoder.forward(clip.x, metadata);
  SceneEval e;
  e.id = clip.id;
  e.truth = clip.truth;
  e.mask = binary_mask(clip.mask);
  for (const auto& v : q) {
    e.estimate.push_back(v.mu);
    e.kappa.push_back(v.kappa);
  }
  fill_errors(e);
  return e;
}

EvalReport evaluate_clips(const Encoder& encoder, const std::vector<PreparedClip>& clips, double corrupt_percent,
                          int runs) {
  if (corrupt_percent < 0.0) throw ArgumentError("corruption percent must be nonnegative");
  if (runs < 1) throw ArgumentError("runs must be >= 1");
  if (clips.empty()) throw MetricError("empty evaluation set");
  EvalReport r;
  r.corrupt_percent = corrupt_percent;
  r.params = encoder.param_count();
  const auto t0 = Clock::now();
  // Uncorrupted evaluation is deterministic; one run suffices.
  std::vector<SceneEval> clean;
  for (const auto& c : clips) clean.push_back(encode_clip(encoder, c, c.metadata));
  r.wall_seconds = seconds_since(t0);
  r.baseline_rms_deg = pooled_rms(clean, &r.active_frames);
  const int n_runs = corrupt_percent > 0.0 ? runs : 1;
  if (corrupt_percent == 0.0) {
    r.scenes = std::move(clean);
    r.run_rms_deg.assign(static_cast<std::size_t>(runs), r.baseline_rms_deg);
  } else {
    for (int run = 0; run < n_runs; ++run) {
      std::vector<SceneEval> out;
      for (std::size_t i = 0; i < clips.size(); ++i) {
        const MicArray bad = corrupt_positions(clips[i].array, corrupt_percent, corruption_seed(run, i));
        out.push_back(encode_clip(encoder, clips[i], pair_metadata(bad)));
      }
      r.run_rms_deg.push_back(pooled_rms(out));
      if (run == 0) r.scenes = std::move(out);
    }
  }
  r.rms_deg = mean(r.run_rms_deg);
  r.rms_std_deg = stddev(r.run_rms_deg);
  r.relative_increase_pct = r.baseline_rms_deg > 0.0 ? 100.0 * (r.rms_deg - r.baseline_rms_deg) / r.baseline_rms_deg : 0.0;
  std::vector<double> kap;
  for (const auto& s : r.scenes)
    for (std::size_t t = 0; t < s.mask.size(); ++t)
      if (s.mask[t] > 0.0) kap.push_back(s.kappa[t]);
  r.mean_kappa = mean(kap);
  r.kappa_std = stddev(kap);
  return r;
}

std::vector<PreparedClip> load_split(const Manifest& data, const std::string& split, const EncoderConfig& enc,
                                     double lambda, double eps, int limit) {
  const auto& ids = data.split(split);
  std::vector<PreparedClip> out;
  for (const auto& id : ids) {
    if (limit > 0 && static_cast<int>(out.size()) >= limit) break;
    out.push_back(prepare_clip(load_scene(data, id), enc, lambda, eps));
  }
  return out;
}

EvalReport evaluate(const Checkpoint& ckpt, const Manifest& data, const EvalConfig& cfg) {
  if (data.lags != ckpt.encoder_config.lags) throw ShapeError("dataset lag count does not match the checkpoint");
  const double lambda = ckpt.extra.contains("train") ? ckpt.extra["train"].value("lambda", 8.0) : 8.0;
  const auto clips = load_split(data, cfg.split, ckpt.encoder_config, lambda);
  EvalReport r = evaluate_clips(ckpt.encoder, clips, cfg.corrupt_percent, cfg.runs);
  double audio = 0.0;
  for (const auto& c : clips) audio += static_cast<double>(c.g.dim1() - 1) * data.frames.hop / data.geometry.sample_rate() +
                                       static_cast<double>(data.frames.window) / data.geometry.sample_rate();
  r.audio_seconds = audio;
  r.rtf = audio > 0.0 ? r.wall_seconds / audio : 0.0;
  r.config = {{"split", cfg.split}, {"runs", cfg.runs}, {"corrupt_percent", cfg.corrupt_percent},
              {"dataset", data.root.string()}, {"scenes", clips.size()}};
  return r;
}

EvalReport srp_evaluate_clips(const std::vector<PreparedClip>& clips, const LagGrid& lags, const SrpGrid& grid,
                              SrpInterp interp) {
  if (clips.empty()) throw MetricError("empty evaluation set");
  EvalReport r;
  r.method = "srp_phat";
  const auto t0 = Clock::now();
  for (const auto& c : clips) {
    const std::size_t Tl = c.truth.size();
    const Tensor3<float> gi = interpolate_time_axis(c.g, Tl);
    SceneEval e;
    e.id = c.id;
    e.truth = c.truth;
    e.mask = binary_mask(c.mask);
    const Eigen::MatrixXd map = srp_phat_map(gi, lags, enumerate_pairs(c.array), c.array.speed_of_sound(),
                                             c.array.sample_rate(), grid, interp);
    e.estimate = srp_argmax(map, e.mask, grid).directions;
    fill_errors(e);
    r.scenes.push_back(std::move(e));
  }
  r.wall_seconds = seconds_since(t0);
  r.rms_deg = r.baseline_rms_deg = pooled_rms(r.scenes, &r.active_frames);
  r.run_rms_deg = {r.rms_deg};
  return r;
}

EvalReport srp_evaluate(const Manifest& data, const std::string& split, const EncoderConfig& enc, SrpInterp interp) {
  EncoderConfig e = enc;
  e.lags = data.lags;
  const auto clips = load_split(data, split, e, 8.0);
  EvalReport r = srp_evaluate_clips(clips, data.lag_grid(), SrpGrid::make(), interp);
  r.config = {{"split", split}, {"dataset", data.root.string()}, {"scenes", clips.size()},
              {"interp", interp == SrpInterp::Linear ? "linear" : "nearest"}};
  return r;
}

KappaMode kappa_mode_from_string(const std::string& s) {
  if (s == "snr") return KappaMode::Snr;
  if (s == "rt60") return KappaMode::Rt60;
  throw ConfigError("kappa sweep mode must be 'snr' or 'rt60'");
}

void to_json(nlohmann::json& j, const KappaCurve& c) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : c.points)
    pts.push_back({{"condition", p.condition}, {"mean_kappa", p.mean_kappa}, {"rms_deg", p.rms_deg}, {"frames", p.frames}});
  j = {{"mode", c.mode == KappaMode::Snr ? "snr" : "rt60"}, {"fixed", c.fixed}, {"points", pts}};
}

KappaCurve kappa_analysis(const Encoder& encoder, const SceneConfig& base, const LagGrid& grid, KappaMode mode,
                          double fixed, const std::vector<double>& values, int scenes, std::uint64_t seed,
                          int threads) {
  if (values.empty()) throw ArgumentError("kappa sweep needs at least one point");
  if (scenes < 1) throw ArgumentError("kappa sweep needs at least one scene");
  KappaCurve curve;
  curve.mode = mode;
  curve.fixed = fixed;
  const std::size_t S = static_cast<std::size_t>(scenes), V = values.size();
  // kappa and error per (point, scene), collected in parallel.
  std::vector<std::vector<double>> kap(V * S), err(V * S);
  std::atomic<std::size_t> cursor{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&]() {
    for (;;) {
      const std::size_t s = cursor.fetch_add(1);
      if (s >= S) return;
      try {
        std::unique_ptr<MicSignals> clean;
        for (std::size_t v = 0; v < V; ++v) {
          SceneConfig cfg = base;
          if (mode == KappaMode::Snr) {
            cfg.rt60 = {fixed, fixed};
            cfg.snr_db = {values[v], values[v]};
          } else {
            cfg.rt60 = {values[v], values[v]};
            cfg.snr_db = {fixed, fixed};
          }
          const AcousticScene scene = sample_scene(cfg, seed + s);
          // The SNR sweep reuses one reverberant render per scene.
          if (mode == KappaMode::Rt60 || !clean) clean = std::make_unique<MicSignals>(render_ism(scene));
          const MicSignals sig = add_noise(*clean, scene);
          SceneData d;
          d.record.array = scene.array;
          d.record.mask = sig.mask;
          d.record.doa = sig.doa;
          d.features = scene_features(sig, scene.array, grid, scene.frames);
          const PreparedClip clip = prepare_clip(d, encoder.config(), 8.0);
          const SceneEval e = encode_clip(encoder, clip, clip.metadata);
          auto& k = kap[v * S + s];
          auto& r = err[v * S + s];
          for (std::size_t t = 0; t < e.mask.size(); ++t)
            if (e.mask[t] > 0.0) {
              k.push_back(e.kappa[t]);
              r.push_back(e.error_deg[t]);
            }
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        cursor = S;
        return;
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n = threads > 0 ? static_cast<unsigned>(threads) : hw;
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < std::min<std::size_t>(n, S); ++i) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  for (std::size_t v = 0; v < V; ++v) {
    KappaPoint p;
    p.condition = values[v];
    double ks = 0.0, es = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      for (double k : kap[v * S + s]) ks += k;
      for (double e : err[v * S + s]) es += e * e;
      p.frames += kap[v * S + s].size();
    }
    if (p.frames > 0) {
      p.mean_kappa = ks / static_cast<double>(p.frames);
      p.rms_deg = std::sqrt(es / static_cast<double>(p.frames));
    }
    curve.points.push_back(p);
  }
  return curve;
}

void to_json(nlohmann::json& j, const ComplexityReport& c) {
  j = {{"params", c.params},
       {"macs_per_clip", c.macs_per_clip},
       {"clip_frames", c.clip_frames},
       {"macs_per_frame", c.macs_per_frame},
       {"probe_seconds", c.probe_seconds},
       {"wall_seconds", c.wall_seconds},
       {"rtf", c.rtf}};
}

ComplexityReport complexity_report(const Encoder& encoder, const MicArray& array, const LagGrid& grid,
                                   const StftConfig& frames, double probe_seconds, int chunk_frames,
                                   std::uint64_t seed) {
  if (!(probe_seconds > 0.0) || chunk_frames < 1) throw ArgumentError("probe duration and chunk must be positive");
  ComplexityReport r;
  r.params = encoder.param_count();
  const auto pairs = enumerate_pairs(array);
  const auto meta = pair_metadata(array);
  r.clip_frames = static_cast<std::size_t>(chunk_frames);
  r.macs_per_clip = Encoder::macs(encoder.config(), pairs.size(), r.clip_frames);
  r.macs_per_frame = static_cast<double>(r.macs_per_clip) / static_cast<double>(r.clip_frames);

  const double fs = array.sample_rate();
  const auto total = std::max<std::size_t>(static_cast<std::size_t>(probe_seconds * fs), static_cast<std::size_t>(frames.window));
  const std::size_t chunk_len = static_cast<std::size_t>(chunk_frames - 1) * frames.hop + frames.window;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::size_t hops = 0;
  double wall = 0.0;
  for (std::size_t start = 0; start + static_cast<std::size_t>(frames.window) <= total;) {
    const std::size_t len = std::min(chunk_len, total - start);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(array.size()), static_cast<Eigen::Index>(len));
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
    const auto t0 = Clock::now();
    const GccFeatures f = extract_gcc(x, pairs, grid, frames, fs);
    (void)encoder.forward(f.values, meta);
    wall += seconds_since(t0);
    hops += f.frames();
    start += f.frames() * static_cast<std::size_t>(frames.hop);
  }
  r.probe_seconds = static_cast<double>(total) / fs;
  r.wall_seconds = wall;
  r.rtf = (wall / static_cast<double>(hops)) / (frames.hop / fs);
  return r;
}

}  // namespace physdoa
