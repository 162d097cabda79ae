#include "physdoa/sim.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <random>

#include <fftw3.h>
#include <nlohmann/json.hpp>

#include "physdoa/wav.hpp"

namespace physdoa {

namespace {

std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// FFT-based linear convolution for one transform size.
class FftConvolver {
 public:
  explicit FftConvolver(std::size_t n) : n_(n) {
    buf_ = fftw_alloc_real(n);
    a_ = fftw_alloc_complex(n / 2 + 1);
    b_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(plan_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf_, a_, FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(static_cast<int>(n), a_, buf_, FFTW_ESTIMATE);
  }
  ~FftConvolver() {
    std::lock_guard lock(plan_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
    fftw_free(buf_);
    fftw_free(a_);
    fftw_free(b_);
  }
  FftConvolver(const FftConvolver&) = delete;
  FftConvolver& operator=(const FftConvolver&) = delete;

  std::size_t size() const { return n_; }

  /// Stores the spectrum of x (zero padded) as the "signal" operand.
  void set_signal(const double* x, std::size_t len) {
    std::fill(buf_, buf_ + n_, 0.0);
    std::copy_n(x, std::min(len, n_), buf_);
    fftw_execute_dft_r2c(fwd_, buf_, b_);
  }

  /// Convolves the stored signal with h and adds the result to out[offset...].
  void convolve_add(const std::vector<double>& h, double* out, std::size_t out_len, std::size_t offset) {
    std::fill(buf_, buf_ + n_, 0.0);
    std::copy_n(h.data(), std::min(h.size(), n_), buf_);
    fftw_execute_dft_r2c(fwd_, buf_, a_);
    for (std::size_t k = 0; k < n_ / 2 + 1; ++k) {
      const double re = a_[k][0] * b_[k][0] - a_[k][1] * b_[k][1];
      const double im = a_[k][0] * b_[k][1] + a_[k][1] * b_[k][0];
      a_[k][0] = re;
      a_[k][1] = im;
    }
    fftw_execute_dft_c2r(inv_, a_, buf_);
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_ && offset + i < out_len; ++i) out[offset + i] += buf_[i] * scale;
  }

 private:
  std::size_t n_;
  double* buf_;
  fftw_complex* a_;
  fftw_complex* b_;
  fftw_plan fwd_;
  fftw_plan inv_;
};

double uniform(std::mt19937_64& rng, const Range& r) {
  if (r.min == r.max) return r.min;
  return std::uniform_real_distribution<double>(r.min, r.max)(rng);
}

// Samples belonging to at least one active frame.
std::vector<char> active_samples(const std::vector<double>& mask, const StftConfig& frames, std::size_t length) {
  std::vector<char> active(length, 0);
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t] < 0.5) continue;
    const std::size_t s = t * static_cast<std::size_t>(frames.hop);
    for (std::size_t n = s; n < std::min(length, s + static_cast<std::size_t>(frames.window)); ++n) active[n] = 1;
  }
  return active;
}

}  // namespace

std::string to_string(NoiseMode m) { return m == NoiseMode::AuralizedAwgn ? "auralized_awgn" : "directional_noise"; }

NoiseMode noise_mode_from_string(const std::string& s) {
  if (s == "auralized_awgn" || s == "auralized" || s == "awgn") return NoiseMode::AuralizedAwgn;
  if (s == "directional_noise" || s == "directional") return NoiseMode::Directional;
  throw ConfigError("unknown noise mode '" + s + "'");
}

void SceneConfig::validate() const {
  for (const Range* r : {&room_x, &room_y, &room_z, &rt60, &snr_db, &oscillation_amp, &array_height})
    if (!r->valid()) throw ConfigError("range with min > max in scene config");
  if (oscillations_min > oscillations_max || oscillations_min < 0) throw ConfigError("bad oscillation range");
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
  if (!(rt60.min > 0.0)) throw ConfigError("rt60 must be positive");
  if (!(segment_s > 0.0)) throw ConfigError("segment length must be positive");
  const double extent = array.aperture();
  // The source distance constraint is enforced by rejection sampling.
  const double need = 2.0 * wall_margin + 2.0 * array_offset + extent;
  if (room_x.min < need || room_y.min < need)
    throw ConfigError("room too small to contain the array and its margins");
  if (room_z.min < 2.0 * wall_margin + extent || array_height.min < wall_margin + extent / 2.0 ||
      array_height.max > room_z.min - wall_margin - extent / 2.0)
    throw ConfigError("room height cannot contain the array with the configured margins");
}

Vec3 Trajectory::position(double t) const {
  const double s = duration > 0.0 ? std::clamp(t / duration, 0.0, 1.0) : 0.0;
  Vec3 p = start + (end - start) * s;
  for (int a = 0; a < 3; ++a) p[a] += amplitude[a] * std::sin(2.0 * kPi * oscillations[a] * s);
  for (int a = 0; a < 3; ++a) p[a] = std::clamp(p[a], margin, room[a] - margin);
  return p;
}

std::vector<Vec3> Trajectory::sample(const std::vector<double>& times) const {
  std::vector<Vec3> out;
  out.reserve(times.size());
  for (double t : times) out.push_back(position(t));
  return out;
}

double Trajectory::max_speed(std::size_t steps) const {
  const double dt = duration / static_cast<double>(steps);
  double best = 0.0;
  Vec3 prev = position(0.0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const Vec3 p = position(dt * static_cast<double>(k));
    best = std::max(best, (p - prev).norm() / dt);
    prev = p;
  }
  return best;
}

std::vector<Vec3> AcousticScene::mic_positions() const {
  std::vector<Vec3> out;
  for (const auto& p : array.positions()) out.push_back(p + array_center);
  return out;
}

Vec3 AcousticScene::array_centroid() const { return array.centroid() + array_center; }

std::vector<double> generate_excitation(const ExcitationConfig& cfg, std::size_t length, double fs,
                                        std::uint64_t seed) {
  if (!cfg.wav_path.empty()) {
    const Audio a = read_wav(cfg.wav_path);
    if (std::abs(a.sample_rate - fs) > 0.5) throw ConfigError("excitation WAV sample rate mismatch");
    if (static_cast<std::size_t>(a.samples.cols()) < length)
      throw ConfigError("excitation WAV shorter than the scene duration");
    std::vector<double> x(length);
    for (std::size_t n = 0; n < length; ++n) x[n] = a.samples(0, static_cast<Eigen::Index>(n));
    return x;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  // Paul Kellet's pink filter.
  double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
  std::vector<double> x(length);
  for (std::size_t n = 0; n < length; ++n) {
    const double w = normal(rng);
    b0 = 0.99886 * b0 + w * 0.0555179;
    b1 = 0.99332 * b1 + w * 0.0750759;
    b2 = 0.96900 * b2 + w * 0.1538520;
    b3 = 0.86650 * b3 + w * 0.3104856;
    b4 = 0.55000 * b4 + w * 0.5329522;
    b5 = -0.7616 * b5 - w * 0.0168980;
    x[n] = (b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362) * 0.11;
    b6 = w * 0.115926;
  }
  // Burst gate with 10 ms raised-cosine ramps, starting active.
  std::vector<double> gate(length, 0.0);
  const auto ramp = static_cast<std::size_t>(0.01 * fs);
  std::size_t pos = 0;
  bool on = true;
  while (pos < length) {
    const auto len = static_cast<std::size_t>(uniform(rng, on ? cfg.burst_s : cfg.gap_s) * fs);
    const std::size_t stop = std::min(length, pos + std::max<std::size_t>(len, 1));
    if (on) {
      for (std::size_t n = pos; n < stop; ++n) {
        const std::size_t a = n - pos, b = stop - 1 - n;
        const std::size_t d = std::min(a, b);
        gate[n] = d >= ramp ? 1.0 : 0.5 - 0.5 * std::cos(kPi * static_cast<double>(d) / static_cast<double>(ramp));
      }
    }
    pos = stop;
    on = !on;
  }
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
  for (std::size_t n = 0; n < length; ++n) {
    const double am = 0.4 + 0.6 * std::abs(std::sin(kPi * cfg.modulation_hz * static_cast<double>(n) / fs + phase));
    x[n] *= gate[n] * am;
  }
  return x;
}

AcousticScene sample_scene(const SceneConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  AcousticScene s;
  s.seed = seed;
  s.room = Vec3(uniform(rng, config.room_x), uniform(rng, config.room_y), uniform(rng, config.room_z));
  s.rt60 = uniform(rng, config.rt60);
  s.snr_db = uniform(rng, config.snr_db);
  s.noise_mode = config.noise_mode;
  s.sample_rate = config.array.sample_rate();
  s.segment_s = config.segment_s;
  s.max_reflection_order = config.max_reflection_order;
  s.activity_threshold_db = config.activity_threshold_db;
  s.frames = config.frames;

  const std::uint64_t geometry_seed = rng();
  s.array = config.geometry_jitter_m > 0.0 ? jitter_positions(config.array, config.geometry_jitter_m, geometry_seed)
                                           : config.array;
  const Vec3 local_centroid = s.array.centroid();
  s.array_center = Vec3(s.room.x() / 2.0 + uniform(rng, {-config.array_offset, config.array_offset}),
                        s.room.y() / 2.0 + uniform(rng, {-config.array_offset, config.array_offset}),
                        uniform(rng, config.array_height)) -
                   local_centroid;
  const Vec3 centroid = s.array_centroid();

  auto interior_point = [&]() {
    return Vec3(uniform(rng, {config.wall_margin, s.room.x() - config.wall_margin}),
                uniform(rng, {config.wall_margin, s.room.y() - config.wall_margin}),
                uniform(rng, {config.wall_margin, s.room.z() - config.wall_margin}));
  };

  Trajectory& tr = s.trajectory;
  tr.duration = config.duration_s;
  tr.room = s.room;
  tr.margin = config.wall_margin;
  bool ok = false;
  for (int attempt = 0; attempt < 1000 && !ok; ++attempt) {
    tr.start = interior_point();
    tr.end = interior_point();
    std::uniform_int_distribution<int> osc(config.oscillations_min, config.oscillations_max);
    for (int a = 0; a < 3; ++a) {
      tr.oscillations[a] = osc(rng);
      tr.amplitude[a] = uniform(rng, config.oscillation_amp);
    }
    ok = true;
    const std::size_t steps = 400;
    for (std::size_t k = 0; k <= steps && ok; ++k) {
      const Vec3 p = tr.position(tr.duration * static_cast<double>(k) / steps);
      if ((p - centroid).norm() < config.min_source_distance) ok = false;
    }
    if (ok && tr.max_speed() > config.v_max) ok = false;
  }
  if (!ok) throw ConfigError("could not place a trajectory satisfying distance and speed constraints");

  for (int attempt = 0; attempt < 1000; ++attempt) {
    s.noise_position = interior_point();
    if ((s.noise_position - centroid).norm() >= config.min_source_distance) break;
  }

  const auto length = static_cast<std::size_t>(std::llround(config.duration_s * s.sample_rate));
  s.excitation = generate_excitation(config.excitation, length, s.sample_rate, rng());
  return s;
}

double reflection_coefficient(const Vec3& room, double rt60) {
  if (!(rt60 > 0.0) || !std::isfinite(rt60)) throw SimulationError("rt60 must be positive and finite");
  const double volume = room.prod();
  const double surface = 2.0 * (room.x() * room.y() + room.x() * room.z() + room.y() * room.z());
  const double alpha = 0.161 * volume / (surface * rt60);
  if (!(alpha > 0.0) || alpha > 1.0)
    throw SimulationError("rt60 " + std::to_string(rt60) + " s is not realizable in this room (absorption " +
                          std::to_string(alpha) + ")");
  const double beta = std::sqrt(1.0 - alpha);
  if (!(beta < 1.0)) throw SimulationError("unstable reflection coefficient");
  return beta;
}

int reflection_order_for(const Vec3& room, double rt60, double c, int cap) {
  const int needed = static_cast<int>(std::ceil(c * rt60 / room.minCoeff()));
  return std::max(0, std::min(needed, cap));
}

std::vector<std::vector<double>> ism_rirs(const Vec3& room, double beta, const Vec3& source,
                                          const std::vector<Vec3>& receivers, double c, double fs,
                                          const IsmOptions& opt) {
  const double max_dist = opt.max_time_s * c;
  std::vector<std::vector<double>> h(receivers.size());
  const int N = opt.max_order;
  std::array<int, 3> span;
  for (int a = 0; a < 3; ++a)
    span[a] = std::min(N, static_cast<int>(std::ceil(max_dist / (2.0 * room[a]))) + 1);

  struct Tap {
    std::size_t rx;
    double delay;
    double gain;
  };
  std::vector<Tap> taps;
  double latest = 0.0;
  for (int lx = -span[0]; lx <= span[0]; ++lx)
    for (int ly = -span[1]; ly <= span[1]; ++ly)
      for (int lz = -span[2]; lz <= span[2]; ++lz)
        for (int ux = 0; ux <= 1; ++ux)
          for (int uy = 0; uy <= 1; ++uy)
            for (int uz = 0; uz <= 1; ++uz) {
              const int order = std::abs(lx - ux) + std::abs(lx) + std::abs(ly - uy) + std::abs(ly) +
                                std::abs(lz - uz) + std::abs(lz);
              if (order > N) continue;
              const Vec3 img((1 - 2 * ux) * source.x() + 2 * lx * room.x(),
                             (1 - 2 * uy) * source.y() + 2 * ly * room.y(),
                             (1 - 2 * uz) * source.z() + 2 * lz * room.z());
              const double g = std::pow(beta, order);
              for (std::size_t r = 0; r < receivers.size(); ++r) {
                const double d = (img - receivers[r]).norm();
                if (d > max_dist) continue;
                const double delay = d / c * fs;
                taps.push_back({r, delay, g / (4.0 * kPi * std::max(d, 1e-3))});
                latest = std::max(latest, delay);
              }
            }
  const auto len = static_cast<std::size_t>(std::floor(latest)) + 2;
  for (auto& v : h) v.assign(len, 0.0);
  for (const auto& t : taps) {
    const auto n = static_cast<std::size_t>(std::floor(t.delay));
    const double f = t.delay - static_cast<double>(n);
    h[t.rx][n] += t.gain * (1.0 - f);
    h[t.rx][n + 1] += t.gain * f;
  }
  return h;
}

std::vector<double> activity_mask(const std::vector<double>& x, const StftConfig& frames, double threshold_db) {
  const std::size_t T = stft_frame_count(x.size(), frames.window, frames.hop);
  std::vector<double> energy(T, 0.0);
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t s = t * static_cast<std::size_t>(frames.hop);
    for (int n = 0; n < frames.window; ++n) energy[t] += x[s + static_cast<std::size_t>(n)] * x[s + static_cast<std::size_t>(n)];
  }
  const double peak = T ? *std::max_element(energy.begin(), energy.end()) : 0.0;
  std::vector<double> mask(T, 0.0);
  if (peak <= 0.0) return mask;
  const double thr = peak * std::pow(10.0, threshold_db / 10.0);
  for (std::size_t t = 0; t < T; ++t) mask[t] = energy[t] > thr ? 1.0 : 0.0;
  return mask;
}

namespace {

FftConvolver& convolver_for(std::map<std::size_t, std::unique_ptr<FftConvolver>>& cache, std::size_t n) {
  auto& slot = cache[n];
  if (!slot) slot = std::make_unique<FftConvolver>(n);
  return *slot;
}

std::vector<Vec3> frame_doa(const AcousticScene& scene, const std::vector<double>& times) {
  const Vec3 centroid = scene.array_centroid();
  std::vector<Vec3> doa;
  for (const Vec3& p : scene.trajectory.sample(times)) doa.push_back((p - centroid).normalized());
  return doa;
}

}  // namespace

MicSignals render_ism(const AcousticScene& scene) {
  const double fs = scene.sample_rate;
  const double c = scene.array.speed_of_sound();
  const std::size_t L = scene.excitation.size();
  const auto mics = scene.mic_positions();
  const std::size_t M = mics.size();

  MicSignals out;
  out.sample_rate = fs;
  out.samples = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(L));
  const std::size_t T = stft_frame_count(L, scene.frames.window, scene.frames.hop);
  out.frame_times.resize(T);
  for (std::size_t t = 0; t < T; ++t)
    out.frame_times[t] = (static_cast<double>(t) * scene.frames.hop + scene.frames.window / 2.0) / fs;
  out.doa = frame_doa(scene, out.frame_times);
  out.mask = activity_mask(scene.excitation, scene.frames, scene.activity_threshold_db);

  const bool silent = std::all_of(scene.excitation.begin(), scene.excitation.end(), [](double v) { return v == 0.0; });
  if (silent || L == 0) return out;

  IsmOptions opt;
  opt.max_order = scene.max_reflection_order;
  double beta = 0.0;
  if (opt.max_order > 0) {
    beta = reflection_coefficient(scene.room, scene.rt60);
    opt.max_order = reflection_order_for(scene.room, scene.rt60, c, scene.max_reflection_order);
  }
  opt.max_time_s = scene.rt60 + scene.room.norm() / c;

  const auto seg = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(scene.segment_s * fs)));
  std::map<std::size_t, std::unique_ptr<FftConvolver>> cache;
  std::vector<std::vector<double>> acc(M, std::vector<double>(L, 0.0));
  for (std::size_t start = 0; start < L; start += seg) {
    const std::size_t len = std::min(seg, L - start);
    const bool active = std::any_of(scene.excitation.begin() + static_cast<std::ptrdiff_t>(start),
                                    scene.excitation.begin() + static_cast<std::ptrdiff_t>(start + len),
                                    [](double v) { return v != 0.0; });
    if (!active) continue;
    const double t_mid = (static_cast<double>(start) + len / 2.0) / fs;
    const Vec3 src = scene.trajectory.position(t_mid);
    const auto rirs = ism_rirs(scene.room, beta, src, mics, c, fs, opt);
    const std::size_t n = next_pow2(len + rirs[0].size() - 1);
    auto& conv = convolver_for(cache, n);
    conv.set_signal(scene.excitation.data() + start, len);
    for (std::size_t m = 0; m < M; ++m) conv.convolve_add(rirs[m], acc[m].data(), L, start);
  }
  for (std::size_t m = 0; m < M; ++m)
    out.samples.row(static_cast<Eigen::Index>(m)) = Eigen::Map<const Eigen::RowVectorXd>(acc[m].data(), static_cast<Eigen::Index>(L));
  return out;
}

MicSignals add_noise(const MicSignals& clean, const AcousticScene& scene) {
  if (std::isnan(scene.snr_db)) throw ArgumentError("snr must not be NaN");
  if (std::isinf(scene.snr_db) && scene.snr_db > 0) return clean;
  MicSignals out = clean;
  const auto M = clean.samples.rows();
  const auto L = static_cast<std::size_t>(clean.samples.cols());
  const auto active = active_samples(clean.mask, scene.frames, L);
  const double gain = std::pow(10.0, -scene.snr_db / 10.0);
  std::mt19937_64 rng(scene.seed ^ 0x9E3779B97F4A7C15ull);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto active_power = [&](const Eigen::MatrixXd& x, Eigen::Index ch) {
    double p = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < L; ++i)
      if (active[i]) {
        p += x(ch, static_cast<Eigen::Index>(i)) * x(ch, static_cast<Eigen::Index>(i));
        ++n;
      }
    return n ? p / static_cast<double>(n) : 0.0;
  };

  if (scene.noise_mode == NoiseMode::AuralizedAwgn) {
    for (Eigen::Index ch = 0; ch < M; ++ch) {
      const double p = active_power(clean.samples, ch);
      if (!(p > 0.0)) throw SimulationError("clean signal has zero power in its active region");
      const double sd = std::sqrt(p * gain);
      for (std::size_t i = 0; i < L; ++i) out.samples(ch, static_cast<Eigen::Index>(i)) += sd * normal(rng);
    }
    return out;
  }

  // Directional: static Gaussian noise source rendered through the room.
  std::vector<double> noise(L);
  for (auto& v : noise) v = normal(rng);
  const double c = scene.array.speed_of_sound();
  IsmOptions opt;
  double beta = 0.0;
  opt.max_order = scene.max_reflection_order;
  if (opt.max_order > 0) {
    beta = reflection_coefficient(scene.room, scene.rt60);
    opt.max_order = reflection_order_for(scene.room, scene.rt60, c, scene.max_reflection_order);
  }
  opt.max_time_s = scene.rt60 + scene.room.norm() / c;
  const auto rirs = ism_rirs(scene.room, beta, scene.noise_position, scene.mic_positions(), c, scene.sample_rate, opt);
  Eigen::MatrixXd rendered = Eigen::MatrixXd::Zero(M, static_cast<Eigen::Index>(L));
  FftConvolver conv(next_pow2(L + rirs[0].size() - 1));
  conv.set_signal(noise.data(), L);
  for (Eigen::Index ch = 0; ch < M; ++ch) {
    Eigen::VectorXd row = rendered.row(ch);
    conv.convolve_add(rirs[static_cast<std::size_t>(ch)], row.data(), L, 0);
    rendered.row(ch) = row;
  }
  double p_clean = 0.0, p_noise = 0.0;
  for (Eigen::Index ch = 0; ch < M; ++ch) {
    p_clean += active_power(clean.samples, ch);
    p_noise += active_power(rendered, ch);
  }
  if (!(p_clean > 0.0)) throw SimulationError("clean signal has zero power in its active region");
  const double scale = std::sqrt(p_clean * gain / p_noise);
  out.samples += scale * rendered;
  return out;
}

MicSignals simulate(const AcousticScene& scene) { return add_noise(render_ism(scene), scene); }

nlohmann::json scene_to_json(const AcousticScene& s, const MicSignals& sig) {
  nlohmann::json j;
  j["seed"] = s.seed;
  j["room"] = {s.room.x(), s.room.y(), s.room.z()};
  j["rt60"] = s.rt60;
  j["snr_db"] = s.snr_db;
  j["noise_mode"] = to_string(s.noise_mode);
  j["noise_position"] = {s.noise_position.x(), s.noise_position.y(), s.noise_position.z()};
  j["geometry"] = s.array;
  j["array_center"] = {s.array_center.x(), s.array_center.y(), s.array_center.z()};
  j["sample_rate"] = s.sample_rate;
  j["frame_window"] = s.frames.window;
  j["frame_hop"] = s.frames.hop;
  j["segment_s"] = s.segment_s;
  j["max_reflection_order"] = s.max_reflection_order;
  const auto& tr = s.trajectory;
  j["trajectory"] = {{"start", {tr.start.x(), tr.start.y(), tr.start.z()}},
                     {"end", {tr.end.x(), tr.end.y(), tr.end.z()}},
                     {"oscillations", tr.oscillations},
                     {"amplitude", {tr.amplitude.x(), tr.amplitude.y(), tr.amplitude.z()}},
                     {"duration", tr.duration}};
  nlohmann::json positions = nlohmann::json::array(), doa = nlohmann::json::array();
  for (const auto& p : tr.sample(sig.frame_times)) positions.push_back({p.x(), p.y(), p.z()});
  for (const auto& d : sig.doa) doa.push_back({d.x(), d.y(), d.z()});
  j["trajectory"]["positions"] = positions;
  j["doa"] = doa;
  j["mask"] = sig.mask;
  j["frame_times"] = sig.frame_times;
  return j;
}

}  // namespace physdoa
