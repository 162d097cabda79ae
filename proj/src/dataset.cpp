#include "physdoa/dataset.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "physdoa/wav.hpp"

namespace physdoa {

namespace {

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw IoError("cannot open " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in " + p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  out << j.dump(1) << '\n';
}

Vec3 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

std::string scene_id(const std::string& split, int index) {
  std::ostringstream s;
  s << split << '_' << std::setw(5) << std::setfill('0') << index;
  return s.str();
}

}  // namespace

const std::vector<std::string>& Manifest::split(const std::string& name) const {
  auto it = splits.find(name);
  if (it == splits.end()) throw ConfigError("dataset has no split '" + name + "'");
  return it->second;
}

Manifest load_manifest(const fs::path& dir) {
  const nlohmann::json j = read_json(dir / "manifest.json");
  Manifest m;
  m.root = dir;
  try {
    if (j.at("version").get<int>() != 1) throw IoError("unsupported manifest version");
    m.geometry = load_geometry(dir / j.at("geometry").get<std::string>());
    m.experiment = experiment_from_string(j.at("experiment").get<std::string>());
    m.lags = j.at("features").at("lags").get<int>();
    m.tau_max = j.at("features").at("tau_max").get<double>();
    m.frames.window = j.at("features").at("window").get<int>();
    m.frames.hop = j.at("features").at("hop").get<int>();
    m.scene_config = j.at("scene_config");
    m.splits = j.at("splits").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  return m;
}

void save_manifest(const Manifest& m) {
  fs::create_directories(m.root);
  save_geometry(m.geometry, m.root / "geometry.json");
  nlohmann::json j = {{"version", 1},
                      {"geometry", "geometry.json"},
                      {"experiment", to_string(m.experiment)},
                      {"features", {{"lags", m.lags}, {"tau_max", m.tau_max}, {"window", m.frames.window}, {"hop", m.frames.hop}}},
                      {"scene_config", m.scene_config},
                      {"splits", m.splits}};
  write_json(m.root / "manifest.json", j);
}

SceneRecord load_scene_record(const fs::path& dir) {
  const nlohmann::json j = read_json(dir / "scene.json");
  SceneRecord r;
  r.id = dir.filename().string();
  try {
    r.seed = j.at("seed").get<std::uint64_t>();
    r.rt60 = j.at("rt60").get<double>();
    r.snr_db = j.at("snr_db").is_null() ? std::numeric_limits<double>::infinity() : j.at("snr_db").get<double>();
    r.array = mic_array_from_json(j.at("geometry"));
    r.mask = j.at("mask").get<std::vector<double>>();
    r.frame_times = j.at("frame_times").get<std::vector<double>>();
    for (const auto& d : j.at("doa")) r.doa.push_back(vec_from(d));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar in " + dir.string() + ": " + e.what());
  }
  if (r.mask.size() != r.doa.size() || r.mask.size() != r.frame_times.size())
    throw IoError("sidecar arrays disagree in length in " + dir.string());
  return r;
}

SceneData load_scene(const Manifest& m, const std::string& id) {
  SceneData s;
  const fs::path dir = m.root / id;
  s.record = load_scene_record(dir);
  s.features = load_feature_cache(dir / "features.gcc");
  if (s.features.frames() != s.record.mask.size()) throw IoError("feature cache and sidecar disagree in " + id);
  if (s.features.lags() != static_cast<std::size_t>(m.lags)) throw IoError("feature cache lag count mismatch in " + id);
  if (s.features.pairs() != s.record.array.size() * (s.record.array.size() - 1) / 2)
    throw IoError("feature cache pair count mismatch in " + id);
  return s;
}

double dataset_tau_max(const SceneConfig& cfg) {
  const double jitter = 6.0 * cfg.geometry_jitter_m * cfg.array.sample_rate() / cfg.array.speed_of_sound();
  return max_delay_samples(cfg.array) + jitter;
}

GccFeatures scene_features(const MicSignals& signals, const MicArray& array, const LagGrid& grid,
                           const StftConfig& frames) {
  return extract_gcc(signals.samples, enumerate_pairs(array), grid, frames, signals.sample_rate);
}

void write_scene(const fs::path& dir, const AcousticScene& scene, const MicSignals& signals,
                 const GccFeatures& features) {
  fs::create_directories(dir);
  write_wav(dir / "audio.wav", Audio{signals.samples, signals.sample_rate}, WavFormat::Float32);
  nlohmann::json j = scene_to_json(scene, signals);
  if (std::isinf(scene.snr_db)) j["snr_db"] = nullptr;
  write_json(dir / "scene.json", j);
  save_feature_cache(features, dir / "features.gcc");
}

Manifest simulate_dataset(const DatasetConfig& cfg, const fs::path& out_dir,
                          const std::function<void(std::size_t, std::size_t)>& progress) {
  cfg.scene.validate();
  Manifest m;
  m.root = out_dir;
  m.geometry = cfg.scene.array;
  m.experiment = cfg.experiment;
  m.lags = cfg.lags;
  m.tau_max = dataset_tau_max(cfg.scene);
  m.frames = cfg.scene.frames;
  m.scene_config = cfg.scene;
  const LagGrid grid = m.lag_grid();

  struct Job {
    std::string id;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  std::uint64_t next = 0;
  for (const auto& [name, count] : {std::pair{"train", cfg.train}, std::pair{"val", cfg.val}, std::pair{"test", cfg.test}}) {
    auto& ids = m.splits[name];
    for (int i = 0; i < count; ++i) {
      ids.push_back(scene_id(name, i));
      // Scene seeds are distinct across splits and datasets with different base seeds.
      jobs.push_back({ids.back(), cfg.seed * 1000003ull + next++});
    }
  }
  fs::create_directories(out_dir);

  std::atomic<std::size_t> cursor{0}, done{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&]() {
    for (;;) {
      const std::size_t k = cursor.fetch_add(1);
      if (k >= jobs.size()) return;
      try {
        const AcousticScene scene = sample_scene(cfg.scene, jobs[k].seed);
        const MicSignals sig = simulate(scene);
        write_scene(out_dir / jobs[k].id, scene, sig, scene_features(sig, scene.array, grid, scene.frames));
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        cursor = jobs.size();
        return;
      }
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(mu);
        progress(d, jobs.size());
      }
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : hw;
  {
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < std::min<std::size_t>(n, jobs.size()); ++i) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);
  save_manifest(m);
  return m;
}

std::vector<PairMetadata> pair_metadata(const MicArray& array) {
  std::vector<PairMetadata> out;
  for (const auto& p : enumerate_pairs(array)) out.push_back(p.metadata());
  return out;
}

PreparedClip prepare_clip(const SceneData& s, const EncoderConfig& enc, double lambda, double eps) {
  PreparedClip c;
  c.id = s.record.id;
  c.g = s.features.values;
  c.x = c.g;
  c.array = s.record.array;
  c.metadata = pair_metadata(c.array);
  c.rt60 = s.record.rt60;
  c.snr_db = s.record.snr_db;
  const std::size_t Tl = enc.latent_frames(s.features.frames());
  c.p_in = latent_input_distribution(c.g, Tl, lambda, eps);
  c.mask = interpolate_time_axis(s.record.mask, Tl);
  for (auto& v : c.mask) v = std::clamp(v, 0.0, 1.0);
  c.truth = interpolate_directions(s.record.doa, Tl);
  return c;
}

std::vector<double> binary_mask(const std::vector<double>& mask) {
  std::vector<double> out(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] >= 0.5 ? 1.0 : 0.0;
  return out;
}

}  // namespace physdoa
