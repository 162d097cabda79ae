#include "physdoa/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <nlohmann/json.hpp>

namespace physdoa {

namespace pt = boost::property_tree;

Ini Ini::parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  Ini ini;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      ini.values_[section] = body.data();
      continue;
    }
    for (const auto& [key, value] : body) ini.values_[section + "." + key] = value.data();
  }
  return ini;
}

Ini Ini::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void Ini::set(const std::string& key, const std::string& value) { values_[key] = value; }

std::optional<std::string> Ini::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return boost::algorithm::trim_copy(it->second);
}

std::string Ini::str(const std::string& key, const std::string& fallback) const {
  return get(key).value_or(fallback);
}

namespace {

double parse_number(const std::string& key, std::string s) {
  boost::algorithm::to_lower(s);
  boost::algorithm::trim(s);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' is not a number: " + s);
  }
}

}  // namespace

double Ini::number(const std::string& key, double fallback) const {
  const auto v = get(key);
  return v ? parse_number(key, *v) : fallback;
}

long long Ini::integer(const std::string& key, long long fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long r = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "' is not an integer: " + *v);
  }
}

bool Ini::boolean(const std::string& key, bool fallback) const {
  auto v = get(key);
  if (!v) return fallback;
  std::string s = boost::algorithm::to_lower_copy(*v);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw ConfigError("'" + key + "' is not a boolean: " + *v);
}

// "a, b" or a single value for a degenerate range.
Range Ini::range(const std::string& key, Range fallback) const {
  const auto v = get(key);
  if (!v) return fallback;
  std::vector<std::string> parts;
  boost::algorithm::split(parts, *v, boost::algorithm::is_any_of(", "), boost::algorithm::token_compress_on);
  parts.erase(std::remove(parts.begin(), parts.end(), std::string()), parts.end());
  if (parts.size() == 1) {
    const double x = parse_number(key, parts[0]);
    return {x, x};
  }
  if (parts.size() != 2) throw ConfigError("'" + key + "' must be 'min, max'");
  Range r{parse_number(key, parts[0]), parse_number(key, parts[1])};
  if (!r.valid()) throw ConfigError("'" + key + "' has min > max");
  return r;
}

void Ini::check_consumed(const std::vector<std::string>& sections) const {
  for (const auto& [key, value] : values_) {
    const auto dot = key.find('.');
    const std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
    const bool known = std::find(sections.begin(), sections.end(), section) != sections.end();
    if (!used_.count(key) && known) throw ConfigError("unknown config key '" + key + "'");
  }
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Exp1: return "exp1";
    case Experiment::Exp2: return "exp2";
    case Experiment::Exp3: return "exp3";
  }
  return "exp1";
}

Experiment experiment_from_string(const std::string& s) {
  if (s == "exp1") return Experiment::Exp1;
  if (s == "exp2") return Experiment::Exp2;
  if (s == "exp3") return Experiment::Exp3;
  throw ConfigError("unknown experiment '" + s + "' (expected exp1, exp2 or exp3)");
}

DatasetConfig dataset_config_from_ini(const Ini& ini) {
  DatasetConfig d;
  d.experiment = experiment_from_string(ini.str("data.experiment", "exp1"));
  d.train = static_cast<int>(ini.integer("data.train", d.train));
  d.val = static_cast<int>(ini.integer("data.val", d.val));
  d.test = static_cast<int>(ini.integer("data.test", d.test));
  d.seed = static_cast<std::uint64_t>(ini.integer("data.seed", static_cast<long long>(d.seed)));
  d.threads = static_cast<int>(ini.integer("data.threads", 0));
  if (d.train < 0 || d.val < 0 || d.test < 0) throw ConfigError("scene counts must be nonnegative");

  SceneConfig& s = d.scene;
  const double c = ini.number("scene.speed_of_sound", kDefaultSpeedOfSound);
  const double fs = ini.number("scene.sample_rate", kDefaultSampleRate);
  if (auto geo = ini.get("scene.geometry"))
    s.array = load_geometry(*geo);
  else
    s.array = icosahedral_array(ini.number("scene.array_radius", 0.05), c, fs);
  s.room_x = ini.range("scene.room_x", s.room_x);
  s.room_y = ini.range("scene.room_y", s.room_y);
  s.room_z = ini.range("scene.room_z", s.room_z);
  s.rt60 = ini.range("scene.rt60", s.rt60);
  s.snr_db = ini.range("scene.snr_db", s.snr_db);
  const Range osc = ini.range("scene.oscillations", {static_cast<double>(s.oscillations_min),
                                                     static_cast<double>(s.oscillations_max)});
  s.oscillations_min = static_cast<int>(osc.min);
  s.oscillations_max = static_cast<int>(osc.max);
  s.oscillation_amp = ini.range("scene.oscillation_amp", s.oscillation_amp);
  s.duration_s = ini.number("scene.duration_s", s.duration_s);
  s.wall_margin = ini.number("scene.wall_margin", s.wall_margin);
  s.min_source_distance = ini.number("scene.min_source_distance", s.min_source_distance);
  s.array_offset = ini.number("scene.array_offset", s.array_offset);
  s.array_height = ini.range("scene.array_height", s.array_height);
  s.v_max = ini.number("scene.v_max", s.v_max);
  s.noise_mode = d.experiment == Experiment::Exp2 ? NoiseMode::Directional : NoiseMode::AuralizedAwgn;
  s.geometry_jitter_m = d.experiment == Experiment::Exp3 ? 0.01 : 0.0;
  if (auto m = ini.get("scene.noise_mode")) s.noise_mode = noise_mode_from_string(*m);
  s.geometry_jitter_m = ini.number("scene.geometry_jitter_m", s.geometry_jitter_m);
  s.segment_s = ini.number("scene.segment_s", s.segment_s);
  s.max_reflection_order = static_cast<int>(ini.integer("scene.max_reflection_order", s.max_reflection_order));
  s.activity_threshold_db = ini.number("scene.activity_threshold_db", s.activity_threshold_db);

  s.frames.window = static_cast<int>(ini.integer("features.window", s.frames.window));
  s.frames.hop = static_cast<int>(ini.integer("features.hop", s.frames.hop));
  d.lags = static_cast<int>(ini.integer("features.lags", d.lags));
  if (s.frames.hop <= 0 || s.frames.window <= 0) throw ConfigError("window and hop must be positive");
  if (d.lags < 2) throw ConfigError("at least two lag bins are required");

  s.excitation.wav_path = ini.str("excitation.wav", "");
  s.excitation.burst_s = ini.range("excitation.burst_s", s.excitation.burst_s);
  s.excitation.gap_s = ini.range("excitation.gap_s", s.excitation.gap_s);
  s.excitation.modulation_hz = ini.number("excitation.modulation_hz", s.excitation.modulation_hz);

  ini.check_consumed({"scene", "excitation", "features", "data"});
  s.validate();
  return d;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr_end > 0.0) || lr_start < lr_end) throw ConfigError("learning rates must satisfy lr_start >= lr_end > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(feature_eps > 0.0)) throw ConfigError("feature eps must be positive");
  if (!(sigma_init_bins > 0.0)) throw ConfigError("sigma init must be positive");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw ConfigError("warm-up fraction must lie in [0, 1]");
  encoder.validate();
}

double TrainConfig::learning_rate(int epoch) const {
  if (epochs == 1) return lr_start;
  return lr_start * std::pow(lr_end / lr_start, static_cast<double>(epoch) / (epochs - 1));
}

TrainConfig train_config_from_ini(const Ini& ini) {
  TrainConfig t;
  t.epochs = static_cast<int>(ini.integer("train.epochs", t.epochs));
  t.lr_start = ini.number("train.lr_start", t.lr_start);
  t.lr_end = ini.number("train.lr_end", t.lr_end);
  t.batch_size = static_cast<int>(ini.integer("train.batch_size", t.batch_size));
  t.lambda = ini.number("train.lambda", t.lambda);
  t.feature_eps = ini.number("train.feature_eps", t.feature_eps);
  t.seed = static_cast<std::uint64_t>(ini.integer("train.seed", 0));
  t.experiment = experiment_from_string(ini.str("train.experiment", "exp1"));
  t.mask_kl = ini.boolean("train.mask_kl", t.mask_kl);
  t.freeze_sigma = ini.boolean("train.freeze_sigma", t.freeze_sigma);
  t.sigma_init_bins = ini.number("train.sigma_init_bins", t.sigma_init_bins);
  t.warmup_fraction = ini.number("train.warmup_fraction", t.warmup_fraction);
  t.max_train_scenes = static_cast<int>(ini.integer("train.max_train_scenes", 0));
  t.max_val_scenes = static_cast<int>(ini.integer("train.max_val_scenes", 0));
  t.keep_epoch_checkpoints = ini.boolean("train.keep_epoch_checkpoints", false);

  t.preset = ini.str("encoder.preset", t.preset);
  t.encoder = EncoderConfig::preset(t.preset);
  t.encoder.channels = static_cast<int>(ini.integer("encoder.channels", t.encoder.channels));
  t.encoder.hidden = static_cast<int>(ini.integer("encoder.hidden", t.encoder.hidden));
  t.encoder.gru_layers = static_cast<int>(ini.integer("encoder.gru_layers", t.encoder.gru_layers));
  t.encoder.mlp_width = static_cast<int>(ini.integer("encoder.mlp_width", t.encoder.mlp_width));
  t.encoder.head_width = static_cast<int>(ini.integer("encoder.head_width", t.encoder.head_width));
  t.encoder.metadata_scale = ini.number("encoder.metadata_scale", t.encoder.metadata_scale);
  t.encoder.input_scale = ini.number("encoder.input_scale", t.encoder.input_scale);
  t.fit_input_scale = ini.boolean("train.fit_input_scale", t.fit_input_scale);
  ini.check_consumed({"train", "encoder"});
  t.validate();
  return t;
}

EvalConfig eval_config_from_ini(const Ini& ini) {
  EvalConfig e;
  e.corrupt_percent = ini.number("eval.corrupt_metadata", e.corrupt_percent);
  e.runs = static_cast<int>(ini.integer("eval.runs", e.runs));
  e.split = ini.str("eval.split", e.split);
  ini.check_consumed({"eval"});
  if (e.runs < 1) throw ConfigError("runs must be >= 1");
  if (e.corrupt_percent < 0.0) throw ConfigError("corruption percent must be nonnegative");
  return e;
}

namespace {
nlohmann::json range_json(const Range& r) { return {r.min, r.max}; }
Range range_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }
}  // namespace

void to_json(nlohmann::json& j, const SceneConfig& c) {
  j = {{"geometry", c.array},
       {"room_x", range_json(c.room_x)},
       {"room_y", range_json(c.room_y)},
       {"room_z", range_json(c.room_z)},
       {"rt60", range_json(c.rt60)},
       {"snr_db", range_json(c.snr_db)},
       {"oscillations", {c.oscillations_min, c.oscillations_max}},
       {"oscillation_amp", range_json(c.oscillation_amp)},
       {"duration_s", c.duration_s},
       {"wall_margin", c.wall_margin},
       {"min_source_distance", c.min_source_distance},
       {"array_offset", c.array_offset},
       {"array_height", range_json(c.array_height)},
       {"v_max", c.v_max},
       {"geometry_jitter_m", c.geometry_jitter_m},
       {"noise_mode", to_string(c.noise_mode)},
       {"segment_s", c.segment_s},
       {"max_reflection_order", c.max_reflection_order},
       {"activity_threshold_db", c.activity_threshold_db},
       {"window", c.frames.window},
       {"hop", c.frames.hop},
       {"excitation",
        {{"wav", c.excitation.wav_path},
         {"burst_s", range_json(c.excitation.burst_s)},
         {"gap_s", range_json(c.excitation.gap_s)},
         {"modulation_hz", c.excitation.modulation_hz}}}};
  // JSON has no infinity; an infinite SNR (noise disabled) is stored as null.
  if (std::isinf(c.snr_db.min) || std::isinf(c.snr_db.max)) j["snr_db"] = nullptr;
}

SceneConfig scene_config_from_json(const nlohmann::json& j) {
  SceneConfig c;
  c.array = mic_array_from_json(j.at("geometry"));
  c.room_x = range_from(j.at("room_x"));
  c.room_y = range_from(j.at("room_y"));
  c.room_z = range_from(j.at("room_z"));
  c.rt60 = range_from(j.at("rt60"));
  if (j.at("snr_db").is_null()) {
    const double inf = std::numeric_limits<double>::infinity();
    c.snr_db = {inf, inf};
  } else {
    c.snr_db = range_from(j.at("snr_db"));
  }
  c.oscillations_min = j.at("oscillations").at(0).get<int>();
  c.oscillations_max = j.at("oscillations").at(1).get<int>();
  c.oscillation_amp = range_from(j.at("oscillation_amp"));
  c.duration_s = j.at("duration_s").get<double>();
  c.wall_margin = j.at("wall_margin").get<double>();
  c.min_source_distance = j.at("min_source_distance").get<double>();
  c.array_offset = j.at("array_offset").get<double>();
  c.array_height = range_from(j.at("array_height"));
  c.v_max = j.at("v_max").get<double>();
  c.geometry_jitter_m = j.at("geometry_jitter_m").get<double>();
  c.noise_mode = noise_mode_from_string(j.at("noise_mode").get<std::string>());
  c.segment_s = j.at("segment_s").get<double>();
  c.max_reflection_order = j.at("max_reflection_order").get<int>();
  c.activity_threshold_db = j.at("activity_threshold_db").get<double>();
  c.frames.window = j.at("window").get<int>();
  c.frames.hop = j.at("hop").get<int>();
  const auto& e = j.at("excitation");
  c.excitation.wav_path = e.at("wav").get<std::string>();
  c.excitation.burst_s = range_from(e.at("burst_s"));
  c.excitation.gap_s = range_from(e.at("gap_s"));
  c.excitation.modulation_hz = e.at("modulation_hz").get<double>();
  return c;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"epochs", c.epochs},
       {"lr_start", c.lr_start},
       {"lr_end", c.lr_end},
       {"batch_size", c.batch_size},
       {"lambda", c.lambda},
       {"feature_eps", c.feature_eps},
       {"seed", c.seed},
       {"experiment", to_string(c.experiment)},
       {"preset", c.preset},
       {"encoder", c.encoder},
       {"mask_kl", c.mask_kl},
       {"freeze_sigma", c.freeze_sigma},
       {"sigma_init_bins", c.sigma_init_bins},
       {"warmup_fraction", c.warmup_fraction},
       {"fit_input_scale", c.fit_input_scale}};
}

}  // namespace physdoa
