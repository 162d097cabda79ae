#include "physdoa/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "physdoa/evaluate.hpp"

namespace physdoa {

namespace {

nlohmann::json step_json(const StepLog& s) {
  return {{"step", s.step},       {"epoch", s.epoch},           {"physics", s.loss.physics},
          {"kl", s.loss.kl},      {"beta", s.loss.beta},        {"total", s.loss.total},
          {"sigma", s.sigma},     {"mean_kappa", s.mean_kappa}, {"lr", s.lr},
          {"mask_coverage", s.loss.mask_coverage}};
}

nlohmann::json epoch_json(const EpochSummary& e) {
  return {{"epoch", e.epoch},   {"lr", e.lr},       {"beta", e.beta},
          {"physics", e.physics}, {"kl", e.kl},     {"total", e.total},
          {"sigma", e.sigma},   {"mean_kappa", e.mean_kappa}, {"val_rms_deg", e.val_rms_deg},
          {"seconds", e.seconds}};
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, std::vector<PreparedClip> train, std::vector<PreparedClip> val, LagGrid grid)
    : cfg_(cfg),
      train_(std::move(train)),
      val_(std::move(val)),
      grid_(std::move(grid)),
      encoder_(cfg.encoder, cfg.seed),
      sigma_param_("decoder.sigma_raw", 1, 1),
      rng_(cfg.seed ^ 0xA5A5A5A5ull) {
  cfg_.validate();
  if (train_.empty()) throw TrainingError("no training scenes");
  for (const auto& c : train_) {
    if (c.g.dim2() != grid_.size()) throw ShapeError("training features do not match the lag grid");
    decoders_.emplace_back(c.array, grid_, cfg_.sigma_init_bins);
  }
  sigma_param_.value(0, 0) = static_cast<float>(decoders_.front().sigma_raw());
}

double Trainer::sigma() const { return softplus(sigma_raw()); }

std::string Trainer::rng_state() const {
  std::ostringstream s;
  s << rng_;
  return s.str();
}

StepLog Trainer::step(const std::vector<std::size_t>& batch, int epoch) {
  const BetaSchedule sched = beta_schedule(epoch, cfg_.epochs, cfg_.warmup_fraction);
  ObjectiveOptions opt;
  opt.beta = sched.beta;
  opt.deterministic = sched.deterministic;
  opt.mask_kl = cfg_.mask_kl;
  double mask_total = 0.0, frames_total = 0.0;
  for (std::size_t i : batch) {
    mask_total += std::accumulate(train_[i].mask.begin(), train_[i].mask.end(), 0.0);
    frames_total += static_cast<double>(train_[i].mask.size());
  }
  opt.physics_norm = mask_total > 0.0 ? mask_total : 1.0;
  opt.kl_norm = cfg_.mask_kl ? opt.physics_norm : std::max(frames_total, 1.0);

  encoder_.zero_grad();
  sigma_param_.zero_grad();
  StepLog log;
  log.epoch = epoch;
  log.lr = cfg_.learning_rate(epoch);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> kappas;
  double covered = 0.0;
  for (std::size_t i : batch) {
    const PreparedClip& c = train_[i];
    PhysicsDecoder& dec = decoders_[i];
    dec.set_sigma_raw(sigma_raw());
    dec.set_frozen(cfg_.freeze_sigma);
    Encoder::Cache cache;
    const PosteriorSequence q = encoder_.forward(c.x, c.metadata, &cache);
    std::vector<std::array<double, 2>> u(q.size());
    if (!opt.deterministic)
      for (auto& p : u) p = {unif(rng_), unif(rng_)};
    const ClipObjective obj = clip_objective(q, c.p_in, c.mask, dec, opt, u);
    log.loss.physics += obj.loss.physics;
    log.loss.kl += obj.loss.kl;
    covered += obj.loss.mask_coverage * static_cast<double>(q.size());
    for (const auto& v : q) kappas.push_back(v.kappa);
    if (!std::isfinite(obj.loss.physics) || !std::isfinite(obj.loss.kl)) {
      if (!diag_path_.empty()) {
        const auto [mn, mx] = std::minmax_element(kappas.begin(), kappas.end());
        nlohmann::json d = {{"epoch", epoch},          {"step", adam_.steps()},
                            {"batch", batch},          {"clip", c.id},
                            {"sigma", sigma()},        {"physics", obj.loss.physics},
                            {"kl", obj.loss.kl},       {"kappa_min", *mn},
                            {"kappa_max", *mx},
                            {"kappa_mean", std::accumulate(kappas.begin(), kappas.end(), 0.0) / kappas.size()}};
        std::ofstream(diag_path_) << d.dump(1) << '\n';
      }
      throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", clip " + c.id);
    }
    encoder_.backward(cache, obj.d_mu, obj.d_kappa);
    sigma_param_.grad(0, 0) += static_cast<float>(obj.d_sigma_raw);
  }
  std::vector<nn::Param*> params = encoder_.params();
  if (!cfg_.freeze_sigma) params.push_back(&sigma_param_);
  adam_.step(params, log.lr);
  log.step = adam_.steps();
  log.loss.beta = opt.beta;
  log.loss.total = log.loss.physics + opt.beta * log.loss.kl;
  log.loss.mask_coverage = frames_total > 0.0 ? covered / frames_total : 0.0;
  log.sigma = sigma();
  log.mean_kappa = kappas.empty() ? 0.0 : std::accumulate(kappas.begin(), kappas.end(), 0.0) / kappas.size();
  if (on_step_) on_step_(log);
  return log;
}

EpochSummary Trainer::run_epoch(int epoch) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);
  EpochSummary e;
  e.epoch = epoch;
  e.lr = cfg_.learning_rate(epoch);
  e.beta = beta_schedule(epoch, cfg_.epochs, cfg_.warmup_fraction).beta;
  std::size_t n = 0;
  for (std::size_t s = 0; s < order.size(); s += static_cast<std::size_t>(cfg_.batch_size)) {
    const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(s),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + cfg_.batch_size)));
    const StepLog l = step(batch, epoch);
    e.physics += l.loss.physics;
    e.kl += l.loss.kl;
    e.total += l.loss.total;
    e.mean_kappa += l.mean_kappa;
    ++n;
  }
  e.physics /= static_cast<double>(n);
  e.kl /= static_cast<double>(n);
  e.total /= static_cast<double>(n);
  e.mean_kappa /= static_cast<double>(n);
  e.sigma = sigma();
  e.val_rms_deg = validate();
  e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return e;
}

double Trainer::validate() const {
  if (val_.empty()) return -1.0;
  return evaluate_clips(encoder_, val_).rms_deg;
}

Checkpoint Trainer::checkpoint(int epoch) const {
  Checkpoint c(encoder_, sigma_raw());
  c.step = adam_.steps();
  c.epoch = epoch;
  c.rng_state = rng_state();
  c.extra["train"] = cfg_;
  return c;
}

double feature_rms(const std::vector<PreparedClip>& clips) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const PreparedClip& c : clips) {
    for (float v : c.x.data()) sum += static_cast<double>(v) * v;
    n += c.x.size();
  }
  return n ? std::sqrt(sum / static_cast<double>(n)) : 0.0;
}

TrainResult train(const TrainConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir,
                  const std::function<void(const EpochSummary&)>& on_epoch) {
  cfg.validate();
  const Manifest data = load_manifest(data_dir);
  if (data.experiment != cfg.experiment)
    throw ConfigError("training experiment " + to_string(cfg.experiment) + " does not match dataset experiment " +
                      to_string(data.experiment));
  EncoderConfig enc = cfg.encoder;
  if (enc.lags != data.lags) throw ConfigError("encoder lag count does not match the dataset");
  auto train_clips = load_split(data, "train", enc, cfg.lambda, cfg.feature_eps, cfg.max_train_scenes);
  std::vector<PreparedClip> val_clips;
  if (data.splits.count("val")) val_clips = load_split(data, "val", enc, cfg.lambda, cfg.feature_eps, cfg.max_val_scenes);

  TrainConfig run_cfg = cfg;
  if (cfg.fit_input_scale) {
    const double rms = feature_rms(train_clips);
    if (rms > 0.0) run_cfg.encoder.input_scale = 1.0 / rms;
  }

  std::filesystem::create_directories(out_dir);
  Trainer trainer(run_cfg, std::move(train_clips), std::move(val_clips), data.lag_grid());
  trainer.set_diagnostic_path(out_dir / "diagnostic.json");
  std::ofstream loss_log(out_dir / "loss.jsonl");
  std::ofstream epoch_log(out_dir / "epochs.jsonl");
  trainer.set_step_log([&loss_log](const StepLog& s) { loss_log << step_json(s).dump() << '\n' << std::flush; });

  nlohmann::json data_echo = {{"dataset", std::filesystem::absolute(data_dir).string()},
                              {"experiment", to_string(data.experiment)},
                              {"lags", data.lags},
                              {"tau_max", data.tau_max},
                              {"window", data.frames.window},
                              {"hop", data.frames.hop},
                              {"geometry", data.geometry},
                              {"scene_config", data.scene_config}};
  TrainResult result;
  result.last_checkpoint = out_dir / "last.ckpt";
  result.best_checkpoint = out_dir / "best.ckpt";
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const EpochSummary e = trainer.run_epoch(epoch);
    result.history.push_back(e);
    epoch_log << epoch_json(e).dump() << '\n' << std::flush;
    Checkpoint ck = trainer.checkpoint(epoch);
    ck.extra["data"] = data_echo;
    ck.extra["val_rms_deg"] = e.val_rms_deg;
    save_checkpoint(ck, result.last_checkpoint);
    if (cfg.keep_epoch_checkpoints) save_checkpoint(ck, out_dir / ("epoch_" + std::to_string(epoch) + ".ckpt"));
    // Without a validation set the latest epoch is kept as best.
    const bool better = e.val_rms_deg < 0.0 || result.best_epoch < 0 || e.val_rms_deg < result.best_val_rms_deg;
    if (better) {
      result.best_epoch = epoch;
      result.best_val_rms_deg = e.val_rms_deg;
      save_checkpoint(ck, result.best_checkpoint);
    }
    if (on_epoch) on_epoch(e);
  }
  nlohmann::json summary = {{"best_epoch", result.best_epoch},
                            {"best_val_rms_deg", result.best_val_rms_deg},
                            {"epochs", cfg.epochs},
                            {"params", trainer.encoder().param_count()},
                            {"final_sigma", trainer.sigma()}};
  std::ofstream(out_dir / "train_summary.json") << summary.dump(1) << '\n';
  return result;
}

}  // namespace physdoa
