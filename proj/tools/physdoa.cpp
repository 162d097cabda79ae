// Command-line front end: simulate, train, eval, srp, kappa-sweep, report.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "physdoa/checkpoint.hpp"
#include "physdoa/config.hpp"
#include "physdoa/dataset.hpp"
#include "physdoa/evaluate.hpp"
#include "physdoa/report.hpp"
#include "physdoa/train.hpp"

namespace fs = std::filesystem;
using namespace physdoa;

namespace {

// Config file first, then every explicitly given flag, then --set pairs.
struct Overrides {
  std::string config;
  std::vector<std::string> sets;
  std::vector<std::pair<std::string, std::string>> flags;

  Ini build() const {
    Ini ini = config.empty() ? Ini{} : Ini::load(config);
    for (const auto& [k, v] : flags) ini.set(k, v);
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || s.find('.') > eq) throw ConfigError("--set expects section.key=value, got " + s);
      ini.set(s.substr(0, eq), s.substr(eq + 1));
    }
    return ini;
  }
};

// Registers a string flag that, when given, sets an INI key.
void flag(CLI::App* app, Overrides& o, const std::string& name, const std::string& key, const std::string& help) {
  app->add_option_function<std::string>(
      name, [&o, key](const std::string& v) { o.flags.emplace_back(key, v); }, help + " [" + key + "]");
}

void common(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config, "INI config file")->check(CLI::ExistingFile);
  app->add_option("--set", o.sets, "override any config key: section.key=value");
}

double frame_seconds(const Manifest& m, const EncoderConfig& enc) {
  return m.frames.hop * enc.time_factor() / m.geometry.sample_rate();
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised single-source DOA tracking with a vMF variational encoder"};
  app.require_subcommand(1);

  // simulate
  Overrides sim_o;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "render a synthetic dataset");
  common(sim, sim_o);
  sim->add_option("--out", sim_out, "output dataset directory")->required();
  flag(sim, sim_o, "--train", "data.train", "training scenes");
  flag(sim, sim_o, "--val", "data.val", "validation scenes");
  flag(sim, sim_o, "--test", "data.test", "test scenes");
  flag(sim, sim_o, "--seed", "data.seed", "base seed");
  flag(sim, sim_o, "--experiment", "data.experiment", "exp1, exp2 or exp3");
  flag(sim, sim_o, "--threads", "data.threads", "worker threads");
  flag(sim, sim_o, "--duration", "scene.duration_s", "clip length in seconds");
  flag(sim, sim_o, "--geometry", "scene.geometry", "array geometry JSON");
  flag(sim, sim_o, "--lags", "features.lags", "lag bins");

  // train
  Overrides tr_o;
  std::string tr_data, tr_out;
  auto* tr = app.add_subcommand("train", "train the encoder");
  common(tr, tr_o);
  tr->add_option("--data", tr_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--out", tr_out, "checkpoint directory")->required();
  flag(tr, tr_o, "--epochs", "train.epochs", "epochs");
  flag(tr, tr_o, "--lr-start", "train.lr_start", "initial learning rate");
  flag(tr, tr_o, "--lr-end", "train.lr_end", "final learning rate");
  flag(tr, tr_o, "--batch-size", "train.batch_size", "clips per step");
  flag(tr, tr_o, "--lambda", "train.lambda", "input softmax weight");
  flag(tr, tr_o, "--seed", "train.seed", "seed");
  flag(tr, tr_o, "--experiment", "train.experiment", "exp1, exp2 or exp3");
  flag(tr, tr_o, "--preset", "encoder.preset", "encoder preset: desk or paper");
  flag(tr, tr_o, "--freeze-sigma", "train.freeze_sigma", "keep sigma fixed");
  flag(tr, tr_o, "--mask-kl", "train.mask_kl", "apply the activity mask to the KL term");

  // eval
  Overrides ev_o;
  std::string ev_ckpt, ev_data, ev_out;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  common(ev, ev_o);
  ev->add_option("--ckpt", ev_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--out", ev_out, "report directory");
  flag(ev, ev_o, "--corrupt-metadata", "eval.corrupt_metadata", "metadata corruption as a fraction of max |coordinate|");
  flag(ev, ev_o, "--runs", "eval.runs", "independent runs with corruption");
  flag(ev, ev_o, "--split", "eval.split", "dataset split");

  // srp
  std::string srp_data, srp_out, srp_split = "test";
  bool srp_nearest = false;
  auto* srp = app.add_subcommand("srp", "SRP-PHAT baseline");
  srp->add_option("--data", srp_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  srp->add_option("--split", srp_split, "dataset split");
  srp->add_option("--out", srp_out, "report directory");
  srp->add_flag("--nearest", srp_nearest, "nearest-bin instead of linear lag interpolation");

  // kappa-sweep
  std::string ks_ckpt, ks_mode, ks_values, ks_out;
  double ks_fixed = 0.0;
  int ks_scenes = 30, ks_threads = 0;
  std::uint64_t ks_seed = 7;
  auto* ks = app.add_subcommand("kappa-sweep", "mean concentration along an SNR or RT60 sweep");
  ks->add_option("--ckpt", ks_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  ks->add_option("--mode", ks_mode, "snr or rt60")->required()->check(CLI::IsMember({"snr", "rt60"}));
  ks->add_option("--fixed", ks_fixed, "fixed RT60 (s) for snr mode, fixed SNR (dB) for rt60 mode")->required();
  ks->add_option("--values", ks_values, "comma-separated sweep points");
  ks->add_option("--scenes", ks_scenes, "scenes per point");
  ks->add_option("--seed", ks_seed, "first scene seed");
  ks->add_option("--threads", ks_threads, "worker threads");
  ks->add_option("--out", ks_out, "report directory");

  // report
  std::string rp_ckpt, rp_data, rp_out;
  double rp_probe = 60.0;
  auto* rp = app.add_subcommand("report", "training curves, complexity and traces for a checkpoint");
  rp->add_option("--ckpt", rp_ckpt, "checkpoint file")->required()->check(CLI::ExistingFile);
  rp->add_option("--data", rp_data, "dataset directory for DOA traces")->check(CLI::ExistingDirectory);
  rp->add_option("--out", rp_out, "report directory");
  rp->add_option("--probe-seconds", rp_probe, "probe clip length for the real-time factor");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const DatasetConfig cfg = dataset_config_from_ini(sim_o.build());
      const auto t0 = std::chrono::steady_clock::now();
      const Manifest m = simulate_dataset(cfg, sim_out, [](std::size_t d, std::size_t n) {
        std::fprintf(stderr, "\rrendered %zu/%zu", d, n);
        if (d == n) std::fputc('\n', stderr);
      });
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "wrote " << m.split("train").size() << " train, " << m.split("val").size() << " val, "
                << m.split("test").size() << " test scenes to " << sim_out << " in " << s << " s\n";
    } else if (*tr) {
      const TrainConfig cfg = train_config_from_ini(tr_o.build());
      const TrainResult r = train(cfg, tr_data, tr_out, [](const EpochSummary& e) {
        std::printf("epoch %3d  lr %.2e  beta %.0f  physics %.4f  kl %.4f  sigma %.3f  kappa %.2f  val %.2f deg  (%.1f s)\n",
                    e.epoch, e.lr, e.beta, e.physics, e.kl, e.sigma, e.mean_kappa, e.val_rms_deg, e.seconds);
        std::fflush(stdout);
      });
      std::cout << "best epoch " << r.best_epoch << " (val RMS " << r.best_val_rms_deg << " deg), checkpoint "
                << r.best_checkpoint.string() << "\n";
    } else if (*ev) {
      const EvalConfig cfg = eval_config_from_ini(ev_o.build());
      const Checkpoint ck = load_checkpoint(ev_ckpt);
      const Manifest m = load_manifest(ev_data);
      const EvalReport r = evaluate(ck, m, cfg);
      const fs::path out = ev_out.empty() ? fs::path(ev_ckpt).parent_path() / "eval" : fs::path(ev_out);
      write_eval_report(r, out, "eval", frame_seconds(m, ck.encoder_config));
      std::printf("RMS %.3f deg over %zu active frames", r.rms_deg, r.active_frames);
      if (r.corrupt_percent > 0.0)
        std::printf(" (corruption %.0f%%, %d runs, std %.3f; baseline %.3f deg, increase %.1f%%)",
                    100.0 * r.corrupt_percent, cfg.runs, r.rms_std_deg, r.baseline_rms_deg, r.relative_increase_pct);
      std::printf("; mean kappa %.2f\nreport: %s\n", r.mean_kappa, (out / "eval.json").string().c_str());
    } else if (*srp) {
      const Manifest m = load_manifest(srp_data);
      const EvalReport r = srp_evaluate(m, srp_split, EncoderConfig{}, srp_nearest ? SrpInterp::Nearest : SrpInterp::Linear);
      const fs::path out = srp_out.empty() ? fs::path(srp_data) / "srp" : fs::path(srp_out);
      write_eval_report(r, out, "srp", frame_seconds(m, EncoderConfig{}));
      std::printf("SRP-PHAT RMS %.3f deg over %zu active frames\nreport: %s\n", r.rms_deg, r.active_frames,
                  (out / "srp.json").string().c_str());
    } else if (*ks) {
      const Checkpoint ck = load_checkpoint(ks_ckpt);
      if (!ck.extra.contains("data")) throw ConfigError("checkpoint carries no dataset description");
      const auto& d = ck.extra["data"];
      const SceneConfig base = scene_config_from_json(d.at("scene_config"));
      const LagGrid grid = make_lag_grid(d.at("tau_max").get<double>(), static_cast<std::size_t>(d.at("lags").get<int>()),
                                         d.at("window").get<int>());
      const KappaMode mode = kappa_mode_from_string(ks_mode);
      std::vector<double> values = ks_values.empty()
                                       ? (mode == KappaMode::Snr ? std::vector<double>{0, 5, 10, 15, 20, 25, 30}
                                                                 : std::vector<double>{0.2, 0.4, 0.6, 0.8, 1.0})
                                       : parse_list(ks_values);
      const KappaCurve c = kappa_analysis(ck.encoder, base, grid, mode, ks_fixed, values, ks_scenes, ks_seed, ks_threads);
      const fs::path out = ks_out.empty() ? fs::path(ks_ckpt).parent_path() / "kappa" : fs::path(ks_out);
      write_json_file(out / ("kappa_" + ks_mode + ".json"), nlohmann::json(c));
      write_text(out / ("kappa_" + ks_mode + ".svg"), svg_kappa_curve(c));
      for (const auto& p : c.points)
        std::printf("%s %-6g  mean kappa %8.3f  RMS %6.2f deg  (%zu frames)\n", ks_mode.c_str(), p.condition,
                    p.mean_kappa, p.rms_deg, p.frames);
    } else if (*rp) {
      const Checkpoint ck = load_checkpoint(rp_ckpt);
      const fs::path dir = fs::path(rp_ckpt).parent_path();
      const fs::path out = rp_out.empty() ? dir / "report" : fs::path(rp_out);
      nlohmann::json j;
      j["checkpoint"] = {{"path", rp_ckpt}, {"epoch", ck.epoch}, {"step", ck.step}, {"sigma", softplus(ck.sigma_raw)},
                         {"encoder", ck.encoder_config}};
      j["extra"] = ck.extra;
      MicArray array = icosahedral_array();
      StftConfig frames;
      LagGrid grid = make_lag_grid(max_delay_samples(array), static_cast<std::size_t>(ck.encoder_config.lags), frames.window);
      if (ck.extra.contains("data")) {
        const auto& d = ck.extra["data"];
        array = mic_array_from_json(d.at("geometry"));
        frames.window = d.at("window").get<int>();
        frames.hop = d.at("hop").get<int>();
        grid = make_lag_grid(d.at("tau_max").get<double>(), static_cast<std::size_t>(d.at("lags").get<int>()), frames.window);
      }
      const ComplexityReport cx = complexity_report(ck.encoder, array, grid, frames, rp_probe);
      j["complexity"] = cx;
      if (fs::exists(dir / "loss.jsonl")) write_text(out / "loss.svg", svg_loss_curves(dir / "loss.jsonl"));
      if (!rp_data.empty()) {
        const Manifest m = load_manifest(rp_data);
        EvalConfig ec;
        ec.corrupt_percent = 0.0;
        ec.runs = 1;
        const EvalReport model = evaluate(ck, m, ec);
        const EvalReport base = srp_evaluate(m, "test", ck.encoder_config);
        write_eval_report(model, out, "model", frame_seconds(m, ck.encoder_config));
        write_eval_report(base, out, "srp", frame_seconds(m, ck.encoder_config));
        j["test_rms_deg"] = {{"model", model.rms_deg}, {"srp_phat", base.rms_deg}};
      }
      write_json_file(out / "report.json", j);
      std::printf("params %zu  MACs/frame %.3g  RTF %.4f\nreport: %s\n", cx.params, cx.macs_per_frame, cx.rtf,
                  (out / "report.json").string().c_str());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
