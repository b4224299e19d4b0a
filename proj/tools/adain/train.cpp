#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include "common.hpp"

#include "adain/bundle.hpp"
#include "adain/errors.hpp"
#include "adain/train.hpp"

namespace adain::cli {

namespace {

struct TrainArgs {
  std::string profile = "desk";
  std::string config;
  std::string out_dir;
  std::optional<std::string> content_dir, style_dir, encoder, variant;
  std::optional<int> batch_size, resize, crop, iterations;
  std::optional<double> lambda, learning_rate, eps;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> encoder_seed;
  int log_every = 0;
};

TrainConfig resolve(const TrainArgs& a, bool seed_given) {
  TrainConfig cfg;
  if (a.profile == "desk") {
    cfg = TrainConfig::desk();
  } else if (a.profile != "full") {
    throw ConfigError("profile", "profile must be desk or full");
  }
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw IoError("cannot open " + a.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config", a.config + " is not valid JSON: " + e.what());
    }
    cfg = TrainConfig::from_json(j, cfg);
  }
  if (a.content_dir) cfg.content_dir = *a.content_dir;
  if (a.style_dir) cfg.style_dir = *a.style_dir;
  if (a.encoder) cfg.encoder = *a.encoder;
  if (a.variant) cfg.variant = parse_variant(*a.variant);
  if (a.batch_size) cfg.batch_size = *a.batch_size;
  if (a.resize) cfg.resize_target = *a.resize;
  if (a.crop) cfg.crop = *a.crop;
  if (a.iterations) cfg.iterations = *a.iterations;
  if (a.lambda) cfg.lambda = *a.lambda;
  if (a.learning_rate) cfg.learning_rate = *a.learning_rate;
  if (a.eps) cfg.eps = *a.eps;
  if (seed_given) cfg.seed = a.seed;
  if (a.encoder_seed) cfg.encoder_seed = *a.encoder_seed;
  cfg.validate();
  return cfg;
}

void run(const TrainArgs& a, bool seed_given) {
  const TrainConfig cfg = resolve(a, seed_given);
  const std::filesystem::path out = a.out_dir;
  echo_config(out, cfg.to_json());

  const int every = a.log_every > 0 ? a.log_every : std::max(1, cfg.iterations / 20);
  const auto progress = [&](const CurvePoint& p) {
    if (p.iteration == 1 || p.iteration % every == 0) {
      std::cerr << "iter " << p.iteration << "/" << cfg.iterations << "  " << format_report(p.report, {}) << "\n";
    }
  };
  const auto result = train_decoder(cfg, progress);
  result.curve.write_csv(out / "curve.csv");
  save_model(result.model, out / "model.adwb");

  const int head = std::min(50, cfg.iterations);
  std::cout << "iterations 1-" << head << " mean: " << format_report(result.curve.window_mean(1, head), {}) << "\n"
            << "final (last 10%) mean: " << format_report(result.curve.tail_mean(), {}) << "\n"
            << "wrote " << (out / "model.adwb").string() << "\n";
}

}  // namespace

void add_train(CLI::App& app) {
  auto args = std::make_shared<TrainArgs>();
  auto* cmd = app.add_subcommand("train", "Train a decoder; writes config.json, curve.csv and model.adwb");
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->required();
  cmd->add_option("--profile", args->profile, "Defaults to start from: desk or full")
      ->check(CLI::IsMember({"desk", "full"}))
      ->capture_default_str();
  cmd->add_option("--config", args->config, "JSON file of training settings, applied over the profile")
      ->check(CLI::ExistingFile);
  cmd->add_option("--content-dir", args->content_dir, "Content image directory");
  cmd->add_option("--style-dir", args->style_dir, "Style image directory");
  cmd->add_option("--encoder", args->encoder, "tiny, reference or a weights bundle");
  cmd->add_option("--encoder-seed", args->encoder_seed, "Seed of a random tiny/reference encoder");
  cmd->add_option("--variant", args->variant, "adain-dec, concat-dec, adain-bndec or adain-indec");
  cmd->add_option("--batch-size", args->batch_size, "Images per batch");
  cmd->add_option("--resize", args->resize, "Smallest side after loading");
  cmd->add_option("--crop", args->crop, "Random crop size");
  cmd->add_option("--iterations", args->iterations, "Optimizer steps");
  cmd->add_option("--lambda", args->lambda, "Style loss weight");
  cmd->add_option("--lr", args->learning_rate, "Adam learning rate");
  cmd->add_option("--eps", args->eps, "Normalization epsilon");
  auto* seed = add_seed_option(cmd, args->seed, "Seed for decoder init and batch sampling");
  cmd->add_option("--log-every", args->log_every, "Progress interval in iterations (default iterations / 20)");
  cmd->callback([args, seed] { run(*args, seed->count() > 0 || std::getenv("ADAIN_SEED")); });
}

}  // namespace adain::cli
