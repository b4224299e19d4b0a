#include <iostream>

#include "common.hpp"

#include "adain/bundle.hpp"
#include "adain/errors.hpp"
#include "adain/image.hpp"
#include "adain/train.hpp"

namespace adain::cli {

namespace {

struct EvalArgs {
  std::string model;
  std::uint64_t seed = 0;
  std::string content_dir;
  std::string style_dir;
  int resize = 0;
  double lambda = 10.0;
  int optimizer_iterations = 0;
  double step = 0.02;
  std::string out_dir;
};

void run(const EvalArgs& a) {
  if (a.resize < 0) throw ConfigError("resize", "resize must be >= 0");
  if (a.optimizer_iterations < 0) throw ConfigError("optimizer_baseline", "iterations must be >= 0");
  const auto model = load_model(a.model, a.seed);
  const auto content = ImageDataset::load(a.content_dir, a.resize, {}, "content_dir");
  const auto style = ImageDataset::load(a.style_dir, a.resize, {}, "style_dir");

  const std::filesystem::path out = a.out_dir;
  echo_config(out, {{"model", a.model},
                    {"seed", a.seed},
                    {"content_dir", a.content_dir},
                    {"style_dir", a.style_dir},
                    {"resize", a.resize},
                    {"lambda", a.lambda},
                    {"optimizer_baseline", a.optimizer_iterations},
                    {"step", a.step},
                    {"eps", model.eps()}});

  const auto stylized = evaluate(model, content.images(), style.images(), a.lambda);
  const auto raw = evaluate_raw_content(model, content.images(), style.images(), a.lambda);
  write_text(out / "eval.csv", stylized.to_csv());
  write_text(out / "raw_content.csv", raw.to_csv());

  const auto taps = model.encoder().tap_names();
  const std::string summary = "pairs " + std::to_string(stylized.rows.size()) + "\n" +
                              "stylized mean:    " + format_report(stylized.mean, taps) + "\n" +
                              "raw content mean: " + format_report(raw.mean, taps) + "\n";
  write_text(out / "summary.txt", summary);
  std::cout << summary;

  if (a.optimizer_iterations == 0) return;
  const auto dir = out / "optimizer";
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < content.size(); ++i) {
    for (std::size_t j = 0; j < style.size(); ++j) {
      const auto r = optimize_image(model.encoder(), content.images()[i], style.images()[j], a.optimizer_iterations,
                                    a.lambda, a.step, model.eps());
      const std::string stem = "c" + std::to_string(i) + "_s" + std::to_string(j);
      r.curve.write_csv(dir / (stem + ".csv"));
      save_image(r.image, dir / (stem + ".png"));
      std::cout << "optimizer " << stem << ": first " << format_report(r.curve.points().front().report, {})
                << " | last " << format_report(r.curve.back().report, {}) << "\n";
    }
  }
}

}  // namespace

void add_eval(CLI::App& app) {
  auto args = std::make_shared<EvalArgs>();
  auto* cmd = app.add_subcommand("eval", "Score a model on every content x style pair");
  cmd->add_option("--model", args->model, "Weights bundle, or tiny/reference for a random model")->required();
  add_seed_option(cmd, args->seed, "Seed of a random tiny/reference model");
  cmd->add_option("--content-dir", args->content_dir, "Content image directory")->required();
  cmd->add_option("--style-dir", args->style_dir, "Style image directory")->required();
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->required();
  cmd->add_option("--resize", args->resize, "Smallest side after loading; 0 keeps the original size")
      ->capture_default_str();
  cmd->add_option("--lambda", args->lambda, "Style loss weight in the total")->capture_default_str();
  cmd->add_option("--optimizer-baseline", args->optimizer_iterations,
                  "Also optimize pixels per pair for this many iterations");
  cmd->add_option("--step", args->step, "Adam step of the optimizer baseline")->capture_default_str();
  cmd->callback([args] { run(*args); });
}

}  // namespace adain::cli
