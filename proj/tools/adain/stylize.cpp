#include <iostream>

#include "common.hpp"

#include "adain/bundle.hpp"
#include "adain/controls.hpp"
#include "adain/image.hpp"
#include "adain/train.hpp"

namespace adain::cli {

namespace {

struct StylizeArgs {
  std::string content;
  std::vector<std::string> styles;
  std::string model = "tiny";
  std::uint64_t seed = 0;
  double alpha = 1.0;
  std::vector<double> weights;
  bool preserve_color = false;
  std::vector<std::string> masks;
  std::string out;
  bool report = false;
  double lambda = 10.0;
};

void run(const StylizeArgs& a) {
  const auto model = load_model(a.model, a.seed);
  const Image content = load_image(a.content);
  std::vector<Image> style_images;
  std::vector<StyleSource> sources;
  for (const auto& path : a.styles) {
    style_images.push_back(load_image(path));
    sources.push_back(StyleSource::from_image(style_images.back()));
  }
  ControlSpec spec;
  spec.alpha = a.alpha;
  spec.weights = a.weights;
  spec.preserve_color = a.preserve_color;
  for (const auto& path : a.masks) spec.masks.push_back(load_mask(path));
  validate_controls(spec, sources.size());

  const std::filesystem::path out = a.out;
  echo_config(out.parent_path(), {{"content", a.content},
                                  {"styles", a.styles},
                                  {"model", a.model},
                                  {"seed", a.seed},
                                  {"alpha", a.alpha},
                                  {"weights", resolved_weights(spec, sources.size())},
                                  {"preserve_color", a.preserve_color},
                                  {"masks", a.masks},
                                  {"out", a.out},
                                  {"report", a.report},
                                  {"lambda", a.lambda}},
              out.stem().string() + ".config.json");

  const Tensorf t = decoder_input(model, content, sources, spec);
  const Image output = model.decode(t);
  save_image(output, out);

  if (a.report) {
    const Image scored = clamp_unit(output);
    for (std::size_t k = 0; k < style_images.size(); ++k) {
      const Image target = a.preserve_color ? color_match(style_images[k], content) : style_images[k];
      const auto r = score(model, scored, t, model.encode(target), a.lambda);
      std::cout << "style " << k << " (" << a.styles[k] << "): "
                << format_report(r, model.encoder().tap_names()) << "\n";
    }
  }
}

}  // namespace

void add_stylize(CLI::App& app) {
  auto args = std::make_shared<StylizeArgs>();
  auto* cmd = app.add_subcommand("stylize", "Stylize one content image with one or more styles");
  cmd->add_option("content", args->content, "Content image")->required()->check(CLI::ExistingFile);
  cmd->add_option("styles", args->styles, "Style images")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", args->out, "Output image (.png, or .jpg/.jpeg)")->required();
  cmd->add_option("--model", args->model, "Weights bundle, or tiny/reference for a random model")
      ->capture_default_str();
  add_seed_option(cmd, args->seed, "Seed of a random tiny/reference model");
  cmd->add_option("--alpha", args->alpha, "Content/style trade-off in [0, 1]")->capture_default_str();
  cmd->add_option("--weights", args->weights, "One weight per style, summing to 1 (default uniform)");
  cmd->add_flag("--preserve-color", args->preserve_color, "Match each style's colours to the content first");
  cmd->add_option("--mask", args->masks, "Region mask per style, repeatable")
      ->check(CLI::ExistingFile)
      ->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  cmd->add_flag("--report", args->report, "Print content and style losses of the output");
  cmd->add_option("--lambda", args->lambda, "Style weight in the reported total")->capture_default_str();
  cmd->callback([args] { run(*args); });
}

}  // namespace adain::cli
