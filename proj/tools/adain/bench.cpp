#include <iostream>

#include "common.hpp"

#include "adain/bench.hpp"
#include "adain/bundle.hpp"

namespace adain::cli {

namespace {

struct BenchArgs {
  std::string model = "tiny";
  std::uint64_t seed = 0;
  std::vector<Index> sizes{256, 512};
  int count = 10;
  bool style_once = false;
  std::string out_dir;
};

void run(const BenchArgs& a) {
  const auto model = load_model(a.model, a.seed);
  const int cache_count = a.style_once ? a.count : 0;
  const nlohmann::json config{{"model", a.model}, {"seed", a.seed},           {"sizes", a.sizes},
                              {"count", a.count}, {"style_once", a.style_once}};
  if (!a.out_dir.empty()) echo_config(a.out_dir, config);
  const auto report = run_bench(model, a.sizes, a.count, a.seed, cache_count);
  std::cout << report.to_table();
  if (!a.out_dir.empty()) write_text(std::filesystem::path(a.out_dir) / "bench.csv", report.to_csv());
}

}  // namespace

void add_bench(CLI::App& app) {
  auto args = std::make_shared<BenchArgs>();
  auto* cmd = app.add_subcommand("bench", "Time stylization excluding and including style encoding");
  cmd->add_option("--model", args->model, "Weights bundle, or tiny/reference for a random model")
      ->capture_default_str();
  add_seed_option(cmd, args->seed, "Seed of the synthetic images and of a random model");
  cmd->add_option("--sizes", args->sizes, "Square image sizes")->delimiter(',')->capture_default_str();
  cmd->add_option("--count", args->count, "Images per size")->capture_default_str();
  cmd->add_flag("--style-once", args->style_once,
                "Also time --count images against one cached style descriptor versus full transfers");
  cmd->add_option("--out-dir", args->out_dir, "Optional directory for config.json and bench.csv");
  cmd->callback([args] { run(*args); });
}

}  // namespace adain::cli
