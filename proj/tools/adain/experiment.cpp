#include <fstream>
#include <iostream>

#include "common.hpp"

#include "adain/errors.hpp"
#include "adain/experiment.hpp"

namespace adain::cli {

namespace {

struct ExperimentArgs {
  std::string config;
  std::string kind;
  std::string out_dir;
  int log_every = 100;
};

void run(const ExperimentArgs& a) {
  std::ifstream in(a.config);
  if (!in) throw IoError("cannot open " + a.config);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config", a.config + " is not valid JSON: " + e.what());
  }
  if (!a.kind.empty() && j.is_object() && !j.contains("kind")) j["kind"] = a.kind;
  const ExperimentPlan plan = ExperimentPlan::from_json(j);
  if (!a.kind.empty() && parse_experiment_kind(a.kind) != plan.kind) {
    throw ConfigError("kind", "--kind " + a.kind + " does not match the config's kind " + to_string(plan.kind));
  }
  plan.validate();
  const auto progress = [&](const std::string& arm, const CurvePoint& p) {
    if (p.iteration == 1 || (a.log_every > 0 && p.iteration % a.log_every == 0)) {
      std::cerr << arm << " iter " << p.iteration << "  " << format_report(p.report, {}) << "\n";
    }
  };
  const auto summary = run_experiment(plan, a.out_dir, progress);
  std::cout << summary.arms_csv() << "\n" << summary.verdict_text();
}

}  // namespace

void add_experiment(CLI::App& app) {
  auto args = std::make_shared<ExperimentArgs>();
  auto* cmd = app.add_subcommand("experiment", "Run an in-vs-bn or baselines experiment matrix");
  cmd->add_option("config", args->config, "Experiment plan (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--kind", args->kind, "Expected kind; must match the plan")
      ->check(CLI::IsMember({"in-vs-bn", "baselines"}));
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->required();
  cmd->add_option("--log-every", args->log_every, "Progress interval in iterations")->capture_default_str();
  cmd->callback([args] { run(*args); });
}

}  // namespace adain::cli
