#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "adain/train.hpp"

namespace adain {

enum class ExperimentKind { InVsBn, Baselines };

const char* to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(const std::string& name);

/// A full experiment matrix as read from a config file.
///
/// in-vs-bn runs {IN, BN} x `preprocess` x `seeds` single-style networks;
/// baselines runs `variants` x `seeds` decoders with `base.train`.
struct ExperimentPlan {
  ExperimentKind kind = ExperimentKind::InVsBn;
  /// Shared settings; for in-vs-bn, norm_kind and preprocess are set per arm.
  ExperimentConfig base;
  std::vector<InputPrep> preprocess{InputPrep::None};
  std::vector<Variant> variants{Variant::AdaINDec, Variant::ConcatDec, Variant::AdaINBNDec,
                                Variant::AdaININDec};

  void validate() const;
  nlohmann::json to_json() const;
  /// Keys: kind, train {TrainConfig keys}, style_image, style_norm_model,
  /// style_norm_style, preprocess [..], variants [..], seeds [..].
  static ExperimentPlan from_json(const nlohmann::json& j);
  static ExperimentPlan load(const std::filesystem::path& path);
};

struct ArmResult {
  /// e.g. "in_none_seed0" or "concat-dec_seed1"; also the CSV file stem.
  std::string name;
  std::string group;
  std::string prep;
  std::uint64_t seed = 0;
  Curve curve;
  /// Mean over the last 10% of iterations.
  LossReport final_loss;
};

/// A directional claim checked per seed and decided by a 2/3 majority.
struct Verdict {
  std::string claim;
  int holds = 0;
  int seeds = 0;
  bool pass() const { return seeds > 0 && 3 * holds >= 2 * seeds; }
};

struct ExperimentSummary {
  std::vector<ArmResult> arms;
  std::vector<Verdict> verdicts;

  const ArmResult& arm(const std::string& name) const;
  /// One row per arm: name, group, prep, seed, final content/style/total.
  std::string arms_csv() const;
  /// One line per verdict: "PASS|FAIL <claim> (<holds>/<seeds> seeds)".
  std::string verdict_text() const;
};

using ArmProgressFn = std::function<void(const std::string& arm, const CurvePoint&)>;

/// Runs the plan. With a non-empty `out_dir`, writes config.json,
/// curves/<arm>.csv, summary.csv and verdicts.txt there.
ExperimentSummary run_experiment(const ExperimentPlan& plan, const std::filesystem::path& out_dir = {},
                                 const ArmProgressFn& progress = {});

/// Same matrices over already loaded data (the acceptance suite shares datasets).
ExperimentSummary run_in_vs_bn(const ExperimentPlan& plan, std::shared_ptr<const Encoder> encoder,
                               const std::vector<std::pair<InputPrep, ImageDataset>>& content,
                               const Image& style, const ArmProgressFn& progress = {});
ExperimentSummary run_baselines(const ExperimentPlan& plan, std::shared_ptr<const Encoder> encoder,
                                const ImageDataset& content, const ImageDataset& style,
                                const ArmProgressFn& progress = {});

void write_summary(const ExperimentSummary& summary, const nlohmann::json& config,
                   const std::filesystem::path& out_dir);

}  // namespace adain
