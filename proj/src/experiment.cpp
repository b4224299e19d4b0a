#include "adain/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "adain/bundle.hpp"

namespace adain {

using nlohmann::json;

const char* to_string(ExperimentKind k) { return k == ExperimentKind::InVsBn ? "in-vs-bn" : "baselines"; }

ExperimentKind parse_experiment_kind(const std::string& name) {
  if (name == "in-vs-bn") return ExperimentKind::InVsBn;
  if (name == "baselines") return ExperimentKind::Baselines;
  throw ConfigError("kind", "unknown experiment kind \"" + name + "\" (expected in-vs-bn or baselines)");
}

void ExperimentPlan::validate() const {
  base.train.validate();
  if (base.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (kind == ExperimentKind::InVsBn) {
    if (preprocess.empty()) throw ConfigError("preprocess", "at least one preprocess arm is required");
    for (auto p : preprocess) {
      ExperimentConfig arm = base;
      arm.preprocess = p;
      arm.validate();
    }
  } else {
    if (variants.empty()) throw ConfigError("variants", "at least one variant is required");
  }
}

json ExperimentPlan::to_json() const {
  json j{{"kind", to_string(kind)}, {"train", base.train.to_json()}, {"seeds", base.seeds}};
  if (kind == ExperimentKind::InVsBn) {
    j["style_image"] = base.style_image.string();
    if (base.style_norm_model) j["style_norm_model"] = base.style_norm_model->string();
    if (base.style_norm_style) j["style_norm_style"] = base.style_norm_style->string();
    json p = json::array();
    for (auto x : preprocess) p.push_back(to_string(x));
    j["preprocess"] = p;
  } else {
    json v = json::array();
    for (auto x : variants) v.push_back(to_string(x));
    j["variants"] = v;
  }
  return j;
}

ExperimentPlan ExperimentPlan::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config", "experiment config must be a JSON object");
  static const std::vector<std::string> known{"kind", "train", "style_image", "style_norm_model",
                                              "style_norm_style", "preprocess", "variants", "seeds"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key, "unknown experiment config key \"" + key + "\"");
    }
  }
  auto text = [&](const char* key) {
    if (!j[key].is_string()) throw ConfigError(key, std::string(key) + " must be a string");
    return j[key].get<std::string>();
  };
  auto list = [&](const char* key) {
    if (!j[key].is_array()) throw ConfigError(key, std::string(key) + " must be an array");
    return j[key];
  };
  ExperimentPlan p;
  if (!j.contains("kind")) throw ConfigError("kind", "experiment config needs \"kind\"");
  p.kind = parse_experiment_kind(text("kind"));
  if (j.contains("train")) p.base.train = TrainConfig::from_json(j["train"]);
  if (j.contains("style_image")) p.base.style_image = text("style_image");
  if (j.contains("style_norm_model")) p.base.style_norm_model = text("style_norm_model");
  if (j.contains("style_norm_style")) p.base.style_norm_style = text("style_norm_style");
  if (j.contains("preprocess")) {
    p.preprocess.clear();
    for (const auto& x : list("preprocess")) {
      if (!x.is_string()) throw ConfigError("preprocess", "preprocess entries must be strings");
      p.preprocess.push_back(parse_input_prep(x.get<std::string>()));
    }
  }
  if (j.contains("variants")) {
    p.variants.clear();
    for (const auto& x : list("variants")) {
      if (!x.is_string()) throw ConfigError("variants", "variant entries must be strings");
      p.variants.push_back(parse_variant(x.get<std::string>()));
    }
  }
  if (j.contains("seeds")) {
    p.base.seeds.clear();
    for (const auto& x : list("seeds")) {
      if (!x.is_number_integer() || x.get<std::int64_t>() < 0) throw ConfigError("seeds", "seeds must be non-negative integers");
      p.base.seeds.push_back(x.get<std::uint64_t>());
    }
  }
  p.validate();
  return p;
}

ExperimentPlan ExperimentPlan::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config", path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------

const ArmResult& ExperimentSummary::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.name == name) return a;
  throw IndexError("no experiment arm named " + name);
}

std::string ExperimentSummary::arms_csv() const {
  std::ostringstream out;
  out << "arm,group,preprocess,seed,final_content,final_style,final_total\n";
  char buf[160];
  for (const auto& a : arms) {
    std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%.9g", a.final_loss.content, a.final_loss.style, a.final_loss.total);
    out << a.name << "," << a.group << "," << a.prep << "," << a.seed << buf << "\n";
  }
  return out.str();
}

std::string ExperimentSummary::verdict_text() const {
  std::string out;
  for (const auto& v : verdicts) {
    out += std::string(v.pass() ? "PASS " : "FAIL ") + v.claim + " (" + std::to_string(v.holds) + "/" +
           std::to_string(v.seeds) + " seeds)\n";
  }
  return out;
}

namespace {

const char* norm_tag(NormKind k) { return k == NormKind::Batch ? "bn" : "in"; }

std::string seed_tag(std::uint64_t seed) { return "seed" + std::to_string(seed); }

ArmResult finish(std::string name, std::string group, std::string prep, std::uint64_t seed, Curve curve) {
  ArmResult a{std::move(name), std::move(group), std::move(prep), seed, std::move(curve), {}};
  a.final_loss = a.curve.tail_mean(0.1);
  return a;
}

}  // namespace

ExperimentSummary run_in_vs_bn(const ExperimentPlan& plan, std::shared_ptr<const Encoder> encoder,
                               const std::vector<std::pair<InputPrep, ImageDataset>>& content,
                               const Image& style, const ArmProgressFn& progress) {
  ExperimentSummary s;
  const auto& seeds = plan.base.seeds;
  for (const auto& [prep, data] : content) {
    for (auto seed : seeds) {
      for (auto norm : {NormKind::Instance, NormKind::Batch}) {
        ExperimentConfig cfg = plan.base;
        cfg.norm_kind = norm;
        cfg.preprocess = prep;
        const std::string name = std::string(norm_tag(norm)) + "_" + to_string(prep) + "_" + seed_tag(seed);
        ProgressFn cb;
        if (progress) cb = [&](const CurvePoint& p) { progress(name, p); };
        s.arms.push_back(finish(name, norm_tag(norm), to_string(prep), seed,
                                train_single_style(cfg, seed, encoder, data, style, cb)));
      }
    }
  }

  auto style_of = [&](NormKind n, InputPrep p, std::uint64_t seed) {
    return s.arm(std::string(norm_tag(n)) + "_" + to_string(p) + "_" + seed_tag(seed)).final_loss.style;
  };
  auto gap = [&](InputPrep p, std::uint64_t seed) {
    return style_of(NormKind::Batch, p, seed) - style_of(NormKind::Instance, p, seed);
  };
  for (const auto& [prep, _] : content) {
    Verdict v{std::string("IN_final < BN_final (style loss, preprocess=") + to_string(prep) + ")", 0, 0};
    for (auto seed : seeds) {
      v.holds += style_of(NormKind::Instance, prep, seed) < style_of(NormKind::Batch, prep, seed);
      ++v.seeds;
    }
    s.verdicts.push_back(v);
  }
  auto has = [&](InputPrep p) {
    return std::any_of(content.begin(), content.end(), [&](const auto& c) { return c.first == p; });
  };
  for (auto p : {InputPrep::ContrastEq, InputPrep::StyleNorm}) {
    if (!has(InputPrep::None) || !has(p)) continue;
    Verdict v{std::string("BN-IN gap (") + to_string(p) + ") < BN-IN gap (none)", 0, 0};
    for (auto seed : seeds) {
      v.holds += gap(p, seed) < gap(InputPrep::None, seed);
      ++v.seeds;
    }
    s.verdicts.push_back(v);
  }
  return s;
}

ExperimentSummary run_baselines(const ExperimentPlan& plan, std::shared_ptr<const Encoder> encoder,
                                const ImageDataset& content, const ImageDataset& style,
                                const ArmProgressFn& progress) {
  ExperimentSummary s;
  const auto& seeds = plan.base.seeds;
  for (auto seed : seeds) {
    for (auto variant : plan.variants) {
      TrainConfig cfg = plan.base.train;
      cfg.seed = seed;
      cfg.variant = variant;
      const std::string name = std::string(to_string(variant)) + "_" + seed_tag(seed);
      ProgressFn cb;
      if (progress) cb = [&](const CurvePoint& p) { progress(name, p); };
      s.arms.push_back(finish(name, to_string(variant), "none", seed,
                              train_decoder(cfg, encoder, content, style, cb).curve));
    }
  }

  auto final_of = [&](Variant v, std::uint64_t seed) {
    return s.arm(std::string(to_string(v)) + "_" + seed_tag(seed)).final_loss;
  };
  auto has = [&](Variant v) { return std::find(plan.variants.begin(), plan.variants.end(), v) != plan.variants.end(); };
  if (!has(Variant::AdaINDec)) return s;
  if (has(Variant::ConcatDec)) {
    Verdict v{"concat-dec final content > adain-dec final content", 0, 0};
    for (auto seed : seeds) {
      v.holds += final_of(Variant::ConcatDec, seed).content > final_of(Variant::AdaINDec, seed).content;
      ++v.seeds;
    }
    s.verdicts.push_back(v);
  }
  for (auto norm : {Variant::AdaININDec, Variant::AdaINBNDec}) {
    if (!has(norm)) continue;
    Verdict v{std::string(to_string(norm)) + " final total >= adain-dec final total", 0, 0};
    for (auto seed : seeds) {
      v.holds += final_of(norm, seed).total >= final_of(Variant::AdaINDec, seed).total;
      ++v.seeds;
    }
    s.verdicts.push_back(v);
  }
  return s;
}

void write_summary(const ExperimentSummary& summary, const json& config, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "curves");
  auto write = [&](const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
    if (!f) throw IoError("cannot write " + path.string());
  };
  write(out_dir / "config.json", config.dump(2) + "\n");
  for (const auto& a : summary.arms) a.curve.write_csv(out_dir / "curves" / (a.name + ".csv"));
  write(out_dir / "summary.csv", summary.arms_csv());
  write(out_dir / "verdicts.txt", summary.verdict_text());
}

ExperimentSummary run_experiment(const ExperimentPlan& plan, const std::filesystem::path& out_dir,
                                 const ArmProgressFn& progress) {
  plan.validate();
  const auto& t = plan.base.train;
  auto encoder = load_encoder(t.encoder, t.encoder_seed);
  ExperimentSummary s;
  if (plan.kind == ExperimentKind::InVsBn) {
    std::vector<std::pair<InputPrep, ImageDataset>> content;
    for (auto p : plan.preprocess) {
      ExperimentConfig cfg = plan.base;
      cfg.preprocess = p;
      content.emplace_back(p, load_experiment_content(cfg));
    }
    s = run_in_vs_bn(plan, encoder, content, load_image(plan.base.style_image), progress);
  } else {
    const auto content = ImageDataset::load(t.content_dir, t.resize_target, {}, "content_dir");
    const auto style = ImageDataset::load(t.style_dir, t.resize_target, {}, "style_dir");
    s = run_baselines(plan, encoder, content, style, progress);
  }
  if (!out_dir.empty()) write_summary(s, plan.to_json(), out_dir);
  return s;
}

}  // namespace adain
