#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "adain/bundle.hpp"
#include "adain/controls.hpp"
#include "adain/image.hpp"
#include "adain/synthetic.hpp"

namespace adain {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr interleaved
};

Run run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + ADAIN_CLI + std::string(" ") + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  const auto s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root() = fs::temp_directory_path() / "adain_cli_test";
    fs::remove_all(root());
    write_synthetic_set(root() / "content", SyntheticKind::Content, 3, 48, 10);
    write_synthetic_set(root() / "style", SyntheticKind::Style, 2, 48, 20);
  }
  static void TearDownTestSuite() { fs::remove_all(root()); }

  static fs::path& root() {
    static fs::path r;
    return r;
  }
  static std::string path(const std::string& rel) { return (root() / rel).string(); }
  static std::string content(int i) { return path("content/content_000" + std::to_string(i) + ".png"); }
  static std::string style(int i) { return path("style/style_000" + std::to_string(i) + ".png"); }

  static std::string write_file(const std::string& rel, const std::string& text) {
    std::ofstream(root() / rel, std::ios::binary) << text;
    return path(rel);
  }
};

TEST_F(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("bench --no-such-flag").code, 2);
  EXPECT_EQ(run("stylize " + content(0)).code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, StylizeDefaultsEqualLibraryTransfer) {
  const auto out = path("s/one.png");
  const auto r = run("stylize " + content(0) + " " + style(0) + " --out " + out);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto model = load_model("tiny", 0);
  EXPECT_EQ(slurp(out), encode_png(model.transfer(load_image(content(0)), load_image(style(0)))));

  const auto echo = json::parse(slurp(path("s/one.config.json")));
  EXPECT_EQ(echo["alpha"], 1.0);
  EXPECT_EQ(echo["weights"], json::array({1.0}));
  EXPECT_EQ(echo["model"], "tiny");
}

TEST_F(Cli, StylizeAlphaZeroIsReconstruction) {
  const auto out = path("s/alpha0.png");
  ASSERT_EQ(run("stylize " + content(1) + " " + style(0) + " --alpha 0 --out " + out).code, 0);
  EXPECT_EQ(slurp(out), encode_png(load_model("tiny", 0).reconstruct(load_image(content(1)))));
}

TEST_F(Cli, StylizeWeightSumViolationNamesTheInvariant) {
  const auto r = run("stylize " + content(0) + " " + style(0) + " " + style(1) + " --out " + path("s/bad.png") +
                     " --weights 0.5 0.6");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("weights"), std::string::npos) << r.output;
  EXPECT_NE(r.output.find("sum"), std::string::npos) << r.output;
  EXPECT_FALSE(fs::exists(path("s/bad.png")));

  EXPECT_EQ(run("stylize " + content(0) + " " + style(0) + " --alpha 2 --out " + path("s/bad.png")).code, 2);
}

TEST_F(Cli, StylizeMasksAndReport) {
  Tensorf left({1, 3, 48, 48}), right({1, 3, 48, 48});
  for (Index c = 0; c < 3; ++c)
    for (Index y = 0; y < 48; ++y)
      for (Index x = 0; x < 48; ++x) (x < 24 ? left : right)(0, c, y, x) = 1.f;
  const auto lm = write_file("left.png", encode_png(left));
  const auto rm = write_file("right.png", encode_png(right));
  const auto out = path("s/masked.png");
  const auto r = run("stylize " + content(0) + " " + style(0) + " " + style(1) + " --mask " + lm + " --mask " + rm +
                     " --report --out " + out);
  ASSERT_EQ(r.code, 0) << r.output;
  const auto model = load_model("tiny", 0);
  const auto expect = spatial_transfer(model, load_image(content(0)),
                                       {model.encode_style(load_image(style(0))), model.encode_style(load_image(style(1)))},
                                       {load_mask(lm), load_mask(rm)});
  EXPECT_EQ(slurp(out), encode_png(expect));
  EXPECT_NE(r.output.find("style 0"), std::string::npos);
  EXPECT_NE(r.output.find("style 1"), std::string::npos);
  EXPECT_NE(r.output.find("relu4_1"), std::string::npos);

  const auto overlap = run("stylize " + content(0) + " " + style(0) + " " + style(1) + " --mask " + lm + " --mask " +
                           lm + " --out " + path("s/overlap.png"));
  EXPECT_EQ(overlap.code, 2);
  EXPECT_NE(overlap.output.find("masks"), std::string::npos);
}

TEST_F(Cli, TrainWritesLayoutAndIsDeterministic) {
  const std::string base = "train --content-dir " + path("content") + " --style-dir " + path("style") +
                           " --iterations 4 --resize 40 --crop 32 --batch-size 2 --seed 3 --out-dir ";
  const auto a = run(base + path("t/a"));
  ASSERT_EQ(a.code, 0) << a.output;
  ASSERT_EQ(run(base + path("t/b")).code, 0);
  for (const char* f : {"config.json", "curve.csv", "model.adwb"}) EXPECT_TRUE(fs::exists(path("t/a/") + f)) << f;
  EXPECT_EQ(line_count(path("t/a/curve.csv")), 5u);
  EXPECT_EQ(slurp(path("t/a/curve.csv")), slurp(path("t/b/curve.csv")));
  EXPECT_EQ(slurp(path("t/a/model.adwb")), slurp(path("t/b/model.adwb")));

  const auto echo = json::parse(slurp(path("t/a/config.json")));
  EXPECT_EQ(echo["seed"], 3);
  EXPECT_EQ(echo["iterations"], 4);
  EXPECT_EQ(echo["batch_size"], 2);
  EXPECT_EQ(echo["learning_rate"], 1e-4);
  EXPECT_NO_THROW(load_model(path("t/a/model.adwb")));
}

TEST_F(Cli, SeedComesFromEnvironment) {
  const std::string args = "train --content-dir " + path("content") + " --style-dir " + path("style") +
                           " --iterations 1 --resize 40 --crop 32 --batch-size 1 --out-dir " + path("t/env");
  ASSERT_EQ(run(args, "ADAIN_SEED=17").code, 0);
  EXPECT_EQ(json::parse(slurp(path("t/env/config.json")))["seed"], 17);
}

TEST_F(Cli, TrainRejectsBadConfig) {
  const auto r = run("train --content-dir " + path("content") + " --style-dir " + path("style") +
                     " --crop 0 --out-dir " + path("t/bad"));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("crop"), std::string::npos);
  const auto empty = path("empty");
  fs::create_directories(empty);
  EXPECT_EQ(run("train --content-dir " + empty + " --style-dir " + path("style") + " --out-dir " + path("t/e")).code,
            2);
}

TEST_F(Cli, EvalRowsAndOptimizerCurve) {
  const auto r = run("eval --model tiny --content-dir " + path("content") + " --style-dir " + path("style") +
                     " --optimizer-baseline 5 --out-dir " + path("ev"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_EQ(line_count(path("ev/eval.csv")), 1u + 3 * 2);
  EXPECT_EQ(line_count(path("ev/raw_content.csv")), 1u + 3 * 2);
  EXPECT_EQ(line_count(path("ev/optimizer/c2_s1.csv")), 1u + 5);
  EXPECT_TRUE(fs::exists(path("ev/optimizer/c0_s0.png")));
  EXPECT_TRUE(fs::exists(path("ev/config.json")));
  EXPECT_NE(slurp(path("ev/summary.txt")).find("raw content mean"), std::string::npos);
}

TEST_F(Cli, EvalModelLoadFailureExitsOne) {
  EXPECT_EQ(run("eval --model " + path("missing.adwb") + " --content-dir " + path("content") + " --style-dir " +
                path("style") + " --out-dir " + path("ev2"))
                .code,
            1);
  const auto junk = write_file("junk.adwb", "not a bundle at all");
  EXPECT_EQ(run("eval --model " + junk + " --content-dir " + path("content") + " --style-dir " + path("style") +
                " --out-dir " + path("ev2"))
                .code,
            1);
}

TEST_F(Cli, ExperimentBaselinesWritesFourCurvesPerSeedAndReruns) {
  const auto plan = write_file(
      "baselines.json", json{{"kind", "baselines"},
                             {"train", {{"content_dir", path("content")}, {"style_dir", path("style")},
                                        {"iterations", 3}, {"resize_target", 40}, {"crop", 32}, {"batch_size", 2}}},
                             {"seeds", {0}}}
                            .dump());
  const auto a = run("experiment " + plan + " --kind baselines --out-dir " + path("x/a"));
  ASSERT_EQ(a.code, 0) << a.output;
  ASSERT_EQ(run("experiment " + plan + " --out-dir " + path("x/b")).code, 0);
  std::vector<std::string> curves;
  for (const auto& e : fs::directory_iterator(path("x/a/curves"))) curves.push_back(e.path().filename().string());
  std::sort(curves.begin(), curves.end());
  EXPECT_EQ(curves, (std::vector<std::string>{"adain-bndec_seed0.csv", "adain-dec_seed0.csv", "adain-indec_seed0.csv",
                                              "concat-dec_seed0.csv"}));
  for (const auto& c : curves) EXPECT_EQ(slurp(path("x/a/curves/") + c), slurp(path("x/b/curves/") + c)) << c;
  EXPECT_EQ(slurp(path("x/a/summary.csv")), slurp(path("x/b/summary.csv")));
  EXPECT_TRUE(fs::exists(path("x/a/config.json")));
  EXPECT_NE(slurp(path("x/a/verdicts.txt")).find("concat-dec final content > adain-dec final content"),
            std::string::npos);

  EXPECT_EQ(run("experiment " + plan + " --kind in-vs-bn --out-dir " + path("x/c")).code, 2);
}

TEST_F(Cli, ExperimentInVsBnSummaryHasVerdict) {
  const auto plan = write_file(
      "invsbn.json", json{{"kind", "in-vs-bn"},
                          {"train", {{"content_dir", path("content")}, {"iterations", 3}, {"resize_target", 40},
                                     {"crop", 32}, {"batch_size", 2}}},
                          {"style_image", style(0)},
                          {"seeds", {0}}}
                         .dump());
  const auto r = run("experiment " + plan + " --out-dir " + path("x/ib"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(slurp(path("x/ib/verdicts.txt")).find("IN_final < BN_final"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("x/ib/curves/in_none_seed0.csv")));
  EXPECT_TRUE(fs::exists(path("x/ib/curves/bn_none_seed0.csv")));
}

TEST_F(Cli, ExperimentTrainingAbortExitsOne) {
  const auto plan = write_file(
      "diverge.json", json{{"kind", "baselines"},
                           {"train", {{"content_dir", path("content")}, {"style_dir", path("style")},
                                      {"iterations", 20}, {"resize_target", 40}, {"crop", 32},
                                      {"learning_rate", 1e30}}},
                           {"variants", {"adain-dec"}},
                           {"seeds", {0}}}
                          .dump());
  const auto r = run("experiment " + plan + " --out-dir " + path("x/nan"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("training aborted"), std::string::npos) << r.output;
}

TEST_F(Cli, BenchPrintsTableAndReference) {
  const auto r = run("bench --sizes 32,64 --count 2 --style-once --out-dir " + path("bench"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("not a target"), std::string::npos);
  EXPECT_NE(r.output.find("cached descriptor"), std::string::npos);
  EXPECT_EQ(line_count(path("bench/bench.csv")), 3u);
  EXPECT_EQ(run("bench --sizes 8 --count 1").code, 2);
}

TEST_F(Cli, WeightsInitVerifyInspect) {
  const auto bundle = path("w/fresh.adwb");
  fs::create_directories(path("w"));
  ASSERT_EQ(run("weights init --out " + bundle).code, 0);
  const auto ok = run("weights verify " + bundle);
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(ok.output.find("OK"), std::string::npos);

  const auto inspect = run("weights inspect " + bundle);
  ASSERT_EQ(inspect.code, 0);
  const auto b = WeightsBundle::load(bundle);
  std::size_t at = 0;
  for (const auto& t : b.tensors) {
    const auto found = inspect.output.find("  " + t.name + " ", at);
    ASSERT_NE(found, std::string::npos) << t.name;
    at = found;
  }

  const auto bytes = slurp(bundle);
  const auto cut = write_file("w/cut.adwb", bytes.substr(0, bytes.size() - 100));
  const auto bad = run("weights verify " + cut);
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.output.find("truncat"), std::string::npos) << bad.output;
  EXPECT_EQ(run("weights").code, 2);
}

TEST_F(Cli, ServeRejectsBadLimits) {
  const auto r = run("serve --max-dim 4");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("max_dim"), std::string::npos);
  EXPECT_EQ(run("serve --cache-size 0").code, 2);
}

TEST_F(Cli, MakeDatasetWritesBothSets) {
  const std::string cmd = std::string(ADAIN_MAKE_DATASET) + " --out " + path("gen") +
                          " --content 2 --style 1 --heldout 1 --size 32 > /dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(path("gen/content/content_0001.png")));
  EXPECT_TRUE(fs::exists(path("gen/style/style_0000.png")));
  EXPECT_TRUE(fs::exists(path("gen/heldout/content/content_0000.png")));
  EXPECT_EQ(load_image(path("gen/content/content_0000.png")).shape().h, 32);
}

}  // namespace
}  // namespace adain
