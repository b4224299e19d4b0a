#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "adain/bench.hpp"
#include "adain/experiment.hpp"
#include "adain/synthetic.hpp"

namespace adain {
namespace {

using nlohmann::json;

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("adain_experiment_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class Fn>
std::string config_field(Fn fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<no error>";
}

json small_train() {
  return {{"batch_size", 2}, {"resize_target", 40}, {"crop", 32}, {"iterations", 3}};
}

TEST(ExperimentPlan, ParsesAndRoundTrips) {
  const json j{{"kind", "in-vs-bn"},
               {"train", small_train()},
               {"style_image", "s.png"},
               {"style_norm_model", "m.adwb"},
               {"style_norm_style", "n.png"},
               {"preprocess", {"none", "style_norm"}},
               {"seeds", {0, 5}}};
  const auto p = ExperimentPlan::from_json(j);
  EXPECT_EQ(p.kind, ExperimentKind::InVsBn);
  EXPECT_EQ(p.base.train.iterations, 3);
  EXPECT_EQ(p.preprocess, (std::vector<InputPrep>{InputPrep::None, InputPrep::StyleNorm}));
  EXPECT_EQ(p.base.seeds, (std::vector<std::uint64_t>{0, 5}));
  EXPECT_EQ(ExperimentPlan::from_json(p.to_json()).to_json(), p.to_json());
}

TEST(ExperimentPlan, RejectsBadConfigs) {
  EXPECT_EQ(config_field([] { ExperimentPlan::from_json({{"kind", "sweep"}}); }), "kind");
  EXPECT_EQ(config_field([] { ExperimentPlan::from_json({{"style_image", "s.png"}}); }), "kind");
  EXPECT_EQ(config_field([] { ExperimentPlan::from_json({{"kind", "baselines"}, {"extra", 1}}); }), "extra");
  EXPECT_EQ(config_field([] {
              ExperimentPlan::from_json({{"kind", "in-vs-bn"}, {"style_image", "s.png"}, {"preprocess", {"style_norm"}}});
            }),
            "style_norm_model");
  EXPECT_EQ(config_field([] { ExperimentPlan::from_json({{"kind", "baselines"}, {"variants", {"adain"}}}); }),
            "variant");
  EXPECT_EQ(config_field([] { ExperimentPlan::from_json({{"kind", "baselines"}, {"seeds", json::array()}}); }),
            "seeds");
  EXPECT_EQ(config_field([] { ExperimentPlan::from_json({{"kind", "baselines"}, {"train", {{"crop", 0}}}}); }),
            "crop");
}

TEST(Verdict, TwoThirdsMajority) {
  EXPECT_TRUE((Verdict{"x", 2, 3}).pass());
  EXPECT_TRUE((Verdict{"x", 3, 3}).pass());
  EXPECT_FALSE((Verdict{"x", 1, 3}).pass());
  EXPECT_FALSE((Verdict{"x", 1, 2}).pass());
  EXPECT_FALSE((Verdict{"x", 0, 0}).pass());
}

class SmallData : public ::testing::Test {
 protected:
  static ImageDataset images(bool style, int n) {
    std::vector<Image> v;
    for (int i = 0; i < n; ++i) v.push_back(style ? synthetic_style(50 + i, 40, 40) : synthetic_content(10 + i, 40, 40));
    return ImageDataset::from_images(std::move(v));
  }
  std::shared_ptr<const Encoder> enc = make_tiny_encoder(0);
  ImageDataset content = images(false, 3);
  ImageDataset style = images(true, 2);
};

TEST_F(SmallData, BaselinesRunFourArmsPerSeed) {
  auto plan = ExperimentPlan::from_json({{"kind", "baselines"}, {"train", small_train()}, {"seeds", {0, 1}}});
  const auto s = run_baselines(plan, enc, content, style);
  ASSERT_EQ(s.arms.size(), 8u);
  for (const auto& a : s.arms) EXPECT_EQ(a.curve.size(), 3u);
  EXPECT_EQ(s.arm("concat-dec_seed1").group, "concat-dec");
  ASSERT_EQ(s.verdicts.size(), 3u);
  EXPECT_EQ(s.verdicts[0].seeds, 2);
  EXPECT_EQ(s.arm("adain-dec_seed0").final_loss.content, s.arm("adain-dec_seed0").curve.back().report.content);
}

TEST_F(SmallData, InVsBnRunsTheMatrix) {
  auto plan = ExperimentPlan::from_json({{"kind", "in-vs-bn"},
                                         {"train", small_train()},
                                         {"style_image", "unused.png"},
                                         {"preprocess", {"none", "contrast_eq"}},
                                         {"seeds", {3}}});
  std::vector<Image> eq;
  for (const auto& img : content.images()) eq.push_back(equalize_luminance(img));
  const std::vector<std::pair<InputPrep, ImageDataset>> data{{InputPrep::None, content},
                                                             {InputPrep::ContrastEq, ImageDataset::from_images(eq)}};
  const auto s = run_in_vs_bn(plan, enc, data, synthetic_style(9, 40, 40));
  ASSERT_EQ(s.arms.size(), 4u);
  EXPECT_NO_THROW(s.arm("in_none_seed3"));
  EXPECT_NO_THROW(s.arm("bn_contrast_eq_seed3"));
  ASSERT_EQ(s.verdicts.size(), 3u);
  EXPECT_NE(s.verdicts[2].claim.find("contrast_eq"), std::string::npos);
}

TEST(RunExperiment, WritesOutputsDeterministically) {
  const auto root = fresh_dir("run");
  write_synthetic_set(root / "content", SyntheticKind::Content, 3, 40, 1);
  write_synthetic_set(root / "style", SyntheticKind::Style, 2, 40, 1);
  json train = small_train();
  train["content_dir"] = (root / "content").string();
  train["style_dir"] = (root / "style").string();
  const auto plan = ExperimentPlan::from_json(
      {{"kind", "baselines"}, {"train", train}, {"variants", {"adain-dec", "concat-dec"}}, {"seeds", {0}}});
  run_experiment(plan, root / "a");
  run_experiment(plan, root / "b");
  for (const char* f : {"config.json", "summary.csv", "verdicts.txt", "curves/adain-dec_seed0.csv",
                        "curves/concat-dec_seed0.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(root / "a" / f)) << f;
    EXPECT_EQ(slurp(root / "a" / f), slurp(root / "b" / f)) << f;
  }
  EXPECT_EQ(ExperimentPlan::from_json(json::parse(slurp(root / "a" / "config.json"))).to_json(), plan.to_json());
  const auto verdicts = slurp(root / "a" / "verdicts.txt");
  EXPECT_TRUE(verdicts.rfind("PASS ", 0) == 0 || verdicts.rfind("FAIL ", 0) == 0);
}

TEST(Bench, RowsPerSizeAndEncodingIsASuperset) {
  const auto model = make_tiny_model(0);
  const auto r = run_bench(model, {32, 64}, 2, 0, 3);
  ASSERT_EQ(r.rows.size(), 2u);
  for (const auto& row : r.rows) {
    EXPECT_EQ(row.count, 2);
    EXPECT_GT(row.exclude_encoding, 0);
    EXPECT_LE(row.exclude_encoding, row.include_encoding);
  }
  EXPECT_EQ(r.cache_count, 3);
  EXPECT_GT(r.cached_total, 0);
  EXPECT_GT(r.full_total, 0);
  EXPECT_NE(r.to_table().find("not a target"), std::string::npos);
  EXPECT_EQ(r.to_csv().substr(0, r.to_csv().find('\n')), "size,count,exclude_encoding_s,include_encoding_s");
}

TEST(Bench, RejectsTooSmallSizes) {
  const auto model = make_tiny_model(0);
  EXPECT_EQ(config_field([&] { run_bench(model, {8}, 1); }), "sizes");
  EXPECT_EQ(config_field([&] { run_bench(model, {32}, 0); }), "count");
  EXPECT_EQ(config_field([&] { run_bench(model, {32}, 1, 0, -1); }), "cache_count");
}

TEST(Bench, ZeroCacheCountSkipsComparison) {
  const auto r = run_bench(make_tiny_model(0), {32}, 1, 0, 0);
  EXPECT_EQ(r.cache_count, 0);
  EXPECT_EQ(r.cached_total, 0);
  EXPECT_EQ(r.to_table().find("cached descriptor"), std::string::npos);
}

}  // namespace
}  // namespace adain
