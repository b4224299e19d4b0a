#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "adain/loss.hpp"
#include "adain/normalization.hpp"
#include "adain/ops.hpp"
#include "support/gradcheck.hpp"

namespace adain {
namespace {

using testing::random_tensorf;

Variable<float> var(Shape s, std::initializer_list<float> v) {
  return Variable<float>(Tensor<float>::from_values(s, v));
}

float scalar(const Variable<float>& v) { return v.value().data()[0]; }

TEST(ContentLoss, ZeroOnIdenticalAndOneForUnitShift) {
  std::mt19937_64 rng(1);
  const auto t = random_tensorf({2, 3, 4, 4}, rng);
  Tensor<float> shifted = t;
  shifted.array() += 1.f;
  EXPECT_EQ(scalar(content_loss(Variable<float>(t), Variable<float>(t))), 0.f);
  EXPECT_NEAR(scalar(content_loss(Variable<float>(t), Variable<float>(shifted))), 1.f, 1e-6);
}

TEST(ContentLoss, SymmetricAndShapeChecked) {
  std::mt19937_64 rng(2);
  const Variable<float> a(random_tensorf({1, 2, 3, 3}, rng));
  const Variable<float> b(random_tensorf({1, 2, 3, 3}, rng));
  EXPECT_EQ(scalar(content_loss(a, b)), scalar(content_loss(b, a)));
  EXPECT_THROW(content_loss(a, Variable<float>(Tensor<float>({1, 2, 3, 4}))), DimensionError);
}

TEST(StyleLoss, IdenticalFeaturesGiveZero) {
  std::mt19937_64 rng(3);
  FeatureMaps<float> f{{"relu1_1", "relu2_1"},
                       {Variable<float>(random_tensorf({2, 3, 8, 8}, rng)),
                        Variable<float>(random_tensorf({2, 5, 4, 4}, rng))}};
  const auto l = style_loss(f, f, 1e-5f);
  EXPECT_EQ(scalar(l.total), 0.f);
  ASSERT_EQ(l.per_layer.size(), 2u);
}

TEST(StyleLoss, MeanOffsetOfThreeFour) {
  // Output stats mu=(0,0), sigma=(1,1); style stats mu=(3,4), sigma=(1,1).
  FeatureMaps<float> out{{"a"}, {var({1, 2, 1, 2}, {-1, 1, -1, 1})}};
  FeatureMaps<float> style{{"a"}, {var({1, 2, 1, 2}, {2, 4, 3, 5})}};
  EXPECT_NEAR(scalar(style_loss(out, style, 1e-5f).total), 5.f, 1e-6);
}

TEST(StyleLoss, ScalingFeaturesIsPenalized) {
  std::mt19937_64 rng(4);
  const auto t = random_tensorf({1, 4, 6, 6}, rng);
  Tensor<float> doubled = t;
  doubled.array() *= 2.f;
  FeatureMaps<float> a{{"x"}, {Variable<float>(t)}};
  FeatureMaps<float> b{{"x"}, {Variable<float>(doubled)}};
  EXPECT_GT(scalar(style_loss(a, b, 1e-5f).total), 0.f);
}

TEST(StyleLoss, InvariantToSpatialPermutation) {
  std::mt19937_64 rng(5);
  const auto t = random_tensorf({2, 3, 5, 5}, rng);
  Tensor<float> permuted = t;
  for (Index n = 0; n < 2; ++n)
    for (Index c = 0; c < 3; ++c) {
      auto p = permuted.plane(n, c);
      std::reverse(p.data(), p.data() + p.size());
    }
  const Variable<float> s(random_tensorf({1, 3, 4, 4}, rng));
  FeatureMaps<float> a{{"x"}, {Variable<float>(t)}};
  FeatureMaps<float> b{{"x"}, {Variable<float>(permuted)}};
  FeatureMaps<float> st{{"x"}, {s}};
  EXPECT_NEAR(scalar(style_loss(a, st, 1e-5f).total), scalar(style_loss(b, st, 1e-5f).total), 1e-6);
}

TEST(StyleLoss, TapMismatchIsError) {
  FeatureMaps<float> a{{"x"}, {var({1, 1, 1, 1}, {1})}};
  FeatureMaps<float> b{{"y"}, {var({1, 1, 1, 1}, {1})}};
  EXPECT_THROW(style_loss(a, b, 1e-5f), DimensionError);
  EXPECT_THROW(gram_loss(a, b), DimensionError);
}

TEST(StyleLoss, ConsistentWithAdainTarget) {
  std::mt19937_64 rng(6);
  const Variable<float> x(random_tensorf({4, 64, 8, 8}, rng));
  const Variable<float> y(random_tensorf({1, 64, 8, 8}, rng, 0.f, 3.f));
  // eps=0 gives outputs whose channel statistics exactly match the style.
  const auto t = adain(x, y, 0.f);
  FeatureMaps<float> out{{"relu4_1"}, {t}};
  FeatureMaps<float> style{{"relu4_1"}, {y}};
  EXPECT_LT(scalar(style_loss(out, style, 1e-5f).total), 1e-4f);
}

TEST(TotalLoss, WeightedCombination) {
  EXPECT_EQ(total_loss(1.5, 2.0, 0.0).total, 1.5);
  const auto r = total_loss(1.0, 2.0, 10.0, {0.5, 1.5});
  EXPECT_EQ(r.total, 21.0);
  EXPECT_NEAR(r.total, r.content + r.lambda * r.style, 1e-12);
  EXPECT_THROW(total_loss(1.0, 1.0, -1.0), ConfigError);
}

TEST(TotalLoss, ReportLayersSumToStyle) {
  std::mt19937_64 rng(7);
  FeatureMaps<float> a{{"p", "q"},
                       {Variable<float>(random_tensorf({1, 3, 4, 4}, rng)),
                        Variable<float>(random_tensorf({1, 2, 2, 2}, rng))}};
  FeatureMaps<float> b{{"p", "q"},
                       {Variable<float>(random_tensorf({1, 3, 4, 4}, rng)),
                        Variable<float>(random_tensorf({1, 2, 2, 2}, rng))}};
  const auto s = style_loss(a, b, 1e-5f);
  const auto r = make_report(content_loss(a.maps[0], b.maps[0]), s, 10.0);
  EXPECT_NEAR(r.per_layer_style[0] + r.per_layer_style[1], r.style, 1e-12);
  EXPECT_NEAR(r.total, r.content + 10.0 * r.style, 1e-6);
}

TEST(GramLoss, HandComputedAndInvariances) {
  FeatureMaps<float> a{{"x"}, {var({1, 1, 1, 2}, {1, 0})}};
  FeatureMaps<float> b{{"x"}, {var({1, 1, 1, 2}, {0, 1})}};
  EXPECT_EQ(scalar(gram_loss(a, b)), 0.f);
  EXPECT_EQ(scalar(gram_loss(a, a)), 0.f);

  std::mt19937_64 rng(8);
  const auto t = random_tensorf({1, 3, 4, 4}, rng);
  Tensor<float> permuted = t;
  // Same permutation applied to every channel.
  for (Index c = 0; c < 3; ++c) {
    auto p = permuted.plane(0, c);
    std::reverse(p.data(), p.data() + p.size());
  }
  FeatureMaps<float> s{{"x"}, {Variable<float>(random_tensorf({1, 3, 4, 4}, rng))}};
  FeatureMaps<float> f1{{"x"}, {Variable<float>(t)}};
  FeatureMaps<float> f2{{"x"}, {Variable<float>(permuted)}};
  EXPECT_NEAR(scalar(gram_loss(f1, s)), scalar(gram_loss(f2, s)), 1e-7);
}

TEST(LossCsv, HeaderAndRow) {
  EXPECT_EQ(loss_csv_header({"relu1_1", "relu2_1"}), "iteration,content,style,total,relu1_1,relu2_1");
  EXPECT_EQ(loss_csv_row(3, total_loss(1.0, 0.5, 2.0, {0.25, 0.25})), "3,1,0.5,2,0.25,0.25");
}

}  // namespace
}  // namespace adain
