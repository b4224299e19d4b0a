#include <gtest/gtest.h>

#include <random>

#include "adain/model.hpp"
#include "adain/ops.hpp"
#include "support/gradcheck.hpp"

namespace adain {
namespace {

using testing::random_tensorf;

Image random_image(Index h, Index w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_tensorf({1, 3, h, w}, rng);
}

TEST(Encoder, TinyTapShapes) {
  const auto enc = make_tiny_encoder(0);
  NoGradGuard guard;
  const auto f = enc->forward(Variable<float>(random_image(64, 64, 1)));
  ASSERT_EQ(f.names, (std::vector<std::string>{"relu1_1", "relu2_1", "relu3_1", "relu4_1"}));
  EXPECT_EQ(f.maps[0].shape(), (Shape{1, 16, 64, 64}));
  EXPECT_EQ(f.maps[1].shape(), (Shape{1, 32, 32, 32}));
  EXPECT_EQ(f.maps[2].shape(), (Shape{1, 64, 16, 16}));
  EXPECT_EQ(f.last().shape(), (Shape{1, 64, 8, 8}));
  EXPECT_EQ(enc->last_tap(), "relu4_1");
}

TEST(Encoder, ReferenceRelu41Shape) {
  const auto enc = make_reference_encoder(0);
  NoGradGuard guard;
  const auto f = enc->features(Variable<float>(random_image(256, 256, 2)));
  EXPECT_EQ(f.shape(), (Shape{1, 512, 32, 32}));
  EXPECT_EQ(enc->tap_names(), (std::vector<std::string>{"relu1_1", "relu2_1", "relu3_1", "relu4_1"}));
}

TEST(Encoder, DeterministicFrozenAndSizeChecked) {
  const auto enc = make_tiny_encoder(3);
  const auto img = random_image(32, 24, 4);
  NoGradGuard guard;
  EXPECT_EQ(enc->features(Variable<float>(img)).value(), enc->features(Variable<float>(img)).value());
  EXPECT_TRUE(enc->network().trainable_variables().empty());
  EXPECT_EQ(enc->min_input_size(), 16);
  EXPECT_NO_THROW(enc->features(Variable<float>(random_image(16, 16, 5))));
  EXPECT_THROW(enc->features(Variable<float>(random_image(15, 32, 5))), DimensionError);
  EXPECT_THROW(enc->features(Variable<float>(Tensorf({1, 1, 32, 32}))), DimensionError);
}

TEST(Encoder, PreprocessScalesShiftsAndReorders) {
  Preprocess pre;
  pre.scale = 2.f;
  pre.mean = {0.f, 0.f, 0.f};
  pre.std = {1.f, 2.f, 4.f};
  pre.order = "BGR";
  Encoder enc({LayerSpec::conv("id", 3, 3, 1), LayerSpec::relu("out", true)}, pre);
  Sequential& net = enc.mutable_network();
  for (auto& p : net.parameters()) {
    auto& v = p.value->mutable_value();
    v.array().setZero();
    if (p.name == "encoder.id.weight")
      for (Index c = 0; c < 3; ++c) v(c, c, 0, 0) = 1.f;
  }
  const auto img = random_image(4, 4, 6);
  NoGradGuard guard;
  const auto out = enc.features(Variable<float>(img)).value();
  for (Index h = 0; h < 4; ++h)
    for (Index w = 0; w < 4; ++w) {
      EXPECT_FLOAT_EQ(out(0, 0, h, w), 2.f * img(0, 2, h, w) / 1.f);
      EXPECT_FLOAT_EQ(out(0, 1, h, w), 2.f * img(0, 1, h, w) / 2.f);
      EXPECT_FLOAT_EQ(out(0, 2, h, w), 2.f * img(0, 0, h, w) / 4.f);
    }
  pre.order = "GBR";
  EXPECT_THROW(Encoder({LayerSpec::conv("id", 3, 3, 1), LayerSpec::relu("out", true)}, pre), ConfigError);
}

TEST(Sequential, RejectsInconsistentTables) {
  EXPECT_THROW(Sequential("x", {LayerSpec::conv("a", 3, 8), LayerSpec::conv("b", 4, 8)}), ConfigError);
  EXPECT_THROW(Sequential("x", {LayerSpec::relu("r")}), ConfigError);
  EXPECT_THROW(Sequential("x", {LayerSpec::conv("a", 3, 8, 2)}), ConfigError);
  EXPECT_THROW(Sequential("x", {LayerSpec::conv("a", 3, 8),
                                LayerSpec::norm(LayerKind::InstanceNorm, "n", 4)}),
               ConfigError);
}

TEST(Decoder, ShapesAndNormPlacement) {
  const auto plain = tiny_decoder_layers(64);
  for (const auto& l : plain) {
    EXPECT_NE(l.kind, LayerKind::InstanceNorm);
    EXPECT_NE(l.kind, LayerKind::BatchNorm);
  }
  for (NormKind norm : {NormKind::Instance, NormKind::Batch}) {
    const auto layers = tiny_decoder_layers(64, norm);
    int convs = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].kind != LayerKind::Conv) continue;
      ++convs;
      const bool last = i + 1 == layers.size();
      if (!last) {
        EXPECT_EQ(layers[i + 1].kind, norm == NormKind::Instance ? LayerKind::InstanceNorm
                                                                 : LayerKind::BatchNorm);
      }
    }
    EXPECT_EQ(convs, 5);
    EXPECT_EQ(layers.back().kind, LayerKind::Conv);
    EXPECT_EQ(layers.back().out_channels, 3);
  }
  const auto concat = make_tiny_model(0, NormKind::None, Fusion::Concat);
  EXPECT_EQ(concat.decoder().input_channels(), 2 * make_tiny_model(0).decoder().input_channels());
  EXPECT_EQ(make_reference_model(0).decoder().input_channels(), 512);
}

TEST(Decoder, UntrainedOutputFiniteShapedAndDeterministic) {
  const auto model = make_tiny_model(1);
  std::mt19937_64 rng(7);
  const auto t = random_tensorf({2, 64, 4, 5}, rng);
  const auto out = model.decode(t);
  EXPECT_EQ(out.shape(), (Shape{2, 3, 32, 40}));
  EXPECT_TRUE(out.all_finite());
  EXPECT_EQ(out, model.decode(t));
  EXPECT_THROW(model.decode(random_tensorf({1, 32, 4, 4}, rng)), DimensionError);
}

TEST(Model, TransferIsDecodeOfAdain) {
  const auto model = make_tiny_model(2);
  const auto c = random_image(32, 48, 8);
  const auto s = random_image(40, 40, 9);
  const auto out = model.transfer(c, s);
  NoGradGuard guard;
  const auto t = adain(Variable<float>(model.features(c)), Variable<float>(model.features(s)), model.eps());
  EXPECT_EQ(out, model.decode(t.value()));
  EXPECT_EQ(out.shape(), c.shape());
  EXPECT_EQ(out, model.transfer(c, s));
}

TEST(Model, SelfTransferIsReconstructionAtFeatureLevel) {
  const auto model = make_tiny_model(3);
  const auto c = random_image(32, 32, 10);
  const auto fc = model.features(c);
  const auto t = model.fuse(fc, fc);
  const float scale = fc.array().abs().maxCoeff();
  EXPECT_LT((t.array() - fc.array()).abs().maxCoeff(), 1e-4f * scale);
}

TEST(Model, TransferIsNotCommutative) {
  const auto model = make_tiny_model(4);
  const auto a = random_image(32, 32, 11);
  Image b = random_image(32, 32, 12);
  b.array() = b.array() * 0.3f + 0.5f;
  EXPECT_GT((model.transfer(a, b).array() - model.transfer(b, a).array()).abs().maxCoeff(), 1e-3f);
}

TEST(Model, OutputDimsAreMultiplesOfEight) {
  const auto model = make_tiny_model(5);
  EXPECT_EQ(model.transfer(random_image(20, 36, 13), random_image(16, 16, 14)).shape(),
            (Shape{1, 3, 16, 32}));
}

TEST(Model, DescriptorMatchesDirectTransfer) {
  const auto model = make_tiny_model(6);
  const auto c = random_image(24, 32, 15);
  const auto s = random_image(32, 16, 16);
  const auto d = model.encode_style(s);
  EXPECT_EQ(d.channels(), 64);
  EXPECT_EQ(model.transfer(c, d), model.transfer(c, s));
}

TEST(Model, ReferenceDescriptorHas512Channels) {
  const auto model = make_reference_model(0);
  EXPECT_EQ(model.encode_style(random_image(32, 32, 17)).channels(), 512);
}

TEST(Model, ConstantImageDescriptorSigmaIsSqrtEps) {
  const auto model = make_tiny_model(7);
  const auto d = model.encode_style(Image::constant({1, 3, 32, 32}, 0.5f));
  for (Index c = 0; c < d.channels(); ++c) EXPECT_NEAR(d.sigma[c], std::sqrt(model.eps()), 1e-7);
}

TEST(Model, RejectsMismatchedDecoder) {
  auto enc = make_tiny_encoder(0);
  auto dec = make_decoder(*enc, NormKind::None, Fusion::Concat, 1);
  EXPECT_THROW(StyleTransferModel(enc, dec, Fusion::AdaIN), ConfigError);
  EXPECT_NO_THROW(StyleTransferModel(enc, dec, Fusion::Concat));
}

}  // namespace
}  // namespace adain
