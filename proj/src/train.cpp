#include "adain/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <span>

#include "adain/adam.hpp"
#include "adain/bundle.hpp"
#include "adain/normalization.hpp"
#include "adain/ops.hpp"

namespace adain {

using nlohmann::json;

const char* to_string(Variant v) {
  switch (v) {
    case Variant::AdaINDec: return "adain-dec";
    case Variant::ConcatDec: return "concat-dec";
    case Variant::AdaINBNDec: return "adain-bndec";
    case Variant::AdaININDec: return "adain-indec";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  for (auto v : {Variant::AdaINDec, Variant::ConcatDec, Variant::AdaINBNDec, Variant::AdaININDec})
    if (name == to_string(v)) return v;
  throw ConfigError("variant", "unknown variant \"" + name +
                                   "\" (expected adain-dec, concat-dec, adain-bndec or adain-indec)");
}

Fusion variant_fusion(Variant v) { return v == Variant::ConcatDec ? Fusion::Concat : Fusion::AdaIN; }

NormKind variant_norm(Variant v) {
  if (v == Variant::AdaINBNDec) return NormKind::Batch;
  if (v == Variant::AdaININDec) return NormKind::Instance;
  return NormKind::None;
}

// ---------------------------------------------------------------------------

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.batch_size = 4;
  c.resize_target = 80;
  c.crop = 64;
  c.iterations = 500;
  return c;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size", "batch_size must be at least 1");
  if (crop < 1) throw ConfigError("crop", "crop must be at least 1");
  if (crop > resize_target) {
    throw ConfigError("crop", "crop " + std::to_string(crop) + " exceeds resize_target " +
                                  std::to_string(resize_target));
  }
  if (iterations < 1) throw ConfigError("iterations", "iterations must be at least 1");
  if (!std::isfinite(lambda) || lambda < 0) throw ConfigError("lambda", "lambda must be finite and >= 0");
  if (!std::isfinite(eps) || eps <= 0) throw ConfigError("eps", "eps must be positive");
  if (!std::isfinite(learning_rate) || learning_rate <= 0) {
    throw ConfigError("learning_rate", "learning_rate must be positive");
  }
  if (encoder.empty()) throw ConfigError("encoder", "encoder must name \"tiny\", \"reference\" or a bundle");
}

json TrainConfig::to_json() const {
  return {{"content_dir", content_dir.string()},
          {"style_dir", style_dir.string()},
          {"batch_size", batch_size},
          {"resize_target", resize_target},
          {"crop", crop},
          {"iterations", iterations},
          {"lambda", lambda},
          {"seed", seed},
          {"encoder", encoder},
          {"encoder_seed", encoder_seed},
          {"variant", to_string(variant)},
          {"eps", eps},
          {"learning_rate", learning_rate}};
}

namespace {

template <class T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j[key].get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(key, std::string("bad value for ") + key + ": " + e.what());
  }
}

}  // namespace

TrainConfig TrainConfig::from_json(const json& j, const TrainConfig& base) {
  if (!j.is_object()) throw ConfigError("config", "training config must be a JSON object");
  static const std::vector<std::string> known{"content_dir", "style_dir", "batch_size", "resize_target",
                                              "crop", "iterations", "lambda", "seed", "encoder",
                                              "encoder_seed", "variant", "eps", "learning_rate"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(key, "unknown training config key \"" + key + "\"");
    }
  }
  TrainConfig c = base;
  std::string s;
  if (j.contains("content_dir")) read_field(j, "content_dir", s), c.content_dir = s;
  if (j.contains("style_dir")) read_field(j, "style_dir", s), c.style_dir = s;
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "resize_target", c.resize_target);
  read_field(j, "crop", c.crop);
  read_field(j, "iterations", c.iterations);
  read_field(j, "lambda", c.lambda);
  read_field(j, "seed", c.seed);
  read_field(j, "encoder", c.encoder);
  read_field(j, "encoder_seed", c.encoder_seed);
  if (j.contains("variant")) read_field(j, "variant", s), c.variant = parse_variant(s);
  read_field(j, "eps", c.eps);
  read_field(j, "learning_rate", c.learning_rate);
  return c;
}

const char* to_string(InputPrep p) {
  switch (p) {
    case InputPrep::None: return "none";
    case InputPrep::ContrastEq: return "contrast_eq";
    case InputPrep::StyleNorm: return "style_norm";
  }
  return "?";
}

InputPrep parse_input_prep(const std::string& name) {
  for (auto p : {InputPrep::None, InputPrep::ContrastEq, InputPrep::StyleNorm})
    if (name == to_string(p)) return p;
  throw ConfigError("preprocess", "unknown preprocess \"" + name + "\" (expected none, contrast_eq or style_norm)");
}

void ExperimentConfig::validate() const {
  train.validate();
  if (norm_kind == NormKind::None) throw ConfigError("norm_kind", "norm_kind must be IN or BN");
  if (style_image.empty()) throw ConfigError("style_image", "style_image is required");
  if (seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (preprocess == InputPrep::StyleNorm) {
    if (!style_norm_model) throw ConfigError("style_norm_model", "preprocess=style_norm requires style_norm_model");
    if (!style_norm_style) throw ConfigError("style_norm_style", "preprocess=style_norm requires style_norm_style");
  }
}

// ---------------------------------------------------------------------------

void Curve::append(long iteration, LossReport report) {
  if (!points_.empty() && iteration <= points_.back().iteration) {
    throw ContractError("curve iterations must increase strictly (" + std::to_string(iteration) +
                        " after " + std::to_string(points_.back().iteration) + ")");
  }
  points_.push_back({iteration, std::move(report)});
}

namespace {

LossReport mean_report(const std::vector<const LossReport*>& reports) {
  if (reports.empty()) throw ContractError("mean of an empty set of loss reports");
  double content = 0, style = 0;
  std::vector<double> layers(reports.front()->per_layer_style.size(), 0.0);
  for (const auto* r : reports) {
    content += r->content;
    style += r->style;
    for (std::size_t i = 0; i < layers.size() && i < r->per_layer_style.size(); ++i) layers[i] += r->per_layer_style[i];
  }
  const double n = static_cast<double>(reports.size());
  for (auto& v : layers) v /= n;
  return total_loss(content / n, style / n, reports.front()->lambda, std::move(layers));
}

}  // namespace

LossReport Curve::window_mean(long first, long last) const {
  std::vector<const LossReport*> sel;
  for (const auto& p : points_)
    if (p.iteration >= first && p.iteration <= last) sel.push_back(&p.report);
  return mean_report(sel);
}

LossReport Curve::tail_mean(double fraction) const {
  if (points_.empty()) throw ContractError("tail mean of an empty curve");
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * points_.size())));
  const auto k = std::min(n, points_.size());
  return window_mean(points_[points_.size() - k].iteration, points_.back().iteration);
}

std::string Curve::to_csv() const {
  std::string out = loss_csv_header(layers_) + "\n";
  for (const auto& p : points_) out += loss_csv_row(p.iteration, p.report) + "\n";
  return out;
}

void Curve::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path);
  f << to_csv();
  if (!f) throw IoError("cannot write " + path.string());
}

// ---------------------------------------------------------------------------

ImageDataset ImageDataset::load(const std::filesystem::path& dir, int resize_target,
                                const Transform& transform, const std::string& field) {
  if (dir.empty() || !std::filesystem::is_directory(dir)) {
    throw ConfigError(field, field + " " + dir.string() + " is not a directory");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw ConfigError(field, field + " " + dir.string() + " is empty");

  ImageDataset d;
  for (const auto& f : files) {
    try {
      Image img = resize_target > 0 ? resize_smallest_side(load_image(f), resize_target) : load_image(f);
      d.images_.push_back(transform ? transform(img) : std::move(img));
      d.files_.push_back(f);
    } catch (const IoError& e) {
      d.warnings_.push_back("skipping " + f.string() + ": " + e.what());
      std::cerr << "warning: " << d.warnings_.back() << "\n";
    }
  }
  if (d.images_.empty()) throw ConfigError(field, "no decodable images in " + dir.string());
  return d;
}

ImageDataset ImageDataset::from_images(std::vector<Image> images) {
  if (images.empty()) throw ConfigError("images", "dataset needs at least one image");
  ImageDataset d;
  d.images_ = std::move(images);
  return d;
}

Tensorf stack_batch(const std::vector<Tensorf>& items) {
  if (items.empty()) throw DimensionError("cannot stack an empty list");
  const Shape s = items.front().shape();
  if (s.n != 1) throw DimensionError("stack_batch expects single-sample tensors");
  Tensorf out({static_cast<Index>(items.size()), s.c, s.h, s.w});
  const Index per = s.size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!(items[i].shape() == s)) {
      throw DimensionError("cannot stack " + items[i].shape().str() + " with " + s.str());
    }
    std::copy_n(items[i].data(), per, out.data() + static_cast<Index>(i) * per);
  }
  return out;
}

Tensorf sample_crops(const ImageDataset& data, int batch, int crop, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<Tensorf> crops;
  for (int b = 0; b < batch; ++b) {
    const Image& img = data.images()[pick(rng)];
    const auto window = random_crop_window(img.shape().h, img.shape().w, crop, rng());
    crops.push_back(adain::crop(img, window, crop));
  }
  return stack_batch(crops);
}

std::pair<Tensorf, Tensorf> make_batch(const ImageDataset& content, const ImageDataset& style,
                                       const TrainConfig& cfg, std::mt19937_64& rng) {
  Tensorf c = sample_crops(content, cfg.batch_size, cfg.crop, rng);
  Tensorf s = sample_crops(style, cfg.batch_size, cfg.crop, rng);
  return {std::move(c), std::move(s)};
}

// ---------------------------------------------------------------------------

namespace {

struct StepInputs {
  Tensorf decoder_input;
  Tensorf content_target;
  FeatureMaps<float> style_taps;
};

FeatureMaps<float> constant_taps(const Encoder& enc, const Tensorf& images) {
  NoGradGuard guard;
  return enc.forward(Variable<float>(images));
}

void check_term(long it, const char* term, double v) {
  if (!std::isfinite(v)) {
    throw TrainingError(it, term, std::string(term) + " loss is not finite at iteration " + std::to_string(it));
  }
}

void check_report(long it, const LossReport& r, const std::vector<std::string>& layers) {
  check_term(it, "content", r.content);
  for (std::size_t i = 0; i < r.per_layer_style.size(); ++i) {
    const std::string term = "style:" + (i < layers.size() ? layers[i] : std::to_string(i));
    if (!std::isfinite(r.per_layer_style[i])) {
      throw TrainingError(it, term, term + " loss is not finite at iteration " + std::to_string(it));
    }
  }
  check_term(it, "style", r.style);
  check_term(it, "total", r.total);
}

// Adam on the decoder; the encoder is only read.
Curve fit_decoder(const Encoder& enc, Sequential& dec, int iterations, double lambda, double lr, float eps,
                  const std::function<StepInputs(long)>& next, const ProgressFn& progress) {
  const auto encoder_hash = enc.fingerprint();
  dec.set_trainable(true);
  auto params = dec.trainable_variables();
  AdamState<float> adam(AdamOptions{lr});
  Curve curve(enc.tap_names());
  for (long it = 1; it <= iterations; ++it) {
    StepInputs in;
    try {
      in = next(it);
    } catch (const NumericError& e) {
      throw TrainingError(it, "input", std::string("encoding the batch failed at iteration ") +
                                           std::to_string(it) + ": " + e.what());
    }
    LossReport report;
    Variable<float> total;
    try {
      const auto out = dec.forward(Variable<float>(in.decoder_input), ForwardMode::Training, eps);
      const auto taps = enc.forward(out);
      const auto lc = content_loss(taps.last(), Variable<float>(in.content_target));
      const auto ls = style_loss(taps, in.style_taps, eps);
      total = weighted_total(lc, ls.total, static_cast<float>(lambda));
      report = make_report(lc, ls, lambda);
    } catch (const TrainingError&) {
      throw;
    } catch (const NumericError& e) {
      throw TrainingError(it, "forward", std::string("forward pass failed at iteration ") +
                                             std::to_string(it) + ": " + e.what());
    }
    check_report(it, report, curve.layer_names());
    for (auto& p : params) p.zero_grad();
    try {
      total.backward();
      adam_step(std::span<Variable<float>>(params), adam);
    } catch (const NumericError& e) {
      throw TrainingError(it, "backward", std::string("backward pass failed at iteration ") +
                                              std::to_string(it) + ": " + e.what());
    }
    curve.append(it, report);
    if (progress) progress(curve.back());
  }
  dec.set_trainable(false);
  if (enc.fingerprint() != encoder_hash) throw ContractError("encoder weights changed during training");
  return curve;
}

}  // namespace

TrainResult train_decoder(const TrainConfig& cfg, std::shared_ptr<const Encoder> encoder,
                          const ImageDataset& content, const ImageDataset& style, const ProgressFn& progress) {
  cfg.validate();
  const auto fusion = variant_fusion(cfg.variant);
  const float eps = static_cast<float>(cfg.eps);
  StyleTransferModel model(encoder, make_decoder(*encoder, variant_norm(cfg.variant), fusion, cfg.seed), fusion, eps);
  std::mt19937_64 rng(cfg.seed ^ 0x5eed'ba7c'0000'0001ull);
  const Encoder& enc = *encoder;

  auto next = [&](long) {
    auto [c, s] = make_batch(content, style, cfg, rng);
    NoGradGuard guard;
    StepInputs in;
    const Tensorf fc = enc.features(Variable<float>(c)).value();
    in.style_taps = enc.forward(Variable<float>(s));
    const Tensorf& fs = in.style_taps.last().value();
    if (fusion == Fusion::Concat) {
      in.decoder_input = concat_channels(Variable<float>(fc), Variable<float>(fs)).value();
      in.content_target = fc;
    } else {
      in.decoder_input = adain(Variable<float>(fc), Variable<float>(fs), eps).value();
      in.content_target = in.decoder_input;
    }
    return in;
  };
  Curve curve = fit_decoder(enc, model.decoder(), cfg.iterations, cfg.lambda, cfg.learning_rate, eps, next, progress);
  return {std::move(model), std::move(curve)};
}

TrainResult train_decoder(const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  auto encoder = load_encoder(cfg.encoder, cfg.encoder_seed);
  const auto content = ImageDataset::load(cfg.content_dir, cfg.resize_target, {}, "content_dir");
  const auto style = ImageDataset::load(cfg.style_dir, cfg.resize_target, {}, "style_dir");
  return train_decoder(cfg, std::move(encoder), content, style, progress);
}

TrainResult train_baseline(const TrainConfig& cfg, const ProgressFn& progress) {
  return train_decoder(cfg, progress);
}

// ---------------------------------------------------------------------------

Image style_normalize(const StyleTransferModel& model, const Image& img, const StyleDescriptor& style) {
  Image out = clamp_unit(model.transfer(img, style));
  if (!(out.shape() == img.shape())) out = resize_bilinear(out, img.shape().h, img.shape().w);
  return out;
}

ImageDataset load_experiment_content(const ExperimentConfig& cfg) {
  cfg.validate();
  ImageDataset::Transform transform;
  switch (cfg.preprocess) {
    case InputPrep::None:
      break;
    case InputPrep::ContrastEq:
      transform = [](const Image& img) { return equalize_luminance(img); };
      break;
    case InputPrep::StyleNorm: {
      auto model = std::make_shared<StyleTransferModel>(load_model(cfg.style_norm_model->string()));
      auto style = std::make_shared<StyleDescriptor>(model->encode_style(load_image(*cfg.style_norm_style)));
      transform = [model, style](const Image& img) { return style_normalize(*model, img, *style); };
      break;
    }
  }
  return ImageDataset::load(cfg.train.content_dir, cfg.train.resize_target, transform, "content_dir");
}

Curve train_single_style(const ExperimentConfig& cfg, std::uint64_t seed, std::shared_ptr<const Encoder> encoder,
                         const ImageDataset& content, const Image& style, const ProgressFn& progress) {
  cfg.validate();
  check_image(style);
  const auto& t = cfg.train;
  const float eps = static_cast<float>(t.eps);
  const Encoder& enc = *encoder;
  Sequential dec = make_decoder(enc, cfg.norm_kind, Fusion::None, seed);
  const auto style_taps = constant_taps(enc, style);
  std::mt19937_64 rng(seed ^ 0x5eed'ba7c'0000'0002ull);
  auto next = [&](long) {
    const Tensorf c = sample_crops(content, t.batch_size, t.crop, rng);
    NoGradGuard guard;
    StepInputs in;
    in.decoder_input = enc.features(Variable<float>(c)).value();
    in.content_target = in.decoder_input;
    in.style_taps = style_taps;
    return in;
  };
  return fit_decoder(enc, dec, t.iterations, t.lambda, t.learning_rate, eps, next, progress);
}

Curve train_single_style(const ExperimentConfig& cfg, std::uint64_t seed, const ProgressFn& progress) {
  cfg.validate();
  auto encoder = load_encoder(cfg.train.encoder, cfg.train.encoder_seed);
  const auto content = load_experiment_content(cfg);
  return train_single_style(cfg, seed, std::move(encoder), content, load_image(cfg.style_image), progress);
}

// ---------------------------------------------------------------------------

std::string EvalResult::to_csv() const {
  std::string out = "content_index,style_index,content,style,total";
  for (const auto& n : layer_names) out += "," + n;
  out += "\n";
  for (const auto& r : rows) {
    // loss_csv_row leads with one index; prepend the other.
    out += std::to_string(r.content_index) + "," + loss_csv_row(static_cast<long>(r.style_index), r.report) + "\n";
  }
  return out;
}

LossReport score(const StyleTransferModel& model, const Image& output, const Tensorf& target,
                 const FeatureMaps<float>& style_taps, double lambda) {
  NoGradGuard guard;
  const auto taps = model.encode(output);
  const auto lc = content_loss(taps.last(), Variable<float>(target));
  const auto ls = style_loss(taps, style_taps, model.eps());
  return make_report(lc, ls, lambda);
}

namespace {

template <class OutputFn>
EvalResult evaluate_pairs(const StyleTransferModel& model, const std::vector<Image>& contents,
                          const std::vector<Image>& styles, double lambda, OutputFn output) {
  if (contents.empty() || styles.empty()) throw ConfigError("images", "evaluation needs content and style images");
  EvalResult result;
  result.layer_names = model.encoder().tap_names();
  std::vector<FeatureMaps<float>> style_taps;
  for (const auto& s : styles) style_taps.push_back(model.encode(s));
  for (std::size_t i = 0; i < contents.size(); ++i) {
    const Tensorf fc = model.features(contents[i]);
    for (std::size_t j = 0; j < styles.size(); ++j) {
      const Tensorf t = model.fuse(fc, style_taps[j].last().value());
      const Tensorf& target = model.fusion() == Fusion::AdaIN ? t : fc;
      result.rows.push_back({i, j, score(model, output(contents[i], t), target, style_taps[j], lambda)});
    }
  }
  std::vector<const LossReport*> all;
  for (const auto& r : result.rows) all.push_back(&r.report);
  result.mean = mean_report(all);
  return result;
}

}  // namespace

EvalResult evaluate(const StyleTransferModel& model, const std::vector<Image>& contents,
                    const std::vector<Image>& styles, double lambda) {
  return evaluate_pairs(model, contents, styles, lambda,
                        [&](const Image&, const Tensorf& t) { return clamp_unit(model.decode(t)); });
}

EvalResult evaluate_raw_content(const StyleTransferModel& model, const std::vector<Image>& contents,
                                const std::vector<Image>& styles, double lambda) {
  return evaluate_pairs(model, contents, styles, lambda, [](const Image& c, const Tensorf&) { return c; });
}

// ---------------------------------------------------------------------------

OptimizeResult optimize_image(const Encoder& enc, const Image& content, const Image& style, int iterations,
                              double lambda, double step, float eps) {
  if (iterations < 1) throw ConfigError("iterations", "iterations must be at least 1");
  if (!std::isfinite(step) || step <= 0) throw ConfigError("step", "step must be positive");
  check_image(content);
  check_image(style);
  const Tensorf target = constant_taps(enc, content).last().value();
  const auto style_taps = constant_taps(enc, style);
  std::vector<Variable<float>> x{Variable<float>(content, true)};
  AdamState<float> adam(AdamOptions{step});
  Curve curve(enc.tap_names());
  for (long it = 1; it <= iterations; ++it) {
    LossReport report;
    Variable<float> total;
    try {
      const auto taps = enc.forward(x[0]);
      const auto lc = content_loss(taps.last(), Variable<float>(target));
      const auto ls = style_loss(taps, style_taps, eps);
      total = weighted_total(lc, ls.total, static_cast<float>(lambda));
      report = make_report(lc, ls, lambda);
    } catch (const NumericError& e) {
      throw TrainingError(it, "forward", std::string("forward pass failed at iteration ") +
                                             std::to_string(it) + ": " + e.what());
    }
    check_report(it, report, curve.layer_names());
    curve.append(it, report);
    x[0].zero_grad();
    total.backward();
    adam_step(std::span<Variable<float>>(x), adam);
  }
  return {clamp_unit(x[0].value()), std::move(curve)};
}

}  // namespace adain
