#pragma once

#include <array>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "asos/common.hpp"
#include "asos/nn/layers.hpp"

namespace asos::nn {

/// Network hyperparameters. Defaults reproduce the reference setup for
/// 10-band tiles with a 3-channel activation map and 256 px classifier input.
struct ModelConfig {
  std::size_t n_in = 10;
  std::size_t n_m = 3;
  std::array<std::size_t, 4> encoder_widths = {22, 44, 88, 176};
  std::size_t classifier_kernel = 5;
  std::size_t classifier_stride = 3;
  std::size_t classifier_hidden = 128;
  std::size_t classifier_tile = 256;

  std::size_t bottleneck_width() const { return 2 * encoder_widths[3]; }

  /// Spatial size after one valid strided conv.
  static std::size_t conv_out(std::size_t in, std::size_t k, std::size_t s) {
    if (in < k) throw ConfigError("classifier input smaller than kernel");
    return (in - k) / s + 1;
  }

  /// Flattened feature count entering the classifier head.
  std::size_t classifier_flat() const {
    std::size_t s = classifier_tile;
    for (int i = 0; i < 3; ++i)
      s = conv_out(s, classifier_kernel, classifier_stride);
    return 8 * n_m * s * s;
  }

  void validate() const {
    if (n_in == 0) throw ConfigError("n_in must be positive");
    if (n_m == 0) throw ConfigError("n_m must be positive");
    for (std::size_t w : encoder_widths)
      if (w == 0) throw ConfigError("encoder widths must be positive");
    if (classifier_stride == 0)
      throw ConfigError("classifier stride must be positive");
    if (classifier_hidden == 0)
      throw ConfigError("classifier hidden width must be positive");
    if (classifier_tile % 16 != 0)
      throw ConfigError("classifier tile size must be divisible by 16");
    classifier_flat();  // throws if the conv chain collapses below the kernel
  }

  nlohmann::json to_json() const {
    return {{"n_in", n_in},
            {"n_m", n_m},
            {"encoder_widths", encoder_widths},
            {"classifier_kernel", classifier_kernel},
            {"classifier_stride", classifier_stride},
            {"classifier_hidden", classifier_hidden},
            {"classifier_tile", classifier_tile}};
  }

  static ModelConfig from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.n_in = j.at("n_in").get<std::size_t>();
    c.n_m = j.at("n_m").get<std::size_t>();
    auto w = j.at("encoder_widths").get<std::vector<std::size_t>>();
    if (w.size() != 4) throw ConfigError("encoder_widths must have 4 entries");
    std::copy(w.begin(), w.end(), c.encoder_widths.begin());
    c.classifier_kernel = j.at("classifier_kernel").get<std::size_t>();
    c.classifier_stride = j.at("classifier_stride").get<std::size_t>();
    c.classifier_hidden = j.at("classifier_hidden").get<std::size_t>();
    c.classifier_tile = j.at("classifier_tile").get<std::size_t>();
    c.validate();
    return c;
  }
};

/// Encoder-decoder that maps (n, n_in, h, w) input to a tanh-bounded
/// activation map (n, n_m, h, w). One conv per step, batch norm after every
/// conv except the output conv, 2x max pooling down and bilinear 2x up,
/// skip concatenations between mirrored steps.
template <typename T>
class EncoderDecoderT {
 public:
  explicit EncoderDecoderT(const ModelConfig& cfg) : cfg_(cfg) {
    const auto& ew = cfg.encoder_widths;
    std::size_t prev = cfg.n_in;
    for (int i = 0; i < 4; ++i) {
      enc_conv_.emplace_back(prev, ew[i], 3, 1, 1);
      enc_bn_.emplace_back(ew[i]);
      prev = ew[i];
    }
    bott_conv_ =
        std::make_unique<Conv2d<T>>(ew[3], cfg.bottleneck_width(), 3, 1, 1);
    bott_bn_ = std::make_unique<BatchNorm2d<T>>(cfg.bottleneck_width());
    prev = cfg.bottleneck_width();
    for (int i = 3; i >= 0; --i) {
      dec_conv_.emplace_back(prev + ew[i], ew[i], 3, 1, 1);
      dec_bn_.emplace_back(ew[i]);
      prev = ew[i];
    }
    out_conv_ = std::make_unique<Conv2d<T>>(ew[0], cfg.n_m, 1, 1, 0);
    enc_relu_.resize(4);
    dec_relu_.resize(4);
    pool_.resize(4);
    up_.resize(4);
  }

  void init(std::mt19937_64& rng) {
    const float relu_gain = std::sqrt(2.0f);
    for (auto& c : enc_conv_) c.init(rng, relu_gain);
    bott_conv_->init(rng, relu_gain);
    for (auto& c : dec_conv_) c.init(rng, relu_gain);
    out_conv_->init(rng, 1.0f);  // feeds tanh
  }

  /// Throws DataError when spatial dims are not divisible by 16; callers
  /// should zero-pad to the next multiple and crop the result.
  static void check_spatial(std::size_t h, std::size_t w) {
    if (h % 16 != 0 || w % 16 != 0)
      throw DataError(
          "input spatial size " + std::to_string(h) + "x" + std::to_string(w) +
          " is not divisible by 16; pad to " +
          std::to_string((h + 15) / 16 * 16) + "x" +
          std::to_string((w + 15) / 16 * 16) + " and crop the output");
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    if (x.rank() != 4 || x.dim(1) != cfg_.n_in)
      throw DataError("encoder-decoder expects (n, " +
                      std::to_string(cfg_.n_in) + ", h, w) input");
    check_spatial(x.dim(2), x.dim(3));
    std::array<Tensor<T>, 4> skips;
    Tensor<T> t = x;
    for (int i = 0; i < 4; ++i) {
      t = enc_relu_[i].forward(
          enc_bn_[i].forward(enc_conv_[i].forward(t, training), training),
          training);
      skips[i] = t;
      t = pool_[i].forward(t, training);
    }
    t = bott_relu_.forward(
        bott_bn_->forward(bott_conv_->forward(t, training), training),
        training);
    for (int i = 0; i < 4; ++i) {
      t = up_[i].forward(t, training);
      t = concat_channels(t, skips[3 - i]);
      t = dec_relu_[i].forward(
          dec_bn_[i].forward(dec_conv_[i].forward(t, training), training),
          training);
    }
    return out_tanh_.forward(out_conv_->forward(t, training), training);
  }

  Tensor<T> backward(const Tensor<T>& dm) {
    Tensor<T> d = out_conv_->backward(out_tanh_.backward(dm));
    std::array<Tensor<T>, 4> skip_grads;  // indexed by encoder step
    for (int i = 3; i >= 0; --i) {
      const auto ii = std::size_t(i);
      d = dec_conv_[ii].backward(
          dec_bn_[ii].backward(dec_relu_[ii].backward(d)));
      const std::size_t up_ch = i == 0
                                    ? cfg_.bottleneck_width()
                                    : cfg_.encoder_widths[std::size_t(4 - i)];
      auto [dup, dskip] =
          split_channels(d, up_ch, cfg_.encoder_widths[std::size_t(3 - i)]);
      skip_grads[std::size_t(3 - i)] = std::move(dskip);
      d = up_[ii].backward(dup);
    }
    d = bott_conv_->backward(bott_bn_->backward(bott_relu_.backward(d)));
    for (int i = 3; i >= 0; --i) {
      const auto ii = std::size_t(i);
      d = pool_[ii].backward(d);
      for (std::size_t p = 0; p < d.size(); ++p) d[p] += skip_grads[ii][p];
      d = enc_conv_[ii].backward(
          enc_bn_[ii].backward(enc_relu_[ii].backward(d)));
    }
    return d;
  }

  void visit_params(const ParamVisitor<T>& fn) {
    for (int i = 0; i < 4; ++i) {
      enc_conv_[i].visit_params("enc" + std::to_string(i + 1) + ".conv", fn);
      enc_bn_[i].visit_params("enc" + std::to_string(i + 1) + ".bn", fn);
    }
    bott_conv_->visit_params("bottleneck.conv", fn);
    bott_bn_->visit_params("bottleneck.bn", fn);
    for (int i = 0; i < 4; ++i) {
      dec_conv_[i].visit_params("dec" + std::to_string(4 - i) + ".conv", fn);
      dec_bn_[i].visit_params("dec" + std::to_string(4 - i) + ".bn", fn);
    }
    out_conv_->visit_params("out.conv", fn);
  }

  void visit_buffers(const BufferVisitor<T>& fn) {
    for (int i = 0; i < 4; ++i)
      enc_bn_[i].visit_buffers("enc" + std::to_string(i + 1) + ".bn", fn);
    bott_bn_->visit_buffers("bottleneck.bn", fn);
    for (int i = 0; i < 4; ++i)
      dec_bn_[i].visit_buffers("dec" + std::to_string(4 - i) + ".bn", fn);
  }

  std::size_t n_params() {
    std::size_t n = 0;
    visit_params([&](const std::string&, Param<T>& p) { n += p.value.size(); });
    return n;
  }

 private:
  ModelConfig cfg_;
  std::vector<Conv2d<T>> enc_conv_;
  std::vector<BatchNorm2d<T>> enc_bn_;
  std::vector<ReLU<T>> enc_relu_;
  std::vector<MaxPool2d<T>> pool_;
  std::unique_ptr<Conv2d<T>> bott_conv_;
  std::unique_ptr<BatchNorm2d<T>> bott_bn_;
  ReLU<T> bott_relu_;
  std::vector<BilinearUp2x<T>> up_;
  std::vector<Conv2d<T>> dec_conv_;
  std::vector<BatchNorm2d<T>> dec_bn_;
  std::vector<ReLU<T>> dec_relu_;
  std::unique_ptr<Conv2d<T>> out_conv_;
  Tanh<T> out_tanh_;
};

/// Maps an activation map (n, n_m, tile, tile) to class scores in (0, 1).
/// Three valid strided convs widen channels n_m -> 8 n_m, then a two-layer
/// head. The flatten binds the network to one spatial size.
template <typename T>
class ClassifierT {
 public:
  explicit ClassifierT(const ModelConfig& cfg)
      : cfg_(cfg),
        fc1_(cfg.classifier_flat(), cfg.classifier_hidden),
        fc2_(cfg.classifier_hidden, 1) {
    const std::size_t k = cfg.classifier_kernel, s = cfg.classifier_stride;
    conv_.emplace_back(cfg.n_m, 2 * cfg.n_m, k, s, 0);
    conv_.emplace_back(2 * cfg.n_m, 4 * cfg.n_m, k, s, 0);
    conv_.emplace_back(4 * cfg.n_m, 8 * cfg.n_m, k, s, 0);
    relu_.resize(4);
  }

  void init(std::mt19937_64& rng) {
    const float relu_gain = std::sqrt(2.0f);
    for (auto& c : conv_) c.init(rng, relu_gain);
    fc1_.init(rng, relu_gain);
    fc2_.init(rng, 1.0f);  // feeds sigmoid
  }

  /// Returns scores shaped (n,).
  Tensor<T> forward(const Tensor<T>& m, bool training) {
    if (m.rank() != 4 || m.dim(1) != cfg_.n_m)
      throw DataError("classifier expects (n, " + std::to_string(cfg_.n_m) +
                      ", h, w) activation maps");
    if (m.dim(2) != cfg_.classifier_tile || m.dim(3) != cfg_.classifier_tile)
      throw DataError("classifier is bound to " +
                      std::to_string(cfg_.classifier_tile) + "x" +
                      std::to_string(cfg_.classifier_tile) +
                      " activation maps, got " + std::to_string(m.dim(2)) +
                      "x" + std::to_string(m.dim(3)));
    const std::size_t n = m.dim(0);
    Tensor<T> t = m;
    for (int i = 0; i < 3; ++i)
      t = relu_[i].forward(conv_[i].forward(t, training), training);
    flat_shape_ = t.shape();
    t.reshape({n, cfg_.classifier_flat()});
    t = relu_[3].forward(fc1_.forward(t, training), training);
    t = fc2_.forward(t, training);
    Tensor<T> y({n});
    for (std::size_t i = 0; i < n; ++i) y[i] = sigmoid(t(i, 0));
    if (training) scores_ = y;
    return y;
  }

  /// dscore: (n,) gradient w.r.t. the sigmoid outputs.
  Tensor<T> backward(const Tensor<T>& dscore) {
    const std::size_t n = dscore.dim(0);
    Tensor<T> dz({n, std::size_t(1)});
    for (std::size_t i = 0; i < n; ++i)
      dz(i, 0) = dscore[i] * scores_[i] * (T(1) - scores_[i]);
    Tensor<T> d = fc1_.backward(relu_[3].backward(fc2_.backward(dz)));
    d.reshape(flat_shape_);
    for (int i = 2; i >= 0; --i)
      d = conv_[std::size_t(i)].backward(relu_[std::size_t(i)].backward(d));
    return d;
  }

  void visit_params(const ParamVisitor<T>& fn) {
    for (int i = 0; i < 3; ++i)
      conv_[i].visit_params("clf" + std::to_string(i + 1), fn);
    fc1_.visit_params("fc1", fn);
    fc2_.visit_params("fc2", fn);
  }

  std::size_t n_params() {
    std::size_t n = 0;
    visit_params([&](const std::string&, Param<T>& p) { n += p.value.size(); });
    return n;
  }

 private:
  ModelConfig cfg_;
  std::vector<Conv2d<T>> conv_;
  std::vector<ReLU<T>> relu_;
  Linear<T> fc1_, fc2_;
  Tensor<T> scores_;
  std::vector<std::size_t> flat_shape_;
};

/// Full pipeline: encoder-decoder producing the activation map, classifier
/// scoring it. Exposed separately so occlusion can intervene on the map.
template <typename T>
struct ModelT {
  ModelConfig config;
  EncoderDecoderT<T> encdec;
  ClassifierT<T> classifier;

  explicit ModelT(const ModelConfig& cfg)
      : config(cfg), encdec(cfg), classifier(cfg) {
    cfg.validate();
  }

  void init(std::uint64_t seed) {
    std::mt19937_64 rng_e(derive_seed(seed, 1));
    encdec.init(rng_e);
    std::mt19937_64 rng_c(derive_seed(seed, 2));
    classifier.init(rng_c);
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    return classifier.forward(encdec.forward(x, training), training);
  }

  void visit_params(const ParamVisitor<T>& fn) {
    encdec.visit_params(
        [&](const std::string& n, Param<T>& p) { fn("encdec." + n, p); });
    classifier.visit_params(
        [&](const std::string& n, Param<T>& p) { fn("classifier." + n, p); });
  }

  void visit_buffers(const BufferVisitor<T>& fn) {
    encdec.visit_buffers(
        [&](const std::string& n, Tensor<T>& t) { fn("encdec." + n, t); });
  }

  void zero_grad() {
    visit_params([](const std::string&, Param<T>& p) { p.zero_grad(); });
  }

  std::size_t n_params() { return encdec.n_params() + classifier.n_params(); }
};

using EncoderDecoder = EncoderDecoderT<float>;
using Classifier = ClassifierT<float>;
using Model = ModelT<float>;

}  // namespace asos::nn
