#pragma once

#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "asos/data/source.hpp"
#include "asos/io/binary.hpp"
#include "asos/io/csv.hpp"
#include "asos/nn/model.hpp"
#include "asos/train/augment.hpp"
#include "asos/train/optimizer.hpp"
#include "asos/train/schedule.hpp"

namespace asos::train {

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double max_lr = 1e-2;
  float momentum = 0.9f;
  float weight_decay = 1e-4f;
  float cutmix_prob = 0.8f;
  float cutmix_max_frac = 0.5f;
  float occlusion_min = 0.2f;
  float occlusion_max = 0.5f;
  bool rotation = true;
  double warmup_frac = 0.3;
  double lr_div_initial = 25.0;
  double lr_div_final = 10000.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (max_lr <= 0) throw ConfigError("max learning rate must be positive");
    if (cutmix_prob < 0.0f || cutmix_prob > 1.0f)
      throw ConfigError("cutmix probability must lie in [0, 1]");
    if (cutmix_max_frac < 0.0f || cutmix_max_frac > 0.5f)
      throw ConfigError("cutmix max fraction must lie in [0, 0.5]");
    if (occlusion_min < 0.0f || occlusion_max > 1.0f ||
        occlusion_min > occlusion_max)
      throw ConfigError("occlusion range must satisfy 0 <= min <= max <= 1");
    if (warmup_frac < 0.0 || warmup_frac >= 1.0)
      throw ConfigError("warmup fraction must lie in [0, 1)");
  }
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct EvalResult {
  double accuracy = 0.0;
  // confusion[truth][prediction], labels thresholded at 0.5
  std::array<std::array<std::size_t, 2>, 2> confusion{};
  std::vector<float> scores;
};

/// Inference-mode scoring of a whole source; labels >= 0.5 count as class 1.
inline EvalResult evaluate(nn::Model& model, const data::SampleSource& src,
                           std::size_t batch_size) {
  EvalResult r;
  r.scores.reserve(src.size());
  std::vector<float> labels;
  labels.reserve(src.size());
  for (std::size_t start = 0; start < src.size(); start += batch_size) {
    const std::size_t nb = std::min(batch_size, src.size() - start);
    Tensorf x;
    for (std::size_t k = 0; k < nb; ++k) {
      const data::RasterSample& s = src.get(start + k);
      Tensorf t = scale_input(s.pixels);
      if (k == 0)
        x = Tensorf({nb, t.dim(0), t.dim(1), t.dim(2)});
      else if (t.dim(0) != x.dim(1) || t.dim(1) != x.dim(2) ||
               t.dim(2) != x.dim(3))
        throw DataError("sample " + s.id + " has mismatched shape");
      std::copy(t.begin(), t.end(), &x(k, 0, 0, 0));
      labels.push_back(s.label);
    }
    Tensorf scores = model.forward(x, false);
    for (std::size_t k = 0; k < nb; ++k) r.scores.push_back(scores[k]);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t truth = labels[i] >= 0.5f ? 1 : 0;
    const std::size_t pred = r.scores[i] >= 0.5f ? 1 : 0;
    ++r.confusion[truth][pred];
  }
  if (!labels.empty())
    r.accuracy = double(r.confusion[0][0] + r.confusion[1][1]) /
                 double(labels.size());
  return r;
}

/// End-to-end training loop. Per step: shuffle-sampled batch, rotation
/// augmentation, CutMix, scaling, forward, random activation occlusion
/// between the two networks, MSE, SGD under a one-cycle schedule.
inline std::vector<EpochStats> train(nn::Model& model,
                                     const data::SampleSource& train_src,
                                     const data::SampleSource* val_src,
                                     const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = train_src.size();
  if (n == 0) throw DataError("training subset is empty");

  const std::size_t steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  OneCycle schedule{cfg.max_lr, cfg.warmup_frac, cfg.lr_div_initial,
                    cfg.lr_div_final};
  Sgd opt(cfg.momentum, cfg.weight_decay);

  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, 10));
  std::mt19937_64 augment_rng(derive_seed(cfg.seed, 11));
  std::mt19937_64 occl_rng(derive_seed(cfg.seed, 12));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  std::vector<EpochStats> history;
  std::size_t global_step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;

    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t nb = std::min(cfg.batch_size, n - start);

      // Assemble and augment in raw counts; scale right before the forward.
      std::vector<Tensor<std::uint16_t>> tiles(nb);
      std::vector<float> labels(nb);
      for (std::size_t k = 0; k < nb; ++k) {
        const data::RasterSample& s = train_src.get(order[start + k]);
        tiles[k] = s.pixels;
        labels[k] = s.label;
        if (cfg.rotation) {
          if (s.pixels.dim(1) != s.pixels.dim(2))
            throw DataError("rotation augmentation needs square tiles, got " +
                            s.id);
          tiles[k] = rotate90(
              tiles[k], int(std::uniform_int_distribution<>(0, 3)(augment_rng)));
        }
      }
      if (cfg.cutmix_prob > 0.0f && nb > 1) {
        const std::vector<Tensor<std::uint16_t>> snapshot = tiles;
        const std::vector<float> snap_labels = labels;
        std::bernoulli_distribution mix(cfg.cutmix_prob);
        for (std::size_t k = 0; k < nb; ++k) {
          const bool do_mix = mix(augment_rng);
          const auto edge =
              Edge(std::uniform_int_distribution<>(0, 3)(augment_rng));
          const std::size_t side = (edge == Edge::kTop || edge == Edge::kBottom)
                                       ? tiles[k].dim(1)
                                       : tiles[k].dim(2);
          const std::size_t width = std::uniform_int_distribution<std::size_t>(
              0, std::size_t(cfg.cutmix_max_frac * double(side)))(augment_rng);
          if (!do_mix) continue;
          const std::size_t partner = (k + 1) % nb;
          labels[k] = cutmix_paste(tiles[k], labels[k], snapshot[partner],
                                   snap_labels[partner], edge, width);
        }
      }
      Tensorf x({nb, tiles[0].dim(0), tiles[0].dim(1), tiles[0].dim(2)});
      for (std::size_t k = 0; k < nb; ++k) {
        if (!tiles[k].same_shape(tiles[0]))
          throw DataError("batch mixes tile shapes");
        Tensorf t = scale_input(tiles[k]);
        std::copy(t.begin(), t.end(), &x(k, 0, 0, 0));
      }

      model.zero_grad();
      Tensorf m = model.encdec.forward(x, true);
      Tensorf mask;
      if (cfg.occlusion_max > 0.0f) {
        const float rate = std::uniform_real_distribution<float>(
            cfg.occlusion_min, cfg.occlusion_max)(occl_rng);
        mask = make_occlusion_mask(nb, m.dim(2), m.dim(3), rate, occl_rng);
        apply_occlusion(m, mask);
      }
      Tensorf scores = model.classifier.forward(m, true);

      double loss = 0.0;
      Tensorf dscore({nb});
      for (std::size_t k = 0; k < nb; ++k) {
        const double e = double(scores[k]) - double(labels[k]);
        loss += e * e;
        dscore[k] = float(2.0 * e / double(nb));
      }
      loss /= double(nb);
      if (!std::isfinite(loss))
        throw NumericError("training diverged: non-finite loss at step " +
                           std::to_string(global_step) + " (epoch " +
                           std::to_string(epoch + 1) + ")");
      loss_sum += loss * double(nb);
      loss_count += nb;

      Tensorf dm = model.classifier.backward(dscore);
      if (mask.size() != 0) apply_occlusion(dm, mask);
      model.encdec.backward(dm);

      const double lr = schedule.at(global_step, total_steps);
      opt.step(model, float(lr));
      ++global_step;
    }

    EpochStats st;
    st.epoch = epoch + 1;
    st.loss = loss_sum / double(loss_count);
    st.train_acc = evaluate(model, train_src, cfg.batch_size).accuracy;
    st.val_acc =
        val_src ? evaluate(model, *val_src, cfg.batch_size).accuracy : 0.0;
    history.push_back(st);
  }
  return history;
}

inline void save_history(const std::string& path,
                         const std::vector<EpochStats>& history) {
  io::CsvWriter csv({"epoch", "loss", "train_acc", "val_acc"});
  for (const EpochStats& s : history)
    csv.row(s.epoch, s.loss, s.train_acc, s.val_acc);
  io::write_file_atomic(path, csv.str());
}

}  // namespace asos::train
