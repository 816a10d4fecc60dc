#pragma once

#include <cmath>
#include <cstddef>

#include "asos/common.hpp"

namespace asos::train {

/// One-cycle learning rate policy: linear warmup from max/div_initial to max
/// over the first `warmup_frac` of steps, then cosine annealing down to
/// max/div_final. The maximum is attained exactly once, at the phase switch.
struct OneCycle {
  double max_lr = 1e-2;
  double warmup_frac = 0.3;
  double div_initial = 25.0;
  double div_final = 10000.0;

  double at(std::size_t step, std::size_t total_steps) const {
    if (total_steps == 0) throw ConfigError("schedule needs at least one step");
    if (step >= total_steps) step = total_steps - 1;
    const double lr0 = max_lr / div_initial;
    const double lr_end = max_lr / div_final;
    const auto warmup = std::size_t(std::llround(warmup_frac * double(total_steps)));
    if (step < warmup)
      return lr0 + (max_lr - lr0) * double(step) / double(warmup);
    const double span = double(total_steps - warmup);
    const double t = span > 0 ? double(step - warmup) / span : 0.0;
    return lr_end + (max_lr - lr_end) * 0.5 * (1.0 + std::cos(t * 3.14159265358979323846));
  }
};

}  // namespace asos::train
