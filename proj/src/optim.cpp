// SPDX-License-Identifier: Apache-2.0
#include "pathsage/optim.hpp"

#include <algorithm>

namespace pathsage {

std::size_t warmup_steps(std::size_t total_steps, double warmup_ratio) {
  // The small slack keeps products like 0.1 * 30 = 3.0000000000000004 at 3.
  const double raw = warmup_ratio * static_cast<double>(total_steps);
  auto steps = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::min(steps, total_steps);
}

double lr_at(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_ratio) {
  if (total_steps == 0) return 0.0;
  step = std::min(step, total_steps);
  const std::size_t warmup = warmup_steps(total_steps, warmup_ratio);
  if (step < warmup) {
    return peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (warmup == total_steps) return peak_lr;
  return peak_lr * static_cast<double>(total_steps - step) /
         static_cast<double>(total_steps - warmup);
}

}  // namespace pathsage
