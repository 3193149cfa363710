// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "evtk/core/error.hpp"

namespace evtk::train {

enum class ScheduleKind { constant, step, cosine_warmup };

inline ScheduleKind parse_schedule(const std::string& s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "step") return ScheduleKind::step;
  if (s == "cosine_warmup") return ScheduleKind::cosine_warmup;
  throw ConfigError("unknown schedule '" + s + "' (expected constant, step or cosine_warmup)");
}

/// gamma^floor(epoch / period)
inline double step_multiplier(std::int64_t epoch, std::int64_t period = 200, double gamma = 0.5) {
  if (period < 1) throw ConfigError("step period must be at least 1");
  return std::pow(gamma, static_cast<double>(epoch / period));
}

/// Linear ramp 0 -> 1 over the first warmup_fraction of `total` steps, then
/// half-cosine decay 1 -> 0 over the rest.
inline double cosine_warmup_multiplier(std::int64_t step, std::int64_t total, double warmup_fraction = 0.025) {
  if (total < 1) throw ConfigError("schedule needs at least one step");
  const auto warmup = static_cast<std::int64_t>(std::llround(warmup_fraction * static_cast<double>(total)));
  if (warmup > 0 && step < warmup) return static_cast<double>(step) / static_cast<double>(warmup);
  const std::int64_t span = total - warmup;
  if (span <= 0) return 1.0;
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / static_cast<double>(span));
  return 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

struct Schedule {
  ScheduleKind kind = ScheduleKind::constant;
  std::int64_t step_epochs = 200;
  double step_gamma = 0.5;
  double warmup_fraction = 0.025;

  double multiplier(std::int64_t epoch, std::int64_t step, std::int64_t total_steps) const {
    switch (kind) {
    case ScheduleKind::constant: return 1.0;
    case ScheduleKind::step: return step_multiplier(epoch, step_epochs, step_gamma);
    case ScheduleKind::cosine_warmup: return cosine_warmup_multiplier(step, total_steps, warmup_fraction);
    }
    return 1.0;
  }
};

} // namespace evtk::train
