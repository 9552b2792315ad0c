#pragma once

#include <cstddef>
#include <vector>

namespace opi {

/// One emitted time step of an interval forecasting run.
struct StepRecord {
  std::size_t step = 0;
  double proportion = 0.0;  // lower-bound proportion; the upper one is proportion + 1 - beta
  double lower = 0.0;
  double upper = 0.0;
  double raw_lower = 0.0;
  double raw_upper = 0.0;
  double y = 0.0;
  double winkler = 0.0;
  double reward = 0.0;
  bool crossed = false;
  double epsilon = 0.0;
  bool warmup = false;

  bool covered() const noexcept { return lower <= y && y <= upper; }
  double width() const noexcept { return upper - lower; }
};

using Trace = std::vector<StepRecord>;

}  // namespace opi
