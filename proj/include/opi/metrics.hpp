#pragma once

#include <cstddef>
#include <map>
#include <span>

#include "opi/step_record.hpp"

namespace opi {

/// A prediction interval with nominal coverage 1 - beta.
struct IntervalForecast {
  double lower;
  double upper;
  double beta;
};

struct ScoreReport {
  double mean_winkler = 0.0;
  double coverage = 0.0;
  double avg_coverage_deviation = 0.0;  // coverage - ncp
  double mean_sharpness = 0.0;
  std::map<double, double> mean_pinball_per_proportion;
  std::size_t n_steps = 0;
  std::size_t n_crossed = 0;
};

/// Quantile loss. A tie q == y falls on the (1 - alpha) branch.
double pinball_loss(double y, double q, double alpha);

/// Derivative of pinball_loss with respect to q, taking the (1 - alpha) branch at q == y.
double pinball_subgradient(double y, double q, double alpha);

double winkler_score(double y, const IntervalForecast& pi);

inline double reward_from_winkler(double winkler) { return -winkler; }

/// Whole-trace means of the interval criteria. Records are scored as given;
/// use headline_records() first to drop warm-up steps.
ScoreReport score_trace(std::span<const StepRecord> records, double ncp);

/// Records outside the warm-up phase.
Trace headline_records(std::span<const StepRecord> records);

/// Mean over trailing windows of `window` rewards; element i covers rewards [i, i + window).
std::vector<double> moving_average_reward(std::span<const StepRecord> records, std::size_t window);

}  // namespace opi
