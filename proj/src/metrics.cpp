#include "opi/metrics.hpp"

#include <cmath>
#include <string>

#include "opi/errors.hpp"

namespace opi {
namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("quantile proportion must lie in (0,1), got " + std::to_string(alpha));
  }
}

}  // namespace

double pinball_loss(double y, double q, double alpha) {
  check_alpha(alpha);
  const double diff = q - y;
  return diff >= 0.0 ? (1.0 - alpha) * diff : alpha * (-diff);
}

double pinball_subgradient(double y, double q, double alpha) {
  check_alpha(alpha);
  return q - y >= 0.0 ? 1.0 - alpha : -alpha;
}

double winkler_score(double y, const IntervalForecast& pi) {
  if (!(pi.beta > 0.0 && pi.beta < 1.0)) {
    throw DomainError("interval beta must lie in (0,1)");
  }
  const double width = pi.upper - pi.lower;
  if (y < pi.lower) return width + 2.0 * (pi.lower - y) / pi.beta;
  if (y > pi.upper) return width + 2.0 * (y - pi.upper) / pi.beta;
  return width;
}

ScoreReport score_trace(std::span<const StepRecord> records, double ncp) {
  if (records.empty()) throw DomainError("cannot score an empty trace");
  if (!(ncp > 0.0 && ncp < 1.0)) throw DomainError("nominal coverage must lie in (0,1)");

  ScoreReport report;
  report.n_steps = records.size();
  std::map<double, std::pair<double, std::size_t>> pinball;
  double winkler_sum = 0.0;
  double width_sum = 0.0;
  std::size_t covered = 0;
  for (const auto& r : records) {
    winkler_sum += r.winkler;
    width_sum += r.width();
    covered += r.covered() ? 1 : 0;
    report.n_crossed += r.crossed ? 1 : 0;
    const double upper_alpha = r.proportion + ncp;
    auto& lo = pinball[r.proportion];
    lo.first += pinball_loss(r.y, r.lower, r.proportion);
    ++lo.second;
    auto& hi = pinball[upper_alpha];
    hi.first += pinball_loss(r.y, r.upper, upper_alpha);
    ++hi.second;
  }
  const auto n = static_cast<double>(records.size());
  report.mean_winkler = winkler_sum / n;
  report.mean_sharpness = width_sum / n;
  report.coverage = static_cast<double>(covered) / n;
  report.avg_coverage_deviation = report.coverage - ncp;
  for (const auto& [alpha, acc] : pinball) {
    report.mean_pinball_per_proportion[alpha] = acc.first / static_cast<double>(acc.second);
  }
  return report;
}

Trace headline_records(std::span<const StepRecord> records) {
  Trace out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.warmup) out.push_back(r);
  }
  return out;
}

std::vector<double> moving_average_reward(std::span<const StepRecord> records, std::size_t window) {
  if (window == 0) throw DomainError("moving-average window must be positive");
  std::vector<double> out;
  if (records.size() < window) return out;
  out.reserve(records.size() - window + 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < window; ++i) sum += records[i].reward;
  out.push_back(sum / static_cast<double>(window));
  for (std::size_t i = window; i < records.size(); ++i) {
    sum += records[i].reward - records[i - window].reward;
    out.push_back(sum / static_cast<double>(window));
  }
  return out;
}

}  // namespace opi
