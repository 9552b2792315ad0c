#include "opi/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "opi/errors.hpp"
#include "opi/metrics.hpp"
#include "opi/series.hpp"

namespace opi {

void EngineConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
  if (!is_action_count(n_actions)) throw DomainError("n_actions must be of the form 2^n - 1");
  if (window == 0) throw DomainError("window must be positive");
  if (lead != 1) throw DomainError("only one-step-ahead forecasting (lead = 1) is supported");
  if (scaling == FeatureScaling::MinMax && scaling_window < window) {
    throw DomainError("scaling window must cover the feature window");
  }
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
    throw DomainError("epsilon decay fraction must lie in (0,1]");
  }
}

CrossingRepair repair_crossing(double raw_lower, double raw_upper) {
  if (raw_lower <= raw_upper) return {raw_lower, raw_upper, false};
  const double mid = 0.5 * (raw_lower + raw_upper);
  return {mid, mid, true};
}

EngineConfig resolve_schedules(EngineConfig cfg, std::size_t steps) {
  if (cfg.agent.epsilon.decay_steps == 0) {
    cfg.agent.epsilon.decay_steps =
        std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround(cfg.epsilon_decay_fraction * steps)));
  }
  if (cfg.predictor.per.rho_horizon == 0) cfg.predictor.per.rho_horizon = std::max<std::size_t>(1, steps);
  return cfg;
}

std::size_t min_series_length(const EngineConfig& cfg) { return cfg.window + cfg.predictor.batch_size + 1; }

OnlineEngine::OnlineEngine(const EngineConfig& cfg, ProportionPolicy policy, std::size_t planned_steps)
    : cfg_(resolve_schedules(cfg, planned_steps)),
      policy_(policy),
      actions_(make_action_space(policy == ProportionPolicy::Central ? 1 : cfg.n_actions, cfg.beta)),
      bank_(actions_.proportions, cfg.beta, cfg.window, cfg_.predictor, cfg.seed) {
  cfg_.validate();
  if (policy_ == ProportionPolicy::Agent) agent_.emplace(actions_, cfg_.window, cfg_.agent, cfg_.seed);
}

std::vector<double> OnlineEngine::features(std::span<const double> series, std::size_t t) const {
  auto x = make_window(series, t, cfg_.window);
  if (cfg_.scaling == FeatureScaling::MinMax) {
    const std::size_t from = t > cfg_.scaling_window ? t - cfg_.scaling_window : 0;
    const auto [lo, hi] = std::minmax_element(series.begin() + static_cast<std::ptrdiff_t>(from),
                                              series.begin() + static_cast<std::ptrdiff_t>(t));
    const double range = *hi - *lo;
    for (auto& v : x) v = range > 0.0 ? (v - *lo) / range : 0.0;
  }
  return x;
}

StepRecord OnlineEngine::step(std::span<const double> series, std::size_t t, bool learn) {
  if (t >= series.size()) throw DomainError("step index beyond the series");
  const auto x = features(series, t);

  ActionChoice choice;
  if (agent_) {
    choice = learn ? agent_->select_action(x) : agent_->greedy_action(x);
  } else {
    choice.proportion = actions_.proportions.front();
  }
  auto& lower = bank_.lower(choice.action);
  auto& upper = bank_.upper(choice.action);

  StepRecord rec;
  rec.step = t;
  rec.proportion = choice.proportion;
  rec.epsilon = choice.epsilon;
  rec.warmup = lower.updates() == 0 || upper.updates() == 0;
  rec.raw_lower = lower.predict(x);
  rec.raw_upper = upper.predict(x);
  rec.y = series[t];
  if (!std::isfinite(rec.raw_lower) || !std::isfinite(rec.raw_upper) || !std::isfinite(rec.y)) {
    throw NumericFault("non-finite forecast or observation at step " + std::to_string(t));
  }
  const auto repaired = repair_crossing(rec.raw_lower, rec.raw_upper);
  rec.lower = repaired.lower;
  rec.upper = repaired.upper;
  rec.crossed = repaired.crossed;
  rec.winkler = winkler_score(rec.y, {rec.lower, rec.upper, cfg_.beta});
  rec.reward = reward_from_winkler(rec.winkler);

  if (learn) {
    try {
      lower.observe_and_update(x, rec.y);
      upper.observe_and_update(x, rec.y);
      if (agent_) {
        agent_->remember({x, choice.action, rec.reward, features(series, t + 1)});
        agent_->learn();
        agent_->sync_target();
      }
    } catch (const NumericFault& e) {
      throw NumericFault(std::string(e.what()) + " [engine step " + std::to_string(t) + "]");
    }
  }
  return rec;
}

Trace OnlineEngine::run(std::span<const double> series, std::size_t begin, std::size_t end, bool learn) {
  if (begin < cfg_.window) throw DomainError("run must start after the first full window");
  if (end > series.size() || begin > end) throw DomainError("run range outside the series");
  Trace trace;
  trace.reserve(end - begin);
  for (std::size_t t = begin; t < end; ++t) trace.push_back(step(series, t, learn));
  return trace;
}

namespace {

void check_length(std::span<const double> series, const EngineConfig& cfg) {
  cfg.validate();
  if (series.size() < min_series_length(cfg)) {
    throw DomainError("series too short: need at least " + std::to_string(min_series_length(cfg)) + " values, got " +
                      std::to_string(series.size()));
  }
}

std::size_t checked_split(std::span<const double> series, const EngineConfig& cfg, double train_fraction) {
  check_length(series, cfg);
  const std::size_t cut = split_index(series.size(), train_fraction);
  if (cut < min_series_length(cfg) || series.size() - cut == 0) {
    throw DomainError("train fraction leaves too little data on one side of the split");
  }
  return cut;
}

}  // namespace

Trace run_online(std::span<const double> series, const EngineConfig& cfg) {
  check_length(series, cfg);
  const std::size_t steps = series.size() - cfg.window;
  OnlineEngine engine(cfg, ProportionPolicy::Agent, steps);
  return engine.run(series, cfg.window, series.size(), true);
}

Trace run_online_cpi(std::span<const double> series, const EngineConfig& cfg) {
  check_length(series, cfg);
  const std::size_t steps = series.size() - cfg.window;
  OnlineEngine engine(cfg, ProportionPolicy::Central, steps);
  return engine.run(series, cfg.window, series.size(), true);
}

Trace run_naive_baseline(std::span<const double> series, const EngineConfig& cfg, double train_fraction) {
  cfg.validate();
  const std::size_t cut = split_index(series.size(), train_fraction);
  if (cut == 0 || cut >= series.size()) throw DomainError("train fraction leaves an empty side");
  constexpr std::size_t kHours = 24;
  constexpr std::size_t kMinBucket = 10;
  std::vector<std::vector<double>> buckets(kHours);
  for (std::size_t t = 0; t < cut; ++t) buckets[t % kHours].push_back(series[t]);

  const double lo_p = cfg.beta / 2.0;
  const double hi_p = 1.0 - cfg.beta / 2.0;
  std::vector<std::pair<double, double>> bounds(kHours);
  for (std::size_t hour = 0; hour < kHours; ++hour) {
    if (buckets[hour].size() < kMinBucket) {
      throw DomainError("hour " + std::to_string(hour) + " has only " + std::to_string(buckets[hour].size()) +
                        " training samples (need 10)");
    }
    bounds[hour] = {empirical_quantile(buckets[hour], lo_p), empirical_quantile(buckets[hour], hi_p)};
  }

  Trace trace;
  trace.reserve(series.size() - cut);
  for (std::size_t t = cut; t < series.size(); ++t) {
    StepRecord rec;
    rec.step = t;
    rec.proportion = lo_p;
    rec.raw_lower = bounds[t % kHours].first;
    rec.raw_upper = bounds[t % kHours].second;
    const auto repaired = repair_crossing(rec.raw_lower, rec.raw_upper);
    rec.lower = repaired.lower;
    rec.upper = repaired.upper;
    rec.crossed = repaired.crossed;
    rec.y = series[t];
    rec.winkler = winkler_score(rec.y, {rec.lower, rec.upper, cfg.beta});
    rec.reward = reward_from_winkler(rec.winkler);
    trace.push_back(rec);
  }
  return trace;
}

Trace run_frozen(std::span<const double> series, const EngineConfig& cfg, double train_fraction) {
  const std::size_t cut = checked_split(series, cfg, train_fraction);
  OnlineEngine engine(cfg, ProportionPolicy::Agent, cut - cfg.window);
  engine.run(series, cfg.window, cut, true);
  return engine.run(series, cut, series.size(), false);
}

}  // namespace opi
