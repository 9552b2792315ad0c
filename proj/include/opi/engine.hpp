#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "opi/agent.hpp"
#include "opi/quantile_predictor.hpp"
#include "opi/step_record.hpp"

namespace opi {

enum class FeatureScaling { None, MinMax };

struct EngineConfig {
  double beta = 0.1;
  std::size_t n_actions = 7;
  std::size_t window = 168;
  std::size_t lead = 1;
  std::uint64_t seed = 1;
  FeatureScaling scaling = FeatureScaling::None;
  std::size_t scaling_window = 672;  // trailing values feeding the min-max range
  double epsilon_decay_fraction = 0.2;  // used when agent.epsilon.decay_steps == 0
  PredictorConfig predictor{};
  AgentConfig agent{};

  double ncp() const { return 1.0 - beta; }
  void validate() const;
};

struct CrossingRepair {
  double lower;
  double upper;
  bool crossed;
};

/// Crossed bounds collapse to their midpoint.
CrossingRepair repair_crossing(double raw_lower, double raw_upper);

enum class ProportionPolicy {
  Agent,    // the dueling agent picks from the grid each step
  Central,  // fixed beta/2, agent bypassed
};

/// Closed loop of proportion selection, quantile prediction and online updates.
///
/// The schedules that depend on run length (epsilon decay, IS-exponent
/// annealing) are resolved from `planned_steps` when left at 0 in the config.
class OnlineEngine {
 public:
  OnlineEngine(const EngineConfig& cfg, ProportionPolicy policy, std::size_t planned_steps);

  /// Forecasts series[t] from the h preceding values. With `learn`, the two selected
  /// predictors and the agent are updated from the revealed value; otherwise all
  /// parameters stay fixed and the greedy action is taken.
  StepRecord step(std::span<const double> series, std::size_t t, bool learn);

  /// step() over t in [begin, end).
  Trace run(std::span<const double> series, std::size_t begin, std::size_t end, bool learn);

  const EngineConfig& config() const { return cfg_; }
  const ActionSpace& actions() const { return actions_; }
  PredictorBank& bank() { return bank_; }
  const PredictorBank& bank() const { return bank_; }
  DuelingAgent* agent() { return agent_ ? &*agent_ : nullptr; }
  const DuelingAgent* agent() const { return agent_ ? &*agent_ : nullptr; }

 private:
  std::vector<double> features(std::span<const double> series, std::size_t t) const;

  EngineConfig cfg_;
  ProportionPolicy policy_;
  ActionSpace actions_;
  PredictorBank bank_;
  std::optional<DuelingAgent> agent_;
};

/// Resolves run-length dependent defaults for a run of `steps` engine steps.
EngineConfig resolve_schedules(EngineConfig cfg, std::size_t steps);

/// Minimum series length for an online run: the window plus one predictor batch.
std::size_t min_series_length(const EngineConfig& cfg);

Trace run_online(std::span<const double> series, const EngineConfig& cfg);
Trace run_online_cpi(std::span<const double> series, const EngineConfig& cfg);

/// Per hour-of-day (t mod 24) empirical beta/2 and 1 - beta/2 quantiles of the
/// training portion, applied to every test step of that hour.
Trace run_naive_baseline(std::span<const double> series, const EngineConfig& cfg, double train_fraction);

/// Online run over the training portion, then greedy forecasting with all
/// parameters fixed over the test portion. Only test records are returned.
Trace run_frozen(std::span<const double> series, const EngineConfig& cfg, double train_fraction);

}  // namespace opi
