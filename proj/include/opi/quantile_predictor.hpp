#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "opi/neural.hpp"
#include "opi/random.hpp"
#include "opi/replay.hpp"

namespace opi {

/// Batch objective for the predictor update. SquaredPinball is (1/B) sum w_j p_j^2
/// with p_j the pinball loss; Pinball drops the square, (1/B) sum w_j p_j.
enum class QuantileLoss { Pinball, SquaredPinball };

struct PredictorConfig {
  std::vector<std::size_t> hidden{128};
  std::size_t batch_size = 128;
  std::size_t buffer_capacity = 5000;
  AdamConfig adam{};
  PerConfig per{};
  QuantileLoss loss = QuantileLoss::Pinball;
  WeightInit init = WeightInit::FanInUniform;
};

/// Online neural quantile regressor at one fixed proportion, trained from a
/// prioritized replay of its own observations.
class QuantilePredictor {
 public:
  QuantilePredictor(double alpha, std::size_t input_size, const PredictorConfig& cfg, std::uint64_t seed);

  double alpha() const { return alpha_; }
  std::size_t input_size() const { return net_.input_size(); }

  /// Quantile estimate from the current parameters.
  double predict(std::span<const double> x) const;

  /// Stores (x, y) at maximal priority, then, once the buffer holds a full batch,
  /// takes one Adam step on a prioritized batch and refreshes the sampled priorities.
  /// Returns the batch loss, or nullopt when the update was skipped.
  std::optional<double> observe_and_update(std::span<const double> x, double y);

  const DenseNetwork& network() const { return net_; }
  const AdamState& adam() const { return adam_; }
  const PrioritizedBuffer& buffer() const { return buffer_; }
  std::uint64_t updates() const { return updates_; }

  void save(std::ostream& out) const;
  static QuantilePredictor load(std::istream& in, const PredictorConfig& cfg);

 private:
  QuantilePredictor(double alpha, DenseNetwork net, AdamState adam, PrioritizedBuffer buffer,
                    const PredictorConfig& cfg, Rng rng, std::uint64_t updates);

  double alpha_;
  std::size_t batch_size_;
  QuantileLoss loss_;
  DenseNetwork net_;
  AdamState adam_;
  PrioritizedBuffer buffer_;
  Rng rng_;
  std::uint64_t updates_ = 0;
};

/// 2|A| predictors: slot i holds lower proportion i, slot |A| + i its upper partner alpha_i + 1 - beta.
class PredictorBank {
 public:
  PredictorBank(std::span<const double> lower_proportions, double beta, std::size_t input_size,
                const PredictorConfig& cfg, std::uint64_t seed);

  std::size_t n_actions() const { return predictors_.size() / 2; }
  double beta() const { return beta_; }

  QuantilePredictor& lower(std::size_t action) { return predictors_.at(action); }
  QuantilePredictor& upper(std::size_t action) { return predictors_.at(n_actions() + action); }
  const QuantilePredictor& lower(std::size_t action) const { return predictors_.at(action); }
  const QuantilePredictor& upper(std::size_t action) const { return predictors_.at(n_actions() + action); }

  std::vector<QuantilePredictor>& predictors() { return predictors_; }
  const std::vector<QuantilePredictor>& predictors() const { return predictors_; }

  void save(std::ostream& out) const;
  void restore(std::istream& in, const PredictorConfig& cfg);

 private:
  double beta_;
  std::vector<QuantilePredictor> predictors_;
};

}  // namespace opi
