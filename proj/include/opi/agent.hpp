#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "opi/neural.hpp"
#include "opi/random.hpp"

namespace opi {

/// Discrete lower-bound proportions (i + 1) * beta / (n + 1), i = 0..n-1, with n = 2^k - 1.
struct ActionSpace {
  double beta = 0.1;
  std::vector<double> proportions;

  std::size_t size() const { return proportions.size(); }
  double upper_proportion(std::size_t action) const { return proportions.at(action) + (1.0 - beta); }
};

ActionSpace make_action_space(std::size_t n_actions, double beta);

bool is_action_count(std::size_t n);

/// Exponential decay from `start` to the `end` floor, reached after `decay_steps` selections.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.01;
  std::uint64_t decay_steps = 0;  // 0 holds epsilon at `end`

  double at(std::uint64_t selections) const;
};

struct AgentConfig {
  std::vector<std::size_t> hidden{512, 256};
  std::size_t batch_size = 128;
  std::size_t buffer_capacity = 10000;
  double gamma = 0.9;
  double tau = 1e-3;
  AdamConfig adam{1e-4};
  EpsilonSchedule epsilon{};
  WeightInit init = WeightInit::FanInUniform;
};

struct Transition {
  std::vector<double> state;
  std::size_t action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
};

struct ActionChoice {
  std::size_t action = 0;
  double proportion = 0.0;
  double epsilon = 0.0;
  bool explored = false;
};

/// Bootstrapped TD target for a continuing task: no terminal masking.
inline double td_target(double reward, double gamma, double next_max_q) { return reward + gamma * next_max_q; }

/// Lowest index among the maxima.
std::size_t argmax(std::span<const double> values);

/// Dueling Q-network over the proportion grid. The network's outputs are
/// [V, A_0, ..., A_{n-1}] and Q_i = V + A_i - mean(A). A target copy is
/// blended towards the local network by sync_target().
class DuelingAgent {
 public:
  DuelingAgent(ActionSpace actions, std::size_t state_size, const AgentConfig& cfg, std::uint64_t seed);

  const ActionSpace& actions() const { return actions_; }
  const AgentConfig& config() const { return cfg_; }
  double epsilon() const { return cfg_.epsilon.at(selections_); }

  std::vector<double> q_values(std::span<const double> state) const;
  std::vector<double> target_q_values(std::span<const double> state) const;

  /// Epsilon-greedy choice; advances the epsilon schedule.
  ActionChoice select_action(std::span<const double> state);
  ActionChoice greedy_action(std::span<const double> state) const;

  void remember(Transition t);
  std::size_t replay_size() const { return replay_.size(); }
  std::vector<Transition> replay_oldest_first() const;

  /// Uniform draw of replay slots with replacement, as used by learn().
  std::vector<std::size_t> sample_replay(std::size_t batch);

  /// One Adam step on the mean squared TD error of a uniform minibatch; nullopt
  /// when the replay holds fewer than batch_size transitions.
  std::optional<double> learn();

  void sync_target();

  DenseNetwork& local() { return local_; }
  DenseNetwork& target() { return target_; }
  const DenseNetwork& local() const { return local_; }
  const DenseNetwork& target() const { return target_; }

  void save(std::ostream& out, bool include_replay) const;
  void restore(std::istream& in);

 private:
  Eigen::MatrixXd combine_batch(const Eigen::MatrixXd& heads) const;

  ActionSpace actions_;
  AgentConfig cfg_;
  DenseNetwork local_;
  DenseNetwork target_;
  AdamState adam_;
  std::vector<Transition> replay_;
  std::size_t replay_next_ = 0;
  std::uint64_t selections_ = 0;
  Rng policy_rng_;
  Rng replay_rng_;
};

}  // namespace opi
