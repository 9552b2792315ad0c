#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "opi/random.hpp"

namespace opi {

/// A (feature window, target) pair awaiting replay.
struct Experience {
  std::vector<double> features;
  double target = 0.0;
  double priority = 1.0;
  std::uint64_t insert_step = 0;
};

struct PerConfig {
  double sigma = 0.6;           // prioritization exponent; 0 gives uniform sampling
  double rho_start = 0.4;       // importance-sampling exponent, annealed linearly
  double rho_end = 1.0;
  std::uint64_t rho_horizon = 0;  // annealing length in inserts; 0 holds rho at rho_end
  double priority_floor = 1e-6;
};

struct PrioritizedSample {
  std::vector<std::size_t> indices;
  std::vector<double> probabilities;  // P_j of each drawn slot
  std::vector<double> weights;        // normalized IS weights, all in (0, 1]
};

/// Bounded FIFO replay with proportional prioritized sampling.
///
/// Sampling mass lives in a segment tree over priority^sigma so draws and
/// priority updates are O(log N). The IS weight of slot j is
/// (N * P_j)^-rho normalized by the largest such weight in the whole buffer,
/// which belongs to the least probable slot.
class PrioritizedBuffer {
 public:
  PrioritizedBuffer(std::size_t capacity, std::size_t feature_size, PerConfig cfg);

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t feature_size() const { return feature_size_; }
  const PerConfig& config() const { return cfg_; }

  /// Stores the experience with the current maximum priority (1.0 when empty),
  /// evicting the oldest entry at capacity.
  void insert(std::vector<double> features, double target);

  /// Draws `batch` slots with replacement. Empty when the buffer holds fewer than `batch`.
  std::optional<PrioritizedSample> sample(std::size_t batch, Rng& rng) const;

  /// Sets each slot's priority to its loss, floored at priority_floor.
  void update_priorities(std::span<const std::size_t> indices, std::span<const double> losses);

  const Experience& at(std::size_t slot) const;
  double probability(std::size_t slot) const;
  double max_priority() const;
  double rho() const;
  std::uint64_t inserts() const { return inserts_; }

  /// Slots ordered from oldest to newest.
  std::vector<std::size_t> slots_oldest_first() const;

  void save(std::ostream& out) const;
  static PrioritizedBuffer load(std::istream& in);

 private:
  void set_priority(std::size_t slot, double priority);
  std::size_t find_prefix(double mass) const;

  std::size_t capacity_;
  std::size_t feature_size_;
  PerConfig cfg_;
  std::vector<Experience> entries_;
  std::size_t size_ = 0;
  std::size_t next_ = 0;
  std::uint64_t inserts_ = 0;

  std::size_t leaves_ = 1;
  std::vector<double> sum_tree_;  // priority^sigma
  std::vector<double> min_tree_;  // priority^sigma, +inf on empty leaves
  std::vector<double> max_tree_;  // raw priority, 0 on empty leaves
};

}  // namespace opi
