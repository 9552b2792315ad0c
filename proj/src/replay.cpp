#include "opi/replay.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "opi/errors.hpp"

namespace opi {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

PrioritizedBuffer::PrioritizedBuffer(std::size_t capacity, std::size_t feature_size, PerConfig cfg)
    : capacity_(capacity), feature_size_(feature_size), cfg_(cfg) {
  if (capacity == 0) throw DomainError("replay capacity must be positive");
  if (!(cfg.sigma >= 0.0)) throw DomainError("prioritization exponent sigma must be >= 0");
  if (!(cfg.rho_start >= 0.0 && cfg.rho_start <= 1.0 && cfg.rho_end >= 0.0 && cfg.rho_end <= 1.0)) {
    throw DomainError("importance-sampling exponent rho must lie in [0,1]");
  }
  if (!(cfg.priority_floor > 0.0)) throw DomainError("priority floor must be positive");
  while (leaves_ < capacity_) leaves_ *= 2;
  sum_tree_.assign(2 * leaves_, 0.0);
  min_tree_.assign(2 * leaves_, kInf);
  max_tree_.assign(2 * leaves_, 0.0);
}

void PrioritizedBuffer::insert(std::vector<double> features, double target) {
  if (features.size() != feature_size_) {
    throw DomainError("replay insert: expected " + std::to_string(feature_size_) + " features, got " +
                      std::to_string(features.size()));
  }
  const double priority = size_ == 0 ? 1.0 : max_priority();
  const std::size_t slot = next_;
  Experience e{std::move(features), target, priority, inserts_};
  if (slot < entries_.size()) {
    entries_[slot] = std::move(e);
  } else {
    entries_.push_back(std::move(e));
  }
  set_priority(slot, priority);
  next_ = (next_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
  ++inserts_;
}

void PrioritizedBuffer::set_priority(std::size_t slot, double priority) {
  entries_[slot].priority = priority;
  std::size_t node = slot + leaves_;
  const double powered = std::pow(priority, cfg_.sigma);
  sum_tree_[node] = powered;
  min_tree_[node] = powered;
  max_tree_[node] = priority;
  for (node /= 2; node >= 1; node /= 2) {
    sum_tree_[node] = sum_tree_[2 * node] + sum_tree_[2 * node + 1];
    min_tree_[node] = std::min(min_tree_[2 * node], min_tree_[2 * node + 1]);
    max_tree_[node] = std::max(max_tree_[2 * node], max_tree_[2 * node + 1]);
  }
}

std::size_t PrioritizedBuffer::find_prefix(double mass) const {
  std::size_t node = 1;
  while (node < leaves_) {
    const std::size_t left = 2 * node;
    if (mass < sum_tree_[left]) {
      node = left;
    } else {
      mass -= sum_tree_[left];
      node = left + 1;
    }
  }
  return std::min(node - leaves_, size_ - 1);
}

double PrioritizedBuffer::rho() const {
  if (cfg_.rho_horizon == 0) return cfg_.rho_end;
  const double frac =
      std::min(1.0, static_cast<double>(inserts_) / static_cast<double>(cfg_.rho_horizon));
  return cfg_.rho_start + (cfg_.rho_end - cfg_.rho_start) * frac;
}

std::optional<PrioritizedSample> PrioritizedBuffer::sample(std::size_t batch, Rng& rng) const {
  if (batch == 0) throw DomainError("replay sample: batch must be positive");
  if (size_ < batch) return std::nullopt;
  const double total = sum_tree_[1];
  const double min_mass = min_tree_[1];
  const double exponent = rho();
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  PrioritizedSample out;
  out.indices.reserve(batch);
  out.probabilities.reserve(batch);
  out.weights.reserve(batch);
  for (std::size_t j = 0; j < batch; ++j) {
    const std::size_t slot = find_prefix(unit(rng) * total);
    const double mass = sum_tree_[slot + leaves_];
    out.indices.push_back(slot);
    out.probabilities.push_back(mass / total);
    // (N P_j)^-rho / max_k (N P_k)^-rho == (mass_j / min_mass)^-rho
    out.weights.push_back(std::pow(mass / min_mass, -exponent));
  }
  return out;
}

void PrioritizedBuffer::update_priorities(std::span<const std::size_t> indices, std::span<const double> losses) {
  if (indices.size() != losses.size()) throw DomainError("update_priorities: indices and losses differ in length");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= size_) {
      throw DomainError("update_priorities: slot " + std::to_string(indices[k]) + " out of range");
    }
    if (!std::isfinite(losses[k]) || losses[k] < 0.0) {
      throw DomainError("update_priorities: loss must be finite and non-negative");
    }
    set_priority(indices[k], std::max(losses[k], cfg_.priority_floor));
  }
}

const Experience& PrioritizedBuffer::at(std::size_t slot) const {
  if (slot >= size_) throw DomainError("replay slot out of range");
  return entries_[slot];
}

double PrioritizedBuffer::probability(std::size_t slot) const {
  if (slot >= size_) throw DomainError("replay slot out of range");
  return sum_tree_[slot + leaves_] / sum_tree_[1];
}

double PrioritizedBuffer::max_priority() const { return size_ == 0 ? 1.0 : max_tree_[1]; }

std::vector<std::size_t> PrioritizedBuffer::slots_oldest_first() const {
  std::vector<std::size_t> out;
  out.reserve(size_);
  const std::size_t start = size_ < capacity_ ? 0 : next_;
  for (std::size_t k = 0; k < size_; ++k) out.push_back((start + k) % capacity_);
  return out;
}

void PrioritizedBuffer::save(std::ostream& out) const {
  out << "prioritized-buffer 1\n"
      << capacity_ << ' ' << feature_size_ << ' ' << size_ << ' ' << next_ << ' ' << inserts_ << '\n'
      << std::setprecision(17) << cfg_.sigma << ' ' << cfg_.rho_start << ' ' << cfg_.rho_end << ' '
      << cfg_.rho_horizon << ' ' << cfg_.priority_floor << '\n';
  for (std::size_t slot = 0; slot < size_; ++slot) {
    const auto& e = entries_[slot];
    out << e.insert_step << ' ' << e.priority << ' ' << e.target;
    for (double f : e.features) out << ' ' << f;
    out << '\n';
  }
}

PrioritizedBuffer PrioritizedBuffer::load(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "prioritized-buffer" || version != 1) {
    throw ParseError("not a prioritized-buffer snapshot", 1);
  }
  std::size_t capacity = 0, features = 0, size = 0, next = 0;
  std::uint64_t inserts = 0;
  PerConfig cfg;
  if (!(in >> capacity >> features >> size >> next >> inserts)) throw ParseError("bad buffer header", 2);
  if (!(in >> cfg.sigma >> cfg.rho_start >> cfg.rho_end >> cfg.rho_horizon >> cfg.priority_floor)) {
    throw ParseError("bad buffer config", 3);
  }
  if (size > capacity || next >= capacity) throw ParseError("inconsistent buffer header", 2);
  PrioritizedBuffer buf(capacity, features, cfg);
  for (std::size_t slot = 0; slot < size; ++slot) {
    Experience e;
    e.features.resize(features);
    if (!(in >> e.insert_step >> e.priority >> e.target)) throw ParseError("truncated buffer entry", 4 + slot);
    for (auto& f : e.features) {
      if (!(in >> f)) throw ParseError("truncated buffer entry", 4 + slot);
    }
    buf.entries_.push_back(std::move(e));
    buf.set_priority(slot, buf.entries_.back().priority);
  }
  buf.size_ = size;
  buf.next_ = next;
  buf.inserts_ = inserts;
  return buf;
}

}  // namespace opi
