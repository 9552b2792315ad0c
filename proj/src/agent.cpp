#include "opi/agent.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <string>

#include "opi/errors.hpp"

namespace opi {

bool is_action_count(std::size_t n) { return n >= 1 && ((n + 1) & n) == 0; }

ActionSpace make_action_space(std::size_t n_actions, double beta) {
  if (!is_action_count(n_actions)) {
    throw DomainError("action count must be of the form 2^n - 1, got " + std::to_string(n_actions));
  }
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
  ActionSpace space;
  space.beta = beta;
  space.proportions.reserve(n_actions);
  const double denom = static_cast<double>(n_actions + 1);
  for (std::size_t i = 0; i < n_actions; ++i) {
    space.proportions.push_back(static_cast<double>(i + 1) * beta / denom);
  }
  return space;
}

double EpsilonSchedule::at(std::uint64_t selections) const {
  if (decay_steps == 0 || selections >= decay_steps) return end;
  const double frac = static_cast<double>(selections) / static_cast<double>(decay_steps);
  return std::max(end, start * std::pow(end / start, frac));
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw DomainError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

std::vector<std::size_t> agent_layers(std::size_t state_size, const std::vector<std::size_t>& hidden,
                                      std::size_t n_actions) {
  std::vector<std::size_t> sizes{state_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1 + n_actions);
  return sizes;
}

}  // namespace

DuelingAgent::DuelingAgent(ActionSpace actions, std::size_t state_size, const AgentConfig& cfg, std::uint64_t seed)
    : actions_(std::move(actions)),
      cfg_(cfg),
      policy_rng_(make_rng(seed, kAgentPolicyStream)),
      replay_rng_(make_rng(seed, kAgentReplayStream)) {
  if (actions_.size() == 0) throw DomainError("agent needs a non-empty action space");
  if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw DomainError("discount gamma must lie in [0,1)");
  if (!(cfg.tau > 0.0 && cfg.tau <= 1.0)) throw DomainError("soft update tau must lie in (0,1]");
  if (cfg.batch_size == 0 || cfg.buffer_capacity == 0) throw DomainError("agent batch and buffer must be positive");
  if (!(cfg.epsilon.start >= 0.0 && cfg.epsilon.start <= 1.0 && cfg.epsilon.end >= 0.0 && cfg.epsilon.end <= 1.0)) {
    throw DomainError("epsilon must lie in [0,1]");
  }
  local_ = DenseNetwork(agent_layers(state_size, cfg.hidden, actions_.size()),
                        make_rng(seed, kAgentInitStream)(), cfg.init);
  target_ = local_;
  adam_ = AdamState(local_, cfg.adam);
}

Eigen::MatrixXd DuelingAgent::combine_batch(const Eigen::MatrixXd& heads) const {
  const auto n = static_cast<Eigen::Index>(actions_.size());
  Eigen::MatrixXd q = heads.bottomRows(n);
  const Eigen::RowVectorXd shift = heads.row(0) - q.colwise().mean();
  q.rowwise() += shift;
  return q;
}

std::vector<double> DuelingAgent::q_values(std::span<const double> state) const {
  const Eigen::VectorXd heads = local_.forward(state);
  return dueling_combine(heads(0), std::span<const double>(heads.data() + 1, actions_.size()));
}

std::vector<double> DuelingAgent::target_q_values(std::span<const double> state) const {
  const Eigen::VectorXd heads = target_.forward(state);
  return dueling_combine(heads(0), std::span<const double>(heads.data() + 1, actions_.size()));
}

ActionChoice DuelingAgent::greedy_action(std::span<const double> state) const {
  ActionChoice choice;
  choice.action = actions_.size() == 1 ? 0 : argmax(q_values(state));
  choice.proportion = actions_.proportions[choice.action];
  return choice;
}

ActionChoice DuelingAgent::select_action(std::span<const double> state) {
  ++selections_;
  // a single action leaves nothing to explore
  if (actions_.size() == 1) return greedy_action(state);
  const double eps = cfg_.epsilon.at(selections_ - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ActionChoice choice;
  if (unit(policy_rng_) < eps) {
    std::uniform_int_distribution<std::size_t> pick(0, actions_.size() - 1);
    choice.action = pick(policy_rng_);
    choice.proportion = actions_.proportions[choice.action];
    choice.explored = true;
  } else {
    choice = greedy_action(state);
  }
  choice.epsilon = eps;
  return choice;
}

void DuelingAgent::remember(Transition t) {
  if (t.action >= actions_.size()) throw DomainError("transition action out of range");
  if (t.state.size() != local_.input_size() || t.next_state.size() != local_.input_size()) {
    throw DomainError("transition state length mismatch");
  }
  if (replay_.size() < cfg_.buffer_capacity) {
    replay_.push_back(std::move(t));
  } else {
    replay_[replay_next_] = std::move(t);
  }
  replay_next_ = (replay_next_ + 1) % cfg_.buffer_capacity;
}

std::vector<Transition> DuelingAgent::replay_oldest_first() const {
  std::vector<Transition> out;
  out.reserve(replay_.size());
  const std::size_t start = replay_.size() < cfg_.buffer_capacity ? 0 : replay_next_;
  for (std::size_t k = 0; k < replay_.size(); ++k) out.push_back(replay_[(start + k) % replay_.size()]);
  return out;
}

std::vector<std::size_t> DuelingAgent::sample_replay(std::size_t batch) {
  if (replay_.empty()) throw DomainError("sample_replay on an empty replay");
  std::uniform_int_distribution<std::size_t> pick(0, replay_.size() - 1);
  std::vector<std::size_t> slots(batch);
  for (auto& s : slots) s = pick(replay_rng_);
  return slots;
}

std::optional<double> DuelingAgent::learn() {
  if (replay_.size() < cfg_.batch_size) return std::nullopt;
  const auto b = static_cast<Eigen::Index>(cfg_.batch_size);
  const auto h = static_cast<Eigen::Index>(local_.input_size());
  const auto n = static_cast<Eigen::Index>(actions_.size());

  const auto slots = sample_replay(cfg_.batch_size);
  Eigen::MatrixXd states(h, b), next_states(h, b);
  std::vector<const Transition*> batch(cfg_.batch_size);
  for (Eigen::Index j = 0; j < b; ++j) {
    const Transition& t = replay_[slots[j]];
    batch[j] = &t;
    states.col(j) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), h);
    next_states.col(j) = Eigen::Map<const Eigen::VectorXd>(t.next_state.data(), h);
  }

  const Eigen::MatrixXd next_q = combine_batch(target_.forward_batch(next_states));
  const Eigen::RowVectorXd next_max = next_q.colwise().maxCoeff();

  ForwardCache cache;
  const Eigen::MatrixXd q = combine_batch(local_.forward_batch(states, &cache));

  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(1 + n, b);
  const double inv_b = 1.0 / static_cast<double>(b);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto a = static_cast<Eigen::Index>(batch[j]->action);
    const double delta = q(a, j) - td_target(batch[j]->reward, cfg_.gamma, next_max(j));
    loss += delta * delta * inv_b;
    const double g = 2.0 * delta * inv_b;
    // dQ_a/dV = 1, dQ_a/dA_i = [i == a] - 1/n
    upstream(0, j) = g;
    upstream.col(j).tail(n).setConstant(-g * inv_n);
    upstream(1 + a, j) += g;
  }
  if (!std::isfinite(loss)) {
    throw NumericFault("agent: non-finite TD loss after " + std::to_string(adam_.step_count) + " updates");
  }
  adam_step(local_, local_.backward(cache, upstream), adam_);
  return loss;
}

void DuelingAgent::sync_target() { soft_update(target_, local_, cfg_.tau); }

void DuelingAgent::save(std::ostream& out, bool include_replay) const {
  out << "dueling-agent 1\n"
      << selections_ << ' ' << adam_.step_count << ' ' << replay_next_ << '\n'
      << policy_rng_ << '\n'
      << replay_rng_ << '\n';
  local_.save(out);
  target_.save(out);
  DenseNetwork(adam_.first_moment).save(out);
  DenseNetwork(adam_.second_moment).save(out);
  out << (include_replay ? replay_.size() : 0) << '\n' << std::setprecision(17);
  if (!include_replay) return;
  for (const auto& t : replay_) {
    out << t.action << ' ' << t.reward;
    for (double v : t.state) out << ' ' << v;
    for (double v : t.next_state) out << ' ' << v;
    out << '\n';
  }
}

void DuelingAgent::restore(std::istream& in) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "dueling-agent" || version != 1) {
    throw ParseError("not a dueling-agent snapshot", 1);
  }
  std::uint64_t selections = 0, steps = 0;
  std::size_t next = 0, count = 0;
  Rng policy, replay;
  if (!(in >> selections >> steps >> next >> policy >> replay)) throw ParseError("bad agent header", 2);
  DenseNetwork local = DenseNetwork::load(in);
  DenseNetwork target = DenseNetwork::load(in);
  if (local.layer_sizes() != local_.layer_sizes() || target.layer_sizes() != local_.layer_sizes()) {
    throw DomainError("agent snapshot has a different architecture");
  }
  AdamState adam(local, cfg_.adam);
  adam.first_moment = DenseNetwork::load(in).layers();
  adam.second_moment = DenseNetwork::load(in).layers();
  adam.step_count = steps;
  if (!(in >> count)) throw ParseError("missing replay count", 0);
  std::vector<Transition> transitions(count);
  const std::size_t h = local.input_size();
  for (auto& t : transitions) {
    t.state.resize(h);
    t.next_state.resize(h);
    if (!(in >> t.action >> t.reward)) throw ParseError("truncated agent replay", 0);
    for (auto& v : t.state) in >> v;
    for (auto& v : t.next_state) in >> v;
    if (!in) throw ParseError("truncated agent replay", 0);
  }
  local_ = std::move(local);
  target_ = std::move(target);
  adam_ = std::move(adam);
  selections_ = selections;
  policy_rng_ = policy;
  replay_rng_ = replay;
  if (count > 0) {
    replay_ = std::move(transitions);
    replay_next_ = next;
  }
}

}  // namespace opi
