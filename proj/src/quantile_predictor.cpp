#include "opi/quantile_predictor.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

#include "opi/errors.hpp"
#include "opi/metrics.hpp"

namespace opi {
namespace {

std::vector<std::size_t> predictor_layers(std::size_t input_size, const std::vector<std::size_t>& hidden) {
  std::vector<std::size_t> sizes{input_size};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  return sizes;
}

std::string describe_batch(const PrioritizedBuffer& buffer, const PrioritizedSample& batch,
                           const Eigen::MatrixXd& q) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t j = 0; j < batch.indices.size(); ++j) {
    const auto& e = buffer.at(batch.indices[j]);
    os << "\n  slot " << batch.indices[j] << " target " << e.target << " prediction " << q(0, j) << " weight "
       << batch.weights[j];
  }
  return os.str();
}

}  // namespace

QuantilePredictor::QuantilePredictor(double alpha, std::size_t input_size, const PredictorConfig& cfg,
                                     std::uint64_t seed)
    : alpha_(alpha),
      batch_size_(cfg.batch_size),
      loss_(cfg.loss),
      buffer_(cfg.buffer_capacity, input_size, cfg.per),
      rng_(seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("predictor proportion must lie in (0,1)");
  if (cfg.batch_size == 0) throw DomainError("predictor batch size must be positive");
  net_ = DenseNetwork(predictor_layers(input_size, cfg.hidden), rng_(), cfg.init);
  adam_ = AdamState(net_, cfg.adam);
}

QuantilePredictor::QuantilePredictor(double alpha, DenseNetwork net, AdamState adam, PrioritizedBuffer buffer,
                                     const PredictorConfig& cfg, Rng rng, std::uint64_t updates)
    : alpha_(alpha),
      batch_size_(cfg.batch_size),
      loss_(cfg.loss),
      net_(std::move(net)),
      adam_(std::move(adam)),
      buffer_(std::move(buffer)),
      rng_(std::move(rng)),
      updates_(updates) {}

double QuantilePredictor::predict(std::span<const double> x) const { return net_.forward(x)(0); }

std::optional<double> QuantilePredictor::observe_and_update(std::span<const double> x, double y) {
  if (x.size() != input_size()) throw DomainError("observe_and_update: feature length mismatch");
  buffer_.insert(std::vector<double>(x.begin(), x.end()), y);
  auto batch = buffer_.sample(batch_size_, rng_);
  if (!batch) return std::nullopt;

  const auto b = static_cast<Eigen::Index>(batch_size_);
  const auto h = static_cast<Eigen::Index>(input_size());
  Eigen::MatrixXd inputs(h, b);
  for (Eigen::Index j = 0; j < b; ++j) {
    const auto& features = buffer_.at(batch->indices[j]).features;
    inputs.col(j) = Eigen::Map<const Eigen::VectorXd>(features.data(), h);
  }
  ForwardCache cache;
  const Eigen::MatrixXd q = net_.forward_batch(inputs, &cache);

  std::vector<double> losses(batch_size_);
  Eigen::MatrixXd upstream(1, b);
  double loss = 0.0;
  const double inv_b = 1.0 / static_cast<double>(batch_size_);
  for (Eigen::Index j = 0; j < b; ++j) {
    const double target = buffer_.at(batch->indices[j]).target;
    const double w = batch->weights[j];
    const double p = pinball_loss(target, q(0, j), alpha_);
    const double dp = pinball_subgradient(target, q(0, j), alpha_);
    losses[j] = p;
    if (loss_ == QuantileLoss::SquaredPinball) {
      loss += w * p * p * inv_b;
      upstream(0, j) = 2.0 * w * p * dp * inv_b;
    } else {
      loss += w * p * inv_b;
      upstream(0, j) = w * dp * inv_b;
    }
  }
  if (!std::isfinite(loss)) {
    throw NumericFault("quantile predictor alpha=" + std::to_string(alpha_) + ": non-finite batch loss" +
                       describe_batch(buffer_, *batch, q));
  }
  adam_step(net_, net_.backward(cache, upstream), adam_);
  buffer_.update_priorities(batch->indices, losses);
  ++updates_;
  return loss;
}

void QuantilePredictor::save(std::ostream& out) const {
  out << "quantile-predictor 1\n" << std::setprecision(17) << alpha_ << ' ' << updates_ << ' '
      << adam_.step_count << '\n'
      << rng_ << '\n';
  net_.save(out);
  DenseNetwork(adam_.first_moment).save(out);
  DenseNetwork(adam_.second_moment).save(out);
  buffer_.save(out);
}

QuantilePredictor QuantilePredictor::load(std::istream& in, const PredictorConfig& cfg) {
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "quantile-predictor" || version != 1) {
    throw ParseError("not a quantile-predictor snapshot", 1);
  }
  double alpha = 0.0;
  std::uint64_t updates = 0, steps = 0;
  Rng rng;
  if (!(in >> alpha >> updates >> steps >> rng)) throw ParseError("bad predictor header", 2);
  DenseNetwork net = DenseNetwork::load(in);
  AdamState adam(net, cfg.adam);
  adam.first_moment = DenseNetwork::load(in).layers();
  adam.second_moment = DenseNetwork::load(in).layers();
  adam.step_count = steps;
  PrioritizedBuffer buffer = PrioritizedBuffer::load(in);
  return QuantilePredictor(alpha, std::move(net), std::move(adam), std::move(buffer), cfg, std::move(rng), updates);
}

PredictorBank::PredictorBank(std::span<const double> lower_proportions, double beta, std::size_t input_size,
                             const PredictorConfig& cfg, std::uint64_t seed)
    : beta_(beta) {
  if (lower_proportions.empty()) throw DomainError("predictor bank needs at least one proportion");
  if (!(beta > 0.0 && beta < 1.0)) throw DomainError("beta must lie in (0,1)");
  std::set<double> seen(lower_proportions.begin(), lower_proportions.end());
  if (seen.size() != lower_proportions.size()) throw DomainError("duplicate quantile proportions");

  const std::size_t n = lower_proportions.size();
  predictors_.reserve(2 * n);
  auto seed_for = [&](std::size_t position) { return make_rng(seed, kPredictorStream + position)(); };
  for (std::size_t i = 0; i < n; ++i) {
    predictors_.emplace_back(lower_proportions[i], input_size, cfg, seed_for(i));
  }
  for (std::size_t i = 0; i < n; ++i) {
    predictors_.emplace_back(lower_proportions[i] + (1.0 - beta), input_size, cfg, seed_for(n + i));
  }
}

void PredictorBank::save(std::ostream& out) const {
  out << "predictor-bank 1\n" << predictors_.size() << '\n';
  for (const auto& p : predictors_) p.save(out);
}

void PredictorBank::restore(std::istream& in, const PredictorConfig& cfg) {
  std::string tag;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> tag >> version >> count) || tag != "predictor-bank" || version != 1) {
    throw ParseError("not a predictor-bank snapshot", 1);
  }
  if (count != predictors_.size()) throw DomainError("snapshot holds a bank of a different size");
  std::vector<QuantilePredictor> loaded;
  loaded.reserve(count);
  for (std::size_t i = 0; i < count; ++i) loaded.push_back(QuantilePredictor::load(in, cfg));
  predictors_ = std::move(loaded);
}

}  // namespace opi
