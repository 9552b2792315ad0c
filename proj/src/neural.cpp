#include "opi/neural.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "opi/errors.hpp"
#include "opi/random.hpp"

namespace opi {
namespace {

constexpr const char* kSnapshotTag = "dense-network";
constexpr int kSnapshotVersion = 1;

void check_same_shapes(const LayerParams& a, const LayerParams& b, const char* what) {
  bool ok = a.size() == b.size();
  for (std::size_t i = 0; ok && i < a.size(); ++i) {
    ok = a[i].weight.rows() == b[i].weight.rows() && a[i].weight.cols() == b[i].weight.cols() &&
         a[i].bias.size() == b[i].bias.size();
  }
  if (!ok) throw DomainError(std::string(what) + ": parameter shapes disagree");
}

}  // namespace

DenseNetwork::DenseNetwork(std::vector<std::size_t> layer_sizes, std::uint64_t seed, WeightInit init)
    : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw DomainError("a network needs at least an input and an output layer");
  for (auto s : sizes_) {
    if (s == 0) throw DomainError("layer sizes must be positive");
  }
  Rng rng(seed);
  layers_.reserve(sizes_.size() - 1);
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    DenseLayer layer{Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)};
    if (init == WeightInit::FanInUniform) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (Eigen::Index r = 0; r < out; ++r) {
        for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = dist(rng);
      }
      for (Eigen::Index r = 0; r < out; ++r) layer.bias(r) = dist(rng);
    }
    layers_.push_back(std::move(layer));
  }
}

DenseNetwork::DenseNetwork(LayerParams layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw DomainError("a network needs at least one layer");
  sizes_.push_back(static_cast<std::size_t>(layers_.front().weight.cols()));
  for (const auto& layer : layers_) {
    if (static_cast<std::size_t>(layer.weight.cols()) != sizes_.back() ||
        layer.bias.size() != layer.weight.rows()) {
      throw DomainError("inconsistent layer shapes");
    }
    sizes_.push_back(static_cast<std::size_t>(layer.weight.rows()));
  }
}

std::size_t DenseNetwork::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

Eigen::VectorXd DenseNetwork::forward(std::span<const double> x) const {
  if (x.size() != input_size()) {
    throw DomainError("forward: expected " + std::to_string(input_size()) + " inputs, got " +
                      std::to_string(x.size()));
  }
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::VectorXd z = layers_[l].bias;
    z.noalias() += layers_[l].weight * a;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd DenseNetwork::forward_batch(const Eigen::MatrixXd& inputs, ForwardCache* cache) const {
  if (static_cast<std::size_t>(inputs.rows()) != input_size()) {
    throw DomainError("forward_batch: input rows do not match the input layer");
  }
  if (cache) {
    cache->activations.resize(layers_.size() + 1);
    cache->activations[0] = inputs;
  }
  Eigen::MatrixXd a = inputs;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z(layers_[l].weight.rows(), a.cols());
    z.noalias() = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.cwiseMax(0.0);
    a = std::move(z);
    if (cache) cache->activations[l + 1] = a;
  }
  return a;
}

LayerParams DenseNetwork::backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const {
  if (cache.activations.size() != layers_.size() + 1) throw DomainError("backward: stale forward cache");
  if (static_cast<std::size_t>(upstream.rows()) != output_size() ||
      upstream.cols() != cache.activations.back().cols()) {
    throw DomainError("backward: upstream gradient shape does not match the output");
  }
  LayerParams grads(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = cache.activations[l];
    grads[l].weight.noalias() = delta * input.transpose();
    grads[l].bias = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd prev(input.rows(), input.cols());
    prev.noalias() = layers_[l].weight.transpose() * delta;
    delta = (input.array() > 0.0).select(prev, 0.0);
  }
  return grads;
}

LayerParams DenseNetwork::backward(std::span<const double> x, std::span<const double> upstream) const {
  if (x.size() != input_size() || upstream.size() != output_size()) {
    throw DomainError("backward: dimension mismatch");
  }
  ForwardCache cache;
  forward_batch(Eigen::Map<const Eigen::MatrixXd>(x.data(), static_cast<Eigen::Index>(x.size()), 1), &cache);
  return backward(cache,
                  Eigen::Map<const Eigen::MatrixXd>(upstream.data(), static_cast<Eigen::Index>(upstream.size()), 1));
}

bool DenseNetwork::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

void DenseNetwork::save(std::ostream& out) const {
  out << kSnapshotTag << ' ' << kSnapshotVersion << '\n' << "layers " << sizes_.size();
  for (auto s : sizes_) out << ' ' << s;
  out << '\n' << std::setprecision(17);
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out << (c ? " " : "") << layer.weight(r, c);
      out << '\n';
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out << (r ? " " : "") << layer.bias(r);
    out << '\n';
  }
}

DenseNetwork DenseNetwork::load(std::istream& in) {
  std::string tag, word;
  int version = 0;
  std::size_t count = 0;
  if (!(in >> tag >> version) || tag != kSnapshotTag || version != kSnapshotVersion) {
    throw ParseError("not a dense-network snapshot", 1);
  }
  if (!(in >> word >> count) || word != "layers" || count < 2) throw ParseError("bad layer header", 2);
  std::vector<std::size_t> sizes(count);
  for (auto& s : sizes) {
    if (!(in >> s) || s == 0) throw ParseError("bad layer size", 2);
  }
  LayerParams layers;
  for (std::size_t l = 0; l + 1 < count; ++l) {
    DenseLayer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd(sizes[l + 1])};
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
        if (!(in >> layer.weight(r, c))) throw ParseError("truncated weights in layer " + std::to_string(l), 3);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      if (!(in >> layer.bias(r))) throw ParseError("truncated biases in layer " + std::to_string(l), 3);
    }
    layers.push_back(std::move(layer));
  }
  return DenseNetwork(std::move(layers));
}

bool operator==(const DenseNetwork& a, const DenseNetwork& b) {
  if (a.sizes_ != b.sizes_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    if (a.layers_[l].weight != b.layers_[l].weight || a.layers_[l].bias != b.layers_[l].bias) return false;
  }
  return true;
}

LayerParams zeros_like(const LayerParams& params) {
  LayerParams out;
  out.reserve(params.size());
  for (const auto& p : params) {
    out.push_back({Eigen::MatrixXd::Zero(p.weight.rows(), p.weight.cols()), Eigen::VectorXd::Zero(p.bias.size())});
  }
  return out;
}

AdamState::AdamState(const DenseNetwork& net, AdamConfig cfg)
    : config(cfg), first_moment(zeros_like(net.layers())), second_moment(zeros_like(net.layers())) {
  if (!(cfg.learning_rate > 0.0)) throw DomainError("Adam learning rate must be positive");
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0 && cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
    throw DomainError("Adam decay rates must lie in (0,1)");
  }
  if (!(cfg.epsilon > 0.0)) throw DomainError("Adam epsilon must be positive");
}

void adam_step(DenseNetwork& net, const LayerParams& grads, AdamState& state) {
  auto& params = net.layers();
  check_same_shapes(params, grads, "adam_step");
  check_same_shapes(params, state.first_moment, "adam_step");

  double sq_norm = 0.0;
  for (std::size_t l = 0; l < grads.size(); ++l) {
    if (!grads[l].weight.allFinite() || !grads[l].bias.allFinite()) {
      throw NumericFault("adam_step: non-finite gradient in layer " + std::to_string(l) + " at step " +
                         std::to_string(state.step_count + 1));
    }
    sq_norm += grads[l].weight.squaredNorm() + grads[l].bias.squaredNorm();
  }
  double scale = 1.0;
  const auto& cfg = state.config;
  if (cfg.clip_norm > 0.0 && sq_norm > cfg.clip_norm * cfg.clip_norm) scale = cfg.clip_norm / std::sqrt(sq_norm);

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double step = cfg.learning_rate / bc1;
  const double inv_sqrt_bc2 = 1.0 / std::sqrt(bc2);

  auto update = [&](auto param, auto grad, auto m, auto v) {
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * scale * grad;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * (scale * grad).square();
    param -= step * m / (v.sqrt() * inv_sqrt_bc2 + cfg.epsilon);
  };
  for (std::size_t l = 0; l < params.size(); ++l) {
    update(params[l].weight.array(), grads[l].weight.array(), state.first_moment[l].weight.array(),
           state.second_moment[l].weight.array());
    update(params[l].bias.array(), grads[l].bias.array(), state.first_moment[l].bias.array(),
           state.second_moment[l].bias.array());
  }
}

void soft_update(DenseNetwork& target, const DenseNetwork& local, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw DomainError("soft update coefficient must lie in [0,1]");
  check_same_shapes(target.layers(), local.layers(), "soft_update");
  if (tau == 0.0) return;
  auto& dst = target.layers();
  const auto& src = local.layers();
  if (tau == 1.0) {
    dst = src;
    return;
  }
  for (std::size_t l = 0; l < dst.size(); ++l) {
    dst[l].weight = tau * src[l].weight + (1.0 - tau) * dst[l].weight;
    dst[l].bias = tau * src[l].bias + (1.0 - tau) * dst[l].bias;
  }
}

std::vector<double> dueling_combine(double value, std::span<const double> advantages) {
  if (advantages.empty()) throw DomainError("dueling_combine: empty advantage vector");
  double mean = 0.0;
  for (double a : advantages) mean += a;
  mean /= static_cast<double>(advantages.size());
  std::vector<double> q;
  q.reserve(advantages.size());
  for (double a : advantages) q.push_back(value + (a - mean));
  return q;
}

}  // namespace opi
