#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace opi {

/// Affine layer: out = weight * in + bias.
struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Same shapes as the network's layers; used for gradients and Adam moments.
using LayerParams = std::vector<DenseLayer>;

enum class WeightInit { FanInUniform, Zero };

/// Activations kept from a batched forward pass, consumed by backward().
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = inputs, back() = outputs
};

/// Fully connected network with rectifier hidden layers and an identity output layer.
class DenseNetwork {
 public:
  DenseNetwork() = default;
  DenseNetwork(std::vector<std::size_t> layer_sizes, std::uint64_t seed,
               WeightInit init = WeightInit::FanInUniform);
  explicit DenseNetwork(LayerParams layers);

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  const std::vector<std::size_t>& layer_sizes() const { return sizes_; }
  std::size_t parameter_count() const;

  LayerParams& layers() { return layers_; }
  const LayerParams& layers() const { return layers_; }

  Eigen::VectorXd forward(std::span<const double> x) const;

  /// Columns of `inputs` are samples. Fills `cache` when given.
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, ForwardCache* cache = nullptr) const;

  /// Gradient of sum over samples of <upstream[:, j], output[:, j]> with respect to every
  /// parameter. The rectifier derivative at 0 is taken as 0.
  LayerParams backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const;
  LayerParams backward(std::span<const double> x, std::span<const double> upstream) const;

  bool all_finite() const;

  /// Text snapshot: header line, layer sizes, then row-major weights and biases per layer.
  void save(std::ostream& out) const;
  static DenseNetwork load(std::istream& in);

  friend bool operator==(const DenseNetwork& a, const DenseNetwork& b);

 private:
  std::vector<std::size_t> sizes_;
  LayerParams layers_;
};

LayerParams zeros_like(const LayerParams& params);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global-norm clip; 0 disables
};

struct AdamState {
  AdamState() = default;
  AdamState(const DenseNetwork& net, AdamConfig cfg);

  AdamConfig config;
  LayerParams first_moment;
  LayerParams second_moment;
  std::uint64_t step_count = 0;
};

/// One bias-corrected Adam update. Throws NumericFault on a non-finite gradient.
void adam_step(DenseNetwork& net, const LayerParams& grads, AdamState& state);

/// target <- tau * local + (1 - tau) * target.
void soft_update(DenseNetwork& target, const DenseNetwork& local, double tau);

/// Q_i = V + (A_i - mean(A)).
std::vector<double> dueling_combine(double value, std::span<const double> advantages);

}  // namespace opi
