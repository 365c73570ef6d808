#ifndef DMIA_FEATURE_NET_H_
#define DMIA_FEATURE_NET_H_

#include <cstdint>
#include <vector>

#include "dmia/matrix.h"

namespace dmia {

class RngStream;

// One affine map: out = in * weight + bias. weight is (fan_in x fan_out).
struct Layer {
  Matrix weight;
  RowVector bias;
};

// Parameters, gradients and Adam moments all share this layout.
using LayerStack = std::vector<Layer>;

struct NetShape {
  Index in_dim = 0;
  Index hidden_dim = 0;
  // Number of hidden (softplus) layers. Zero means a single linear map.
  int depth = 3;
  Index out_dim = 0;
};

// Multilayer perceptron: softplus on hidden layers, identity on the output.
class FeatureNet {
 public:
  FeatureNet() = default;
  FeatureNet(NetShape shape, LayerStack layers);

  // Glorot-uniform weights, zero biases.
  static FeatureNet glorot(const NetShape& shape, RngStream& rng);
  // Single linear layer with W = I, b = 0.
  static FeatureNet identity(Index dim);

  const NetShape& shape() const { return shape_; }
  Index in_dim() const { return shape_.in_dim; }
  Index out_dim() const { return shape_.out_dim; }
  const LayerStack& layers() const { return layers_; }
  LayerStack& mutable_layers() { return layers_; }
  std::size_t num_parameters() const;

  Matrix forward(const Matrix& x) const;

  struct Trace {
    // inputs[l] is the input to layer l; pre[l] its affine output.
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
    Matrix output;
  };
  Trace forward_trace(const Matrix& x) const;

  struct Gradients {
    LayerStack params;
    Matrix input;
  };
  // Gradients of the scalar L whose derivative w.r.t. forward(x) is `upstream`.
  Gradients backward(const Trace& trace, const Matrix& upstream) const;
  Gradients backward(const Matrix& x, const Matrix& upstream) const;

 private:
  NetShape shape_;
  LayerStack layers_;
};

LayerStack zeros_like(const LayerStack& layers);

double softplus(double x);
double sigmoid(double x);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  LayerStack m;
  LayerStack v;
  std::int64_t step = 0;

  static AdamState for_params(const LayerStack& params, AdamConfig config);
};

// Bias-corrected Adam update in place.
void adam_step(LayerStack& params, const LayerStack& grads, AdamState& state);

// Scalar Adam for extra trainable parameters (the kernel mixing weight).
struct ScalarAdam {
  double m = 0.0;
  double v = 0.0;
  std::int64_t step = 0;
  double update(double grad, const AdamConfig& config);
};

}  // namespace dmia

#endif  // DMIA_FEATURE_NET_H_
