#include "dmia/feature_net.h"

#include <cmath>

#include "dmia/errors.h"
#include "dmia/rng.h"

namespace dmia {

double softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FeatureNet::FeatureNet(NetShape shape, LayerStack layers)
    : shape_(shape), layers_(std::move(layers)) {
  require(!layers_.empty(), "FeatureNet: no layers");
  require(static_cast<int>(layers_.size()) == shape_.depth + 1,
          "FeatureNet: layer count does not match depth");
  Index fan_in = shape_.in_dim;
  for (const auto& layer : layers_) {
    require(layer.weight.rows() == fan_in, "FeatureNet: layer dimensions do not chain");
    require(layer.bias.size() == layer.weight.cols(), "FeatureNet: bias width mismatch");
    require(layer.weight.allFinite() && layer.bias.allFinite(),
            "FeatureNet: non-finite parameter");
    fan_in = layer.weight.cols();
  }
  require(fan_in == shape_.out_dim, "FeatureNet: output width mismatch");
}

FeatureNet FeatureNet::glorot(const NetShape& shape, RngStream& rng) {
  require(shape.in_dim > 0 && shape.out_dim > 0 && shape.depth >= 0,
          "FeatureNet: invalid shape");
  require(shape.depth == 0 || shape.hidden_dim > 0, "FeatureNet: hidden_dim must be positive");
  LayerStack layers;
  Index fan_in = shape.in_dim;
  for (int l = 0; l <= shape.depth; ++l) {
    const Index fan_out = (l == shape.depth) ? shape.out_dim : shape.hidden_dim;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Matrix(fan_in, fan_out), RowVector::Zero(fan_out)};
    for (Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = limit * (2.0 * rng.uniform() - 1.0);
    }
    layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return FeatureNet(shape, std::move(layers));
}

FeatureNet FeatureNet::identity(Index dim) {
  NetShape shape{dim, 0, 0, dim};
  LayerStack layers{Layer{Matrix::Identity(dim, dim), RowVector::Zero(dim)}};
  return FeatureNet(shape, std::move(layers));
}

std::size_t FeatureNet::num_parameters() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Matrix FeatureNet::forward(const Matrix& x) const {
  require(x.cols() == shape_.in_dim, "FeatureNet::forward: input width mismatch");
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = h * layers_[l].weight;
    z.rowwise() += layers_[l].bias;
    if (l + 1 < layers_.size()) z = z.unaryExpr([](double v) { return softplus(v); });
    h = std::move(z);
  }
  return h;
}

FeatureNet::Trace FeatureNet::forward_trace(const Matrix& x) const {
  require(x.cols() == shape_.in_dim, "FeatureNet::forward: input width mismatch");
  Trace trace;
  Matrix h = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Matrix z = h * layers_[l].weight;
    z.rowwise() += layers_[l].bias;
    trace.inputs.push_back(std::move(h));
    if (l + 1 < layers_.size()) {
      h = z.unaryExpr([](double v) { return softplus(v); });
    } else {
      h = z;
    }
    trace.pre.push_back(std::move(z));
  }
  trace.output = std::move(h);
  return trace;
}

FeatureNet::Gradients FeatureNet::backward(const Trace& trace,
                                           const Matrix& upstream) const {
  require(upstream.rows() == trace.output.rows() && upstream.cols() == trace.output.cols(),
          "FeatureNet::backward: upstream shape mismatch");
  Gradients g;
  g.params.resize(layers_.size());
  Matrix delta = upstream;  // dL/d(layer output)
  for (std::size_t k = layers_.size(); k-- > 0;) {
    if (k + 1 < layers_.size()) {
      delta.array() *= trace.pre[k].unaryExpr([](double v) { return sigmoid(v); }).array();
    }
    g.params[k].weight = trace.inputs[k].transpose() * delta;
    g.params[k].bias = delta.colwise().sum();
    delta = delta * layers_[k].weight.transpose();
  }
  g.input = std::move(delta);
  return g;
}

FeatureNet::Gradients FeatureNet::backward(const Matrix& x, const Matrix& upstream) const {
  return backward(forward_trace(x), upstream);
}

LayerStack zeros_like(const LayerStack& layers) {
  LayerStack out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back(Layer{Matrix::Zero(l.weight.rows(), l.weight.cols()),
                        RowVector::Zero(l.bias.size())});
  }
  return out;
}

AdamState AdamState::for_params(const LayerStack& params, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

namespace {

template <typename Block>
void adam_block(Block& param, const Block& grad, Block& m, Block& v, const AdamConfig& c,
                double bc1, double bc2) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  param.array() -= c.learning_rate * (m.array() / bc1) /
                   ((v.array() / bc2).sqrt() + c.epsilon);
}

}  // namespace

void adam_step(LayerStack& params, const LayerStack& grads, AdamState& state) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          "adam_step: layer count mismatch");
  ++state.step;
  const auto& c = state.config;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  for (std::size_t l = 0; l < params.size(); ++l) {
    require(grads[l].weight.rows() == params[l].weight.rows() &&
                grads[l].weight.cols() == params[l].weight.cols() &&
                grads[l].bias.size() == params[l].bias.size(),
            "adam_step: gradient shape mismatch");
    adam_block(params[l].weight, grads[l].weight, state.m[l].weight, state.v[l].weight, c,
               bc1, bc2);
    adam_block(params[l].bias, grads[l].bias, state.m[l].bias, state.v[l].bias, c, bc1, bc2);
  }
}

double ScalarAdam::update(double grad, const AdamConfig& c) {
  ++step;
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad * grad;
  const double mhat = m / (1.0 - std::pow(c.beta1, static_cast<double>(step)));
  const double vhat = v / (1.0 - std::pow(c.beta2, static_cast<double>(step)));
  return -c.learning_rate * mhat / (std::sqrt(vhat) + c.epsilon);
}

}  // namespace dmia
