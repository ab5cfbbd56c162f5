#include "fprune/network.hpp"

#include <cmath>

#include "fprune/errors.hpp"
#include "fprune/rng.hpp"

namespace fprune {

struct Network::Frame {
  const LayerSpec* layer = nullptr;
  // conv/relu/pool/fc: {input}; flatten: {input}; block: {x, h1, a1, h2, a2, sum}
  std::vector<Tensor> saved;
};

namespace {

Shape expected_weight_shape(const LayerSpec& layer) {
  if (layer.kind == LayerKind::kConv) {
    return {layer.conv.filters, layer.conv.in_channels, layer.conv.kernel_h,
            layer.conv.kernel_w};
  }
  return {layer.fc.out_dim, layer.fc.in_dim};
}

std::size_t bias_extent(const LayerSpec& layer) {
  return layer.kind == LayerKind::kConv ? layer.conv.filters : layer.fc.out_dim;
}

bool has_params(const LayerSpec& layer) {
  return layer.kind == LayerKind::kConv || layer.kind == LayerKind::kFc;
}

ConvGeometry geometry(const LayerSpec& layer) {
  return {layer.conv.stride, layer.conv.pad};
}

PoolGeometry pool_geometry(const LayerSpec& layer) {
  return {layer.pool.k, layer.pool.stride};
}

}  // namespace

Network::Network(NetworkSpec spec, ParamMap params)
    : spec_(std::move(spec)), params_(std::move(params)) {
  validate();
}

Network Network::build(NetworkSpec spec, std::uint64_t seed) {
  validate_network_spec(spec);
  Rng rng(seed);
  ParamMap params;
  for_each_layer(spec, [&](const LayerSpec& layer, const LayerSpec*) {
    if (!has_params(layer)) return;
    Tensor weight(expected_weight_shape(layer));
    const double fan_in = static_cast<double>(weight.size() / weight.dim(0));
    const double scale = std::sqrt(2.0 / fan_in);
    for (double& w : weight.data()) w = rng.normal() * scale;
    params.emplace(layer.id, LayerParams{std::move(weight), Tensor({bias_extent(layer)})});
  });
  return Network(std::move(spec), std::move(params));
}

const LayerParams& Network::params(int id) const {
  auto it = params_.find(id);
  if (it == params_.end()) throw InputError("layer " + std::to_string(id) + " has no parameters");
  return it->second;
}

LayerParams& Network::mutable_params(int id) {
  auto it = params_.find(id);
  if (it == params_.end()) throw InputError("layer " + std::to_string(id) + " has no parameters");
  return it->second;
}

void Network::validate() const {
  validate_network_spec(spec_);
  std::size_t expected = 0;
  for_each_layer(spec_, [&](const LayerSpec& layer, const LayerSpec*) {
    if (!has_params(layer)) return;
    ++expected;
    auto it = params_.find(layer.id);
    if (it == params_.end()) {
      throw ValidationError("missing parameters for layer " + std::to_string(layer.id));
    }
    const Shape ws = expected_weight_shape(layer);
    if (it->second.weight.shape() != ws) {
      throw ValidationError("layer " + std::to_string(layer.id) + " weight shape " +
                            it->second.weight.shape_string() + " does not match spec " +
                            shape_to_string(ws));
    }
    if (it->second.bias.shape() != Shape{bias_extent(layer)}) {
      throw ValidationError("layer " + std::to_string(layer.id) + " bias shape " +
                            it->second.bias.shape_string() + " does not match spec");
    }
  });
  if (expected != params_.size()) {
    throw ValidationError("parameter map has entries for layers absent from the spec");
  }
}

Tensor Network::run(const Tensor& batch, const std::set<int>& taps, MacCounter* counter,
                    std::map<int, Tensor>* tapped, std::vector<Frame>* tape) const {
  const Shape want{batch.rank() == 4 ? batch.dim(0) : 0, spec_.input.channels,
                   spec_.input.height, spec_.input.width};
  if (batch.shape() != want) {
    throw ShapeError("batch", "expected [N," + std::to_string(spec_.input.channels) + "," +
                                  std::to_string(spec_.input.height) + "," +
                                  std::to_string(spec_.input.width) + "], got " +
                                  batch.shape_string());
  }
  for (int id : taps) {
    bool known = false;
    for_each_layer(spec_, [&](const LayerSpec& layer, const LayerSpec*) {
      known = known || (layer.id == id && layer.kind == LayerKind::kConv);
    });
    if (!known) throw InputError("unknown tap id " + std::to_string(id) + " (taps must name conv layers)");
  }
  auto tap = [&](int id, const Tensor& t) {
    if (tapped && taps.count(id)) (*tapped)[id] = t;
  };

  Tensor x = batch;
  int pending_tap = 0;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& layer = spec_.layers[i];
    Frame frame{&layer, {}};
    Tensor y;
    switch (layer.kind) {
      case LayerKind::kConv: {
        const LayerParams& p = params(layer.id);
        y = conv2d(x, p.weight, p.bias, geometry(layer), counter);
        const bool relu_next = i + 1 < spec_.layers.size() &&
                               spec_.layers[i + 1].kind == LayerKind::kRelu;
        if (relu_next) pending_tap = layer.id;
        else tap(layer.id, y);
        break;
      }
      case LayerKind::kRelu:
        y = relu(x);
        if (pending_tap) tap(pending_tap, y);
        break;
      case LayerKind::kMaxPool:
        y = maxpool2d(x, pool_geometry(layer));
        break;
      case LayerKind::kFlatten:
        y = x.rank() == 2 ? x : x.reshaped({x.dim(0), x.size() / x.dim(0)});
        break;
      case LayerKind::kFc: {
        const LayerParams& p = params(layer.id);
        y = fully_connected(x, p.weight, p.bias, counter);
        break;
      }
      case LayerKind::kResidualBlock: {
        const LayerSpec& c1 = layer.block[0];
        const LayerSpec& c2 = layer.block[1];
        const LayerSpec& c3 = layer.block[2];
        Tensor h1 = conv2d(x, params(c1.id).weight, params(c1.id).bias, geometry(c1), counter);
        Tensor a1 = relu(h1);
        tap(c1.id, a1);
        Tensor h2 = conv2d(a1, params(c2.id).weight, params(c2.id).bias, geometry(c2), counter);
        Tensor a2 = relu(h2);
        tap(c2.id, a2);
        Tensor sum = conv2d(a2, params(c3.id).weight, params(c3.id).bias, geometry(c3), counter);
        sum += x;
        y = relu(sum);
        tap(c3.id, y);
        if (tape) {
          frame.saved = {x, std::move(h1), std::move(a1), std::move(h2), std::move(a2),
                         std::move(sum)};
        }
        break;
      }
    }
    if (layer.kind != LayerKind::kConv) pending_tap = 0;
    if (tape) {
      if (layer.kind != LayerKind::kResidualBlock) frame.saved.push_back(std::move(x));
      tape->push_back(std::move(frame));
    }
    x = std::move(y);
  }
  return x;
}

ForwardResult Network::forward(const Tensor& batch, const std::set<int>& taps,
                               MacCounter* counter) const {
  ForwardResult result;
  result.logits = run(batch, taps, counter, &result.taps, nullptr);
  return result;
}

BackwardResult Network::backward(const Tensor& batch, std::span<const int> labels) const {
  std::vector<Frame> tape;
  BackwardResult result;
  result.logits = run(batch, {}, nullptr, nullptr, &tape);
  LossResult loss = softmax_cross_entropy(result.logits, labels);
  result.loss = loss.loss;
  Tensor grad = std::move(loss.grad);

  auto store = [&](int id, Tensor w, Tensor b) {
    result.grads.insert_or_assign(id, LayerParams{std::move(w), std::move(b)});
  };
  for (auto it = tape.rbegin(); it != tape.rend(); ++it) {
    const LayerSpec& layer = *it->layer;
    switch (layer.kind) {
      case LayerKind::kConv: {
        Conv2dGrads g = conv2d_backward(it->saved[0], params(layer.id).weight, grad,
                                        geometry(layer));
        store(layer.id, std::move(g.weight), std::move(g.bias));
        grad = std::move(g.input);
        break;
      }
      case LayerKind::kRelu:
        grad = relu_backward(it->saved[0], grad);
        break;
      case LayerKind::kMaxPool:
        grad = maxpool2d_backward(it->saved[0], grad, pool_geometry(layer));
        break;
      case LayerKind::kFlatten:
        grad = grad.reshaped(it->saved[0].shape());
        break;
      case LayerKind::kFc: {
        FcGrads g = fully_connected_backward(it->saved[0], params(layer.id).weight, grad);
        store(layer.id, std::move(g.weight), std::move(g.bias));
        grad = std::move(g.input);
        break;
      }
      case LayerKind::kResidualBlock: {
        const auto& s = it->saved;  // x, h1, a1, h2, a2, sum
        const LayerSpec& c1 = layer.block[0];
        const LayerSpec& c2 = layer.block[1];
        const LayerSpec& c3 = layer.block[2];
        const Tensor dsum = relu_backward(s[5], grad);
        Conv2dGrads g3 = conv2d_backward(s[4], params(c3.id).weight, dsum, geometry(c3));
        store(c3.id, std::move(g3.weight), std::move(g3.bias));
        Tensor dh2 = relu_backward(s[3], g3.input);
        Conv2dGrads g2 = conv2d_backward(s[2], params(c2.id).weight, dh2, geometry(c2));
        store(c2.id, std::move(g2.weight), std::move(g2.bias));
        Tensor dh1 = relu_backward(s[1], g2.input);
        Conv2dGrads g1 = conv2d_backward(s[0], params(c1.id).weight, dh1, geometry(c1));
        store(c1.id, std::move(g1.weight), std::move(g1.bias));
        grad = std::move(g1.input);
        grad += dsum;
        break;
      }
    }
  }
  return result;
}

std::vector<Tensor*> Network::parameter_tensors() {
  std::vector<Tensor*> out;
  for (auto& [id, p] : params_) {
    out.push_back(&p.weight);
    out.push_back(&p.bias);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [id, p] : params_) total += p.weight.size() + p.bias.size();
  return total;
}

std::vector<const Tensor*> gradient_tensors(const ParamMap& grads) {
  std::vector<const Tensor*> out;
  for (const auto& [id, g] : grads) {
    out.push_back(&g.weight);
    out.push_back(&g.bias);
  }
  return out;
}

}  // namespace fprune
