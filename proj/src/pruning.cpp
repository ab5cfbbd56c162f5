#include "fprune/pruning.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <utility>

#include "fprune/errors.hpp"
#include "fprune/flops.hpp"

namespace fprune {

std::size_t retained_count(std::size_t n, int m_percent) {
  if (m_percent < 0 || m_percent >= 100) {
    throw InputError("pruning level must be in [0, 100), got " + std::to_string(m_percent));
  }
  const std::size_t kept = n * static_cast<std::size_t>(100 - m_percent) / 100;
  return std::max<std::size_t>(1, kept);
}

std::vector<std::size_t> select_top_m(const ScoreVector& scores, std::size_t m_retain) {
  const std::size_t n = scores.size();
  if (m_retain < 1 || m_retain > n) {
    throw InputError("cannot retain " + std::to_string(m_retain) + " of " + std::to_string(n) +
                     " filters");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.scores[a] > scores.scores[b];
  });
  order.resize(m_retain);
  std::sort(order.begin(), order.end());
  return order;
}

int pruning_successor(const NetworkSpec& spec, int layer_id) {
  const LayerLocation loc = find_layer(const_cast<NetworkSpec&>(spec), layer_id);
  if (loc.layer->kind != LayerKind::kConv) {
    throw InputError("layer " + std::to_string(layer_id) + " is not a conv layer");
  }
  if (loc.parent != nullptr) {
    if (loc.index + 1 < loc.parent->block.size()) return loc.parent->block[loc.index + 1].id;
    throw ConstraintError("layer " + std::to_string(layer_id) +
                          " is the last conv of residual block " +
                          std::to_string(loc.parent->id) + "; its output feeds the skip sum");
  }
  bool flattened = false;
  for (std::size_t i = loc.index + 1; i < spec.layers.size(); ++i) {
    const LayerSpec& next = spec.layers[i];
    switch (next.kind) {
      case LayerKind::kRelu:
      case LayerKind::kMaxPool:
        continue;
      case LayerKind::kFlatten:
        flattened = true;
        continue;
      case LayerKind::kConv:
      case LayerKind::kFc:
        if (next.kind == LayerKind::kFc && !flattened) break;
        return next.id;
      case LayerKind::kResidualBlock:
        throw ConstraintError("layer " + std::to_string(layer_id) +
                              " feeds residual block " + std::to_string(next.id) +
                              " whose skip sum fixes its width");
    }
    break;
  }
  throw ConstraintError("layer " + std::to_string(layer_id) + " has no prunable successor");
}

namespace {

void check_keep(const std::vector<std::size_t>& keep, std::size_t n, int layer_id) {
  if (keep.empty()) {
    throw InputError("keep set for layer " + std::to_string(layer_id) + " is empty");
  }
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= n) {
      throw InputError("keep index " + std::to_string(keep[i]) + " out of range for layer " +
                       std::to_string(layer_id) + " with " + std::to_string(n) + " filters");
    }
    if (i > 0 && keep[i] <= keep[i - 1]) {
      throw InputError("keep set for layer " + std::to_string(layer_id) +
                       " must be strictly ascending");
    }
  }
}

// Keeps slices `keep` along dimension `axis` where each kept index spans
// `block` consecutive positions of that axis.
Tensor take(const Tensor& t, std::size_t axis, const std::vector<std::size_t>& keep,
            std::size_t block = 1) {
  Shape shape = t.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= shape[d];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) inner *= shape[d];
  const std::size_t extent = shape[axis];
  shape[axis] = keep.size() * block;
  Tensor out(shape);
  const double* src = t.raw();
  double* dst = out.raw();
  const std::size_t chunk = block * inner;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < keep.size(); ++k) {
      std::copy_n(src + (o * extent + keep[k] * block) * inner, chunk,
                  dst + (o * keep.size() + k) * chunk);
    }
  }
  return out;
}

}  // namespace

SurgeryRecord prune_layer(Network& network, int layer_id, const std::vector<std::size_t>& keep) {
  const LayerSpec& layer = find_layer(network.spec(), layer_id);
  if (layer.kind != LayerKind::kConv) {
    throw InputError("layer " + std::to_string(layer_id) + " is not a conv layer");
  }
  const std::size_t n = layer.conv.filters;
  const int successor = pruning_successor(network.spec(), layer_id);
  check_keep(keep, n, layer_id);

  SurgeryRecord rec;
  rec.layer_id = layer_id;
  rec.filters_before = n;
  rec.filters_after = keep.size();
  rec.successors = {successor};
  const std::set<std::size_t> kept(keep.begin(), keep.end());
  for (std::size_t f = 0; f < n; ++f) {
    if (!kept.count(f)) rec.removed.push_back(f);
  }
  rec.params_before = network.parameter_count();
  rec.macs_before = count_flops(network).total_macs;

  // Edit a copy so the caller's network stays consistent if anything throws.
  Network work = network;
  LayerLocation loc = find_layer(work.mutable_spec(), layer_id);
  loc.layer->conv.filters = keep.size();
  LayerParams& p = work.mutable_params(layer_id);
  p.weight = take(p.weight, 0, keep);
  p.bias = take(p.bias, 0, keep);

  LayerLocation next = find_layer(work.mutable_spec(), successor);
  LayerParams& q = work.mutable_params(successor);
  if (next.layer->kind == LayerKind::kConv) {
    next.layer->conv.in_channels = keep.size();
    q.weight = take(q.weight, 1, keep);
  } else {
    // Flatten is channel-major: channel c owns columns [c*plane, (c+1)*plane).
    const std::size_t in_dim = next.layer->fc.in_dim;
    if (in_dim % n != 0) {
      throw ValidationError("fc layer " + std::to_string(successor) + " input " +
                            std::to_string(in_dim) + " is not a multiple of " +
                            std::to_string(n) + " channels");
    }
    const std::size_t plane = in_dim / n;
    next.layer->fc.in_dim = keep.size() * plane;
    q.weight = take(q.weight, 1, keep, plane);
  }
  work.validate();
  network = std::move(work);

  rec.params_after = network.parameter_count();
  rec.macs_after = count_flops(network).total_macs;
  return rec;
}

const char* residual_mode_name(ResidualMode mode) {
  return mode == ResidualMode::kFirstOnly ? "first_only" : "first_two";
}

ResidualMode parse_residual_mode(const std::string& name) {
  if (name == "first_only") return ResidualMode::kFirstOnly;
  if (name == "first_two") return ResidualMode::kFirstTwo;
  throw InputError("unknown residual mode '" + name + "' (expected first_only or first_two)");
}

std::vector<int> residual_prunable_layers(const NetworkSpec& spec, ResidualMode mode) {
  std::vector<int> ids;
  for (auto it = spec.layers.rbegin(); it != spec.layers.rend(); ++it) {
    if (it->kind != LayerKind::kResidualBlock) continue;
    if (mode == ResidualMode::kFirstTwo) ids.push_back(it->block[1].id);
    ids.push_back(it->block[0].id);
  }
  if (ids.empty()) throw InputError("network " + spec.name + " has no residual blocks");
  return ids;
}

namespace {

bool has_blocks(const NetworkSpec& spec) {
  return std::any_of(spec.layers.begin(), spec.layers.end(),
                     [](const LayerSpec& l) { return l.kind == LayerKind::kResidualBlock; });
}

}  // namespace

std::vector<int> default_exclude_layers(const NetworkSpec& spec) {
  if (has_blocks(spec)) return {};
  std::vector<int> ids = conv_layer_ids(spec);
  if (ids.size() > 2) ids.resize(2);
  return ids;
}

std::vector<int> prunable_layers(const NetworkSpec& spec, const std::vector<int>& exclude,
                                 ResidualMode mode) {
  const std::set<int> skip(exclude.begin(), exclude.end());
  std::vector<int> ids;
  if (has_blocks(spec)) {
    for (int id : residual_prunable_layers(spec, mode)) {
      if (!skip.count(id)) ids.push_back(id);
    }
    return ids;
  }
  for (int id : conv_layer_ids(spec)) {
    if (skip.count(id)) continue;
    try {
      pruning_successor(spec, id);
    } catch (const ConstraintError&) {
      continue;
    }
    ids.push_back(id);
  }
  std::sort(ids.rbegin(), ids.rend());
  return ids;
}

void restrict_classes(Network& network, const std::vector<int>& class_ids) {
  const NetworkSpec& spec = network.spec();
  if (class_ids.empty()) throw InputError("class list is empty");
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::kFc) {
    throw ConstraintError("network " + spec.name + " does not end in an fc layer");
  }
  const int head = spec.layers.back().id;
  std::set<int> seen;
  std::vector<std::size_t> rows;
  for (int c : class_ids) {
    if (c < 0 || static_cast<std::size_t>(c) >= spec.classes || !seen.insert(c).second) {
      throw InputError("invalid or repeated class id " + std::to_string(c) + " for " +
                       std::to_string(spec.classes) + " classes");
    }
    rows.push_back(static_cast<std::size_t>(c));
  }
  Network work = network;
  work.mutable_spec().classes = rows.size();
  work.mutable_spec().layers.back().fc.out_dim = rows.size();
  LayerParams& p = work.mutable_params(head);
  p.weight = take(p.weight, 0, rows);
  p.bias = take(p.bias, 0, rows);
  work.validate();
  network = std::move(work);
}

}  // namespace fprune
