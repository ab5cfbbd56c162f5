#include "fprune/net_spec.hpp"

#include <algorithm>
#include <charconv>
#include <set>
#include <sstream>

#include "fprune/errors.hpp"
#include "fprune/kernels.hpp"

namespace fprune {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kFc: return "fc";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kResidualBlock: return "block";
  }
  return "?";
}

namespace {

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> words;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::size_t parse_size(std::string_view text, int line_no) {
  std::size_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("network spec line " + std::to_string(line_no) +
                      ": expected a non-negative integer, got '" +
                      std::string(text) + "'");
  }
  return value;
}

struct PendingLayer {
  LayerSpec spec;
  bool has_id = false;
  std::vector<PendingLayer> block;
  std::vector<bool> block_has_id;
};

LayerSpec parse_layer_line(const std::vector<std::string>& words, int line_no,
                           bool& has_id) {
  LayerSpec layer;
  const std::string& kind = words[0];
  if (kind == "conv") layer.kind = LayerKind::kConv;
  else if (kind == "relu") layer.kind = LayerKind::kRelu;
  else if (kind == "maxpool") layer.kind = LayerKind::kMaxPool;
  else if (kind == "fc") layer.kind = LayerKind::kFc;
  else if (kind == "flatten") layer.kind = LayerKind::kFlatten;
  else if (kind == "block") layer.kind = LayerKind::kResidualBlock;
  else {
    throw ConfigError("network spec line " + std::to_string(line_no) +
                      ": unknown layer kind '" + kind + "'");
  }
  has_id = false;
  std::set<std::string> seen;
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (words[i] == "{" && layer.kind == LayerKind::kResidualBlock) continue;
    const auto eq = words[i].find('=');
    if (eq == std::string::npos) {
      throw ConfigError("network spec line " + std::to_string(line_no) +
                        ": expected key=value, got '" + words[i] + "'");
    }
    const std::string key = words[i].substr(0, eq);
    const std::string value = words[i].substr(eq + 1);
    if (!seen.insert(key).second) {
      throw ConfigError("network spec line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
    auto bad_key = [&] {
      return ConfigError("network spec line " + std::to_string(line_no) +
                         ": key '" + key + "' not valid for " + kind);
    };
    if (key == "id") {
      layer.id = static_cast<int>(parse_size(value, line_no));
      has_id = true;
    } else if (layer.kind == LayerKind::kConv) {
      if (key == "filters") layer.conv.filters = parse_size(value, line_no);
      else if (key == "in") layer.conv.in_channels = parse_size(value, line_no);
      else if (key == "stride") layer.conv.stride = parse_size(value, line_no);
      else if (key == "pad") layer.conv.pad = parse_size(value, line_no);
      else if (key == "kernel") {
        const auto x = value.find('x');
        if (x == std::string::npos) {
          layer.conv.kernel_h = layer.conv.kernel_w = parse_size(value, line_no);
        } else {
          layer.conv.kernel_h = parse_size(std::string_view(value).substr(0, x), line_no);
          layer.conv.kernel_w = parse_size(std::string_view(value).substr(x + 1), line_no);
        }
      } else throw bad_key();
    } else if (layer.kind == LayerKind::kMaxPool) {
      if (key == "k") layer.pool.k = parse_size(value, line_no);
      else if (key == "stride") layer.pool.stride = parse_size(value, line_no);
      else throw bad_key();
    } else if (layer.kind == LayerKind::kFc) {
      if (key == "in") layer.fc.in_dim = parse_size(value, line_no);
      else if (key == "out") layer.fc.out_dim = parse_size(value, line_no);
      else throw bad_key();
    } else {
      throw bad_key();
    }
  }
  if (layer.kind == LayerKind::kConv &&
      (layer.conv.filters == 0 || layer.conv.in_channels == 0 ||
       layer.conv.kernel_h == 0 || layer.conv.kernel_w == 0 || layer.conv.stride == 0)) {
    throw ConfigError("network spec line " + std::to_string(line_no) +
                      ": conv needs positive filters, in, kernel and stride");
  }
  if (layer.kind == LayerKind::kFc && (layer.fc.in_dim == 0 || layer.fc.out_dim == 0)) {
    throw ConfigError("network spec line " + std::to_string(line_no) +
                      ": fc needs positive in and out");
  }
  return layer;
}

void assign_ids(std::vector<LayerSpec>& layers, std::vector<bool>& has_id_flat,
                std::size_t& cursor, int& last_id) {
  for (LayerSpec& layer : layers) {
    if (!has_id_flat[cursor++]) layer.id = last_id + 1;
    last_id = std::max(last_id, layer.id);
    assign_ids(layer.block, has_id_flat, cursor, last_id);
  }
}

void format_layer(std::ostringstream& out, const LayerSpec& layer,
                  const std::string& indent) {
  out << indent << layer_kind_name(layer.kind) << " id=" << layer.id;
  switch (layer.kind) {
    case LayerKind::kConv:
      out << " filters=" << layer.conv.filters << " in=" << layer.conv.in_channels
          << " kernel=" << layer.conv.kernel_h << 'x' << layer.conv.kernel_w
          << " stride=" << layer.conv.stride << " pad=" << layer.conv.pad;
      break;
    case LayerKind::kMaxPool:
      out << " k=" << layer.pool.k << " stride=" << layer.pool.stride;
      break;
    case LayerKind::kFc:
      out << " in=" << layer.fc.in_dim << " out=" << layer.fc.out_dim;
      break;
    case LayerKind::kResidualBlock:
      out << " {\n";
      for (const LayerSpec& inner : layer.block) format_layer(out, inner, indent + "  ");
      out << indent << "}";
      break;
    default:
      break;
  }
  out << '\n';
}

std::string describe(const LayerSpec* layer) {
  if (!layer) return "input";
  std::string s = "layer " + std::to_string(layer->id) + " (" +
                  layer_kind_name(layer->kind);
  if (layer->kind == LayerKind::kConv) {
    s += ", filters=" + std::to_string(layer->conv.filters) +
         ", in=" + std::to_string(layer->conv.in_channels);
  } else if (layer->kind == LayerKind::kFc) {
    s += ", in=" + std::to_string(layer->fc.in_dim) +
         ", out=" + std::to_string(layer->fc.out_dim);
  }
  return s + ")";
}

ActivationShape image_shape(std::size_t c, std::size_t h, std::size_t w) {
  ActivationShape s;
  s.image = {c, h, w};
  return s;
}

struct ShapeWalker {
  std::map<int, LayerIo>& shapes;

  // `producer` is the last layer that set the channel/feature count.
  ActivationShape conv(const LayerSpec& layer, const ActivationShape& in,
                       const LayerSpec* producer) {
    if (in.flat) {
      throw ValidationError(describe(producer) + " produces a flat vector but " +
                            describe(&layer) + " expects an image");
    }
    if (in.image.channels != layer.conv.in_channels) {
      throw ValidationError("channel mismatch: " + describe(producer) + " provides " +
                            std::to_string(in.image.channels) + " channels but " +
                            describe(&layer) + " expects " +
                            std::to_string(layer.conv.in_channels));
    }
    try {
      const std::size_t ho = conv_output_extent(in.image.height, layer.conv.kernel_h,
                                                layer.conv.stride, layer.conv.pad);
      const std::size_t wo = conv_output_extent(in.image.width, layer.conv.kernel_w,
                                                layer.conv.stride, layer.conv.pad);
      return image_shape(layer.conv.filters, ho, wo);
    } catch (const ConfigError& e) {
      throw ConfigError(describe(&layer) + ": " + e.what());
    }
  }

  ActivationShape walk(const std::vector<LayerSpec>& layers, ActivationShape shape,
                       const LayerSpec*& producer) {
    for (const LayerSpec& layer : layers) {
      const ActivationShape in = shape;
      switch (layer.kind) {
        case LayerKind::kConv:
          shape = conv(layer, shape, producer);
          producer = &layer;
          break;
        case LayerKind::kRelu:
          break;
        case LayerKind::kMaxPool:
          if (shape.flat) throw ValidationError(describe(&layer) + " applied to a flat vector");
          try {
            shape = image_shape(shape.image.channels,
                                pool_output_extent(shape.image.height, layer.pool.k, layer.pool.stride),
                                pool_output_extent(shape.image.width, layer.pool.k, layer.pool.stride));
          } catch (const ConfigError& e) {
            throw ConfigError(describe(&layer) + ": " + e.what());
          }
          break;
        case LayerKind::kFlatten:
          if (!shape.flat) {
            ActivationShape flat;
            flat.flat = true;
            flat.dim = shape.numel();
            shape = flat;
          }
          break;
        case LayerKind::kFc:
          if (!shape.flat) {
            throw ValidationError(describe(producer) + " feeds " + describe(&layer) +
                                  " without a flatten layer");
          }
          if (shape.dim != layer.fc.in_dim) {
            throw ValidationError("feature mismatch: " + describe(producer) + " provides " +
                                  std::to_string(shape.dim) + " features but " +
                                  describe(&layer) + " expects " +
                                  std::to_string(layer.fc.in_dim));
          }
          shape.dim = layer.fc.out_dim;
          producer = &layer;
          break;
        case LayerKind::kResidualBlock: {
          if (layer.block.size() != 3 ||
              std::any_of(layer.block.begin(), layer.block.end(), [](const LayerSpec& l) {
                return l.kind != LayerKind::kConv;
              })) {
            throw ValidationError(describe(&layer) + " must contain exactly three conv layers");
          }
          const LayerSpec* inner = producer;
          ActivationShape h = shape;
          for (const LayerSpec& c : layer.block) {
            const ActivationShape cin = h;
            h = conv(c, h, inner);
            shapes[c.id] = {cin, h};
            inner = &c;
          }
          if (h != shape) {
            throw ValidationError(describe(&layer) + ": output " +
                                  std::to_string(h.image.channels) + "x" +
                                  std::to_string(h.image.height) + "x" +
                                  std::to_string(h.image.width) +
                                  " does not match block input " +
                                  std::to_string(shape.image.channels) + "x" +
                                  std::to_string(shape.image.height) + "x" +
                                  std::to_string(shape.image.width) +
                                  " (identity skip requires conv3 filters == block input channels)");
          }
          producer = &layer.block.back();
          break;
        }
      }
      shapes[layer.id] = {in, shape};
    }
    return shape;
  }
};

}  // namespace

NetworkSpec parse_network_spec(std::string_view text) {
  NetworkSpec spec;
  std::vector<LayerSpec>* target = &spec.layers;
  LayerSpec* open_block = nullptr;
  std::vector<bool> has_id_flat;
  bool have_input = false, have_classes = false;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::vector<std::string> words = split_words(line);
    if (words.empty()) continue;
    const std::string& head = words[0];
    auto expect_args = [&](std::size_t n) {
      if (words.size() != n + 1) {
        throw ConfigError("network spec line " + std::to_string(line_no) + ": '" +
                          head + "' takes " + std::to_string(n) + " argument(s)");
      }
    };
    if (head == "network") {
      expect_args(1);
      spec.name = words[1];
    } else if (head == "input") {
      expect_args(3);
      spec.input = {parse_size(words[1], line_no), parse_size(words[2], line_no),
                    parse_size(words[3], line_no)};
      have_input = true;
    } else if (head == "classes") {
      expect_args(1);
      spec.classes = parse_size(words[1], line_no);
      have_classes = true;
    } else if (head == "}") {
      if (!open_block) {
        throw ConfigError("network spec line " + std::to_string(line_no) + ": unmatched '}'");
      }
      open_block = nullptr;
      target = &spec.layers;
    } else {
      bool has_id = false;
      LayerSpec layer = parse_layer_line(words, line_no, has_id);
      has_id_flat.push_back(has_id);
      if (layer.kind == LayerKind::kResidualBlock) {
        if (open_block) {
          throw ConfigError("network spec line " + std::to_string(line_no) +
                            ": nested blocks are not supported");
        }
        if (words.back() != "{") {
          throw ConfigError("network spec line " + std::to_string(line_no) +
                            ": block must open with '{'");
        }
        target->push_back(std::move(layer));
        open_block = &target->back();
        target = &open_block->block;
      } else {
        if (open_block && layer.kind != LayerKind::kConv) {
          throw ConfigError("network spec line " + std::to_string(line_no) +
                            ": only conv layers may appear inside a block");
        }
        target->push_back(std::move(layer));
      }
    }
  }
  if (open_block) throw ConfigError("network spec: unterminated block");
  if (!have_input || !have_classes) {
    throw ConfigError("network spec: 'input' and 'classes' are required");
  }
  if (spec.input.channels == 0 || spec.input.height == 0 || spec.input.width == 0 ||
      spec.classes == 0) {
    throw ConfigError("network spec: input extents and classes must be positive");
  }
  std::size_t cursor = 0;
  int last_id = 0;
  assign_ids(spec.layers, has_id_flat, cursor, last_id);
  return spec;
}

std::string format_network_spec(const NetworkSpec& spec) {
  std::ostringstream out;
  out << "network " << (spec.name.empty() ? "unnamed" : spec.name) << '\n';
  out << "input " << spec.input.channels << ' ' << spec.input.height << ' '
      << spec.input.width << '\n';
  out << "classes " << spec.classes << '\n';
  for (const LayerSpec& layer : spec.layers) format_layer(out, layer, "");
  return out.str();
}

std::map<int, LayerIo> infer_shapes(const NetworkSpec& spec) {
  std::set<int> ids;
  for_each_layer(spec, [&](const LayerSpec& layer, const LayerSpec*) {
    if (layer.id <= 0) throw ValidationError("layer ids must be positive");
    if (!ids.insert(layer.id).second) {
      throw ValidationError("duplicate layer id " + std::to_string(layer.id));
    }
  });
  std::map<int, LayerIo> shapes;
  ShapeWalker walker{shapes};
  const LayerSpec* producer = nullptr;
  const ActivationShape out =
      walker.walk(spec.layers, image_shape(spec.input.channels, spec.input.height,
                                           spec.input.width),
                  producer);
  if (!out.flat || out.dim != spec.classes) {
    throw ValidationError("network output must be a flat vector of " +
                          std::to_string(spec.classes) + " class scores; " +
                          describe(producer) + " ends the graph");
  }
  return shapes;
}

void for_each_layer(const NetworkSpec& spec,
                    const std::function<void(const LayerSpec&, const LayerSpec*)>& visit) {
  for (const LayerSpec& layer : spec.layers) {
    visit(layer, nullptr);
    for (const LayerSpec& inner : layer.block) visit(inner, &layer);
  }
}

LayerLocation find_layer(NetworkSpec& spec, int id) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerSpec& layer = spec.layers[i];
    if (layer.id == id) return {&layer, nullptr, i};
    for (std::size_t j = 0; j < layer.block.size(); ++j) {
      if (layer.block[j].id == id) return {&layer.block[j], &layer, j};
    }
  }
  throw InputError("no layer with id " + std::to_string(id));
}

const LayerSpec& find_layer(const NetworkSpec& spec, int id) {
  return *find_layer(const_cast<NetworkSpec&>(spec), id).layer;
}

std::vector<int> conv_layer_ids(const NetworkSpec& spec) {
  std::vector<int> ids;
  for_each_layer(spec, [&](const LayerSpec& layer, const LayerSpec*) {
    if (layer.kind == LayerKind::kConv) ids.push_back(layer.id);
  });
  return ids;
}

}  // namespace fprune
