#include "fprune/model_io.hpp"

#include <cstring>
#include <utility>

#include "fprune/errors.hpp"

namespace fprune {

namespace {

constexpr char kMagic[4] = {'P', 'P', 'R', 'N'};

void put_tensor(Bytes& out, const Tensor& t) {
  put_u64(out, t.size());
  for (double v : t.data()) put_f64(out, v);
}

Tensor get_tensor(ByteReader& in, const Shape& shape, int id) {
  const std::uint64_t n = in.u64();
  if (n != shape_numel(shape)) {
    throw LoadError(ErrorCode::kCountMismatch,
                    "model: layer " + std::to_string(id) + " blob holds " +
                        std::to_string(n) + " values, architecture needs " +
                        std::to_string(shape_numel(shape)));
  }
  std::vector<double> data(n);
  for (double& v : data) v = in.f64();
  return Tensor(shape, std::move(data));
}

}  // namespace

Bytes encode_model(const Network& network) {
  Bytes out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kModelFormatVersion);
  const std::string text = format_network_spec(network.spec());
  put_u64(out, text.size());
  put_bytes(out, text);
  for (const auto& [id, p] : network.params()) {
    put_tensor(out, p.weight);
    put_tensor(out, p.bias);
  }
  put_u64(out, fnv1a64(out));
  return out;
}

Network decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 + 4 + 8 + 8) {
    throw LoadError(ErrorCode::kChecksum, "model: file truncated (" +
                                              std::to_string(bytes.size()) + " bytes)");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw LoadError(ErrorCode::kBadMagic, "model: bad magic, not a PPRN file");
  }
  const std::size_t body = bytes.size() - 8;
  ByteReader tail(bytes.subspan(body), "model");
  if (tail.u64() != fnv1a64(bytes.first(body))) {
    throw LoadError(ErrorCode::kChecksum, "model: checksum mismatch (corrupt or truncated file)");
  }
  ByteReader in(bytes.first(body), "model");
  in.str(4);
  const std::uint32_t version = in.u32();
  if (version != kModelFormatVersion) {
    throw LoadError(ErrorCode::kVersionMismatch,
                    "model: format version " + std::to_string(version) + ", expected " +
                        std::to_string(kModelFormatVersion));
  }
  const std::uint64_t text_len = in.u64();
  if (text_len > in.remaining()) throw LoadError(ErrorCode::kChecksum, "model: truncated architecture text");
  NetworkSpec spec = parse_network_spec(in.str(text_len));
  validate_network_spec(spec);
  ParamMap params;
  for_each_layer(spec, [&](const LayerSpec& layer, const LayerSpec*) {
    if (layer.kind == LayerKind::kConv || layer.kind == LayerKind::kFc) {
      params.emplace(layer.id, LayerParams{});
    }
  });
  for (auto& [id, p] : params) {
    const LayerSpec& layer = find_layer(std::as_const(spec), id);
    const Shape ws = layer.kind == LayerKind::kConv
                         ? Shape{layer.conv.filters, layer.conv.in_channels,
                                 layer.conv.kernel_h, layer.conv.kernel_w}
                         : Shape{layer.fc.out_dim, layer.fc.in_dim};
    p.weight = get_tensor(in, ws, id);
    p.bias = get_tensor(in, {ws[0]}, id);
  }
  if (in.remaining() != 0) {
    throw LoadError(ErrorCode::kCountMismatch, "model: trailing bytes after parameters");
  }
  return Network(std::move(spec), std::move(params));
}

void save_model(const Network& network, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(network));
}

Network load_model(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  return decode_model(bytes);
}

}  // namespace fprune
