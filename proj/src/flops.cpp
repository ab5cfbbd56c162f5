#include "fprune/flops.hpp"

#include <sstream>

#include "fprune/errors.hpp"

namespace fprune {

const LayerFlops& FlopReport::layer(int id) const {
  for (const LayerFlops& l : layers) {
    if (l.id == id) return l;
  }
  throw InputError("no flop entry for layer " + std::to_string(id));
}

FlopReport count_flops(const NetworkSpec& spec) {
  const std::map<int, LayerIo> shapes = infer_shapes(spec);
  FlopReport report;
  for_each_layer(spec, [&](const LayerSpec& layer, const LayerSpec*) {
    if (layer.kind == LayerKind::kResidualBlock) return;
    LayerFlops entry{layer.id, layer.kind, 0, 0};
    if (layer.kind == LayerKind::kConv) {
      const ConvSpec& c = layer.conv;
      const ImageShape& out = shapes.at(layer.id).out.image;
      entry.macs = std::uint64_t{c.filters} * c.in_channels * c.kernel_h * c.kernel_w *
                   out.height * out.width;
      entry.params = std::uint64_t{c.filters} * c.in_channels * c.kernel_h * c.kernel_w +
                     c.filters;
    } else if (layer.kind == LayerKind::kFc) {
      entry.macs = std::uint64_t{layer.fc.in_dim} * layer.fc.out_dim;
      entry.params = entry.macs + layer.fc.out_dim;
    }
    report.total_macs += entry.macs;
    report.total_params += entry.params;
    report.layers.push_back(entry);
  });
  return report;
}

std::string format_flop_report(const FlopReport& report) {
  std::ostringstream out;
  out << "layer,kind,macs,flops,params\n";
  for (const LayerFlops& l : report.layers) {
    out << l.id << ',' << layer_kind_name(l.kind) << ',' << l.macs << ',' << 2 * l.macs
        << ',' << l.params << '\n';
  }
  out << "total,," << report.total_macs << ',' << report.total_flops() << ','
      << report.total_params << '\n';
  return out.str();
}

}  // namespace fprune
