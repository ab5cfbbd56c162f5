#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fprune/network.hpp"

namespace fprune {

struct LayerFlops {
  int id = 0;
  LayerKind kind = LayerKind::kRelu;
  std::uint64_t macs = 0;    // per image
  std::uint64_t params = 0;  // weights + biases
};

// Per-image multiply-accumulate and parameter counts. FLOPs are reported as
// 2 * MACs. Residual blocks contribute one entry per inner conv; the skip add
// is not counted.
struct FlopReport {
  std::vector<LayerFlops> layers;
  std::uint64_t total_macs = 0;
  std::uint64_t total_params = 0;

  std::uint64_t total_flops() const { return 2 * total_macs; }
  const LayerFlops& layer(int id) const;
};

FlopReport count_flops(const NetworkSpec& spec);
inline FlopReport count_flops(const Network& network) { return count_flops(network.spec()); }

std::string format_flop_report(const FlopReport& report);

}  // namespace fprune
