#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "fprune/net_spec.hpp"

namespace fprune {

// Six 3x3 conv layers (16,16,32,32,64,64 filters) in three stages separated by
// two 2x2 max-pools, then flatten and one fc classifier.
NetworkSpec tiny_vgg_spec(std::size_t image_size = 32, std::size_t classes = 10);

// 3x3 stem conv, 2x2 pool, `blocks` bottleneck residual blocks
// (1x1 width->width/2, 3x3, 1x1 back to width), 2x2 pool, fc.
NetworkSpec tiny_resnet_spec(std::size_t blocks = 4, std::size_t width = 16,
                             std::size_t image_size = 32, std::size_t classes = 10);

// Standard 13-conv VGG-16 on 224x224 input with three fc layers.
NetworkSpec vgg16_spec(std::size_t classes = 1000);

// Names accepted by named_network_spec().
std::vector<std::string> zoo_names();

// "tiny-vgg", "tiny-resnet", "vgg16" or "resnet-16block" (16 bottleneck blocks,
// 48 conv layers inside blocks). Throws InputError for other names.
NetworkSpec named_network_spec(const std::string& name, std::size_t image_size = 32,
                               std::size_t classes = 10);

}  // namespace fprune
