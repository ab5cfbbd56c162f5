#include "fprune/zoo.hpp"

#include "fprune/errors.hpp"

namespace fprune {

namespace {

class SpecBuilder {
 public:
  SpecBuilder(std::string name, ImageShape input, std::size_t classes) {
    spec_.name = std::move(name);
    spec_.input = input;
    spec_.classes = classes;
  }

  static LayerSpec conv_layer(int id, std::size_t filters, std::size_t in, std::size_t kernel) {
    LayerSpec l;
    l.id = id;
    l.kind = LayerKind::kConv;
    l.conv = {filters, in, kernel, kernel, 1, kernel / 2};
    return l;
  }

  SpecBuilder& conv(std::size_t filters, std::size_t in, std::size_t kernel = 3) {
    spec_.layers.push_back(conv_layer(next_param_++, filters, in, kernel));
    return *this;
  }
  SpecBuilder& relu() { return simple(LayerKind::kRelu); }
  SpecBuilder& flatten() { return simple(LayerKind::kFlatten); }
  SpecBuilder& pool(std::size_t k = 2) {
    LayerSpec l;
    l.id = next_aux_++;
    l.kind = LayerKind::kMaxPool;
    l.pool = {k, k};
    spec_.layers.push_back(l);
    return *this;
  }
  SpecBuilder& fc(std::size_t in, std::size_t out) {
    LayerSpec l;
    l.id = next_param_++;
    l.kind = LayerKind::kFc;
    l.fc = {in, out};
    spec_.layers.push_back(l);
    return *this;
  }
  SpecBuilder& bottleneck(std::size_t width) {
    LayerSpec block;
    block.id = next_aux_++;
    block.kind = LayerKind::kResidualBlock;
    const std::size_t inner = width / 2;
    block.block.push_back(conv_layer(next_param_++, inner, width, 1));
    block.block.push_back(conv_layer(next_param_++, inner, inner, 3));
    block.block.push_back(conv_layer(next_param_++, width, inner, 1));
    spec_.layers.push_back(block);
    return *this;
  }
  NetworkSpec done() {
    validate_network_spec(spec_);
    return spec_;
  }

 private:
  SpecBuilder& simple(LayerKind kind) {
    LayerSpec l;
    l.id = next_aux_++;
    l.kind = kind;
    spec_.layers.push_back(l);
    return *this;
  }

  // Parameterized layers are numbered 1, 2, ... in document order so that
  // conv k is layer k; activations, pools, flattens and blocks use 101, 102, ...
  NetworkSpec spec_;
  int next_param_ = 1;
  int next_aux_ = 101;
};

}  // namespace

NetworkSpec tiny_vgg_spec(std::size_t image_size, std::size_t classes) {
  if (image_size % 4 != 0) throw InputError("tiny-vgg needs an image size divisible by 4");
  const std::size_t side = image_size / 4;
  return SpecBuilder("tiny-vgg", {3, image_size, image_size}, classes)
      .conv(16, 3).relu().conv(16, 16).relu().pool()
      .conv(32, 16).relu().conv(32, 32).relu().pool()
      .conv(64, 32).relu().conv(64, 64).relu()
      .flatten().fc(64 * side * side, classes)
      .done();
}

NetworkSpec tiny_resnet_spec(std::size_t blocks, std::size_t width, std::size_t image_size,
                             std::size_t classes) {
  if (image_size % 4 != 0) throw InputError("tiny-resnet needs an image size divisible by 4");
  if (width < 2 || width % 2 != 0) throw InputError("residual width must be even");
  const std::size_t side = image_size / 4;
  SpecBuilder b(blocks == 4 ? "tiny-resnet" : "resnet-" + std::to_string(blocks) + "block",
                {3, image_size, image_size}, classes);
  b.conv(width, 3).relu().pool();
  for (std::size_t i = 0; i < blocks; ++i) b.bottleneck(width);
  return b.pool().flatten().fc(width * side * side, classes).done();
}

NetworkSpec vgg16_spec(std::size_t classes) {
  SpecBuilder b("vgg16", {3, 224, 224}, classes);
  const std::size_t stages[5][2] = {{64, 2}, {128, 2}, {256, 3}, {512, 3}, {512, 3}};
  std::size_t in = 3;
  for (const auto& [filters, count] : stages) {
    for (std::size_t i = 0; i < count; ++i) {
      b.conv(filters, in).relu();
      in = filters;
    }
    b.pool();
  }
  return b.flatten().fc(512 * 7 * 7, 4096).relu().fc(4096, 4096).relu()
      .fc(4096, classes).done();
}

std::vector<std::string> zoo_names() {
  return {"tiny-vgg", "tiny-resnet", "vgg16", "resnet-16block"};
}

NetworkSpec named_network_spec(const std::string& name, std::size_t image_size,
                               std::size_t classes) {
  if (name == "tiny-vgg") return tiny_vgg_spec(image_size, classes);
  if (name == "tiny-resnet") return tiny_resnet_spec(4, 16, image_size, classes);
  if (name == "resnet-16block") return tiny_resnet_spec(16, 64, image_size, classes);
  if (name == "vgg16") return vgg16_spec(classes);
  throw InputError("unknown network '" + name + "'");
}

}  // namespace fprune
