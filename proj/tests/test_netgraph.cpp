#include <filesystem>
#include <gtest/gtest.h>

#include "fprune/errors.hpp"
#include "fprune/flops.hpp"
#include "fprune/gradcheck.hpp"
#include "fprune/io_util.hpp"
#include "fprune/kernels.hpp"
#include "fprune/model_io.hpp"
#include "fprune/net_spec.hpp"
#include "fprune/network.hpp"
#include "fprune/pruning.hpp"
#include "fprune/sgd.hpp"
#include "fprune/zoo.hpp"
#include "test_util.hpp"

using namespace fprune;
using fprune::testing::random_tensor;
using fprune::testing::TempDir;

namespace {

const char* kToyChain = R"(
network toy
input 3 32 32
classes 10
conv id=1 filters=8 in=3 kernel=3x3 stride=1 pad=1
relu
maxpool k=2 stride=2
conv filters=16 in=8 kernel=3 pad=1   # implicit id 4
relu
flatten
fc in=4096 out=10
)";

const char* kTwoLayer = R"(
network two
input 2 5 5
classes 3
conv id=1 filters=3 in=2 kernel=3 stride=1 pad=1
relu id=2
flatten id=3
fc id=4 in=75 out=3
)";

const char* kBlockNet = R"(
network blocky
input 2 6 6
classes 4
conv id=1 filters=4 in=2 kernel=3 pad=1
relu id=2
block id=3 {
  conv id=4 filters=2 in=4 kernel=1
  conv id=5 filters=2 in=2 kernel=3 pad=1
  conv id=6 filters=4 in=2 kernel=1
}
maxpool id=7 k=2 stride=2
flatten id=8
fc id=9 in=36 out=4
)";

}  // namespace

TEST(NetSpec, ParsesAndAssignsImplicitIds) {
  const NetworkSpec spec = parse_network_spec(kToyChain);
  EXPECT_EQ(spec.name, "toy");
  EXPECT_EQ(spec.input, (ImageShape{3, 32, 32}));
  EXPECT_EQ(spec.classes, 10u);
  ASSERT_EQ(spec.layers.size(), 7u);
  EXPECT_EQ(spec.layers[1].id, 2);
  EXPECT_EQ(spec.layers[3].id, 4);
  EXPECT_EQ(spec.layers[3].conv.kernel_h, 3u);
  EXPECT_EQ(spec.layers[3].conv.pad, 1u);
}

TEST(NetSpec, FormatRoundTrips) {
  for (const char* text : {kToyChain, kTwoLayer, kBlockNet}) {
    const NetworkSpec spec = parse_network_spec(text);
    const std::string canonical = format_network_spec(spec);
    EXPECT_EQ(format_network_spec(parse_network_spec(canonical)), canonical);
  }
}

TEST(NetSpec, ChannelMismatchNamesBothLayers) {
  const char* bad = R"(
network bad
input 3 8 8
classes 2
conv id=1 filters=8 in=3 kernel=3 pad=1
conv id=2 filters=4 in=9 kernel=3 pad=1
flatten id=3
fc id=4 in=256 out=2
)";
  const NetworkSpec spec = parse_network_spec(bad);
  try {
    validate_network_spec(spec);
    FAIL();
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("layer 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("layer 2"), std::string::npos) << msg;
  }
}

TEST(NetSpec, SyntaxAndGeometryErrors) {
  EXPECT_THROW(parse_network_spec("network x\ninput 3 8 8\nclasses 2\nwibble id=1\n"), ConfigError);
  EXPECT_THROW(parse_network_spec("network x\ninput 3 8 8\nclasses 2\nconv filters=2 in=3 kernel=3 bogus=1\n"),
               ConfigError);
  const NetworkSpec odd = parse_network_spec(
      "network x\ninput 1 4 4\nclasses 2\nconv id=1 filters=2 in=1 kernel=3 stride=2\n"
      "flatten\nfc in=2 out=2\n");
  EXPECT_THROW(validate_network_spec(odd), ConfigError);
}

TEST(NetSpec, BlockSkipShapeIsChecked) {
  std::string text = kBlockNet;
  text.replace(text.find("filters=4 in=2 kernel=1"), 23, "filters=3 in=2 kernel=1");
  EXPECT_THROW(validate_network_spec(parse_network_spec(text)), ValidationError);
}

TEST(NetSpec, ZooNetworksValidate) {
  for (const std::string& name : zoo_names()) {
    const NetworkSpec spec = named_network_spec(name, 32, 10);
    EXPECT_NO_THROW(validate_network_spec(spec)) << name;
  }
  EXPECT_THROW(named_network_spec("alexnet"), InputError);
  const NetworkSpec vgg = vgg16_spec();
  EXPECT_EQ(conv_layer_ids(vgg).size(), 13u);
  EXPECT_EQ(conv_layer_ids(tiny_vgg_spec()), (std::vector<int>{1, 2, 3, 4, 5, 6}));
  // 16 residual blocks of 3 convs each after the stem.
  EXPECT_EQ(conv_layer_ids(named_network_spec("resnet-16block")).size(), 49u);
}

TEST(NetSpec, ShippedSpecFilesAreCanonical) {
  const std::filesystem::path dir = FPRUNE_SPEC_DIR;
  const std::vector<std::pair<std::string, NetworkSpec>> shipped = {
      {"tiny-vgg.net", tiny_vgg_spec(16, 10)},
      {"tiny-vgg-32.net", tiny_vgg_spec(32, 10)},
      {"tiny-resnet.net", tiny_resnet_spec(4, 16, 16, 10)},
      {"resnet-16block.net", named_network_spec("resnet-16block", 32, 10)},
      {"vgg16.net", vgg16_spec(1000)},
  };
  for (const auto& [file, spec] : shipped) {
    ASSERT_TRUE(std::filesystem::exists(dir / file)) << file;
    EXPECT_EQ(read_text_file(dir / file), format_network_spec(spec)) << file;
  }
}

TEST(Network, ToyChainShapesAndDeterminism) {
  const NetworkSpec spec = parse_network_spec(kToyChain);
  const Network a = Network::build(spec, 5);
  const Network b = Network::build(spec, 5);
  for (const auto& [id, p] : a.params()) {
    EXPECT_EQ(p.weight, b.params(id).weight);
    EXPECT_EQ(p.bias, b.params(id).bias);
  }
  Rng rng(1);
  const Tensor x = random_tensor({1, 3, 32, 32}, rng);
  const ForwardResult r = a.forward(x);
  EXPECT_EQ(r.logits.shape(), (Shape{1, 10}));
  EXPECT_TRUE(r.taps.empty());
  EXPECT_EQ(a.logits(x), b.logits(x));
}

TEST(Network, HeInitialisationScale) {
  const Network net = Network::build(tiny_vgg_spec(16), 3);
  const Tensor& w = net.params(6).weight;  // 64 x 64 x 3 x 3
  double sum = 0.0, sq = 0.0;
  for (double v : w.data()) {
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(w.size());
  EXPECT_NEAR(sum / n, 0.0, 0.002);
  EXPECT_NEAR(sq / n, 2.0 / (64 * 9), 0.05 * 2.0 / (64 * 9));
  for (double v : net.params(6).bias.data()) EXPECT_EQ(v, 0.0);
}

TEST(Network, TapsArePostReluAndValidated) {
  Network net = fprune::testing::random_network(parse_network_spec(kTwoLayer), 2);
  Rng rng(3);
  const Tensor x = random_tensor({2, 2, 5, 5}, rng);
  const LayerParams& p = net.params(1);
  const Tensor expect = relu(conv2d(x, p.weight, p.bias, {1, 1}));
  const ForwardResult r = net.forward(x, {1});
  EXPECT_EQ(r.taps.at(1), expect);
  EXPECT_THROW(net.forward(x, {42}), InputError);
  EXPECT_THROW(net.forward(x, {4}), InputError);

  // Zeroed filter j -> tapped channel j is zero.
  LayerParams& q = net.mutable_params(1);
  for (std::size_t i = 18; i < 36; ++i) q.weight[i] = 0.0;
  q.bias[1] = 0.0;
  const Tensor t = net.forward(x, {1}).taps.at(1);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(t.at(n, 1, i, j), 0.0);
}

TEST(Network, LogitsMatchManualComposition) {
  const Network net = fprune::testing::random_network(parse_network_spec(kTwoLayer), 4);
  Rng rng(5);
  const Tensor x = random_tensor({3, 2, 5, 5}, rng);
  const Tensor h = relu(conv2d(x, net.params(1).weight, net.params(1).bias, {1, 1}));
  const Tensor manual = fully_connected(h.reshaped({3, 75}), net.params(4).weight, net.params(4).bias);
  EXPECT_LT(max_abs_diff(net.logits(x), manual), 1e-12);
}

TEST(Network, BlockForwardMatchesManualComposition) {
  const Network net = fprune::testing::random_network(parse_network_spec(kBlockNet), 6);
  Rng rng(7);
  const Tensor x = random_tensor({2, 2, 6, 6}, rng);
  auto conv = [&](const Tensor& in, int id, std::size_t pad) {
    return conv2d(in, net.params(id).weight, net.params(id).bias, {1, pad});
  };
  const Tensor a0 = relu(conv(x, 1, 1));
  const Tensor a1 = relu(conv(a0, 4, 0));
  const Tensor a2 = relu(conv(a1, 5, 1));
  Tensor sum = conv(a2, 6, 0);
  sum += a0;
  const Tensor out = relu(sum);
  const Tensor pooled = maxpool2d(out, {2, 2});
  const Tensor manual = fully_connected(pooled.reshaped({2, 36}), net.params(9).weight, net.params(9).bias);
  const ForwardResult r = net.forward(x, {4, 5, 6});
  EXPECT_LT(max_abs_diff(r.logits, manual), 1e-12);
  EXPECT_EQ(r.taps.at(4), a1);
  EXPECT_EQ(r.taps.at(5), a2);
  EXPECT_EQ(r.taps.at(6), out);
}

TEST(Network, FullGradientCheck) {
  for (const char* text : {kTwoLayer, kBlockNet}) {
    const NetworkSpec spec = parse_network_spec(text);
    const Network base = fprune::testing::random_network(spec, 8);
    Rng rng(9);
    const Tensor x = random_tensor({2, spec.input.channels, spec.input.height, spec.input.width}, rng);
    const std::vector<int> labels = {1, 2};
    const BackwardResult r = base.backward(x, labels);
    for (const auto& [id, p] : base.params()) {
      for (int which = 0; which < 2; ++which) {
        auto loss_at = [&](const Tensor& value) {
          Network net = base;
          (which == 0 ? net.mutable_params(id).weight : net.mutable_params(id).bias) = value;
          return net.backward(x, labels).loss;
        };
        const Tensor& grad = which == 0 ? r.grads.at(id).weight : r.grads.at(id).bias;
        const double err = finite_diff_check(loss_at, [&](const Tensor&) { return grad; },
                                             which == 0 ? p.weight : p.bias);
        EXPECT_LT(err, 1e-4) << text << " layer " << id << (which ? " bias" : " weight");
      }
    }
  }
}

TEST(Network, DeadFilterHasZeroGradient) {
  // Zero the fc columns reading filter 0: no learning signal reaches it.
  Network net = fprune::testing::random_network(parse_network_spec(kTwoLayer), 10);
  Tensor& fc = net.mutable_params(4).weight;
  for (std::size_t row = 0; row < 3; ++row)
    for (std::size_t col = 0; col < 25; ++col) fc.at(row, col) = 0.0;
  Rng rng(11);
  const Tensor x = random_tensor({2, 2, 5, 5}, rng);
  const std::vector<int> labels = {0, 2};
  const BackwardResult r = net.backward(x, labels);
  for (std::size_t i = 0; i < 18; ++i) EXPECT_EQ(r.grads.at(1).weight[i], 0.0);
  EXPECT_EQ(r.grads.at(1).bias[0], 0.0);
}

TEST(Network, MemorisesSixteenSamples) {
  const NetworkSpec spec = parse_network_spec(kTwoLayer);
  Network net = Network::build(spec, 12);
  Rng rng(13);
  const Tensor x = random_tensor({16, 2, 5, 5}, rng);
  std::vector<int> labels;
  for (int i = 0; i < 16; ++i) labels.push_back(i % 3);
  SgdState state;
  double loss = 0.0;
  for (int step = 0; step < 50; ++step) {
    BackwardResult r = net.backward(x, labels);
    loss = r.loss;
    sgd_step(net.parameter_tensors(), gradient_tensors(r.grads), {0.1, 0.9, 0.0}, state);
  }
  EXPECT_LT(net.backward(x, labels).loss, 0.01) << "last loss " << loss;
}

TEST(Flops, FormulaAndCountingOracle) {
  const NetworkSpec toy = parse_network_spec(kToyChain);
  const FlopReport report = count_flops(toy);
  EXPECT_EQ(report.layer(1).macs, 221184u);
  EXPECT_EQ(report.layer(1).params, 8u * 27u + 8u);
  EXPECT_EQ(report.layer(2).macs, 0u);
  std::uint64_t sum = 0, params = 0;
  for (const LayerFlops& l : report.layers) {
    sum += l.macs;
    params += l.params;
  }
  EXPECT_EQ(sum, report.total_macs);
  EXPECT_EQ(params, report.total_params);
  EXPECT_EQ(report.total_flops(), 2 * report.total_macs);

  for (const NetworkSpec& spec : {toy, parse_network_spec(kBlockNet), tiny_vgg_spec(16), tiny_resnet_spec(4, 16, 16)}) {
    const Network net = Network::build(spec, 1);
    MacCounter counter;
    Rng rng(2);
    net.forward(random_tensor({3, spec.input.channels, spec.input.height, spec.input.width}, rng), {},
                &counter);
    EXPECT_EQ(counter.macs, 3 * count_flops(spec).total_macs) << spec.name;
    EXPECT_EQ(net.parameter_count(), count_flops(spec).total_params) << spec.name;
  }
}

TEST(Flops, Vgg16Totals) {
  const FlopReport r = count_flops(vgg16_spec(1000));
  EXPECT_EQ(r.total_macs, 15470264320ULL);
  EXPECT_EQ(r.total_params, 138357544ULL);
}

TEST(ModelIo, RoundTripIsBitExact) {
  TempDir dir("modelio");
  const Network net = fprune::testing::random_network(parse_network_spec(kBlockNet), 14);
  save_model(net, dir / "m.pprn");
  const Network back = load_model(dir / "m.pprn");
  EXPECT_EQ(format_network_spec(back.spec()), format_network_spec(net.spec()));
  for (const auto& [id, p] : net.params()) {
    EXPECT_EQ(p.weight, back.params(id).weight);
    EXPECT_EQ(p.bias, back.params(id).bias);
  }
  Rng rng(15);
  const Tensor x = random_tensor({2, 2, 6, 6}, rng);
  EXPECT_EQ(net.logits(x), back.logits(x));
}

TEST(ModelIo, PrunedNetworkRoundTrips) {
  TempDir dir("modelio_pruned");
  Network net = Network::build(tiny_vgg_spec(16), 3);
  prune_layer(net, 4, {0, 3, 5, 7, 30});
  save_model(net, dir / "p.pprn");
  const Network back = load_model(dir / "p.pprn");
  EXPECT_EQ(find_layer(back.spec(), 4).conv.filters, 5u);
  EXPECT_EQ(find_layer(back.spec(), 5).conv.in_channels, 5u);
  EXPECT_EQ(back.params(5).weight, net.params(5).weight);
}

TEST(ModelIo, DistinctLoadErrors) {
  const Network net = Network::build(parse_network_spec(kTwoLayer), 1);
  const Bytes good = encode_model(net);
  auto code_of = [](const Bytes& bytes) {
    try {
      decode_model(bytes);
    } catch (const LoadError& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  Bytes truncated(good.begin(), good.begin() + static_cast<long>(good.size() / 2));
  EXPECT_EQ(code_of(truncated), ErrorCode::kChecksum);
  EXPECT_EQ(code_of(Bytes(good.begin(), good.begin() + 10)), ErrorCode::kChecksum);
  Bytes flipped = good;
  flipped[good.size() / 2] ^= 0x40;
  EXPECT_EQ(code_of(flipped), ErrorCode::kChecksum);
  Bytes magic = good;
  magic[0] = 'X';
  EXPECT_EQ(code_of(magic), ErrorCode::kBadMagic);
  // Bump the version and fix up the checksum so only the version differs.
  Bytes version(good.begin(), good.end() - 8);
  version[4] = 2;
  put_u64(version, fnv1a64(version));
  EXPECT_EQ(code_of(version), ErrorCode::kVersionMismatch);
}
