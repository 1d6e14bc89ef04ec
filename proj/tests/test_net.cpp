#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "stego/error.hpp"
#include "stego/net.hpp"
#include "support/gradcheck.hpp"

using namespace stego;

TEST(Encoder, ParameterCounts) {
  const Network enc = build_encoder(3);
  EXPECT_EQ(enc.params.total_count(), 293'273u);
  EXPECT_EQ(enc.params.count_with_prefix("enc.conv_prep0_"), 2'270u);
  EXPECT_EQ(stage_parameter_count(3), 2'270u);
  EXPECT_EQ(stage_parameter_count(65), 47'840u);
  EXPECT_EQ(stage_parameter_count(68), 50'045u);
  EXPECT_EQ(enc.params.count_with_prefix("enc.output_C."), 1'758u);
}

TEST(Decoder, ParameterCounts) {
  const Network dec = build_decoder(3, 0.01);
  EXPECT_EQ(dec.params.total_count(), 195'388u);
  EXPECT_EQ(dec.params.count_with_prefix("dec.conv_rev0_"), 2'270u);
  EXPECT_EQ(dec.params.total_count() + build_encoder(3).params.total_count(), 488'661u);
}

TEST(Encoder, StageChannels) {
  const Network enc = build_encoder(3);
  EXPECT_EQ(enc.graph.node("cover_join").out_channels, 68u);
  for (const auto& n : enc.graph.nodes) {
    if (n.kind == NodeKind::concat && n.name != "cover_join") EXPECT_EQ(n.out_channels, 65u) << n.name;
  }
  EXPECT_EQ(enc.graph.node("conv_hid0_3x3").in_channels, 68u);
  EXPECT_EQ(enc.graph.node("output_C").kernel, 3u);
  EXPECT_FALSE(enc.graph.node("output_C").relu);
  EXPECT_TRUE(enc.graph.node("conv_prep1_4x4").relu);
  EXPECT_EQ(enc.graph.inputs, (std::vector<std::string>{"secret_in", "cover_in"}));
}

TEST(Decoder, Structure) {
  const Network dec = build_decoder(1, 0.02);
  EXPECT_EQ(dec.graph.node("output_C_noise").kind, NodeKind::noise);
  EXPECT_EQ(dec.graph.noise_stddev, 0.02);
  EXPECT_EQ(dec.graph.node("output_S").out_channels, 1u);
  EXPECT_THROW(build_decoder(0), Error);
  EXPECT_THROW(build_decoder(3, -1.0), Error);
}

TEST(LayerGraph, ValidateRejectsBrokenStages) {
  Network enc = build_encoder(3);
  auto bad = enc.graph;
  bad.nodes[bad.index_of("conv_hid1_4x4")].kernel = 3;
  EXPECT_THROW(bad.validate(), Error);
  bad = enc.graph;
  bad.nodes[bad.index_of("conv_hid1_5x5")].out_channels = 6;
  EXPECT_THROW(bad.validate(), Error);
  bad = enc.graph;
  bad.nodes[2].inputs = {5};
  EXPECT_THROW(bad.validate(), Error);
  EXPECT_THROW(enc.graph.index_of("nope"), Error);
}

TEST(Glorot, LimitsAndZeroBiases) {
  Network enc = build_encoder(3);
  SplitMix64 rng(1);
  glorot_init(enc.params, rng);
  const Tensor& w = enc.params.at("enc.conv_hid0_5x5.w");
  const double limit = std::sqrt(6.0 / (25.0 * (68 + 5)));
  double max_abs = 0.0;
  for (float v : w.data()) max_abs = std::max(max_abs, double(std::abs(v)));
  EXPECT_LE(max_abs, limit);
  EXPECT_GT(max_abs, 0.9 * limit);
  for (float v : enc.params.at("enc.conv_hid0_5x5.b").data()) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, ShapesAndZeroParameters) {
  const Network enc = build_encoder(3);
  const Network dec = build_decoder(3, 0.0);
  Tensor s({32, 32, 3}, 0.3f), c({32, 32, 3}, 0.7f);
  const Tensor container = forward_encoder(enc.graph, enc.params, s, c);
  EXPECT_EQ(container.shape(), (Shape{32, 32, 3}));
  EXPECT_EQ(container, Tensor({32, 32, 3}));
  EXPECT_EQ(forward_decoder(dec.graph, dec.params, c, Mode::eval).shape(), (Shape{32, 32, 3}));
  EXPECT_THROW(forward_encoder(enc.graph, enc.params, s, Tensor({16, 16, 3})), Error);
  EXPECT_THROW(forward_decoder(dec.graph, dec.params, Tensor({8, 8, 1}), Mode::eval), Error);
}

TEST(Forward, Deterministic) {
  Network enc = build_encoder(3);
  Network dec = build_decoder(3, 0.5);
  SplitMix64 rng(3);
  glorot_init(enc.params, rng);
  glorot_init(dec.params, rng);
  SplitMix64 data(4);
  const auto s = oracle::random_tensor<float>({8, 8, 3}, data, 0.0, 1.0);
  const auto c = oracle::random_tensor<float>({8, 8, 3}, data, 0.0, 1.0);
  EXPECT_EQ(forward_encoder(enc.graph, enc.params, s, c), forward_encoder(enc.graph, enc.params, s, c));
  EXPECT_EQ(forward_decoder(dec.graph, dec.params, c, Mode::eval), forward_decoder(dec.graph, dec.params, c, Mode::eval));
  // Train mode draws noise from the supplied generator.
  SplitMix64 n1(9), n2(9);
  EXPECT_EQ(forward_decoder(dec.graph, dec.params, c, Mode::train, &n1),
            forward_decoder(dec.graph, dec.params, c, Mode::train, &n2));
  EXPECT_NE(forward_decoder(dec.graph, dec.params, c, Mode::train, &n1),
            forward_decoder(dec.graph, dec.params, c, Mode::eval));
  EXPECT_THROW(forward_decoder(dec.graph, dec.params, c, Mode::train, nullptr), Error);
}

TEST(Gradients, NetworkMatchesFiniteDifferences) {
  const auto stages = oracle::network_gradient_check(6, 4, 17, 1e-3);
  EXPECT_EQ(stages.size(), 14u);
  for (const auto& s : stages) {
    EXPECT_GT(s.checked, 0u) << s.stage;
    EXPECT_EQ(s.failed, 0u) << s.stage << " worst relative error " << s.worst;
  }
}

TEST(Gradients, StageNames) {
  EXPECT_EQ(oracle::stage_of("enc.conv_hid2_4x4.w"), "enc.conv_hid2");
  EXPECT_EQ(oracle::stage_of("dec.output_S.b"), "dec.output_S");
}

namespace {

Checkpoint sample_checkpoint() {
  Checkpoint ck;
  ck.tensors.add("a.w", Tensor({2, 1}, std::vector<float>{1.0f, -2.5f}));
  ck.tensors.add("b", Tensor({1}, std::vector<float>{0.5f}));
  ck.step = 0x0102030405060708ULL;
  return ck;
}

}  // namespace

TEST(Checkpoint, ExactByteLayout) {
  std::ostringstream out;
  write_checkpoint(out, sample_checkpoint());
  const std::string bytes = out.str();
  const std::string expected = std::string("SGN1") + std::string("\x02\x00\x00\x00", 4) +
                               std::string("\x03\x00", 2) + "a.w" + std::string("\x02", 1) +
                               std::string("\x02\x00\x00\x00\x01\x00\x00\x00", 8) +
                               std::string("\x00\x00\x80\x3f\x00\x00\x20\xc0", 8) + std::string("\x01\x00", 2) + "b" +
                               std::string("\x01\x01\x00\x00\x00", 5) + std::string("\x00\x00\x00\x3f", 4) +
                               std::string("\x08\x07\x06\x05\x04\x03\x02\x01", 8);
  EXPECT_EQ(bytes, expected);
}

TEST(Checkpoint, RoundTripIsByteExact) {
  Network enc = build_encoder(3);
  SplitMix64 rng(5);
  glorot_init(enc.params, rng);
  Checkpoint ck{enc.params, 42};
  std::ostringstream a;
  write_checkpoint(a, ck);
  std::istringstream in(a.str());
  const Checkpoint back = read_checkpoint(in);
  EXPECT_EQ(back.step, 42u);
  EXPECT_TRUE(back.tensors == enc.params);
  std::ostringstream b;
  write_checkpoint(b, back);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Checkpoint, RejectsMalformedInput) {
  std::ostringstream out;
  write_checkpoint(out, sample_checkpoint());
  const std::string good = out.str();
  auto read = [](const std::string& bytes) {
    std::istringstream in(bytes);
    return read_checkpoint(in);
  };
  auto kind_of = [&](const std::string& bytes) {
    try {
      read(bytes);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::internal;
  };
  EXPECT_EQ(kind_of("SGN2" + good.substr(4)), ErrorKind::data);
  EXPECT_EQ(kind_of(good.substr(0, good.size() - 3)), ErrorKind::data);
  EXPECT_EQ(kind_of(good.substr(0, 20)), ErrorKind::data);
  EXPECT_EQ(kind_of(good + "x"), ErrorKind::data);
  EXPECT_NO_THROW(read(good));
  EXPECT_THROW(load_checkpoint("/nonexistent/ck.sgn"), Error);
}
