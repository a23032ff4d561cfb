#include <gtest/gtest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "peduncle/cnn/network.hpp"
#include "peduncle/cnn/score_map.hpp"
#include "peduncle/text_io.hpp"

using namespace peduncle;
using namespace peduncle::cnn;

namespace {

Tensor4 random_tensor(Shape4 s, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor4 t(s);
  for (double& v : t.values()) v = g(rng);
  return t;
}

std::vector<double> random_params(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> p(n);
  for (double& v : p) v = g(rng);
  return p;
}

void expect_close(const Tensor4& a, const Tensor4& b, double tol = 1e-10) {
  ASSERT_EQ(a.shape(), b.shape());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << "at " << i;
}

const char* kTinyNet = "input 3 8 8\nconv 3 3 3 4 1 1\nrelu\npool 2 2\nfc 64 2\n";

}  // namespace

TEST(Layers, ConvMatchesDirectLoops) {
  std::mt19937_64 rng(1);
  for (const ConvSpec s : {ConvSpec{3, 3, 2, 4, 1, 1}, ConvSpec{3, 3, 3, 2, 2, 0}, ConvSpec{1, 1, 5, 3, 1, 0},
                           ConvSpec{5, 3, 2, 2, 2, 2}}) {
    const auto x = random_tensor({2, s.c_in, 9, 8}, rng);
    const auto p = random_params(param_count(s), rng);
    expect_close(conv_forward(x, s, p), oracle::conv(x, s, p));
  }
}

TEST(Layers, PoolAndFcMatchDirectLoops) {
  std::mt19937_64 rng(2);
  const auto x = random_tensor({2, 3, 7, 6}, rng);
  for (const PoolSpec s : {PoolSpec{2, 2, 0}, PoolSpec{3, 1, 1}, PoolSpec{3, 2, 0}})
    expect_close(pool_forward(x, s), oracle::maxpool(x, s), 0.0);
  const FcSpec f{3 * 7 * 6, 4};
  const auto p = random_params(param_count(f), rng);
  expect_close(fc_forward(x, f, p), oracle::fc(x, f, p));
}

TEST(Layers, ShapeErrors) {
  Tensor4 x({1, 2, 4, 4});
  EXPECT_THROW(conv_forward(x, ConvSpec{3, 3, 3, 1, 1, 0}, std::vector<double>(28)), Error);  // channel mismatch
  EXPECT_THROW(conv_forward(x, ConvSpec{5, 5, 2, 1, 1, 0}, std::vector<double>(51)), Error);  // kernel too big
  EXPECT_THROW(pool_forward(x, PoolSpec{5, 1, 0}), Error);
  EXPECT_THROW(fc_forward(x, FcSpec{31, 2}, std::vector<double>(64)), Error);
}

TEST(Layers, ReluBackwardGatesOnOutput) {
  Tensor4 x({1, 1, 1, 3});
  x.values() = {-1.0, 0.0, 2.0};
  const auto y = relu_forward(x);
  EXPECT_EQ(y.values(), (std::vector<double>{0.0, 0.0, 2.0}));
  Tensor4 dy({1, 1, 1, 3}, 1.0);
  EXPECT_EQ(relu_backward(y, dy).values(), (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Layers, ConvGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  const ConvSpec s{3, 3, 2, 3, 2, 1};
  auto x = random_tensor({2, 2, 5, 5}, rng);
  auto p = random_params(param_count(s), rng);
  const auto r = random_tensor(conv_output_shape(x.shape(), s), rng);
  auto loss = [&] {
    const auto y = conv_forward(x, s, p);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y.data()[i] * r.data()[i];
    return acc;
  };
  std::vector<double> dp(p.size(), 0.0);
  const auto dx = conv_backward(x, s, p, r, dp);
  EXPECT_LT(oracle::max_relative_error(dx.values(), oracle::numeric_gradient(loss, x.values())), 1e-6);
  EXPECT_LT(oracle::max_relative_error(dp, oracle::numeric_gradient(loss, p)), 1e-6);
}

TEST(Network, EndToEndGradientMatchesFiniteDifferences) {
  const auto spec = parse_network_spec(kTinyNet);
  auto w = WeightStore::initialize(spec, 11);
  std::mt19937_64 rng(4);
  const auto x = random_tensor(spec.input_shape(2), rng);
  const std::vector<int> labels = {1, 0};
  w.zero_grads();
  loss_and_gradients(spec, w, x, labels);
  for (std::size_t l = 0; l < w.params.size(); ++l) {
    auto f = [&] {
      auto copy = w;
      return loss_and_gradients(spec, copy, x, labels);
    };
    EXPECT_LT(oracle::max_relative_error(w.grads[l], oracle::numeric_gradient(f, w.params[l])), 1e-4) << "layer " << l;
  }
}

TEST(Network, SpecTextRoundTrip) {
  const auto spec = default_network_spec();
  const auto again = parse_network_spec(format_network_spec(spec));
  EXPECT_EQ(format_network_spec(again), format_network_spec(spec));
  EXPECT_EQ(param_count(again), param_count(spec));
}

TEST(Network, ShippedSpecFileEqualsBuiltIn) {
  const auto text = text::read_file(std::string(PEDUNCLE_DATA_DIR) + "/mini_inception.net");
  EXPECT_EQ(text, kDefaultNetworkSpec);
  const auto spec = parse_network_spec(text);
  EXPECT_NO_THROW(validate_architecture(spec));
  EXPECT_EQ(validate_chain(spec), 2u);
}

TEST(Network, DefaultShapeAndCounts) {
  const auto spec = default_network_spec();
  const auto c = count_layers(spec);
  EXPECT_EQ(c.conv, 8u);
  EXPECT_EQ(c.inception, 2u);
  EXPECT_EQ(c.fc, 1u);
  const auto w = WeightStore::initialize(spec, 1);
  EXPECT_EQ(w.total(), param_count(spec));
  std::mt19937_64 rng(5);
  const auto logits = forward(spec, w, random_tensor(spec.input_shape(2), rng));
  EXPECT_EQ(logits.shape(), (Shape4{2, 2, 1, 1}));
}

TEST(Network, ParamCountByHand) {
  EXPECT_EQ(param_count(NetworkSpec{2, 4, 4, {ConvSpec{3, 3, 2, 4, 1, 1}}}), 76u);
  EXPECT_EQ(param_count(parse_network_spec(kTinyNet)), (3u * 3 * 3 * 4 + 4) + (64u * 2 + 2));
  // inception line order: c_in c1 c3 c_pool [c3_reduce]
  const auto inc = parse_network_spec("input 4 6 6\ninception 4 2 3 1 2\nfc 216 2\n");
  EXPECT_EQ(param_count(inc), (4u * 2 + 2) + (4u * 2 + 2) + (9u * 2 * 3 + 3) + (4u * 1 + 1) + (216u * 2 + 2));
}

TEST(Network, ParseErrors) {
  EXPECT_THROW(parse_network_spec("conv 3 3 3 4 1 1\nfc 4 2\n"), Error);               // no input line
  EXPECT_THROW(parse_network_spec("input 3 8 8\nconv 3 3 3\n"), Error);                // arity
  EXPECT_THROW(parse_network_spec("input 3 8 8\nsoftmax\n"), Error);                   // unknown layer
  EXPECT_THROW(parse_network_spec("input 3 8 8\nconv 3 3 2 4 1 1\nfc 256 2\n"), Error);  // channel chain
  EXPECT_THROW(parse_network_spec("input 3 8 8\nconv 3 3 3 4 1 1\n"), Error);          // no fc at end
  EXPECT_THROW(validate_architecture(parse_network_spec(kTinyNet)), Error);
}

TEST(Network, WeightsRoundTripBitExact) {
  const auto spec = parse_network_spec(kTinyNet);
  auto w = WeightStore::initialize(spec, 3);
  w.params[0][0] = -0.0;
  w.params[0][1] = 5e-324;
  const auto bytes = serialize_weights(spec, w);
  EXPECT_EQ(bytes.size(), 16 + 8 * param_count(spec));
  const auto back = deserialize_weights(spec, bytes);
  EXPECT_EQ(serialize_weights(spec, back), bytes);
  EXPECT_TRUE(std::signbit(back.params[0][0]));
  EXPECT_THROW(deserialize_weights(spec, bytes.substr(0, bytes.size() - 1)), Error);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_weights(spec, bad), Error);
}

TEST(Network, InitializationIsSeeded) {
  const auto spec = default_network_spec();
  EXPECT_EQ(WeightStore::initialize(spec, 4).params, WeightStore::initialize(spec, 4).params);
  EXPECT_NE(WeightStore::initialize(spec, 4).params, WeightStore::initialize(spec, 5).params);
}

TEST(Network, SgdReducesLossOnFixedBatch) {
  const auto spec = parse_network_spec(kTinyNet);
  auto w = WeightStore::initialize(spec, 6);
  std::mt19937_64 rng(6);
  const auto x = random_tensor(spec.input_shape(8), rng);
  const std::vector<int> labels = {0, 1, 0, 1, 1, 0, 1, 0};
  SgdState sgd{0.9, {}};
  const double first = backward_and_step(spec, w, x, labels, 0.05, &sgd);
  double last = first;
  for (int i = 0; i < 40; ++i) last = backward_and_step(spec, w, x, labels, 0.05, &sgd);
  EXPECT_LT(last, 0.5 * first);
  const auto before = w.params;
  backward_and_step(spec, w, x, labels, 0.0);
  EXPECT_EQ(w.params, before);
}

TEST(Network, SoftmaxRowsSumToOne) {
  Tensor4 z({2, 3, 1, 1});
  z.values() = {1000.0, 0.0, -1000.0, 1.0, 2.0, 3.0};
  const auto p = softmax(z);
  EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_NEAR(p[3] + p[4] + p[5], 1.0, 1e-12);
}

TEST(ScoreMap, GridCentresAndBorder) {
  EXPECT_EQ(patch_centers(Roi2{0, 0, 8, 4}, 4), (std::vector<std::pair<long, long>>{{2, 2}, {6, 2}}));
  const auto spec = parse_network_spec(kTinyNet);
  const auto w = WeightStore::initialize(spec, 1);
  RgbImage img(20, 16, Rgb{100, 150, 200});
  const auto map = score_map(img, spec, w, 2);
  // centre (1,1) cannot hold an 8x8 patch: scored 0; (5,5) can
  EXPECT_TRUE(map.is_scored(1, 1));
  EXPECT_EQ(map.at(1, 1), 0.0);
  EXPECT_TRUE(map.is_scored(5, 5));
  EXPECT_GT(map.at(5, 5), 0.0);
  EXPECT_FALSE(map.is_scored(0, 0));
  EXPECT_EQ(map.scored_count(), 10u * 8u);
  // uniform image: every fitting patch gets the same score
  EXPECT_DOUBLE_EQ(map.at(5, 5), map.at(13, 9));
}

TEST(ScoreMap, RoiAndErrors) {
  const auto spec = parse_network_spec(kTinyNet);
  const auto w = WeightStore::initialize(spec, 1);
  RgbImage img(20, 16, Rgb{10, 20, 30});
  const auto map = score_map(img, spec, w, 3, Roi2{6, 6, 12, 12});
  EXPECT_EQ(map.scored_count(), 4u);
  EXPECT_TRUE(map.is_scored(7, 7));
  EXPECT_THROW(score_map(img, spec, w, 0), Error);
  EXPECT_THROW(score_map(RgbImage(6, 6), spec, w, 1), Error);
}

TEST(ScoreMap, PatchExtractionScaling) {
  const auto spec = parse_network_spec(kTinyNet);
  RgbImage img(8, 8, Rgb{0, 255, 51});
  Tensor4 batch(spec.input_shape(1));
  extract_patch(img, 4, 4, spec, batch, 0);
  EXPECT_DOUBLE_EQ(batch.at(0, 0, 0, 0), -0.5);
  EXPECT_DOUBLE_EQ(batch.at(0, 1, 7, 7), 0.5);
  EXPECT_NEAR(batch.at(0, 2, 3, 3), -0.3, 1e-12);
  EXPECT_TRUE(patch_fits(img, 4, 4, spec));
  EXPECT_FALSE(patch_fits(img, 3, 4, spec));
}
