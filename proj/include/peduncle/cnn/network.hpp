#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "peduncle/cnn/layers.hpp"
#include "peduncle/text_io.hpp"

namespace peduncle::cnn {

/// Ordered layer list over a fixed input patch. The last layer is an FC
/// producing one logit per class.
struct NetworkSpec {
  std::size_t in_channels = 3;
  std::size_t patch_h = 64;
  std::size_t patch_w = 64;
  std::vector<LayerSpec> layers;

  Shape4 input_shape(std::size_t n = 1) const { return {n, in_channels, patch_h, patch_w}; }
};

inline std::size_t param_count(const NetworkSpec& spec) {
  std::size_t total = 0;
  for (const auto& l : spec.layers) total += param_count(l);
  return total;
}

inline Shape4 layer_output_shape(const Shape4& in, const LayerSpec& layer) {
  struct V {
    const Shape4& in;
    Shape4 operator()(const ConvSpec& s) const { return conv_output_shape(in, s); }
    Shape4 operator()(const PoolSpec& s) const { return pool_output_shape(in, s); }
    Shape4 operator()(const ReluSpec&) const { return in; }
    Shape4 operator()(const InceptionSpec& s) const { return inception_output_shape(in, s); }
    Shape4 operator()(const FcSpec& s) const {
      if (in.per_sample() != s.in)
        throw Error(ErrorCode::ShapeError,
                    "fc expects " + std::to_string(s.in) + " inputs but receives " + std::to_string(in.per_sample()));
      return {in.n, s.out, 1, 1};
    }
  };
  return std::visit(V{in}, layer);
}

/// Checks channel chaining through every layer; returns the logit count.
inline std::size_t validate_chain(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw Error(ErrorCode::ShapeError, "network has no layers");
  Shape4 s = spec.input_shape();
  for (const auto& l : spec.layers) s = layer_output_shape(s, l);
  if (!std::holds_alternative<FcSpec>(spec.layers.back()))
    throw Error(ErrorCode::ShapeError, "network must end in a fully connected layer");
  return s.c;
}

struct ArchitectureCounts {
  std::size_t conv = 0;  // plain conv layers plus inception modules
  std::size_t inception = 0;
  std::size_t fc = 0;
};

inline ArchitectureCounts count_layers(const NetworkSpec& spec) {
  ArchitectureCounts c;
  for (const auto& l : spec.layers) {
    if (std::holds_alternative<ConvSpec>(l)) ++c.conv;
    if (std::holds_alternative<InceptionSpec>(l)) { ++c.conv; ++c.inception; }
    if (std::holds_alternative<FcSpec>(l)) ++c.fc;
  }
  return c;
}

/// The inception scorer shape: 8 conv layers (2 of them inception modules),
/// one FC layer, two classes.
inline void validate_architecture(const NetworkSpec& spec) {
  const auto classes = validate_chain(spec);
  const auto c = count_layers(spec);
  if (c.conv != 8 || c.inception != 2 || c.fc != 1 || classes != 2)
    throw Error(ErrorCode::ShapeError, "expected 8 conv layers (2 inception), 1 fc and 2 classes; got " +
                                           std::to_string(c.conv) + " conv, " + std::to_string(c.inception) +
                                           " inception, " + std::to_string(c.fc) + " fc, " + std::to_string(classes) +
                                           " classes");
}

// ---------------------------------------------------------------------------
// spec text format

inline std::string format_network_spec(const NetworkSpec& spec) {
  std::string out = "input " + std::to_string(spec.in_channels) + " " + std::to_string(spec.patch_h) + " " +
                    std::to_string(spec.patch_w) + "\n";
  auto num = [](std::size_t v) { return " " + std::to_string(v); };
  for (const auto& l : spec.layers) {
    if (const auto* s = std::get_if<ConvSpec>(&l))
      out += "conv" + num(s->kh) + num(s->kw) + num(s->c_in) + num(s->c_out) + num(s->stride) + num(s->pad);
    else if (const auto* s = std::get_if<PoolSpec>(&l))
      out += "pool" + num(s->k) + num(s->stride);
    else if (std::holds_alternative<ReluSpec>(l))
      out += "relu";
    else if (const auto* s = std::get_if<InceptionSpec>(&l))
      out += "inception" + num(s->c_in) + num(s->c1) + num(s->c3) + num(s->c_pool) + num(s->c3_reduce);
    else if (const auto* s = std::get_if<FcSpec>(&l))
      out += "fc" + num(s->in) + num(s->out);
    out += '\n';
  }
  return out;
}

/// Lines: `input C H W`, `conv kh kw cin cout stride pad`, `pool k stride`,
/// `relu`, `inception cin c1x1 c3x3 cpool [c3x3_reduce]`, `fc in out`.
/// Blank lines and `#` comments are ignored. Validates channel chaining only.
inline NetworkSpec parse_network_spec(std::string_view data) {
  NetworkSpec spec;
  bool have_input = false;
  for (auto line : text::lines(data)) {
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto tok = text::split(line);
    if (tok.empty()) continue;
    auto arg = [&](std::size_t i) { return text::parse_int<std::size_t>(tok.at(i)); };
    auto expect = [&](std::size_t lo, std::size_t hi) {
      if (tok.size() < lo || tok.size() > hi)
        throw Error(ErrorCode::ParseError, "wrong argument count for '" + std::string(tok[0]) + "'");
    };
    if (tok[0] == "input") {
      expect(4, 4);
      spec.in_channels = arg(1);
      spec.patch_h = arg(2);
      spec.patch_w = arg(3);
      have_input = true;
    } else if (tok[0] == "conv") {
      expect(7, 7);
      spec.layers.emplace_back(ConvSpec{arg(1), arg(2), arg(3), arg(4), arg(5), arg(6)});
    } else if (tok[0] == "pool") {
      expect(3, 3);
      spec.layers.emplace_back(PoolSpec{arg(1), arg(2), 0});
    } else if (tok[0] == "relu") {
      expect(1, 1);
      spec.layers.emplace_back(ReluSpec{});
    } else if (tok[0] == "inception") {
      expect(5, 6);
      const std::size_t c3 = arg(3);
      const std::size_t reduce = tok.size() == 6 ? arg(5) : std::max<std::size_t>(1, c3 / 2);
      spec.layers.emplace_back(InceptionSpec{arg(1), arg(2), reduce, c3, arg(4)});
    } else if (tok[0] == "fc") {
      expect(3, 3);
      spec.layers.emplace_back(FcSpec{arg(1), arg(2)});
    } else {
      throw Error(ErrorCode::ParseError, "unknown layer '" + std::string(tok[0]) + "'");
    }
  }
  if (!have_input) throw Error(ErrorCode::ParseError, "network spec lacks an input line");
  validate_chain(spec);
  return spec;
}

/// Shipped default; identical to data/mini_inception.net.
inline constexpr std::string_view kDefaultNetworkSpec =
    "# inception-style patch scorer: 8 conv layers (2 inception), 1 fc\n"
    "input 3 64 64\n"
    "conv 3 3 3 8 2 1\n"
    "relu\n"
    "pool 2 2\n"
    "conv 3 3 8 16 1 1\n"
    "relu\n"
    "pool 2 2\n"
    "inception 16 8 16 8 8\n"
    "inception 32 16 24 8 12\n"
    "pool 2 2\n"
    "conv 3 3 48 32 1 1\n"
    "relu\n"
    "conv 3 3 32 32 1 1\n"
    "relu\n"
    "conv 1 1 32 16 1 0\n"
    "relu\n"
    "conv 1 1 16 16 1 0\n"
    "relu\n"
    "fc 256 2\n";

inline NetworkSpec default_network_spec() {
  auto spec = parse_network_spec(kDefaultNetworkSpec);
  validate_architecture(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// weights

/// Per-layer parameter and gradient buffers, sized by param_count.
struct WeightStore {
  std::vector<std::vector<double>> params;
  std::vector<std::vector<double>> grads;

  static WeightStore zeros(const NetworkSpec& spec) {
    WeightStore w;
    for (const auto& l : spec.layers) {
      w.params.emplace_back(param_count(l), 0.0);
      w.grads.emplace_back(param_count(l), 0.0);
    }
    return w;
  }

  /// He-normal weights, zero biases.
  static WeightStore initialize(const NetworkSpec& spec, std::uint64_t seed) {
    WeightStore w = zeros(spec);
    std::mt19937_64 rng(seed);
    auto fill = [&](std::span<double> block, const ConvSpec& s) {
      std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(s.kh * s.kw * s.c_in)));
      const std::size_t nw = s.kh * s.kw * s.c_in * s.c_out;
      for (std::size_t i = 0; i < nw; ++i) block[i] = dist(rng);
    };
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
      std::span<double> p(w.params[li]);
      const auto& l = spec.layers[li];
      if (const auto* s = std::get_if<ConvSpec>(&l)) {
        fill(p, *s);
      } else if (const auto* s = std::get_if<InceptionSpec>(&l)) {
        const auto o = detail::inception_offsets(*s);
        fill(p.subspan(o.b1), s->branch1());
        fill(p.subspan(o.red), s->reduce());
        fill(p.subspan(o.c3), s->conv3());
        fill(p.subspan(o.pp), s->pool_proj());
      } else if (const auto* s = std::get_if<FcSpec>(&l)) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(s->in)));
        for (std::size_t i = 0; i < s->in * s->out; ++i) p[i] = dist(rng);
      }
    }
    return w;
  }

  void zero_grads() {
    for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
  }

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.size();
    return n;
  }
};

inline void check_weights(const NetworkSpec& spec, const WeightStore& w) {
  if (w.params.size() != spec.layers.size()) throw Error(ErrorCode::ShapeError, "weight layer count mismatch");
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (w.params[i].size() != param_count(spec.layers[i]))
      throw Error(ErrorCode::ShapeError, "weight block " + std::to_string(i) + " has wrong size");
}

inline constexpr char kWeightMagic[16] = {'M', 'I', 'N', 'C', '0', '0', '0', '1', 0, 0, 0, 0, 0, 0, 0, 0};

/// 16-byte magic then every layer's parameters as little-endian f64, in spec order.
inline std::string serialize_weights(const NetworkSpec& spec, const WeightStore& w) {
  check_weights(spec, w);
  std::string out(kWeightMagic, sizeof(kWeightMagic));
  out.reserve(out.size() + 8 * w.total());
  for (const auto& block : w.params)
    for (double v : block) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
    }
  return out;
}

inline WeightStore deserialize_weights(const NetworkSpec& spec, std::string_view bytes) {
  if (bytes.size() < sizeof(kWeightMagic) || std::memcmp(bytes.data(), kWeightMagic, sizeof(kWeightMagic)) != 0)
    throw Error(ErrorCode::ParseError, "bad weight file magic");
  WeightStore w = WeightStore::zeros(spec);
  if (bytes.size() != sizeof(kWeightMagic) + 8 * w.total())
    throw Error(ErrorCode::ParseError, "weight file size does not match network spec");
  std::size_t at = sizeof(kWeightMagic);
  for (auto& block : w.params)
    for (double& v : block) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[at + b])) << (8 * b);
      std::memcpy(&v, &bits, sizeof v);
      at += 8;
    }
  return w;
}

// ---------------------------------------------------------------------------
// forward / backward

struct LayerCache {
  Tensor4 input;
  Tensor4 output;
  std::vector<std::size_t> argmax;
  InceptionCache inception;
};

using ForwardCache = std::vector<LayerCache>;

/// Logits of shape (n, classes, 1, 1).
inline Tensor4 forward(const NetworkSpec& spec, const WeightStore& w, const Tensor4& x, ForwardCache* cache = nullptr) {
  if (x.shape().c != spec.in_channels || x.shape().h != spec.patch_h || x.shape().w != spec.patch_w)
    throw Error(ErrorCode::ShapeError, "input " + to_string(x.shape()) + " does not match network input");
  if (cache) cache->assign(spec.layers.size(), {});
  Tensor4 cur = x;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    std::span<const double> p(w.params[i]);
    const auto& l = spec.layers[i];
    Tensor4 next;
    std::vector<std::size_t>* argmax = cache ? &(*cache)[i].argmax : nullptr;
    if (const auto* s = std::get_if<ConvSpec>(&l)) next = conv_forward(cur, *s, p);
    else if (const auto* s = std::get_if<PoolSpec>(&l)) next = pool_forward(cur, *s, argmax);
    else if (std::holds_alternative<ReluSpec>(l)) next = relu_forward(cur);
    else if (const auto* s = std::get_if<InceptionSpec>(&l))
      next = inception_forward(cur, *s, p, cache ? &(*cache)[i].inception : nullptr);
    else next = fc_forward(cur, std::get<FcSpec>(l), p);
    assert_finite(next);
    if (cache) {
      (*cache)[i].input = std::move(cur);
      (*cache)[i].output = next;
    }
    cur = std::move(next);
  }
  return cur;
}

/// Row-wise softmax over the class axis.
inline std::vector<double> softmax(const Tensor4& logits) {
  const std::size_t n = logits.shape().n, k = logits.shape().c;
  std::vector<double> out(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    const double* z = logits.sample(i);
    double mx = z[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += out[i * k + j] = std::exp(z[j] - mx);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= sum;
  }
  return out;
}

/// Mean cross-entropy; accumulates parameter gradients into w.grads.
inline double loss_and_gradients(const NetworkSpec& spec, WeightStore& w, const Tensor4& x,
                                 std::span<const int> labels) {
  const std::size_t n = x.shape().n;
  if (n == 0) throw Error(ErrorCode::EmptyInput, "empty training batch");
  if (labels.size() != n) throw Error(ErrorCode::InvalidInput, "label count mismatch");
  ForwardCache cache;
  const Tensor4 logits = forward(spec, w, x, &cache);
  const std::size_t k = logits.shape().c;
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw Error(ErrorCode::InvalidInput, "label out of range");
  const auto prob = softmax(logits);
  double loss = 0.0;
  Tensor4 grad(logits.shape());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    // log-softmax directly from logits for accuracy
    const double* z = logits.sample(i);
    double mx = z[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - mx);
    loss -= (z[y] - mx - std::log(sum)) * inv_n;
    for (std::size_t j = 0; j < k; ++j) grad.sample(i)[j] = (prob[i * k + j] - (j == y ? 1.0 : 0.0)) * inv_n;
  }
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& l = spec.layers[li];
    const auto& c = cache[li];
    std::span<const double> p(w.params[li]);
    std::span<double> dp(w.grads[li]);
    if (const auto* s = std::get_if<ConvSpec>(&l)) grad = conv_backward(c.input, *s, p, grad, dp);
    else if (std::holds_alternative<PoolSpec>(l)) grad = pool_backward(c.input.shape(), c.argmax, grad);
    else if (std::holds_alternative<ReluSpec>(l)) grad = relu_backward(c.output, std::move(grad));
    else if (const auto* s = std::get_if<InceptionSpec>(&l))
      grad = inception_backward(c.input, *s, p, c.inception, grad, dp);
    else grad = fc_backward(c.input, std::get<FcSpec>(l), p, grad, dp);
  }
  return loss;
}

/// Optional momentum buffers for SGD.
struct SgdState {
  double momentum = 0.0;
  std::vector<std::vector<double>> velocity;
};

/// One SGD step on a batch; returns the pre-step loss. With lr == 0 the
/// weights are untouched.
inline double backward_and_step(const NetworkSpec& spec, WeightStore& w, const Tensor4& x, std::span<const int> labels,
                                double lr, SgdState* state = nullptr) {
  w.zero_grads();
  const double loss = loss_and_gradients(spec, w, x, labels);
  if (lr == 0.0) return loss;
  if (state && state->momentum != 0.0) {
    if (state->velocity.size() != w.params.size()) {
      state->velocity.clear();
      for (const auto& p : w.params) state->velocity.emplace_back(p.size(), 0.0);
    }
    for (std::size_t l = 0; l < w.params.size(); ++l)
      for (std::size_t i = 0; i < w.params[l].size(); ++i) {
        double& v = state->velocity[l][i];
        v = state->momentum * v + w.grads[l][i];
        w.params[l][i] -= lr * v;
      }
  } else {
    for (std::size_t l = 0; l < w.params.size(); ++l)
      for (std::size_t i = 0; i < w.params[l].size(); ++i) w.params[l][i] -= lr * w.grads[l][i];
  }
  return loss;
}

}  // namespace peduncle::cnn
