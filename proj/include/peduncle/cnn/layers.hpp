#pragma once

// Layer primitives with explicit forward/backward. Parameter blocks are flat
// spans: weights in row-major (out, in, kh, kw) order followed by biases.

#include <algorithm>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "peduncle/cnn/tensor.hpp"

namespace peduncle::cnn {

struct ConvSpec {
  std::size_t kh = 1, kw = 1, c_in = 1, c_out = 1, stride = 1, pad = 0;
  friend constexpr bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct PoolSpec {
  std::size_t k = 2, stride = 2, pad = 0;
  friend constexpr bool operator==(const PoolSpec&, const PoolSpec&) = default;
};

struct ReluSpec {
  friend constexpr bool operator==(const ReluSpec&, const ReluSpec&) = default;
};

/// Three parallel branches concatenated in this order: 1x1 conv, 1x1 -> 3x3
/// conv chain, 3x3/1 max pool -> 1x1 projection. Every conv is followed by ReLU.
struct InceptionSpec {
  std::size_t c_in = 1, c1 = 1, c3_reduce = 1, c3 = 1, c_pool = 1;
  std::size_t c_out() const noexcept { return c1 + c3 + c_pool; }
  ConvSpec branch1() const { return {1, 1, c_in, c1, 1, 0}; }
  ConvSpec reduce() const { return {1, 1, c_in, c3_reduce, 1, 0}; }
  ConvSpec conv3() const { return {3, 3, c3_reduce, c3, 1, 1}; }
  ConvSpec pool_proj() const { return {1, 1, c_in, c_pool, 1, 0}; }
  static constexpr PoolSpec pool() { return {3, 1, 1}; }
  friend constexpr bool operator==(const InceptionSpec&, const InceptionSpec&) = default;
};

struct FcSpec {
  std::size_t in = 1, out = 1;
  friend constexpr bool operator==(const FcSpec&, const FcSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, PoolSpec, ReluSpec, InceptionSpec, FcSpec>;

inline std::size_t param_count(const ConvSpec& s) { return s.kh * s.kw * s.c_in * s.c_out + s.c_out; }
inline std::size_t param_count(const PoolSpec&) { return 0; }
inline std::size_t param_count(const ReluSpec&) { return 0; }
inline std::size_t param_count(const FcSpec& s) { return s.in * s.out + s.out; }
inline std::size_t param_count(const InceptionSpec& s) {
  return param_count(s.branch1()) + param_count(s.reduce()) + param_count(s.conv3()) + param_count(s.pool_proj());
}
inline std::size_t param_count(const LayerSpec& l) {
  return std::visit([](const auto& s) { return param_count(s); }, l);
}

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;

// ---------------------------------------------------------------------------
// convolution

inline Shape4 conv_output_shape(const Shape4& in, const ConvSpec& s) {
  if (in.c != s.c_in)
    throw Error(ErrorCode::ShapeError, "conv expects " + std::to_string(s.c_in) + " channels, got " + to_string(in));
  if (s.stride == 0 || s.kh == 0 || s.kw == 0) throw Error(ErrorCode::ShapeError, "degenerate conv spec");
  if (in.h + 2 * s.pad < s.kh || in.w + 2 * s.pad < s.kw)
    throw Error(ErrorCode::ShapeError, "input " + to_string(in) + " smaller than kernel");
  return {in.n, s.c_out, (in.h + 2 * s.pad - s.kh) / s.stride + 1, (in.w + 2 * s.pad - s.kw) / s.stride + 1};
}

namespace detail {

/// (c_in*kh*kw) x (n*oh*ow) patch matrix.
inline RowMatrix im2col(const Tensor4& x, const ConvSpec& s, const Shape4& out) {
  const auto& in = x.shape();
  const std::size_t plane = out.h * out.w;
  RowMatrix cols(s.c_in * s.kh * s.kw, in.n * plane);
  for (std::size_t c = 0; c < s.c_in; ++c)
    for (std::size_t ky = 0; ky < s.kh; ++ky)
      for (std::size_t kx = 0; kx < s.kw; ++kx) {
        double* row = cols.row((c * s.kh + ky) * s.kw + kx).data();
        for (std::size_t n = 0; n < in.n; ++n) {
          double* dst = row + n * plane;
          for (std::size_t oy = 0; oy < out.h; ++oy) {
            const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.pad);
            for (std::size_t ox = 0; ox < out.w; ++ox) {
              const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.pad);
              const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(in.h) && ix < static_cast<long>(in.w);
              dst[oy * out.w + ox] = inside ? x.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) : 0.0;
            }
          }
        }
      }
  return cols;
}

inline void col2im_add(const RowMatrix& cols, const ConvSpec& s, const Shape4& out, Tensor4& dx) {
  const auto& in = dx.shape();
  const std::size_t plane = out.h * out.w;
  for (std::size_t c = 0; c < s.c_in; ++c)
    for (std::size_t ky = 0; ky < s.kh; ++ky)
      for (std::size_t kx = 0; kx < s.kw; ++kx) {
        const double* row = cols.row((c * s.kh + ky) * s.kw + kx).data();
        for (std::size_t n = 0; n < in.n; ++n) {
          const double* src = row + n * plane;
          for (std::size_t oy = 0; oy < out.h; ++oy) {
            const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.pad);
            if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
            for (std::size_t ox = 0; ox < out.w; ++ox) {
              const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.pad);
              if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
              dx.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) += src[oy * out.w + ox];
            }
          }
        }
      }
}

}  // namespace detail

/// Cross-correlation plus bias.
inline Tensor4 conv_forward(const Tensor4& x, const ConvSpec& s, std::span<const double> params) {
  const Shape4 out_shape = conv_output_shape(x.shape(), s);
  if (params.size() != param_count(s)) throw Error(ErrorCode::ShapeError, "conv parameter size mismatch");
  const std::size_t k = s.c_in * s.kh * s.kw;
  const std::size_t plane = out_shape.h * out_shape.w;
  const RowMatrix cols = detail::im2col(x, s, out_shape);
  const ConstRowMap w(params.data(), static_cast<Eigen::Index>(s.c_out), static_cast<Eigen::Index>(k));
  const RowMatrix y = w * cols;
  const double* bias = params.data() + s.c_out * k;
  Tensor4 out(out_shape);
  for (std::size_t n = 0; n < out_shape.n; ++n)
    for (std::size_t co = 0; co < s.c_out; ++co) {
      const double* src = y.row(co).data() + n * plane;
      double* dst = out.sample(n) + co * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = src[p] + bias[co];
    }
  return out;
}

/// Returns dL/dx and accumulates dL/dparams.
inline Tensor4 conv_backward(const Tensor4& x, const ConvSpec& s, std::span<const double> params,
                             const Tensor4& dy, std::span<double> dparams) {
  const Shape4 out_shape = conv_output_shape(x.shape(), s);
  if (dy.shape() != out_shape) throw Error(ErrorCode::ShapeError, "conv gradient shape mismatch");
  const std::size_t k = s.c_in * s.kh * s.kw;
  const std::size_t plane = out_shape.h * out_shape.w;
  RowMatrix g(s.c_out, out_shape.n * plane);
  for (std::size_t n = 0; n < out_shape.n; ++n)
    for (std::size_t co = 0; co < s.c_out; ++co)
      std::copy_n(dy.sample(n) + co * plane, plane, g.row(co).data() + n * plane);
  const RowMatrix cols = detail::im2col(x, s, out_shape);
  RowMap dw(dparams.data(), static_cast<Eigen::Index>(s.c_out), static_cast<Eigen::Index>(k));
  dw.noalias() += g * cols.transpose();
  double* dbias = dparams.data() + s.c_out * k;
  for (std::size_t co = 0; co < s.c_out; ++co) dbias[co] += g.row(co).sum();
  const ConstRowMap w(params.data(), static_cast<Eigen::Index>(s.c_out), static_cast<Eigen::Index>(k));
  const RowMatrix dcols = w.transpose() * g;
  Tensor4 dx(x.shape());
  detail::col2im_add(dcols, s, out_shape, dx);
  return dx;
}

// ---------------------------------------------------------------------------
// max pooling; argmax holds the flat input offset chosen for each output

inline Shape4 pool_output_shape(const Shape4& in, const PoolSpec& s) {
  if (s.k == 0 || s.stride == 0) throw Error(ErrorCode::ShapeError, "degenerate pool spec");
  if (in.h + 2 * s.pad < s.k || in.w + 2 * s.pad < s.k)
    throw Error(ErrorCode::ShapeError, "input " + to_string(in) + " smaller than pool window");
  return {in.n, in.c, (in.h + 2 * s.pad - s.k) / s.stride + 1, (in.w + 2 * s.pad - s.k) / s.stride + 1};
}

inline Tensor4 pool_forward(const Tensor4& x, const PoolSpec& s, std::vector<std::size_t>* argmax = nullptr) {
  const Shape4 in = x.shape();
  const Shape4 out_shape = pool_output_shape(in, s);
  Tensor4 out(out_shape);
  if (argmax) argmax->assign(out_shape.count(), 0);
  std::size_t o = 0;
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t c = 0; c < in.c; ++c)
      for (std::size_t oy = 0; oy < out_shape.h; ++oy)
        for (std::size_t ox = 0; ox < out_shape.w; ++ox, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_at = 0;
          for (std::size_t ky = 0; ky < s.k; ++ky) {
            const long iy = static_cast<long>(oy * s.stride + ky) - static_cast<long>(s.pad);
            if (iy < 0 || iy >= static_cast<long>(in.h)) continue;
            for (std::size_t kx = 0; kx < s.k; ++kx) {
              const long ix = static_cast<long>(ox * s.stride + kx) - static_cast<long>(s.pad);
              if (ix < 0 || ix >= static_cast<long>(in.w)) continue;
              const std::size_t at = ((n * in.c + c) * in.h + static_cast<std::size_t>(iy)) * in.w +
                                     static_cast<std::size_t>(ix);
              if (x.data()[at] > best) {
                best = x.data()[at];
                best_at = at;
              }
            }
          }
          out.data()[o] = best;
          if (argmax) (*argmax)[o] = best_at;
        }
  return out;
}

inline Tensor4 pool_backward(const Shape4& in, const std::vector<std::size_t>& argmax, const Tensor4& dy) {
  Tensor4 dx(in);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data()[argmax[o]] += dy.data()[o];
  return dx;
}

// ---------------------------------------------------------------------------
// ReLU; backward gates on the forward output

inline Tensor4 relu_forward(Tensor4 x) {
  for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
  return x;
}

inline Tensor4 relu_backward(const Tensor4& y, Tensor4 dy) {
  for (std::size_t i = 0; i < dy.size(); ++i)
    if (!(y.data()[i] > 0.0)) dy.data()[i] = 0.0;
  return dy;
}

// ---------------------------------------------------------------------------
// fully connected over the flattened sample; output shape (n, out, 1, 1)

inline Tensor4 fc_forward(const Tensor4& x, const FcSpec& s, std::span<const double> params) {
  if (x.shape().per_sample() != s.in)
    throw Error(ErrorCode::ShapeError, "fc expects " + std::to_string(s.in) + " inputs, got " + to_string(x.shape()));
  if (params.size() != param_count(s)) throw Error(ErrorCode::ShapeError, "fc parameter size mismatch");
  const std::size_t n = x.shape().n;
  const ConstRowMap in(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.in));
  const ConstRowMap w(params.data(), static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
  Tensor4 out({n, s.out, 1, 1});
  RowMap y(out.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.out));
  y.noalias() = in * w.transpose();
  const double* bias = params.data() + s.in * s.out;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < s.out; ++o) y(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(o)) += bias[o];
  return out;
}

inline Tensor4 fc_backward(const Tensor4& x, const FcSpec& s, std::span<const double> params, const Tensor4& dy,
                           std::span<double> dparams) {
  const std::size_t n = x.shape().n;
  const ConstRowMap in(x.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.in));
  const ConstRowMap w(params.data(), static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
  const ConstRowMap g(dy.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.out));
  RowMap dw(dparams.data(), static_cast<Eigen::Index>(s.out), static_cast<Eigen::Index>(s.in));
  dw.noalias() += g.transpose() * in;
  double* dbias = dparams.data() + s.in * s.out;
  for (std::size_t o = 0; o < s.out; ++o) dbias[o] += g.col(static_cast<Eigen::Index>(o)).sum();
  Tensor4 dx(x.shape());
  RowMap dxm(dx.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s.in));
  dxm.noalias() = g * w;
  return dx;
}

// ---------------------------------------------------------------------------
// inception

struct InceptionCache {
  Tensor4 branch1;  // post-ReLU
  Tensor4 reduced;  // post-ReLU
  Tensor4 branch3;  // post-ReLU
  Tensor4 pooled;
  std::vector<std::size_t> pool_argmax;
  Tensor4 branch_pool;  // post-ReLU
};

namespace detail {

struct InceptionOffsets {
  std::size_t b1, red, c3, pp, end;
};

inline InceptionOffsets inception_offsets(const InceptionSpec& s) {
  InceptionOffsets o{};
  o.b1 = 0;
  o.red = o.b1 + param_count(s.branch1());
  o.c3 = o.red + param_count(s.reduce());
  o.pp = o.c3 + param_count(s.conv3());
  o.end = o.pp + param_count(s.pool_proj());
  return o;
}

inline Tensor4 concat_channels(std::initializer_list<const Tensor4*> parts) {
  const Shape4 first = (*parts.begin())->shape();
  std::size_t channels = 0;
  for (const auto* p : parts) {
    if (p->shape().n != first.n || p->shape().h != first.h || p->shape().w != first.w)
      throw Error(ErrorCode::ShapeError, "inception branch spatial mismatch");
    channels += p->shape().c;
  }
  Tensor4 out({first.n, channels, first.h, first.w});
  for (std::size_t n = 0; n < first.n; ++n) {
    double* dst = out.sample(n);
    for (const auto* p : parts) {
      const std::size_t len = p->shape().per_sample();
      std::copy_n(p->sample(n), len, dst);
      dst += len;
    }
  }
  return out;
}

inline Tensor4 slice_channels(const Tensor4& t, std::size_t begin, std::size_t count) {
  const Shape4 s = t.shape();
  Tensor4 out({s.n, count, s.h, s.w});
  const std::size_t plane = s.h * s.w;
  for (std::size_t n = 0; n < s.n; ++n) std::copy_n(t.sample(n) + begin * plane, count * plane, out.sample(n));
  return out;
}

}  // namespace detail

inline Shape4 inception_output_shape(const Shape4& in, const InceptionSpec& s) {
  if (in.c != s.c_in) throw Error(ErrorCode::ShapeError, "inception expects " + std::to_string(s.c_in) + " channels");
  if (in.h == 0 || in.w == 0) throw Error(ErrorCode::ShapeError, "empty inception input");
  return {in.n, s.c_out(), in.h, in.w};
}

inline Tensor4 inception_forward(const Tensor4& x, const InceptionSpec& s, std::span<const double> params,
                                 InceptionCache* cache = nullptr) {
  inception_output_shape(x.shape(), s);
  if (params.size() != param_count(s)) throw Error(ErrorCode::ShapeError, "inception parameter size mismatch");
  const auto o = detail::inception_offsets(s);
  InceptionCache local;
  InceptionCache& c = cache ? *cache : local;
  c.branch1 = relu_forward(conv_forward(x, s.branch1(), params.subspan(o.b1, o.red - o.b1)));
  c.reduced = relu_forward(conv_forward(x, s.reduce(), params.subspan(o.red, o.c3 - o.red)));
  c.branch3 = relu_forward(conv_forward(c.reduced, s.conv3(), params.subspan(o.c3, o.pp - o.c3)));
  c.pooled = pool_forward(x, InceptionSpec::pool(), &c.pool_argmax);
  c.branch_pool = relu_forward(conv_forward(c.pooled, s.pool_proj(), params.subspan(o.pp, o.end - o.pp)));
  return detail::concat_channels({&c.branch1, &c.branch3, &c.branch_pool});
}

inline Tensor4 inception_backward(const Tensor4& x, const InceptionSpec& s, std::span<const double> params,
                                  const InceptionCache& c, const Tensor4& dy, std::span<double> dparams) {
  const auto o = detail::inception_offsets(s);
  const Tensor4 d1 = relu_backward(c.branch1, detail::slice_channels(dy, 0, s.c1));
  const Tensor4 d3 = relu_backward(c.branch3, detail::slice_channels(dy, s.c1, s.c3));
  const Tensor4 dp = relu_backward(c.branch_pool, detail::slice_channels(dy, s.c1 + s.c3, s.c_pool));

  Tensor4 dx = conv_backward(x, s.branch1(), params.subspan(o.b1, o.red - o.b1), d1,
                             dparams.subspan(o.b1, o.red - o.b1));
  const Tensor4 dred = relu_backward(
      c.reduced,
      conv_backward(c.reduced, s.conv3(), params.subspan(o.c3, o.pp - o.c3), d3, dparams.subspan(o.c3, o.pp - o.c3)));
  const Tensor4 dx_red =
      conv_backward(x, s.reduce(), params.subspan(o.red, o.c3 - o.red), dred, dparams.subspan(o.red, o.c3 - o.red));
  const Tensor4 dpooled = conv_backward(c.pooled, s.pool_proj(), params.subspan(o.pp, o.end - o.pp), dp,
                                        dparams.subspan(o.pp, o.end - o.pp));
  const Tensor4 dx_pool = pool_backward(x.shape(), c.pool_argmax, dpooled);
  for (std::size_t i = 0; i < dx.size(); ++i) dx.data()[i] += dx_red.data()[i] + dx_pool.data()[i];
  return dx;
}

}  // namespace peduncle::cnn
