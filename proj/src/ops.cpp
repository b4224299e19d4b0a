#include "adain/ops.hpp"

#include <cmath>

namespace adain {

namespace {

template <class Scalar>
bool wants_grad(const Variable<Scalar>& v) {
  return v.defined() && v.requires_grad();
}

// Strides used to read `s` as if broadcast to a larger shape (0 on broadcast axes).
struct BroadcastStrides {
  Index n, c, h, w;
};

BroadcastStrides strides_for(const Shape& s, const Shape& out) {
  const Index sw = 1;
  const Index sh = s.w;
  const Index sc = s.h * s.w;
  const Index sn = s.c * s.h * s.w;
  return {s.n == out.n ? sn : 0, s.c == out.c ? sc : 0, s.h == out.h ? sh : 0,
          s.w == out.w ? sw : 0};
}

// out[i] = f(a[bcast i], b[bcast i])
template <class Scalar, class F>
Tensor<Scalar> broadcast_binary(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const Shape& out,
                                F f) {
  Tensor<Scalar> result(out);
  if (a.shape() == out && b.shape() == out) {
    const Scalar* pa = a.data();
    const Scalar* pb = b.data();
    Scalar* po = result.data();
    for (Index i = 0; i < out.size(); ++i) po[i] = f(pa[i], pb[i]);
    return result;
  }
  const auto sa = strides_for(a.shape(), out);
  const auto sb = strides_for(b.shape(), out);
  Scalar* po = result.data();
  for (Index n = 0; n < out.n; ++n)
    for (Index c = 0; c < out.c; ++c)
      for (Index h = 0; h < out.h; ++h) {
        const Scalar* pa = a.data() + n * sa.n + c * sa.c + h * sa.h;
        const Scalar* pb = b.data() + n * sb.n + c * sb.c + h * sb.h;
        for (Index w = 0; w < out.w; ++w) *po++ = f(pa[w * sa.w], pb[w * sb.w]);
      }
  return result;
}

// Sums a full-shape gradient down to `target` along broadcast axes.
template <class Scalar>
Tensor<Scalar> reduce_to(const Tensor<Scalar>& full, const Shape& target) {
  if (full.shape() == target) return full;
  Tensor<Scalar> out(target);
  const auto st = strides_for(target, full.shape());
  const Shape& fs = full.shape();
  const Scalar* pf = full.data();
  for (Index n = 0; n < fs.n; ++n)
    for (Index c = 0; c < fs.c; ++c)
      for (Index h = 0; h < fs.h; ++h) {
        Scalar* po = out.data() + n * st.n + c * st.c + h * st.h;
        for (Index w = 0; w < fs.w; ++w) po[w * st.w] += *pf++;
      }
  return out;
}

Index reflect(Index i, Index size) {
  if (i < 0) return -i;
  if (i >= size) return 2 * (size - 1) - i;
  return i;
}

template <class Scalar>
using RowMatrix = typename Tensor<Scalar>::RowMatrix;

// Lowers one sample to a (Cin*kH*kW, Hout*Wout) matrix.
template <class Scalar>
void im2col(const Scalar* x, Index cin, Index h, Index w, Index kh, Index kw, Index stride,
            Index hout, Index wout, RowMatrix<Scalar>& col) {
  col.resize(cin * kh * kw, hout * wout);
  Index row = 0;
  for (Index ci = 0; ci < cin; ++ci)
    for (Index ki = 0; ki < kh; ++ki)
      for (Index kj = 0; kj < kw; ++kj, ++row) {
        Scalar* dst = col.row(row).data();
        for (Index oh = 0; oh < hout; ++oh) {
          const Scalar* src = x + (ci * h + oh * stride + ki) * w + kj;
          if (stride == 1) {
            std::copy(src, src + wout, dst + oh * wout);
          } else {
            for (Index ow = 0; ow < wout; ++ow) dst[oh * wout + ow] = src[ow * stride];
          }
        }
      }
}

template <class Scalar>
void col2im_add(const RowMatrix<Scalar>& col, Index cin, Index h, Index w, Index kh, Index kw,
                Index stride, Index hout, Index wout, Scalar* x) {
  Index row = 0;
  for (Index ci = 0; ci < cin; ++ci)
    for (Index ki = 0; ki < kh; ++ki)
      for (Index kj = 0; kj < kw; ++kj, ++row) {
        const Scalar* src = col.row(row).data();
        for (Index oh = 0; oh < hout; ++oh) {
          Scalar* dst = x + (ci * h + oh * stride + ki) * w + kj;
          for (Index ow = 0; ow < wout; ++ow) dst[ow * stride] += src[oh * wout + ow];
        }
      }
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  auto dim = [&](Index x, Index y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw DimensionError("cannot broadcast " + a.str() + " with " + b.str());
  };
  return {dim(a.n, b.n), dim(a.c, b.c), dim(a.h, b.h), dim(a.w, b.w)};
}

template <class Scalar>
Variable<Scalar> conv2d(const Variable<Scalar>& x, const Variable<Scalar>& weight,
                        const Variable<Scalar>& bias, Index stride) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (stride < 1) throw DimensionError("conv2d stride must be >= 1");
  if (xs.c != ws.c) {
    throw DimensionError("conv2d input has " + std::to_string(xs.c) + " channels, weight expects " +
                         std::to_string(ws.c));
  }
  if (ws.h > xs.h || ws.w > xs.w) {
    throw DimensionError("conv2d kernel " + ws.str() + " larger than input " + xs.str());
  }
  if (bias.defined() && bias.shape() != Shape{1, ws.n, 1, 1}) {
    throw DimensionError("conv2d bias must be (1," + std::to_string(ws.n) + ",1,1), got " +
                         bias.shape().str());
  }
  const Index hout = (xs.h - ws.h) / stride + 1;
  const Index wout = (xs.w - ws.w) / stride + 1;
  const Index k = ws.c * ws.h * ws.w;
  const Shape os{xs.n, ws.n, hout, wout};

  using Map = typename Tensor<Scalar>::ConstMatrixMap;
  const Map wm(weight.value().data(), ws.n, k);
  const bool keep_cols = NoGradGuard::grad_enabled() && wants_grad(weight);
  auto cols = std::make_shared<std::vector<RowMatrix<Scalar>>>(keep_cols ? xs.n : 0);

  Tensor<Scalar> out(os);
  RowMatrix<Scalar> scratch;
  for (Index n = 0; n < xs.n; ++n) {
    RowMatrix<Scalar>& col = keep_cols ? (*cols)[n] : scratch;
    im2col(x.value().data() + n * xs.c * xs.plane(), xs.c, xs.h, xs.w, ws.h, ws.w, stride, hout,
           wout, col);
    auto o = out.sample_matrix(n);
    o.noalias() = wm * col;
    if (bias.defined()) {
      for (Index co = 0; co < ws.n; ++co) o.row(co).array() += bias.value().data()[co];
    }
  }

  return Variable<Scalar>::make_result(
      std::move(out), "conv2d", {x, weight, bias},
      [x, weight, bias, cols, stride, hout, wout, k](const Tensor<Scalar>& g) {
        const Shape& xs = x.shape();
        const Shape& ws = weight.shape();
        const Map wm(weight.value().data(), ws.n, k);
        RowMatrix<Scalar> col;
        for (Index n = 0; n < xs.n; ++n) {
          auto gn = g.sample_matrix(n);
          if (wants_grad(weight)) {
            auto dw = typename Tensor<Scalar>::MatrixMap(
                weight.node()->grad_buffer().data(), ws.n, k);
            dw.noalias() += gn * (*cols)[n].transpose();
          }
          if (wants_grad(bias)) {
            auto& db = bias.node()->grad_buffer();
            for (Index co = 0; co < ws.n; ++co) db.data()[co] += gn.row(co).sum();
          }
          if (wants_grad(x)) {
            col.noalias() = wm.transpose() * gn;
            col2im_add(col, xs.c, xs.h, xs.w, ws.h, ws.w, stride, hout, wout,
                       x.node()->grad_buffer().data() + n * xs.c * xs.plane());
          }
        }
      });
}

template <class Scalar>
Variable<Scalar> reflection_pad2d(const Variable<Scalar>& x, Index pad) {
  const Shape& xs = x.shape();
  if (pad < 0 || (pad > 0 && pad >= std::min(xs.h, xs.w))) {
    throw DimensionError("reflection pad " + std::to_string(pad) + " must be < min(H, W) for " +
                         xs.str());
  }
  const Shape os{xs.n, xs.c, xs.h + 2 * pad, xs.w + 2 * pad};
  Tensor<Scalar> out(os);
  for (Index n = 0; n < xs.n; ++n)
    for (Index c = 0; c < xs.c; ++c)
      for (Index h = 0; h < os.h; ++h) {
        const Index sh = reflect(h - pad, xs.h);
        for (Index w = 0; w < os.w; ++w) out(n, c, h, w) = x.value()(n, c, sh, reflect(w - pad, xs.w));
      }
  return Variable<Scalar>::make_result(std::move(out), "reflection_pad2d", {x},
                                       [x, pad](const Tensor<Scalar>& g) {
                                         const Shape& xs = x.shape();
                                         const Shape& os = g.shape();
                                         auto& dx = x.node()->grad_buffer();
                                         for (Index n = 0; n < xs.n; ++n)
                                           for (Index c = 0; c < xs.c; ++c)
                                             for (Index h = 0; h < os.h; ++h) {
                                               const Index sh = reflect(h - pad, xs.h);
                                               for (Index w = 0; w < os.w; ++w)
                                                 dx(n, c, sh, reflect(w - pad, xs.w)) += g(n, c, h, w);
                                             }
                                       });
}

template <class Scalar>
Variable<Scalar> upsample_nearest2d(const Variable<Scalar>& x, Index factor) {
  if (factor < 1) throw DimensionError("upsample factor must be >= 1");
  const Shape& xs = x.shape();
  const Shape os{xs.n, xs.c, xs.h * factor, xs.w * factor};
  Tensor<Scalar> out(os);
  for (Index n = 0; n < xs.n; ++n)
    for (Index c = 0; c < xs.c; ++c)
      for (Index h = 0; h < os.h; ++h)
        for (Index w = 0; w < os.w; ++w) out(n, c, h, w) = x.value()(n, c, h / factor, w / factor);
  return Variable<Scalar>::make_result(std::move(out), "upsample_nearest2d", {x},
                                       [x, factor](const Tensor<Scalar>& g) {
                                         const Shape& os = g.shape();
                                         auto& dx = x.node()->grad_buffer();
                                         for (Index n = 0; n < os.n; ++n)
                                           for (Index c = 0; c < os.c; ++c)
                                             for (Index h = 0; h < os.h; ++h)
                                               for (Index w = 0; w < os.w; ++w)
                                                 dx(n, c, h / factor, w / factor) += g(n, c, h, w);
                                       });
}

template <class Scalar>
Variable<Scalar> max_pool2d(const Variable<Scalar>& x, Index kernel, Index stride) {
  const Shape& xs = x.shape();
  if (kernel < 1 || stride < 1) throw DimensionError("max_pool2d kernel and stride must be >= 1");
  if (kernel > xs.h || kernel > xs.w) {
    throw DimensionError("max_pool2d window " + std::to_string(kernel) + " exceeds input " +
                         xs.str());
  }
  const Shape os{xs.n, xs.c, (xs.h - kernel) / stride + 1, (xs.w - kernel) / stride + 1};
  Tensor<Scalar> out(os);
  auto argmax = std::make_shared<std::vector<Index>>(os.size());
  Index o = 0;
  for (Index n = 0; n < os.n; ++n)
    for (Index c = 0; c < os.c; ++c)
      for (Index h = 0; h < os.h; ++h)
        for (Index w = 0; w < os.w; ++w, ++o) {
          Index best = x.value().offset(n, c, h * stride, w * stride);
          Scalar best_v = x.value().data()[best];
          for (Index i = 0; i < kernel; ++i)
            for (Index j = 0; j < kernel; ++j) {
              const Index idx = x.value().offset(n, c, h * stride + i, w * stride + j);
              if (x.value().data()[idx] > best_v) {
                best = idx;
                best_v = x.value().data()[idx];
              }
            }
          out.data()[o] = best_v;
          (*argmax)[o] = best;
        }
  return Variable<Scalar>::make_result(std::move(out), "max_pool2d", {x},
                                       [x, argmax](const Tensor<Scalar>& g) {
                                         Scalar* dx = x.node()->grad_buffer().data();
                                         for (Index i = 0; i < g.size(); ++i)
                                           dx[(*argmax)[i]] += g.data()[i];
                                       });
}

template <class Scalar>
Variable<Scalar> relu(const Variable<Scalar>& x) {
  Tensor<Scalar> out(x.shape(), x.value().array().max(Scalar(0)));
  return Variable<Scalar>::make_result(std::move(out), "relu", {x}, [x](const Tensor<Scalar>& g) {
    x.node()->accumulate((x.value().array() > Scalar(0)).select(g.array(), Scalar(0)));
  });
}

template <class Scalar>
Variable<Scalar> add(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  auto out = broadcast_binary(a.value(), b.value(), os, [](Scalar u, Scalar v) { return u + v; });
  return Variable<Scalar>::make_result(std::move(out), "add", {a, b},
                                       [a, b](const Tensor<Scalar>& g) {
                                         if (wants_grad(a))
                                           a.node()->accumulate(reduce_to(g, a.shape()).array());
                                         if (wants_grad(b))
                                           b.node()->accumulate(reduce_to(g, b.shape()).array());
                                       });
}

template <class Scalar>
Variable<Scalar> sub(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  auto out = broadcast_binary(a.value(), b.value(), os, [](Scalar u, Scalar v) { return u - v; });
  return Variable<Scalar>::make_result(std::move(out), "sub", {a, b},
                                       [a, b](const Tensor<Scalar>& g) {
                                         if (wants_grad(a))
                                           a.node()->accumulate(reduce_to(g, a.shape()).array());
                                         if (wants_grad(b))
                                           b.node()->accumulate(-reduce_to(g, b.shape()).array());
                                       });
}

template <class Scalar>
Variable<Scalar> mul(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  auto out = broadcast_binary(a.value(), b.value(), os, [](Scalar u, Scalar v) { return u * v; });
  return Variable<Scalar>::make_result(
      std::move(out), "mul", {a, b}, [a, b](const Tensor<Scalar>& g) {
        const Shape& os = g.shape();
        if (wants_grad(a)) {
          auto ga = broadcast_binary(g, b.value(), os, [](Scalar u, Scalar v) { return u * v; });
          a.node()->accumulate(reduce_to(ga, a.shape()).array());
        }
        if (wants_grad(b)) {
          auto gb = broadcast_binary(g, a.value(), os, [](Scalar u, Scalar v) { return u * v; });
          b.node()->accumulate(reduce_to(gb, b.shape()).array());
        }
      });
}

template <class Scalar>
Variable<Scalar> div(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  const Shape os = broadcast_shape(a.shape(), b.shape());
  auto out = broadcast_binary(a.value(), b.value(), os, [](Scalar u, Scalar v) { return u / v; });
  auto quotient = std::make_shared<Tensor<Scalar>>(out);
  return Variable<Scalar>::make_result(
      std::move(out), "div", {a, b}, [a, b, quotient](const Tensor<Scalar>& g) {
        const Shape& os = g.shape();
        auto g_over_b = broadcast_binary(g, b.value(), os, [](Scalar u, Scalar v) { return u / v; });
        if (wants_grad(a)) a.node()->accumulate(reduce_to(g_over_b, a.shape()).array());
        if (wants_grad(b)) {
          // d(a/b)/db = -(a/b)/b
          Tensor<Scalar> gb(os, -(g_over_b.array() * quotient->array()));
          b.node()->accumulate(reduce_to(gb, b.shape()).array());
        }
      });
}

template <class Scalar>
Variable<Scalar> scale(const Variable<Scalar>& x, Scalar factor) {
  Tensor<Scalar> out(x.shape(), x.value().array() * factor);
  return Variable<Scalar>::make_result(std::move(out), "scale", {x},
                                       [x, factor](const Tensor<Scalar>& g) {
                                         x.node()->accumulate(g.array() * factor);
                                       });
}

template <class Scalar>
Variable<Scalar> sum(const Variable<Scalar>& x) {
  auto out = Tensor<Scalar>::constant({1, 1, 1, 1}, x.value().array().sum());
  return Variable<Scalar>::make_result(std::move(out), "sum", {x}, [x](const Tensor<Scalar>& g) {
    x.node()->accumulate(Tensor<Scalar>::Array::Constant(x.shape().size(), g.data()[0]));
  });
}

template <class Scalar>
Variable<Scalar> mean(const Variable<Scalar>& x) {
  const auto count = static_cast<Scalar>(x.shape().size());
  auto out = Tensor<Scalar>::constant({1, 1, 1, 1}, x.value().array().sum() / count);
  return Variable<Scalar>::make_result(std::move(out), "mean", {x},
                                       [x, count](const Tensor<Scalar>& g) {
                                         x.node()->accumulate(Tensor<Scalar>::Array::Constant(
                                             x.shape().size(), g.data()[0] / count));
                                       });
}

template <class Scalar>
Variable<Scalar> mse(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mse shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  const auto count = static_cast<Scalar>(a.shape().size());
  auto out = Tensor<Scalar>::constant(
      {1, 1, 1, 1}, (a.value().array() - b.value().array()).square().sum() / count);
  return Variable<Scalar>::make_result(
      std::move(out), "mse", {a, b}, [a, b, count](const Tensor<Scalar>& g) {
        const typename Tensor<Scalar>::Array d =
            (a.value().array() - b.value().array()) * (Scalar(2) * g.data()[0] / count);
        if (wants_grad(a)) a.node()->accumulate(d);
        if (wants_grad(b)) b.node()->accumulate(-d);
      });
}

namespace {

// Fixed-order summation: the result depends only on the values, never on
// pointer alignment, so equal planes at different offsets sum identically.
template <class Scalar, class F>
Scalar ordered_sum(Index count, F&& value) {
  constexpr int kLanes = 8;
  Scalar lanes[kLanes] = {};
  Index i = 0;
  for (; i + kLanes <= count; i += kLanes)
    for (int l = 0; l < kLanes; ++l) lanes[l] += value(i + l);
  Scalar tail(0);
  for (; i < count; ++i) tail += value(i);
  Scalar acc(0);
  for (int l = 0; l < kLanes; ++l) acc += lanes[l];
  return acc + tail;
}

// Shared reduction for both statistic modes. With N == 1 the batch and
// per-sample paths perform identical arithmetic.
template <class Scalar>
Tensor<Scalar> reduce_channel_mean(const Tensor<Scalar>& x, bool per_sample) {
  const Shape& s = x.shape();
  const Index groups_n = per_sample ? s.n : 1;
  const Index span_n = per_sample ? 1 : s.n;
  const auto count = static_cast<Scalar>(span_n * s.plane());
  Tensor<Scalar> out({groups_n, s.c, 1, 1});
  for (Index gn = 0; gn < groups_n; ++gn)
    for (Index c = 0; c < s.c; ++c) {
      Scalar acc(0);
      for (Index k = 0; k < span_n; ++k) {
        const Scalar* p = x.plane(gn * span_n + k, c).data();
        acc += ordered_sum<Scalar>(s.plane(), [p](Index i) { return p[i]; });
      }
      out(gn, c, 0, 0) = acc / count;
    }
  return out;
}

}  // namespace

template <class Scalar>
Variable<Scalar> channel_mean(const Variable<Scalar>& x, bool per_sample) {
  const Shape& s = x.shape();
  if (s.size() == 0) throw DimensionError("channel statistics of an empty tensor");
  auto out = reduce_channel_mean(x.value(), per_sample);
  return Variable<Scalar>::make_result(
      std::move(out), "channel_mean", {x}, [x, per_sample](const Tensor<Scalar>& g) {
        const Shape& s = x.shape();
        const Index span_n = per_sample ? 1 : s.n;
        const auto count = static_cast<Scalar>(span_n * s.plane());
        auto& dx = x.node()->grad_buffer();
        for (Index n = 0; n < s.n; ++n)
          for (Index c = 0; c < s.c; ++c)
            dx.plane(n, c) += g(per_sample ? n : 0, c, 0, 0) / count;
      });
}

template <class Scalar>
Variable<Scalar> channel_std(const Variable<Scalar>& x, Scalar eps, bool per_sample) {
  const Shape& s = x.shape();
  if (s.size() == 0) throw DimensionError("channel statistics of an empty tensor");
  auto mu = std::make_shared<Tensor<Scalar>>(reduce_channel_mean(x.value(), per_sample));
  const Index groups_n = per_sample ? s.n : 1;
  const Index span_n = per_sample ? 1 : s.n;
  const auto count = static_cast<Scalar>(span_n * s.plane());
  Tensor<Scalar> out({groups_n, s.c, 1, 1});
  for (Index gn = 0; gn < groups_n; ++gn)
    for (Index c = 0; c < s.c; ++c) {
      const Scalar m = (*mu)(gn, c, 0, 0);
      Scalar acc(0);
      for (Index k = 0; k < span_n; ++k) {
        const Scalar* p = x.value().plane(gn * span_n + k, c).data();
        acc += ordered_sum<Scalar>(s.plane(), [p, m](Index i) { return (p[i] - m) * (p[i] - m); });
      }
      out(gn, c, 0, 0) = std::sqrt(acc / count + eps);
    }
  auto sigma = std::make_shared<Tensor<Scalar>>(out);
  return Variable<Scalar>::make_result(
      std::move(out), "channel_std", {x},
      [x, mu, sigma, per_sample, count](const Tensor<Scalar>& g) {
        const Shape& s = x.shape();
        auto& dx = x.node()->grad_buffer();
        for (Index n = 0; n < s.n; ++n)
          for (Index c = 0; c < s.c; ++c) {
            const Index gn = per_sample ? n : 0;
            const Scalar coeff = g(gn, c, 0, 0) / ((*sigma)(gn, c, 0, 0) * count);
            dx.plane(n, c) += (x.value().plane(n, c) - (*mu)(gn, c, 0, 0)) * coeff;
          }
      });
}

template <class Scalar>
Variable<Scalar> sample_norm(const Variable<Scalar>& x) {
  const Shape& s = x.shape();
  const Index per = s.c * s.plane();
  Tensor<Scalar> out({s.n, 1, 1, 1});
  for (Index n = 0; n < s.n; ++n) {
    out.data()[n] = std::sqrt(x.value().array().segment(n * per, per).square().sum());
  }
  auto norms = std::make_shared<Tensor<Scalar>>(out);
  return Variable<Scalar>::make_result(
      std::move(out), "sample_norm", {x}, [x, norms, per](const Tensor<Scalar>& g) {
        auto& dx = x.node()->grad_buffer();
        for (Index n = 0; n < x.shape().n; ++n) {
          const Scalar norm = norms->data()[n];
          if (norm == Scalar(0)) continue;
          dx.array().segment(n * per, per) +=
              x.value().array().segment(n * per, per) * (g.data()[n] / norm);
        }
      });
}

template <class Scalar>
Variable<Scalar> concat_channels(const Variable<Scalar>& a, const Variable<Scalar>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.n != bs.n || as.h != bs.h || as.w != bs.w) {
    throw DimensionError("concat_channels needs matching N, H, W: " + as.str() + " vs " + bs.str());
  }
  const Shape os{as.n, as.c + bs.c, as.h, as.w};
  Tensor<Scalar> out(os);
  const Index pa = as.c * as.plane();
  const Index pb = bs.c * bs.plane();
  for (Index n = 0; n < os.n; ++n) {
    out.array().segment(n * (pa + pb), pa) = a.value().array().segment(n * pa, pa);
    out.array().segment(n * (pa + pb) + pa, pb) = b.value().array().segment(n * pb, pb);
  }
  return Variable<Scalar>::make_result(
      std::move(out), "concat_channels", {a, b}, [a, b, pa, pb](const Tensor<Scalar>& g) {
        for (Index n = 0; n < g.shape().n; ++n) {
          if (wants_grad(a))
            a.node()->grad_buffer().array().segment(n * pa, pa) +=
                g.array().segment(n * (pa + pb), pa);
          if (wants_grad(b))
            b.node()->grad_buffer().array().segment(n * pb, pb) +=
                g.array().segment(n * (pa + pb) + pa, pb);
        }
      });
}

template <class Scalar>
Variable<Scalar> select_sample(const Variable<Scalar>& x, Index n) {
  const Shape& s = x.shape();
  if (n < 0 || n >= s.n) {
    throw IndexError("sample index " + std::to_string(n) + " out of range for " + s.str());
  }
  const Index per = s.c * s.plane();
  Tensor<Scalar> out({1, s.c, s.h, s.w}, x.value().array().segment(n * per, per));
  return Variable<Scalar>::make_result(std::move(out), "select_sample", {x},
                                       [x, n, per](const Tensor<Scalar>& g) {
                                         x.node()->grad_buffer().array().segment(n * per, per) +=
                                             g.array();
                                       });
}

template <class Scalar>
Variable<Scalar> gram(const Variable<Scalar>& x) {
  const Shape& s = x.shape();
  const Scalar norm = Scalar(1) / static_cast<Scalar>(s.c * s.plane());
  Tensor<Scalar> out({s.n, 1, s.c, s.c});
  for (Index n = 0; n < s.n; ++n) {
    auto f = x.value().sample_matrix(n);
    typename Tensor<Scalar>::MatrixMap(out.data() + n * s.c * s.c, s.c, s.c).noalias() =
        (f * f.transpose()) * norm;
  }
  return Variable<Scalar>::make_result(
      std::move(out), "gram", {x}, [x, norm](const Tensor<Scalar>& g) {
        const Shape& s = x.shape();
        auto& dx = x.node()->grad_buffer();
        for (Index n = 0; n < s.n; ++n) {
          typename Tensor<Scalar>::ConstMatrixMap gn(g.data() + n * s.c * s.c, s.c, s.c);
          dx.sample_matrix(n).noalias() +=
              ((gn + gn.transpose()) * x.value().sample_matrix(n)) * norm;
        }
      });
}

#define ADAIN_INSTANTIATE_OPS(S)                                                               \
  template Variable<S> conv2d(const Variable<S>&, const Variable<S>&, const Variable<S>&,      \
                              Index);                                                          \
  template Variable<S> reflection_pad2d(const Variable<S>&, Index);                            \
  template Variable<S> upsample_nearest2d(const Variable<S>&, Index);                          \
  template Variable<S> max_pool2d(const Variable<S>&, Index, Index);                           \
  template Variable<S> relu(const Variable<S>&);                                               \
  template Variable<S> add(const Variable<S>&, const Variable<S>&);                            \
  template Variable<S> sub(const Variable<S>&, const Variable<S>&);                            \
  template Variable<S> mul(const Variable<S>&, const Variable<S>&);                            \
  template Variable<S> div(const Variable<S>&, const Variable<S>&);                            \
  template Variable<S> scale(const Variable<S>&, S);                                           \
  template Variable<S> sum(const Variable<S>&);                                                \
  template Variable<S> mean(const Variable<S>&);                                               \
  template Variable<S> mse(const Variable<S>&, const Variable<S>&);                            \
  template Variable<S> channel_mean(const Variable<S>&, bool);                                 \
  template Variable<S> channel_std(const Variable<S>&, S, bool);                               \
  template Variable<S> sample_norm(const Variable<S>&);                                        \
  template Variable<S> concat_channels(const Variable<S>&, const Variable<S>&);                \
  template Variable<S> select_sample(const Variable<S>&, Index);                               \
  template Variable<S> gram(const Variable<S>&);

ADAIN_INSTANTIATE_OPS(float)
ADAIN_INSTANTIATE_OPS(double)

}  // namespace adain
