#include "transms/layers.hpp"

#include <cmath>
#include <memory>
#include <numbers>

namespace transms::ad {

namespace {

using ConstMat = Eigen::Map<const RowMajorMatrix<double>>;
using Mat = Eigen::Map<RowMajorMatrix<double>>;

void require_rank(const Var& x, std::size_t rank, const char* op) {
  if (x.value().rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + " input, got " +
                     shape_string(x.shape()));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

Index conv_extent(Index in, int k, int stride, int pad, const char* op) {
  const Index out = (in + 2 * pad - k) / stride + 1;
  if (in + 2 * pad - k < 0 || out < 1) throw ShapeError(std::string(op) + ": non-positive output extent");
  return out;
}

struct ConvGeometry {
  Index cin, h, w, k, hout, wout;
  int stride, pad;
};

// cols is [cin*k*k, hout*wout]
void im2col(const double* x, const ConvGeometry& g, RowMajorMatrix<double>& cols) {
  cols.resize(g.cin * g.k * g.k, g.hout * g.wout);
  for (Index c = 0; c < g.cin; ++c)
    for (Index ki = 0; ki < g.k; ++ki)
      for (Index kj = 0; kj < g.k; ++kj) {
        double* row = cols.data() + ((c * g.k + ki) * g.k + kj) * g.hout * g.wout;
        for (Index oh = 0; oh < g.hout; ++oh) {
          const Index ih = oh * g.stride - g.pad + ki;
          for (Index ow = 0; ow < g.wout; ++ow) {
            const Index iw = ow * g.stride - g.pad + kj;
            row[oh * g.wout + ow] =
                (ih >= 0 && ih < g.h && iw >= 0 && iw < g.w) ? x[(c * g.h + ih) * g.w + iw] : 0.0;
          }
        }
      }
}

void col2im(const RowMajorMatrix<double>& cols, const ConvGeometry& g, double* x) {
  for (Index c = 0; c < g.cin; ++c)
    for (Index ki = 0; ki < g.k; ++ki)
      for (Index kj = 0; kj < g.k; ++kj) {
        const double* row = cols.data() + ((c * g.k + ki) * g.k + kj) * g.hout * g.wout;
        for (Index oh = 0; oh < g.hout; ++oh) {
          const Index ih = oh * g.stride - g.pad + ki;
          if (ih < 0 || ih >= g.h) continue;
          for (Index ow = 0; ow < g.wout; ++ow) {
            const Index iw = ow * g.stride - g.pad + kj;
            if (iw >= 0 && iw < g.w) x[(c * g.h + ih) * g.w + iw] += row[oh * g.wout + ow];
          }
        }
      }
}

template <typename F, typename D>
Var elementwise(const Var& x, F f, D df, const char* op) {
  Tensor out(x.shape());
  const VectorXd& in = x.value().data();
  for (Index i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return x.tape().record(
      std::move(out), {x},
      [x, df](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        if (!gx) return;
        const VectorXd& in = x.value().data();
        for (Index i = 0; i < in.size(); ++i) (*gx)[i] += g[i] * df(in[i]);
      },
      op);
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape(), a.value().data() + b.value().data());
  return a.tape().record(
      std::move(out), {a, b},
      [a, b](Tape& tape, const Tensor& g) {
        if (Tensor* ga = tape.grad_for(a)) ga->data() += g.data();
        if (Tensor* gb = tape.grad_for(b)) gb->data() += g.data();
      },
      "add");
}

Var scale(const Var& a, double factor) {
  Tensor out(a.shape(), a.value().data() * factor);
  return a.tape().record(
      std::move(out), {a},
      [a, factor](Tape& tape, const Tensor& g) {
        if (Tensor* ga = tape.grad_for(a)) ga->data() += factor * g.data();
      },
      "scale");
}

Var sum(const Var& a) {
  Tensor out = Tensor::from({1}, {a.value().data().sum()});
  return a.tape().record(
      std::move(out), {a},
      [a](Tape& tape, const Tensor& g) {
        if (Tensor* ga = tape.grad_for(a)) ga->data().array() += g[0];
      },
      "sum");
}

Var weighted_sum(const Var& x, const Tensor& weights) {
  require_shape(weights, x.shape(), "weighted_sum");
  Tensor out = Tensor::from({1}, {x.value().data().dot(weights.data())});
  return x.tape().record(
      std::move(out), {x},
      [x, weights](Tape& tape, const Tensor& g) {
        if (Tensor* gx = tape.grad_for(x)) gx->data() += g[0] * weights.data();
      },
      "weighted_sum");
}

Var l1_distance(const Var& a, const Var& b) {
  require_same_shape(a, b, "l1_distance");
  const VectorXd diff = a.value().data() - b.value().data();
  Tensor out = Tensor::from({1}, {diff.cwiseAbs().sum()});
  return a.tape().record(
      std::move(out), {a, b},
      [a, b](Tape& tape, const Tensor& g) {
        const VectorXd sign =
            (a.value().data() - b.value().data()).unaryExpr([](double d) { return double((d > 0) - (d < 0)); });
        if (Tensor* ga = tape.grad_for(a)) ga->data() += g[0] * sign;
        if (Tensor* gb = tape.grad_for(b)) gb->data() -= g[0] * sign;
      },
      "l1_distance");
}

Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int pad) {
  require_rank(x, 4, "conv2d");
  require_rank(kernel, 4, "conv2d kernel");
  const Index n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index cout = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != cin || kernel.dim(3) != k)
    throw ShapeError("conv2d: kernel " + shape_string(kernel.shape()) + " does not fit input " +
                     shape_string(x.shape()));
  if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd");
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/padding");
  if (bias.valid() && bias.shape() != Shape{cout}) throw ShapeError("conv2d: bias shape mismatch");
  const ConvGeometry geo{cin, h, w, k, conv_extent(h, int(k), stride, pad, "conv2d"),
                         conv_extent(w, int(k), stride, pad, "conv2d"), stride, pad};
  const Index plane_in = cin * h * w, plane_out = cout * geo.hout * geo.wout;
  const bool pointwise = (k == 1 && stride == 1 && pad == 0);

  Tensor out({n, cout, geo.hout, geo.wout});
  ConstMat wmat(kernel.value().ptr(), cout, cin * k * k);
  RowMajorMatrix<double> cols;
  for (Index s = 0; s < n; ++s) {
    Mat o(out.ptr() + s * plane_out, cout, geo.hout * geo.wout);
    if (pointwise) {
      o.noalias() = wmat * ConstMat(x.value().ptr() + s * plane_in, cin, h * w);
    } else {
      im2col(x.value().ptr() + s * plane_in, geo, cols);
      o.noalias() = wmat * cols;
    }
    if (bias.valid()) o.colwise() += bias.value().data();
  }

  std::vector<Var> parents{x, kernel};
  if (bias.valid()) parents.push_back(bias);
  return x.tape().record(
      std::move(out), parents,
      [x, kernel, bias, geo, n, cout, plane_in, plane_out, pointwise](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        Tensor* gk = tape.grad_for(kernel);
        Tensor* gb = bias.valid() ? tape.grad_for(bias) : nullptr;
        const Index kk = geo.cin * geo.k * geo.k;
        ConstMat wmat(kernel.value().ptr(), cout, kk);
        RowMajorMatrix<double> cols, gcols;
        for (Index s = 0; s < n; ++s) {
          ConstMat go(g.ptr() + s * plane_out, cout, geo.hout * geo.wout);
          if (gb) gb->data() += go.rowwise().sum();
          if (pointwise) {
            ConstMat xin(x.value().ptr() + s * plane_in, geo.cin, geo.h * geo.w);
            if (gk) Mat(gk->ptr(), cout, kk).noalias() += go * xin.transpose();
            if (gx) Mat(gx->ptr() + s * plane_in, geo.cin, geo.h * geo.w).noalias() += wmat.transpose() * go;
            continue;
          }
          if (gk) {
            im2col(x.value().ptr() + s * plane_in, geo, cols);
            Mat(gk->ptr(), cout, kk).noalias() += go * cols.transpose();
          }
          if (gx) {
            gcols.noalias() = wmat.transpose() * go;
            col2im(gcols, geo, gx->ptr() + s * plane_in);
          }
        }
      },
      "conv2d");
}

Var depthwise_conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int pad) {
  require_rank(x, 4, "depthwise_conv2d");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const Index k = kernel.dim(2);
  if (kernel.shape() != Shape{c, 1, k, k} || k % 2 == 0)
    throw ShapeError("depthwise_conv2d: kernel " + shape_string(kernel.shape()) + " does not fit input " +
                     shape_string(x.shape()));
  if (bias.valid() && bias.shape() != Shape{c}) throw ShapeError("depthwise_conv2d: bias shape mismatch");
  const Index hout = conv_extent(h, int(k), stride, pad, "depthwise_conv2d");
  const Index wout = conv_extent(w, int(k), stride, pad, "depthwise_conv2d");

  auto for_each_tap = [=](auto&& fn) {
    for (Index s = 0; s < n; ++s)
      for (Index ch = 0; ch < c; ++ch)
        for (Index oh = 0; oh < hout; ++oh)
          for (Index ow = 0; ow < wout; ++ow)
            for (Index ki = 0; ki < k; ++ki) {
              const Index ih = oh * stride - pad + ki;
              if (ih < 0 || ih >= h) continue;
              for (Index kj = 0; kj < k; ++kj) {
                const Index iw = ow * stride - pad + kj;
                if (iw < 0 || iw >= w) continue;
                fn(((s * c + ch) * hout + oh) * wout + ow, ((s * c + ch) * h + ih) * w + iw, (ch * k + ki) * k + kj);
              }
            }
  };

  Tensor out({n, c, hout, wout});
  const double* xin = x.value().ptr();
  const double* ker = kernel.value().ptr();
  for_each_tap([&](Index o, Index i, Index t) { out[o] += ker[t] * xin[i]; });
  if (bias.valid())
    for (Index s = 0; s < n; ++s)
      for (Index ch = 0; ch < c; ++ch)
        out.data().segment((s * c + ch) * hout * wout, hout * wout).array() += bias.value()[ch];

  std::vector<Var> parents{x, kernel};
  if (bias.valid()) parents.push_back(bias);
  return x.tape().record(
      std::move(out), parents,
      [x, kernel, bias, for_each_tap, n, c, hout, wout](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        Tensor* gk = tape.grad_for(kernel);
        Tensor* gb = bias.valid() ? tape.grad_for(bias) : nullptr;
        const double* xin = x.value().ptr();
        const double* ker = kernel.value().ptr();
        for_each_tap([&](Index o, Index i, Index t) {
          if (gx) (*gx)[i] += ker[t] * g[o];
          if (gk) (*gk)[t] += xin[i] * g[o];
        });
        if (gb)
          for (Index s = 0; s < n; ++s)
            for (Index ch = 0; ch < c; ++ch) (*gb)[ch] += g.data().segment((s * c + ch) * hout * wout, hout * wout).sum();
      },
      "depthwise_conv2d");
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  require_rank(weight, 2, "linear weight");
  const Index cout = weight.dim(0), cin = weight.dim(1);
  if (x.value().rank() < 1 || x.shape().back() != cin)
    throw ShapeError("linear: input " + shape_string(x.shape()) + " does not end in " + std::to_string(cin));
  if (bias.valid() && bias.shape() != Shape{cout}) throw ShapeError("linear: bias shape mismatch");
  const Index rows = x.value().size() / cin;
  Shape shape = x.shape();
  shape.back() = cout;
  Tensor out(shape);
  ConstMat wmat(weight.value().ptr(), cout, cin);
  Mat o(out.ptr(), rows, cout);
  o.noalias() = ConstMat(x.value().ptr(), rows, cin) * wmat.transpose();
  if (bias.valid()) o.rowwise() += bias.value().data().transpose();

  std::vector<Var> parents{x, weight};
  if (bias.valid()) parents.push_back(bias);
  return x.tape().record(
      std::move(out), parents,
      [x, weight, bias, rows, cin, cout](Tape& tape, const Tensor& g) {
        ConstMat go(g.ptr(), rows, cout);
        if (Tensor* gx = tape.grad_for(x))
          Mat(gx->ptr(), rows, cin).noalias() += go * ConstMat(weight.value().ptr(), cout, cin);
        if (Tensor* gw = tape.grad_for(weight))
          Mat(gw->ptr(), cout, cin).noalias() += go.transpose() * ConstMat(x.value().ptr(), rows, cin);
        if (bias.valid())
          if (Tensor* gb = tape.grad_for(bias)) gb->data() += go.colwise().sum().transpose();
      },
      "linear");
}

Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps) {
  const Index width = x.shape().back();
  if (gain.shape() != Shape{width} || shift.shape() != Shape{width})
    throw ShapeError("layer_norm: affine parameters must have length " + std::to_string(width));
  const Index rows = x.value().size() / width;
  Tensor out(x.shape());
  Tensor normed(x.shape());
  VectorXd inv_std(rows);
  ConstMat in(x.value().ptr(), rows, width);
  Mat xhat(normed.ptr(), rows, width);
  for (Index r = 0; r < rows; ++r) {
    const double mean = in.row(r).mean();
    const double var = (in.row(r).array() - mean).square().mean();
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv_std[r];
  }
  Mat(out.ptr(), rows, width) =
      (xhat.array().rowwise() * gain.value().data().transpose().array()).rowwise() +
      shift.value().data().transpose().array();

  return x.tape().record(
      std::move(out), {x, gain, shift},
      [x, gain, shift, normed, inv_std, rows, width](Tape& tape, const Tensor& g) {
        ConstMat go(g.ptr(), rows, width);
        ConstMat xhat(normed.ptr(), rows, width);
        if (Tensor* gg = tape.grad_for(gain)) gg->data() += (go.array() * xhat.array()).colwise().sum().transpose().matrix();
        if (Tensor* gs = tape.grad_for(shift)) gs->data() += go.colwise().sum().transpose();
        if (Tensor* gx = tape.grad_for(x)) {
          Mat gin(gx->ptr(), rows, width);
          const auto gamma = gain.value().data().transpose().array();
          for (Index r = 0; r < rows; ++r) {
            const Eigen::ArrayXd gh = (go.row(r).array() * gamma).transpose();
            const Eigen::ArrayXd xh = xhat.row(r).transpose().array();
            gin.row(r).array() += (inv_std[r] * (gh - gh.mean() - xh * (gh * xh).mean())).transpose();
          }
        }
      },
      "layer_norm");
}

Var batch_norm(const Var& x, const Var& gain, const Var& shift, BatchNormStats& stats, bool training,
               double momentum, double eps) {
  require_rank(x, 4, "batch_norm");
  const Index n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (gain.shape() != Shape{c} || shift.shape() != Shape{c})
    throw ShapeError("batch_norm: affine parameters must have length " + std::to_string(c));
  if (stats.running_mean.size() != c || stats.running_var.size() != c)
    throw ShapeError("batch_norm: running statistics have wrong length");
  const Index count = n * plane;
  const double* in = x.value().ptr();
  auto at = [=](Index s, Index ch) { return (s * c + ch) * plane; };

  VectorXd mean(c), inv_std(c);
  for (Index ch = 0; ch < c; ++ch) {
    if (training) {
      double m = 0.0;
      for (Index s = 0; s < n; ++s) m += Eigen::Map<const VectorXd>(in + at(s, ch), plane).sum();
      m /= double(count);
      double v = 0.0;
      for (Index s = 0; s < n; ++s) v += (Eigen::Map<const VectorXd>(in + at(s, ch), plane).array() - m).square().sum();
      v /= double(count);
      mean[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(v + eps);
      const double unbiased = count > 1 ? v * double(count) / double(count - 1) : v;
      stats.running_mean[ch] = (1.0 - momentum) * stats.running_mean[ch] + momentum * m;
      stats.running_var[ch] = (1.0 - momentum) * stats.running_var[ch] + momentum * unbiased;
    } else {
      mean[ch] = stats.running_mean[ch];
      inv_std[ch] = 1.0 / std::sqrt(stats.running_var[ch] + eps);
    }
  }

  Tensor normed(x.shape());
  Tensor out(x.shape());
  for (Index s = 0; s < n; ++s)
    for (Index ch = 0; ch < c; ++ch) {
      const Index o = at(s, ch);
      normed.data().segment(o, plane) =
          (Eigen::Map<const VectorXd>(in + o, plane).array() - mean[ch]) * inv_std[ch];
      out.data().segment(o, plane) =
          normed.data().segment(o, plane).array() * gain.value()[ch] + shift.value()[ch];
    }

  return x.tape().record(
      std::move(out), {x, gain, shift},
      [x, gain, shift, normed, inv_std, training, n, c, plane, count, at](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        Tensor* gg = tape.grad_for(gain);
        Tensor* gs = tape.grad_for(shift);
        for (Index ch = 0; ch < c; ++ch) {
          double sum_g = 0.0, sum_gx = 0.0;
          for (Index s = 0; s < n; ++s) {
            const Index o = at(s, ch);
            sum_g += g.data().segment(o, plane).sum();
            sum_gx += g.data().segment(o, plane).dot(normed.data().segment(o, plane));
          }
          if (gg) (*gg)[ch] += sum_gx;
          if (gs) (*gs)[ch] += sum_g;
          if (!gx) continue;
          const double gamma = gain.value()[ch];
          for (Index s = 0; s < n; ++s) {
            const Index o = at(s, ch);
            auto gin = gx->data().segment(o, plane).array();
            const auto go = g.data().segment(o, plane).array();
            if (training) {
              const auto xh = normed.data().segment(o, plane).array();
              gin += gamma * inv_std[ch] * (go - sum_g / double(count) - xh * sum_gx / double(count));
            } else {
              gin += gamma * inv_std[ch] * go;
            }
          }
        }
      },
      "batch_norm");
}

Var relu(const Var& x) {
  return elementwise(
      x, [](double v) { return v > 0 ? v : 0.0; }, [](double v) { return v > 0 ? 1.0 : 0.0; }, "relu");
}

Var leaky_relu(const Var& x, double slope) {
  return elementwise(
      x, [slope](double v) { return v > 0 ? v : slope * v; }, [slope](double v) { return v > 0 ? 1.0 : slope; },
      "leaky_relu");
}

Var gelu(const Var& x) {
  return elementwise(
      x, [](double v) { return 0.5 * v * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0)); },
      [](double v) {
        const double cdf = 0.5 * (1.0 + std::erf(v * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + v * pdf;
      },
      "gelu");
}

Var softmax(const Var& x) {
  const Index width = x.shape().back();
  const Index rows = x.value().size() / width;
  Tensor out(x.shape());
  ConstMat in(x.value().ptr(), rows, width);
  Mat o(out.ptr(), rows, width);
  for (Index r = 0; r < rows; ++r) {
    o.row(r) = (in.row(r).array() - in.row(r).maxCoeff()).exp();
    o.row(r) /= o.row(r).sum();
  }
  return x.tape().record(
      out, {x},
      [x, out, rows, width](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        if (!gx) return;
        ConstMat p(out.ptr(), rows, width);
        ConstMat go(g.ptr(), rows, width);
        Mat gin(gx->ptr(), rows, width);
        for (Index r = 0; r < rows; ++r) {
          const double dot = p.row(r).dot(go.row(r));
          gin.row(r).array() += p.row(r).array() * (go.row(r).array() - dot);
        }
      },
      "softmax");
}

namespace {

// Index pairs (input, output) of the shuffle permutation.
template <typename F>
void shuffle_indices(Index n, Index c, Index h, Index w, int r, F&& fn) {
  for (Index s = 0; s < n; ++s)
    for (Index ch = 0; ch < c; ++ch)
      for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < r; ++j) {
          const Index cin = ch * r * r + i * r + j;
          for (Index y = 0; y < h; ++y)
            for (Index xx = 0; xx < w; ++xx)
              fn(((s * c * r * r + cin) * h + y) * w + xx, ((s * c + ch) * h * r + y * r + i) * w * r + xx * r + j);
        }
}

Var permuted(const Var& x, Shape out_shape, std::vector<Index> perm, const char* op) {
  // out[k] = in[perm[k]]
  Tensor out(std::move(out_shape));
  for (std::size_t k = 0; k < perm.size(); ++k) out[Index(k)] = x.value()[perm[k]];
  return x.tape().record(
      std::move(out), {x},
      [x, perm = std::move(perm)](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        if (!gx) return;
        for (std::size_t k = 0; k < perm.size(); ++k) (*gx)[perm[k]] += g[Index(k)];
      },
      op);
}

}  // namespace

Var pixel_shuffle(const Var& x, int r) {
  require_rank(x, 4, "pixel_shuffle");
  if (r < 1 || x.dim(1) % (r * r) != 0)
    throw ShapeError("pixel_shuffle: channels " + std::to_string(x.dim(1)) + " not divisible by r^2");
  const Index n = x.dim(0), c = x.dim(1) / (r * r), h = x.dim(2), w = x.dim(3);
  std::vector<Index> perm(static_cast<std::size_t>(x.value().size()));
  shuffle_indices(n, c, h, w, r, [&](Index in, Index out) { perm[std::size_t(out)] = in; });
  return permuted(x, {n, c, h * r, w * r}, std::move(perm), "pixel_shuffle");
}

Var pixel_unshuffle(const Var& x, int r) {
  require_rank(x, 4, "pixel_unshuffle");
  if (r < 1 || x.dim(2) % r != 0 || x.dim(3) % r != 0)
    throw ShapeError("pixel_unshuffle: spatial extents not divisible by r");
  const Index n = x.dim(0), c = x.dim(1), h = x.dim(2) / r, w = x.dim(3) / r;
  std::vector<Index> perm(static_cast<std::size_t>(x.value().size()));
  shuffle_indices(n, c, h, w, r, [&](Index in, Index out) { perm[std::size_t(in)] = out; });
  return permuted(x, {n, c * r * r, h, w}, std::move(perm), "pixel_unshuffle");
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  Shape shape = parts.front().shape();
  if (axis >= shape.size()) throw ShapeError("concat: axis out of range");
  Index outer = 1;
  for (std::size_t a = 0; a < axis; ++a) outer *= shape[a];
  Index inner = 1;
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  Index total = 0;
  std::vector<Index> blocks;
  for (const Var& p : parts) {
    Shape s = p.shape();
    if (s.size() != shape.size()) throw ShapeError("concat: rank mismatch");
    for (std::size_t a = 0; a < s.size(); ++a)
      if (a != axis && s[a] != shape[a]) throw ShapeError("concat: extent mismatch on axis " + std::to_string(a));
    blocks.push_back(s[axis] * inner);
    total += s[axis];
  }
  shape[axis] = total;
  Tensor out(shape);
  const Index stride = total * inner;
  for (Index o = 0; o < outer; ++o) {
    Index off = 0;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      out.data().segment(o * stride + off, blocks[i]) = parts[i].value().data().segment(o * blocks[i], blocks[i]);
      off += blocks[i];
    }
  }
  return parts.front().tape().record(
      std::move(out), parts,
      [parts, blocks, outer, stride](Tape& tape, const Tensor& g) {
        for (Index o = 0; o < outer; ++o) {
          Index off = 0;
          for (std::size_t i = 0; i < parts.size(); ++i) {
            if (Tensor* gp = tape.grad_for(parts[i]))
              gp->data().segment(o * blocks[i], blocks[i]) += g.data().segment(o * stride + off, blocks[i]);
            off += blocks[i];
          }
        }
      },
      "concat");
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(
      std::move(out), {x},
      [x](Tape& tape, const Tensor& g) {
        if (Tensor* gx = tape.grad_for(x)) gx->data() += g.data();
      },
      "reshape");
}

Var to_tokens(const Var& x) {
  require_rank(x, 4, "to_tokens");
  const Index n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor out({n, hw, c});
  for (Index s = 0; s < n; ++s)
    Mat(out.ptr() + s * hw * c, hw, c) = ConstMat(x.value().ptr() + s * hw * c, c, hw).transpose();
  return x.tape().record(
      std::move(out), {x},
      [x, n, c, hw](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        if (!gx) return;
        for (Index s = 0; s < n; ++s)
          Mat(gx->ptr() + s * hw * c, c, hw) += ConstMat(g.ptr() + s * hw * c, hw, c).transpose();
      },
      "to_tokens");
}

Var to_map(const Var& x, Index height, Index width) {
  require_rank(x, 3, "to_map");
  const Index n = x.dim(0), hw = x.dim(1), c = x.dim(2);
  if (hw != height * width) throw ShapeError("to_map: token count does not match " + std::to_string(height) + "x" + std::to_string(width));
  Tensor out({n, c, height, width});
  for (Index s = 0; s < n; ++s)
    Mat(out.ptr() + s * hw * c, c, hw) = ConstMat(x.value().ptr() + s * hw * c, hw, c).transpose();
  return x.tape().record(
      std::move(out), {x},
      [x, n, c, hw](Tape& tape, const Tensor& g) {
        Tensor* gx = tape.grad_for(x);
        if (!gx) return;
        for (Index s = 0; s < n; ++s)
          Mat(gx->ptr() + s * hw * c, hw, c) += ConstMat(g.ptr() + s * hw * c, c, hw).transpose();
      },
      "to_map");
}

Var attention(const Var& q, const Var& k, const Var& v, int heads, double scale) {
  require_rank(q, 3, "attention");
  require_same_shape(q, k, "attention");
  require_same_shape(q, v, "attention");
  const Index n = q.dim(0), t = q.dim(1), width = q.dim(2);
  if (heads < 1 || width % heads != 0) throw ShapeError("attention: channels not divisible by head count");
  const Index c = width / heads;
  using Block = Eigen::Map<const RowMajorMatrix<double>, 0, Eigen::OuterStride<>>;
  using MutBlock = Eigen::Map<RowMajorMatrix<double>, 0, Eigen::OuterStride<>>;
  auto block = [=](const Tensor& src, Index s, Index hd) {
    return Block(src.ptr() + s * t * width + hd * c, t, c, Eigen::OuterStride<>(width));
  };
  auto mblock = [=](Tensor& dst, Index s, Index hd) {
    return MutBlock(dst.ptr() + s * t * width + hd * c, t, c, Eigen::OuterStride<>(width));
  };

  Tensor out(q.shape());
  auto probs = std::make_shared<std::vector<RowMajorMatrix<double>>>(std::size_t(n * heads));
  for (Index s = 0; s < n; ++s)
    for (Index hd = 0; hd < heads; ++hd) {
      RowMajorMatrix<double>& p = (*probs)[std::size_t(s * heads + hd)];
      p.noalias() = scale * block(q.value(), s, hd) * block(k.value(), s, hd).transpose();
      for (Index r = 0; r < t; ++r) {
        p.row(r) = (p.row(r).array() - p.row(r).maxCoeff()).exp();
        p.row(r) /= p.row(r).sum();
      }
      mblock(out, s, hd).noalias() = p * block(v.value(), s, hd);
    }

  return q.tape().record(
      std::move(out), {q, k, v},
      [q, k, v, probs, n, heads, scale, block, mblock](Tape& tape, const Tensor& g) {
        Tensor* gq = tape.grad_for(q);
        Tensor* gk = tape.grad_for(k);
        Tensor* gv = tape.grad_for(v);
        RowMajorMatrix<double> gp, gs;
        for (Index s = 0; s < n; ++s)
          for (Index hd = 0; hd < heads; ++hd) {
            const RowMajorMatrix<double>& p = (*probs)[std::size_t(s * heads + hd)];
            const Block go = block(g, s, hd);
            if (gv) mblock(*gv, s, hd).noalias() += p.transpose() * go;
            if (!gq && !gk) continue;
            gp.noalias() = go * block(v.value(), s, hd).transpose();
            gs = p.array() * (gp.colwise() - (gp.array() * p.array()).rowwise().sum().matrix()).array();
            if (gq) mblock(*gq, s, hd).noalias() += scale * gs * block(k.value(), s, hd);
            if (gk) mblock(*gk, s, hd).noalias() += scale * gs.transpose() * block(q.value(), s, hd);
          }
      },
      "attention");
}

}  // namespace transms::ad
