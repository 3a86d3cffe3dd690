#include "transms/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "transms/sampling.hpp"

namespace transms {

namespace {

Tensor take_rows(const Tensor& t, const std::vector<Index>& rows) {
  Shape shape = t.shape();
  const Index per = t.size() / shape[0];
  shape[0] = Index(rows.size());
  Tensor out(shape);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] < 0 || rows[k] >= t.dim(0)) throw Error("row index out of range");
    out.data().segment(Index(k) * per, per) = t.data().segment(rows[k] * per, per);
  }
  return out;
}

double batch_loss(const Tensor& prediction, const Tensor& target) {
  return (prediction.data() - target.data()).cwiseAbs().sum() / double(target.size());
}

}  // namespace

RowBatch slice_rows(const RowBatch& batch, const std::vector<Index>& rows) {
  RowBatch out;
  out.lr = take_rows(batch.lr, rows);
  out.sigma.resize(Index(rows.size()));
  out.scale.resize(Index(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.sigma[Index(k)] = batch.sigma[rows[k]];
    out.scale[Index(k)] = batch.scale[rows[k]];
  }
  if (batch.hr.size()) out.hr = take_rows(batch.hr, rows);
  return out;
}

RowBatch concat_batches(const std::vector<RowBatch>& batches) {
  if (batches.empty()) throw Error("concat_batches: nothing to concatenate");
  const RowBatch& first = batches.front();
  Index n = 0;
  for (const RowBatch& b : batches) {
    if (b.lr.rank() != 4 || b.lr.dim(1) != first.lr.dim(1) || b.lr.dim(2) != first.lr.dim(2) ||
        b.lr.dim(3) != first.lr.dim(3) || (b.hr.size() == 0) != (first.hr.size() == 0) ||
        (b.hr.size() && b.hr.shape()[2] != first.hr.shape()[2]))
      throw ShapeError("concat_batches: row shapes differ");
    n += b.lr.dim(0);
  }
  RowBatch out;
  Shape lr_shape = first.lr.shape();
  lr_shape[0] = n;
  out.lr = Tensor(lr_shape);
  out.sigma.resize(n);
  out.scale.resize(n);
  if (first.hr.size()) {
    Shape hr_shape = first.hr.shape();
    hr_shape[0] = n;
    out.hr = Tensor(hr_shape);
  }
  Index at = 0, lr_at = 0, hr_at = 0;
  for (const RowBatch& b : batches) {
    const Index rows = b.lr.dim(0);
    out.lr.data().segment(lr_at, b.lr.size()) = b.lr.data();
    lr_at += b.lr.size();
    if (b.hr.size()) {
      out.hr.data().segment(hr_at, b.hr.size()) = b.hr.data();
      hr_at += b.hr.size();
    }
    out.sigma.segment(at, rows) = b.sigma;
    out.scale.segment(at, rows) = b.scale;
    at += rows;
  }
  return out;
}

double evaluate_loss(const TranSmsModel& model, const RowBatch& data, Index batch_size) {
  if (data.hr.size() == 0) throw Error("evaluate_loss: batch has no targets");
  double total = 0.0;
  const Index n = data.lr.dim(0);
  for (Index start = 0; start < n; start += batch_size) {
    std::vector<Index> rows(std::size_t(std::min(batch_size, n - start)));
    std::iota(rows.begin(), rows.end(), start);
    const RowBatch b = slice_rows(data, rows);
    total += batch_loss(predict(model, b.lr, b.sigma), b.hr) * double(rows.size());
  }
  return total / double(n);
}

TrainResult train(const TranSmsModel& initial, const RowBatch& train_set, const RowBatch* validation,
                  const TrainSettings& settings) {
  if (train_set.lr.rank() != 4 || train_set.lr.dim(0) == 0) throw Error("train: empty training set");
  if (train_set.hr.size() == 0) throw Error("train: training set has no targets");
  if (settings.epochs < 1 || settings.batch_size < 1) throw ConfigError("train: epochs and batch size must be positive");
  audit_parameters(initial);

  TrainResult result;
  result.model = initial;
  TranSmsModel model = initial;
  AdamState adam(model.params, settings.adam);
  std::mt19937_64 rng(settings.seed);
  const Index n = train_set.lr.dim(0);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index(0));
  double best = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < settings.epochs; ++epoch) {
    adam.settings.learning_rate = settings.halve_schedule
                                      ? halving_schedule(settings.adam.learning_rate, epoch, settings.epochs)
                                      : settings.adam.learning_rate;
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    try {
      for (Index start = 0; start < n; start += settings.batch_size) {
        const std::vector<Index> rows(order.begin() + start,
                                      order.begin() + std::min(n, start + settings.batch_size));
        const RowBatch b = slice_rows(train_set, rows);
        ad::Tape tape;
        Graph g(tape, model, true, true);
        const ad::Var out = forward(g, b.lr, b.sigma);
        const ad::Var loss = ad::scale(ad::l1_distance(out, tape.constant(b.hr)), 1.0 / double(b.hr.size()));
        tape.backward(loss);
        ParameterSet grads = model.params.zeros_like();
        for (std::size_t i = 0; i < grads.size(); ++i) grads.value(i) = tape.grad(g.vars()[i]);
        adam_step(model.params, grads, adam);
        if (!model.params.all_finite()) throw NumericError("parameters became non-finite");
        epoch_loss += loss.value()[0] * double(rows.size());
      }
    } catch (const NumericError&) {
      result.diverged = true;
      break;
    }
    epoch_loss /= double(n);
    if (!std::isfinite(epoch_loss)) {
      result.diverged = true;
      break;
    }
    result.train_loss.push_back(epoch_loss);
    double score = epoch_loss;
    double val = std::numeric_limits<double>::quiet_NaN();
    if (validation) {
      val = evaluate_loss(model, *validation, settings.batch_size);
      result.validation_loss.push_back(val);
      score = val;
    }
    if (score < best) {
      best = score;
      result.best_epoch = epoch;
      result.model = model;
    }
    if (settings.on_epoch) settings.on_epoch(epoch, epoch_loss, val);
  }
  return result;
}

std::vector<Index> tile_origins(Index extent, Index patch, Index stride) {
  if (patch < 1 || stride < 1) throw ConfigError("tile_origins: patch and stride must be positive");
  if (patch > extent) throw ShapeError("patch larger than input");
  std::vector<Index> out;
  for (Index o = 0; o + patch <= extent; o += stride) out.push_back(o);
  if (out.back() + patch < extent) out.push_back(extent - patch);
  return out;
}

TiledOutput tiled_inference(const TranSmsModel& model, const Tensor& lr, const VectorXd& sigma,
                            const TileSettings& tiles) {
  if (lr.rank() != 4 || lr.dim(1) != 2) throw ShapeError("tiled_inference: expected [N, 2, H, W]");
  if (tiles.stride > tiles.patch) throw ConfigError("tiled_inference: stride exceeds the patch (gaps)");
  const int s = model.config.factor;
  const Index n = lr.dim(0), h = lr.dim(2), w = lr.dim(3), p = tiles.patch, sp = p * s;
  const std::vector<Index> ys = tile_origins(h, p, tiles.stride), xs = tile_origins(w, p, tiles.stride);

  TiledOutput out;
  out.hr = Tensor({n, 2, h * s, w * s});
  Tensor sum_sq({n, 2, h * s, w * s});
  MatrixXd cover = MatrixXd::Zero(h * s, w * s);
  out.dc_excess = -std::numeric_limits<double>::infinity();
  const BoxcarOperator d({sp, sp}, s);

  for (Index y0 : ys)
    for (Index x0 : xs) {
      Tensor patch({n, 2, p, p});
      for (Index k = 0; k < n * 2; ++k)
        for (Index y = 0; y < p; ++y)
          for (Index x = 0; x < p; ++x) patch[(k * p + y) * p + x] = lr[(k * h + y0 + y) * w + x0 + x];
      const Tensor pred = predict(model, patch, sigma);
      for (Index r = 0; r < n; ++r) {
        double sq = 0.0;
        for (Index c = 0; c < 2; ++c) {
          const Index off = (r * 2 + c) * sp * sp;
          sq += (d.apply<double>(pred.data().segment(off, sp * sp)) - patch.data().segment((r * 2 + c) * p * p, p * p))
                    .squaredNorm();
        }
        out.dc_excess = std::max(out.dc_excess, std::sqrt(sq) - double(p) * sigma[r]);
      }
      for (Index k = 0; k < n * 2; ++k)
        for (Index y = 0; y < sp; ++y)
          for (Index x = 0; x < sp; ++x) {
            const double v = pred[(k * sp + y) * sp + x];
            const Index at = (k * h * s + y0 * s + y) * w * s + x0 * s + x;
            out.hr[at] += v;
            sum_sq[at] += v * v;
          }
      cover.block(y0 * s, x0 * s, sp, sp).array() += 1.0;
      ++out.patches;
    }

  double seam = 0.0;
  Index seam_count = 0;
  for (Index k = 0; k < n * 2; ++k)
    for (Index y = 0; y < h * s; ++y)
      for (Index x = 0; x < w * s; ++x) {
        const Index at = (k * h * s + y) * w * s + x;
        const double c = cover(y, x);
        const double mean = out.hr[at] / c;
        if (c > 1.0) {
          seam += std::max(0.0, sum_sq[at] / c - mean * mean);
          ++seam_count;
        }
        out.hr[at] = mean;
      }
  out.seam_variance = seam_count ? seam / double(seam_count) : 0.0;
  out.hr.ensure_finite("tiled_inference");
  return out;
}

}  // namespace transms
