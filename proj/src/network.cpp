#include "transms/network.hpp"

#include <cmath>
#include <random>

namespace transms {

using ad::Var;

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::kFull: return "transms";
    case Variant::kRdsr: return "rdsr";
    case Variant::kCtsr: return "ctsr";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "transms" || name == "full") return Variant::kFull;
  if (name == "rdsr") return Variant::kRdsr;
  if (name == "ctsr") return Variant::kCtsr;
  throw Error("unknown network variant '" + name + "'");
}

namespace {

bool power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

int log2_int(int v) {
  int n = 0;
  while (v > 1) v >>= 1, ++n;
  return n;
}

std::string stage(int j) { return "t" + std::to_string(j); }

}  // namespace

TranSmsConfig TranSmsConfig::toy(int factor) {
  TranSmsConfig c;
  c.factor = factor;
  return c;
}

TranSmsConfig TranSmsConfig::paper(int factor) {
  TranSmsConfig c;
  c.factor = factor;
  c.n_rdb = 4;
  c.c_c = 24;
  c.n_gr = 6;
  c.c_t = 64;
  c.n_a = 4;
  c.c_cat = 48;
  switch (factor) {
    case 2: c.c_1 = 24, c.n_cl = 5; break;
    case 4: c.c_1 = 24, c.n_cl = 8; break;
    case 8: c.c_1 = 64, c.n_cl = 9; break;
    default: throw Error("published configuration exists only for S in {2, 4, 8}");
  }
  return c;
}

void TranSmsConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("network config: " + what); };
  if (factor != 2 && factor != 4 && factor != 8) fail("SR factor must be 2, 4 or 8");
  if (c_1 < 1 || c_c < 1 || c_t < 1 || c_cat < 1 || n_a < 1 || n_gr < 1) fail("channel counts must be positive");
  if (n_rdb < 1 || n_cl < 1) fail("block counts must be positive");
  if (strides.empty()) fail("at least one transformer stage is required");
  for (int s : strides)
    if (!power_of_two(s)) fail("transformer strides must be powers of two");
}

int TranSmsConfig::stride_product() const {
  int p = 1;
  for (int s : strides) p *= s;
  return p;
}

void TranSmsConfig::validate_grid(Grid lr) const {
  const int p = stride_product();
  if (lr.width % p != 0 || lr.height % p != 0)
    throw ShapeError("LR grid " + std::to_string(lr.width) + "x" + std::to_string(lr.height) +
                     " is not divisible by the transformer stride product " + std::to_string(p));
}

std::vector<std::pair<std::string, Shape>> parameter_layout(const TranSmsConfig& c) {
  c.validate();
  std::vector<std::pair<std::string, Shape>> l;
  auto conv = [&](const std::string& name, Index out, Index in, Index k) {
    l.push_back({name + ".w", {out, in, k, k}});
    l.push_back({name + ".b", {out}});
  };
  auto norm = [&](const std::string& name, Index ch) {
    l.push_back({name + ".gain", {ch}});
    l.push_back({name + ".shift", {ch}});
  };
  auto lin = [&](const std::string& name, Index out, Index in) {
    l.push_back({name + ".w", {out, in}});
    l.push_back({name + ".b", {out}});
  };
  conv("init", c.c_1, 2, 3);
  for (std::size_t j = 0; j < c.strides.size(); ++j) {
    const std::string s = stage(int(j));
    conv(s + ".embed", c.c_t, j == 0 ? c.c_1 : c.c_t, 3);
    norm(s + ".ln_embed", c.c_t);
    for (const char* p : {".q", ".k", ".v"}) {
      l.push_back({s + p + ".dw.w", {c.c_t, 1, 3, 3}});
      norm(s + p + ".bn", c.c_t);
      conv(s + p + ".pw", Index(c.n_a) * c.c_t, c.c_t, 1);
    }
    lin(s + ".proj", c.c_t, Index(c.n_a) * c.c_t);
    norm(s + ".ln_mlp", c.c_t);
    lin(s + ".mlp1", 2 * c.c_t, c.c_t);
    lin(s + ".mlp2", c.c_t, 2 * c.c_t);
  }
  for (int u = 0; u < log2_int(c.stride_product()); ++u) conv("t.up" + std::to_string(u), 4 * c.c_t, c.c_t, 3);
  conv("c.z0", c.c_c, c.c_1, 3);
  conv("c.z1", c.c_c, c.c_c, 3);
  for (int d = 0; d < c.n_rdb; ++d) {
    const std::string r = "c.rdb" + std::to_string(d);
    for (int k = 0; k < c.n_cl; ++k) conv(r + ".l" + std::to_string(k), c.n_gr, c.c_c + Index(k) * c.n_gr, 3);
    conv(r + ".out", c.c_c, c.c_c + Index(c.n_cl) * c.n_gr, 1);
  }
  conv("c.ct", c.c_c, Index(c.n_rdb) * c.c_c, 1);
  conv("c.last", c.c_c, c.c_c, 3);
  conv("f.cat", c.c_cat, c.c_c + c.c_t, 3);
  for (int u = 0; u < log2_int(c.factor); ++u) conv("f.up" + std::to_string(u), 4 * c.c_cat, c.c_cat, 3);
  conv("f.fin", 2, c.c_cat, 3);
  return l;
}

TranSmsModel init_model(const TranSmsConfig& config, std::uint64_t seed) {
  TranSmsModel m;
  m.config = config;
  std::mt19937_64 rng(seed);
  for (const auto& [name, shape] : parameter_layout(config)) {
    Tensor t(shape);
    const std::string tail = name.substr(name.rfind('.') + 1);
    if (tail == "gain") {
      t.data().setOnes();
    } else if (tail == "w") {
      Index fan_in = 1;
      for (std::size_t a = 1; a < shape.size(); ++a) fan_in *= shape[a];
      std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(fan_in)), 1.0 / std::sqrt(double(fan_in)));
      for (Index i = 0; i < t.size(); ++i) t[i] = u(rng);
    }
    m.params.add(name, std::move(t));
    if (name.size() > 8 && name.compare(name.size() - 8, 8, ".bn.gain") == 0) {
      const Index ch = shape[0];
      m.batch_norm[name.substr(0, name.size() - 5)] = {VectorXd::Zero(ch), VectorXd::Ones(ch)};
    }
  }
  return m;
}

void audit_parameters(const TranSmsModel& model) {
  const auto layout = parameter_layout(model.config);
  if (layout.size() != model.params.size())
    throw ShapeError("model has " + std::to_string(model.params.size()) + " tensors, configuration expects " +
                     std::to_string(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& [name, shape] = layout[i];
    if (model.params.name(i) != name) throw ShapeError("parameter " + std::to_string(i) + " is '" + model.params.name(i) + "', expected '" + name + "'");
    if (model.params.value(i).shape() != shape)
      throw ShapeError("parameter '" + name + "' has shape " + shape_string(model.params.value(i).shape()) +
                       ", expected " + shape_string(shape));
    if (!model.params.value(i).all_finite()) throw NumericError("parameter '" + name + "' is not finite");
  }
  for (const auto& [name, shape] : layout)
    if (name.size() > 8 && name.compare(name.size() - 8, 8, ".bn.gain") == 0) {
      const auto it = model.batch_norm.find(name.substr(0, name.size() - 5));
      if (it == model.batch_norm.end() || it->second.running_mean.size() != shape[0] ||
          it->second.running_var.size() != shape[0])
        throw ShapeError("batch-norm statistics missing or mis-sized for '" + name + "'");
    }
}

Graph::Graph(ad::Tape& tape, TranSmsModel& model, bool trainable, bool training)
    : tape_(tape), model_(model), training_(training) {
  vars_.reserve(model.params.size());
  for (std::size_t i = 0; i < model.params.size(); ++i)
    vars_.push_back(trainable ? tape.leaf(model.params.value(i)) : tape.constant(model.params.value(i)));
}

Var Graph::param(const std::string& name) const {
  return vars_[model_.params.index(name)];
}

namespace {

Var conv(Graph& g, const Var& x, const std::string& name, int stride = 1) {
  const Var w = g.param(name + ".w");
  return ad::conv2d(x, w, g.param(name + ".b"), stride, int(w.dim(2) / 2));
}

Var lin(Graph& g, const Var& x, const std::string& name) {
  return ad::linear(x, g.param(name + ".w"), g.param(name + ".b"));
}

Var upsampler(Graph& g, const Var& x, const std::string& name) {
  return ad::leaky_relu(ad::pixel_shuffle(conv(g, x, name), 2));
}

// Depth-wise separable projection: depthwise 3x3 (no bias, BN follows), BN, 1x1.
Var dwsc(Graph& g, const Var& map, const std::string& name) {
  const Var dw = ad::depthwise_conv2d(map, g.param(name + ".dw.w"), Var(), 1, 1);
  const Var bn = ad::batch_norm(dw, g.param(name + ".bn.gain"), g.param(name + ".bn.shift"), g.stats(name + ".bn"),
                                g.training());
  return conv(g, bn, name + ".pw");
}

}  // namespace

Var token_embedding(Graph& g, const Var& map, int j, Index& height, Index& width) {
  const std::string s = stage(j);
  const int stride = g.config().strides.at(std::size_t(j));
  if (map.dim(2) % stride != 0 || map.dim(3) % stride != 0)
    throw ShapeError("stage " + std::to_string(j) + ": map is not divisible by its stride");
  const Var e = conv(g, map, s + ".embed", stride);
  height = e.dim(2);
  width = e.dim(3);
  return ad::layer_norm(ad::to_tokens(e), g.param(s + ".ln_embed.gain"), g.param(s + ".ln_embed.shift"));
}

Var transformer_block(Graph& g, const Var& tokens, Index height, Index width, int j) {
  const std::string s = stage(j);
  const TranSmsConfig& c = g.config();
  if (tokens.dim(1) != height * width) throw ShapeError("transformer block: token count does not match grid");
  const Var map = ad::to_map(tokens, height, width);
  const Var q = ad::to_tokens(dwsc(g, map, s + ".q"));
  const Var k = ad::to_tokens(dwsc(g, map, s + ".k"));
  const Var v = ad::to_tokens(dwsc(g, map, s + ".v"));
  const double scale = c.scaled_attention ? 1.0 / std::sqrt(double(c.c_t)) : 1.0;
  const Var mhsa = ad::add(lin(g, ad::attention(q, k, v, c.n_a, scale), s + ".proj"), tokens);
  const Var normed = ad::layer_norm(mhsa, g.param(s + ".ln_mlp.gain"), g.param(s + ".ln_mlp.shift"));
  return ad::add(lin(g, ad::gelu(lin(g, normed, s + ".mlp1")), s + ".mlp2"), mhsa);
}

Var transformer_branch(Graph& g, const Var& u_init) {
  Var u = u_init;
  for (std::size_t j = 0; j < g.config().strides.size(); ++j) {
    Index h = 0, w = 0;
    const Var tokens = token_embedding(g, u, int(j), h, w);
    u = ad::to_map(transformer_block(g, tokens, h, w, int(j)), h, w);
  }
  for (int k = 0; k < log2_int(g.config().stride_product()); ++k) u = upsampler(g, u, "t.up" + std::to_string(k));
  return u;
}

Var rdb_block(Graph& g, const Var& u, int d) {
  const TranSmsConfig& c = g.config();
  if (u.dim(1) != c.c_c) throw ShapeError("RDB input must have C_C channels");
  const std::string r = "c.rdb" + std::to_string(d);
  std::vector<Var> feats{u};
  for (int k = 0; k < c.n_cl; ++k) feats.push_back(ad::relu(conv(g, ad::concat(feats, 1), r + ".l" + std::to_string(k))));
  return ad::add(conv(g, ad::concat(feats, 1), r + ".out"), u);
}

Var conv_branch(Graph& g, const Var& u_init) {
  const Var u_m1 = conv(g, u_init, "c.z0");
  Var u = conv(g, u_m1, "c.z1");
  std::vector<Var> outs;
  for (int d = 0; d < g.config().n_rdb; ++d) outs.push_back(u = rdb_block(g, u, d));
  const Var ct = conv(g, ad::concat(outs, 1), "c.ct");
  return ad::add(conv(g, ct, "c.last"), u_m1);
}

Var fusion_and_upsample(Graph& g, const Var& u_c, const Var& u_t) {
  const TranSmsConfig& c = g.config();
  if (!power_of_two(c.factor)) throw Error("SR factor must be a power of two");
  if (u_c.dim(2) != u_t.dim(2) || u_c.dim(3) != u_t.dim(3)) throw ShapeError("fusion inputs differ in size");
  Var u = conv(g, ad::concat({u_c, u_t}, 1), "f.cat");
  for (int k = 0; k < log2_int(c.factor); ++k) u = upsampler(g, u, "f.up" + std::to_string(k));
  return conv(g, u, "f.fin");
}

Var forward(Graph& g, const Tensor& lr, const VectorXd& sigma) {
  const TranSmsConfig& c = g.config();
  if (lr.rank() != 4 || lr.dim(1) != 2) throw ShapeError("network input must be [N, 2, H, W]");
  c.validate_grid({lr.dim(3), lr.dim(2)});
  if (sigma.size() != lr.dim(0)) throw ShapeError("one sigma per input row required");
  const Index n = lr.dim(0), h = lr.dim(2), w = lr.dim(3);
  const Var u_init = conv(g, g.tape().constant(lr), "init");
  const Var u_t = c.variant == Variant::kRdsr ? g.tape().constant(Tensor::zeros({n, c.c_t, h, w}))
                                              : transformer_branch(g, u_init);
  const Var u_c = c.variant == Variant::kCtsr ? g.tape().constant(Tensor::zeros({n, c.c_c, h, w}))
                                              : conv_branch(g, u_init);
  const Var estimate = fusion_and_upsample(g, u_c, u_t);
  if (!c.dc_enabled) return estimate;
  return ad::dc_project(estimate, lr, sigma, c.factor, c.dc_mode);
}

RowBatch pack_rows(const SystemMatrix& lr, const SystemMatrix* hr, const std::vector<Index>& rows) {
  lr.validate();
  const Index n = Index(rows.size()), h = lr.grid.height, w = lr.grid.width, m = lr.grid.size();
  RowBatch b{Tensor({n, 2, h, w}), VectorXd(n), VectorXd(n), Tensor()};
  if (hr) {
    hr->validate();
    if (hr->row_count() != lr.row_count() || hr->grid.width % w != 0 || hr->grid.width / w != hr->grid.height / h ||
        hr->grid.height % h != 0)
      throw ShapeError("HR and LR matrices do not pair up");
    b.hr = Tensor({n, 2, hr->grid.height, hr->grid.width});
  }
  for (Index k = 0; k < n; ++k) {
    const Index i = rows[std::size_t(k)];
    if (i < 0 || i >= lr.row_count()) throw Error("row index out of range");
    const double peak = lr.data.row(i).cwiseAbs().maxCoeff();
    const double scale = peak > 0.0 ? peak : 1.0;
    b.scale[k] = scale;
    const RowInfo& info = lr.rows[std::size_t(i)];
    b.sigma[k] = info.has_sigma() ? info.sigma / scale : 0.0;
    b.lr.data().segment(2 * k * m, m) = lr.data.row(i).real().transpose() / scale;
    b.lr.data().segment((2 * k + 1) * m, m) = lr.data.row(i).imag().transpose() / scale;
    if (hr) {
      const Index hm = hr->grid.size();
      b.hr.data().segment(2 * k * hm, hm) = hr->data.row(i).real().transpose() / scale;
      b.hr.data().segment((2 * k + 1) * hm, hm) = hr->data.row(i).imag().transpose() / scale;
    }
  }
  return b;
}

RowMajorMatrix<Complex> unpack_rows(const Tensor& maps, const VectorXd& scale) {
  if (maps.rank() != 4 || maps.dim(1) != 2 || maps.dim(0) != scale.size()) throw ShapeError("unpack_rows: bad shape");
  const Index n = maps.dim(0), m = maps.dim(2) * maps.dim(3);
  RowMajorMatrix<Complex> out(n, m);
  for (Index k = 0; k < n; ++k) {
    out.row(k).real() = maps.data().segment(2 * k * m, m).transpose() * scale[k];
    out.row(k).imag() = maps.data().segment((2 * k + 1) * m, m).transpose() * scale[k];
  }
  return out;
}

Tensor predict(const TranSmsModel& model, const Tensor& lr, const VectorXd& sigma) {
  // Inference-mode batch norm only reads the running statistics.
  TranSmsModel& shared = const_cast<TranSmsModel&>(model);
  ad::Tape tape;
  Graph g(tape, shared, false, false);
  return forward(g, lr, sigma).value();
}

SystemMatrix super_resolve(const TranSmsModel& model, const SystemMatrix& lr, Index batch) {
  model.config.validate();
  const int s = model.config.factor;
  SystemMatrix hr({lr.grid.width * s, lr.grid.height * s}, lr.row_count());
  hr.rows = lr.rows;
  hr.flags = lr.flags & ~std::uint32_t(kOrthonormalLr);
  for (Index start = 0; start < lr.row_count(); start += batch) {
    std::vector<Index> rows;
    for (Index i = start; i < std::min(lr.row_count(), start + batch); ++i) rows.push_back(i);
    const RowBatch b = pack_rows(lr, nullptr, rows);
    hr.data.middleRows(start, Index(rows.size())) = unpack_rows(predict(model, b.lr, b.sigma), b.scale);
  }
  return hr;
}

}  // namespace transms
