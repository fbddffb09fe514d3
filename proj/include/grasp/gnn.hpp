#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "grasp/random.hpp"
#include "grasp/token_graph.hpp"
#include "grasp/types.hpp"

namespace grasp {

enum class Variant { GCN, GAT, SAGE };

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::GCN: return "gcn";
    case Variant::GAT: return "gat";
    case Variant::SAGE: return "sage";
  }
  return "?";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "gcn" || s == "GCN") return Variant::GCN;
  if (s == "gat" || s == "GAT") return Variant::GAT;
  if (s == "sage" || s == "SAGE" || s == "graphsage") return Variant::SAGE;
  throw UsageError("unknown GNN variant '" + std::string(s) + "' (expected gcn, gat or sage)");
}

struct ModelDims {
  int input = kTokenDim;
  int hidden = 256;
  int depth = 2;
  int heads = 4;
  double dropout = 0.1;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kNormEps = 1e-12;

// Unused members stay empty for variants that do not need them.
template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> weight;      // in x out (SAGE: self weight)
  Matrix<Scalar> weight_nbr;  // in x out, SAGE only
  Matrix<Scalar> bias;        // 1 x out, GCN and SAGE
  Matrix<Scalar> attention;   // heads x 2*(out/heads), GAT only: [a_src | a_dst]
};

// Parameter set in declared order: per layer weight, weight_nbr, bias,
// attention; then readout weight and bias. Gradients share this layout.
template <typename Scalar>
struct Parameters {
  std::vector<LayerParams<Scalar>> layers;
  Matrix<Scalar> readout_weight;  // hidden x 1
  Matrix<Scalar> readout_bias;    // 1 x 1

  template <typename F>
  void visit(F&& f) {
    for (auto& l : layers)
      for (Matrix<Scalar>* m : {&l.weight, &l.weight_nbr, &l.bias, &l.attention})
        if (m->size() > 0) f(*m);
    f(readout_weight);
    f(readout_bias);
  }
  template <typename F>
  void visit(F&& f) const {
    for (const auto& l : layers)
      for (const Matrix<Scalar>* m : {&l.weight, &l.weight_nbr, &l.bias, &l.attention})
        if (m->size() > 0) f(*m);
    f(readout_weight);
    f(readout_bias);
  }

  Parameters zeros_like() const {
    Parameters z = *this;
    z.visit([](Matrix<Scalar>& m) { m.setZero(); });
    return z;
  }

  template <typename Other>
  Parameters<Other> cast() const {
    Parameters<Other> out;
    for (const auto& l : layers)
      out.layers.push_back({l.weight.template cast<Other>(), l.weight_nbr.template cast<Other>(),
                            l.bias.template cast<Other>(), l.attention.template cast<Other>()});
    out.readout_weight = readout_weight.template cast<Other>();
    out.readout_bias = readout_bias.template cast<Other>();
    return out;
  }

  std::size_t count() const {
    std::size_t n = 0;
    visit([&](const Matrix<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }
};

template <typename Scalar>
using GradientBundle = Parameters<Scalar>;

namespace detail {
inline std::uint64_t next_stamp() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}
}  // namespace detail

inline void validate_dims(Variant v, const ModelDims& d) {
  if (d.input < 1) throw UsageError("input dimension must be positive");
  if (d.hidden < 1) throw UsageError("hidden dimension must be positive");
  if (d.depth < 1) throw UsageError("depth must be at least 1");
  if (!(d.dropout >= 0.0 && d.dropout < 1.0)) throw UsageError("dropout must lie in [0, 1)");
  if (v == Variant::GAT && (d.heads < 1 || d.hidden % d.heads != 0))
    throw UsageError("GAT hidden dimension must be divisible by the head count");
}

// Layer parameter shapes for a variant and dimension chain.
template <typename Scalar>
Parameters<Scalar> zero_parameters(Variant v, const ModelDims& d) {
  validate_dims(v, d);
  Parameters<Scalar> p;
  for (int l = 0; l < d.depth; ++l) {
    const int in = l == 0 ? d.input : d.hidden;
    LayerParams<Scalar> layer;
    layer.weight = Matrix<Scalar>::Zero(in, d.hidden);
    if (v == Variant::SAGE) layer.weight_nbr = Matrix<Scalar>::Zero(in, d.hidden);
    if (v != Variant::GAT) layer.bias = Matrix<Scalar>::Zero(1, d.hidden);
    if (v == Variant::GAT) layer.attention = Matrix<Scalar>::Zero(d.heads, 2 * (d.hidden / d.heads));
    p.layers.push_back(std::move(layer));
  }
  p.readout_weight = Matrix<Scalar>::Zero(d.hidden, 1);
  p.readout_bias = Matrix<Scalar>::Zero(1, 1);
  return p;
}

template <typename Scalar>
bool same_layout(const Parameters<Scalar>& a, const Parameters<Scalar>& b) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> sa, sb;
  a.visit([&](const Matrix<Scalar>& m) { sa.emplace_back(m.rows(), m.cols()); });
  b.visit([&](const Matrix<Scalar>& m) { sb.emplace_back(m.rows(), m.cols()); });
  return sa == sb && a.layers.size() == b.layers.size();
}

template <typename Scalar>
class SaliencyModel {
 public:
  SaliencyModel(Variant variant, ModelDims dims, Parameters<Scalar> params)
      : variant_(variant), dims_(dims), params_(std::move(params)), stamp_(detail::next_stamp()) {
    if (!same_layout(params_, zero_parameters<Scalar>(variant_, dims_)))
      throw UsageError("parameter shapes do not match model dimensions");
  }

  Variant variant() const { return variant_; }
  const ModelDims& dims() const { return dims_; }
  const Parameters<Scalar>& params() const { return params_; }
  // Any access through here invalidates outstanding forward caches.
  Parameters<Scalar>& mutable_params() {
    stamp_ = detail::next_stamp();
    return params_;
  }
  std::uint64_t stamp() const { return stamp_; }

  template <typename Other>
  SaliencyModel<Other> cast() const {
    return SaliencyModel<Other>(variant_, dims_, params_.template cast<Other>());
  }

 private:
  Variant variant_;
  ModelDims dims_;
  Parameters<Scalar> params_;
  std::uint64_t stamp_;
};

// Glorot-uniform weights, zero biases. GAT attention rows are treated as
// (2*head_dim -> 1) maps.
template <typename Scalar>
SaliencyModel<Scalar> init_model(Variant variant, const ModelDims& dims, std::uint64_t seed) {
  Parameters<Scalar> p = zero_parameters<Scalar>(variant, dims);
  Rng rng(seed);
  auto glorot = [&](Matrix<Scalar>& m, int fan_in, int fan_out) {
    const double s = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(uniform(rng, -s, s));
  };
  for (auto& l : p.layers) {
    const int in = static_cast<int>(l.weight.rows());
    glorot(l.weight, in, dims.hidden);
    if (l.weight_nbr.size() > 0) glorot(l.weight_nbr, in, dims.hidden);
    if (l.attention.size() > 0) glorot(l.attention, static_cast<int>(l.attention.cols()), 1);
  }
  glorot(p.readout_weight, dims.hidden, 1);
  return SaliencyModel<Scalar>(variant, dims, std::move(p));
}

// Dense graph operators consumed by the message-passing layers.
template <typename Scalar>
struct GraphOperators {
  Matrix<Scalar> norm_adj;                // GCN: D^-1/2 (A+I) D^-1/2
  Matrix<Scalar> mean_op;                 // SAGE: row-normalized A (empty rows stay zero)
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> attend;  // GAT: A + I

  static GraphOperators build(const TokenGraph& g, Variant v) {
    GraphOperators ops;
    const int n = g.num_nodes();
    if (v == Variant::GCN) ops.norm_adj = normalized_adjacency(g).cast<Scalar>();
    if (v == Variant::SAGE) {
      ops.mean_op = Matrix<Scalar>::Zero(n, n);
      for (int i = 0; i < n; ++i) {
        const auto& nb = g.neighbors(i);
        for (int j : nb) ops.mean_op(i, j) = Scalar(1) / static_cast<Scalar>(nb.size());
      }
    }
    if (v == Variant::GAT) {
      ops.attend.setConstant(n, n, false);
      for (int i = 0; i < n; ++i) {
        ops.attend(i, i) = true;
        for (int j : g.neighbors(i)) ops.attend(i, j) = true;
      }
    }
    return ops;
  }
};

template <typename Scalar>
struct LayerCache {
  Matrix<Scalar> input;   // H entering the layer
  Matrix<Scalar> pre;     // before ReLU
  Matrix<Scalar> output;  // after ReLU (and SAGE normalization), before dropout
  Vector<Scalar> norms;   // SAGE row norms of the ReLU output
  Matrix<Scalar> dropout; // scale mask applied to output, empty when inactive
  std::vector<Matrix<Scalar>> head_z, head_raw, head_att;  // GAT
};

template <typename Scalar>
struct ForwardCache {
  std::uint64_t stamp = 0;
  Variant variant = Variant::GCN;
  GraphOperators<Scalar> ops;
  std::vector<LayerCache<Scalar>> layers;
  Matrix<Scalar> final_hidden;
};

// Per-node pre-sigmoid importance, one entry per token (CLS included).
template <typename Scalar>
using NodeLogits = Vector<Scalar>;

template <typename Scalar>
struct ForwardResult {
  NodeLogits<Scalar> alpha;
  ForwardCache<Scalar> cache;
};

namespace detail {

template <typename Scalar>
void gat_forward(const LayerParams<Scalar>& p, const GraphOperators<Scalar>& ops, int heads,
                 LayerCache<Scalar>& c) {
  const Eigen::Index n = c.input.rows();
  const Eigen::Index out = p.weight.cols();
  const Eigen::Index hd = out / heads;
  const Matrix<Scalar> z_all = c.input * p.weight;
  c.pre.resize(n, out);
  c.head_z.resize(heads);
  c.head_raw.resize(heads);
  c.head_att.resize(heads);
  for (int k = 0; k < heads; ++k) {
    Matrix<Scalar> z = z_all.middleCols(k * hd, hd);
    const Vector<Scalar> src = z * p.attention.row(k).head(hd).transpose();
    const Vector<Scalar> dst = z * p.attention.row(k).tail(hd).transpose();
    Matrix<Scalar> raw(n, n);
    Matrix<Scalar> att = Matrix<Scalar>::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar row_max = -std::numeric_limits<Scalar>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        raw(i, j) = src(i) + dst(j);
        if (!ops.attend(i, j)) continue;
        const Scalar e = raw(i, j) > 0 ? raw(i, j) : static_cast<Scalar>(kLeakySlope) * raw(i, j);
        att(i, j) = e;
        row_max = std::max(row_max, e);
      }
      Scalar total = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!ops.attend(i, j)) continue;
        att(i, j) = std::exp(att(i, j) - row_max);
        total += att(i, j);
      }
      for (Eigen::Index j = 0; j < n; ++j)
        if (ops.attend(i, j)) att(i, j) /= total;
    }
    c.pre.middleCols(k * hd, hd) = att * z;
    c.head_z[k] = std::move(z);
    c.head_raw[k] = std::move(raw);
    c.head_att[k] = std::move(att);
  }
}

// Returns dL/dH for the layer input when need_input_grad is set.
template <typename Scalar>
Matrix<Scalar> gat_backward(const LayerParams<Scalar>& p, const GraphOperators<Scalar>& ops, int heads,
                            const LayerCache<Scalar>& c, const Matrix<Scalar>& d_pre, LayerParams<Scalar>& g,
                            bool need_input_grad) {
  const Eigen::Index n = c.input.rows();
  const Eigen::Index out = p.weight.cols();
  const Eigen::Index hd = out / heads;
  Matrix<Scalar> d_z_all(n, out);
  for (int k = 0; k < heads; ++k) {
    const Matrix<Scalar>& z = c.head_z[k];
    const Matrix<Scalar>& att = c.head_att[k];
    const Matrix<Scalar> d_agg = d_pre.middleCols(k * hd, hd);
    Matrix<Scalar> d_z = att.transpose() * d_agg;
    const Matrix<Scalar> d_att = d_agg * z.transpose();
    Vector<Scalar> d_src = Vector<Scalar>::Zero(n);
    Vector<Scalar> d_dst = Vector<Scalar>::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar dot = 0;
      for (Eigen::Index j = 0; j < n; ++j)
        if (ops.attend(i, j)) dot += att(i, j) * d_att(i, j);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (!ops.attend(i, j)) continue;
        const Scalar d_e = att(i, j) * (d_att(i, j) - dot);
        const Scalar d_raw = c.head_raw[k](i, j) > 0 ? d_e : static_cast<Scalar>(kLeakySlope) * d_e;
        d_src(i) += d_raw;
        d_dst(j) += d_raw;
      }
    }
    g.attention.row(k).head(hd) += (z.transpose() * d_src).transpose();
    g.attention.row(k).tail(hd) += (z.transpose() * d_dst).transpose();
    d_z += d_src * p.attention.row(k).head(hd);
    d_z += d_dst * p.attention.row(k).tail(hd);
    d_z_all.middleCols(k * hd, hd) = d_z;
  }
  g.weight += c.input.transpose() * d_z_all;
  if (!need_input_grad) return {};
  return d_z_all * p.weight.transpose();
}

}  // namespace detail

// Message passing followed by the linear readout. With train_mode, inverted
// dropout masks are drawn from rng in row-major order and kept in the cache.
template <typename Scalar>
ForwardResult<Scalar> forward(const SaliencyModel<Scalar>& m, const TokenGraph& g, const EmbeddingTensor<Scalar>& e,
                              bool train_mode, Rng& rng) {
  const ModelDims& d = m.dims();
  if (g.num_nodes() != e.rows())
    throw UsageError("graph has " + std::to_string(g.num_nodes()) + " nodes but embedding has " +
                     std::to_string(e.rows()) + " tokens");
  if (e.cols() != d.input)
    throw UsageError("embedding width " + std::to_string(e.cols()) + " does not match model input " +
                     std::to_string(d.input));

  ForwardResult<Scalar> r;
  ForwardCache<Scalar>& cache = r.cache;
  cache.stamp = m.stamp();
  cache.variant = m.variant();
  cache.ops = GraphOperators<Scalar>::build(g, m.variant());
  const auto& params = m.params();

  Matrix<Scalar> h = e;
  for (const auto& p : params.layers) {
    LayerCache<Scalar> c;
    c.input = std::move(h);
    switch (m.variant()) {
      case Variant::GCN:
        c.pre = cache.ops.norm_adj * (c.input * p.weight);
        c.pre.rowwise() += p.bias.row(0);
        break;
      case Variant::SAGE:
        c.pre = c.input * p.weight;
        c.pre.noalias() += cache.ops.mean_op * (c.input * p.weight_nbr);
        c.pre.rowwise() += p.bias.row(0);
        break;
      case Variant::GAT:
        detail::gat_forward(p, cache.ops, d.heads, c);
        break;
    }
    c.output = c.pre.cwiseMax(Scalar(0));
    if (m.variant() == Variant::SAGE) {
      c.norms = c.output.rowwise().norm();
      for (Eigen::Index i = 0; i < c.output.rows(); ++i)
        c.output.row(i) /= std::max(c.norms(i), static_cast<Scalar>(kNormEps));
    }
    h = c.output;
    if (train_mode && d.dropout > 0.0) {
      const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - d.dropout));
      c.dropout.resize(h.rows(), h.cols());
      for (Eigen::Index i = 0; i < c.dropout.size(); ++i)
        c.dropout.data()[i] = uniform01(rng) >= d.dropout ? keep_scale : Scalar(0);
      h = h.cwiseProduct(c.dropout);
    }
    cache.layers.push_back(std::move(c));
  }
  r.alpha = h * params.readout_weight.col(0);
  r.alpha.array() += params.readout_bias(0, 0);
  cache.final_hidden = std::move(h);
  return r;
}

// Exact reverse pass of forward() given dL/dalpha.
template <typename Scalar>
GradientBundle<Scalar> backward(const SaliencyModel<Scalar>& m, const ForwardCache<Scalar>& cache,
                                const Vector<Scalar>& d_alpha) {
  if (cache.stamp != m.stamp() || cache.variant != m.variant() ||
      cache.layers.size() != m.params().layers.size())
    throw UsageError("stale forward cache: model changed since forward()");
  if (d_alpha.size() != cache.final_hidden.rows()) throw UsageError("dL/dalpha length does not match node count");

  const auto& params = m.params();
  GradientBundle<Scalar> grads = params.zeros_like();
  grads.readout_weight.col(0) = cache.final_hidden.transpose() * d_alpha;
  grads.readout_bias(0, 0) = d_alpha.sum();
  Matrix<Scalar> d_h = d_alpha * params.readout_weight.col(0).transpose();

  for (std::size_t li = cache.layers.size(); li-- > 0;) {
    const LayerCache<Scalar>& c = cache.layers[li];
    const LayerParams<Scalar>& p = params.layers[li];
    LayerParams<Scalar>& gp = grads.layers[li];
    const bool need_input_grad = li > 0;

    if (c.dropout.size() > 0) d_h = d_h.cwiseProduct(c.dropout);
    Matrix<Scalar> d_act = std::move(d_h);
    if (cache.variant == Variant::SAGE) {
      for (Eigen::Index i = 0; i < d_act.rows(); ++i) {
        const Scalar norm = c.norms(i);
        if (norm > static_cast<Scalar>(kNormEps)) {
          const Scalar proj = c.output.row(i).dot(d_act.row(i));
          d_act.row(i) = (d_act.row(i) - proj * c.output.row(i)) / norm;
        } else {
          d_act.row(i) /= static_cast<Scalar>(kNormEps);
        }
      }
    }
    const Matrix<Scalar> d_pre = (c.pre.array() > Scalar(0)).select(d_act, Scalar(0));

    switch (cache.variant) {
      case Variant::GCN: {
        const Matrix<Scalar> d_z = cache.ops.norm_adj.transpose() * d_pre;
        gp.weight = c.input.transpose() * d_z;
        gp.bias = d_pre.colwise().sum();
        if (need_input_grad) d_h = d_z * p.weight.transpose();
        break;
      }
      case Variant::SAGE: {
        const Matrix<Scalar> d_nbr = cache.ops.mean_op.transpose() * d_pre;
        gp.weight = c.input.transpose() * d_pre;
        gp.weight_nbr = c.input.transpose() * d_nbr;
        gp.bias = d_pre.colwise().sum();
        if (need_input_grad) {
          d_h = d_pre * p.weight.transpose();
          d_h.noalias() += d_nbr * p.weight_nbr.transpose();
        }
        break;
      }
      case Variant::GAT:
        d_h = detail::gat_backward(p, cache.ops, m.dims().heads, c, d_pre, gp, need_input_grad);
        break;
    }
  }
  return grads;
}

// GAT attention matrix of one head in one layer, taken from a forward cache.
template <typename Scalar>
const Matrix<Scalar>& attention_weights(const ForwardCache<Scalar>& cache, std::size_t layer, int head) {
  return cache.layers.at(layer).head_att.at(static_cast<std::size_t>(head));
}

struct GradCheckReport {
  Variant variant;
  std::uint64_t seed;
  std::size_t num_params;
  double max_rel_err;
  double max_abs_err;
  bool passed;
};

inline constexpr double kGradCheckStep = 1e-5;
inline constexpr double kGradCheckTolerance = 1e-4;

// Denominator floor in the relative error so that entries whose true gradient
// is zero are judged by absolute error.
inline constexpr double kGradCheckFloor = 1e-6;

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
}

// Random 8-node graph, 6-dim features, hidden 4, depth 2 (GAT: 2 heads),
// loss sum_i c_i alpha_i; analytic gradients vs central differences in f64.
GradCheckReport grad_check(Variant variant, std::uint64_t seed);

}  // namespace grasp
