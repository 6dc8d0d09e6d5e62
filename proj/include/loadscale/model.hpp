#pragma once

// Fourier-enhanced recurrent downscaler.
//
// Per period t:
//   h_t  = cell(h_{t-1}, x0_t)                  recurrent path, h_0 learnable
//   f_t  = (X_t V)^T softmax(a_logits)          seasonal path
//   z_t  = h_t + f_t
//   z~_t = z_t + sigmoid(G z_t) * attn(z_t)     gated self-attention over the L latent coordinates
//   y^_t = A z~_t + c
//
// The attention block treats coordinate l of z as a token z_l * E_l (a row
// of E) and runs one post-norm transformer encoder layer over the L tokens,
// then projects each token back to a scalar with w_out.
//
// Vectors are column vectors; token matrices are row-major in the sense that
// each row is one token (L x D).

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadscale/error.hpp"

namespace loadscale {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class CellType { Elman, Gru };

struct ModelConfig {
  int latent = 32;     // L
  int embed = 16;      // D
  int heads = 2;
  int ffn_width = 0;   // 0 selects 4 * embed
  int K = 24;
  int feat_width = 6;  // 2 * total harmonics
  bool use_attention = true;
  bool use_fourier = true;
  CellType cell = CellType::Gru;

  bool operator==(const ModelConfig&) const = default;

  int ffn() const { return ffn_width > 0 ? ffn_width : 4 * embed; }
  int gates() const { return cell == CellType::Gru ? 3 : 1; }
  int head_dim() const { return embed / heads; }

  void validate() const {
    if (latent < 1) throw ConfigError("model.L", "must be >= 1");
    if (embed < 1) throw ConfigError("model.D", "must be >= 1");
    if (heads < 1 || embed % heads != 0) throw ConfigError("model.n_heads", "must divide D");
    if (K < 1) throw ConfigError("K", "must be >= 1");
    if (feat_width < 0 || feat_width % 2 != 0) throw ConfigError("model.feat_width", "must be even and >= 0");
    if (ffn_width < 0) throw ConfigError("model.ffn_width", "must be >= 0");
  }
};

// Every learnable tensor. For the GRU cell, rnn_w/rnn_u/rnn_b stack the
// update, reset and candidate blocks (in that order) along the rows.
struct ModelParams {
  Mat rnn_w;      // gates*L x L
  Vec rnn_u;      // gates*L, input weights for x0
  Vec rnn_b;      // gates*L
  Vec h0;         // L
  Mat V;          // feat_width x L
  Vec a_logits;   // K
  Mat E;          // L x D
  Mat wq, wk, wv, wo;  // D x D, applied as tokens * W
  Vec bq, bk, bv, bo;  // D
  Vec ln1_gamma, ln1_beta;
  Vec ln2_gamma, ln2_beta;
  Mat ffn_w1;     // D x D_ff
  Vec ffn_b1;     // D_ff
  Mat ffn_w2;     // D_ff x D
  Vec ffn_b2;     // D
  Vec w_out;      // D
  Mat G;          // L x L
  Mat A;          // K x L
  Vec c;          // K
};

#define LOADSCALE_MODEL_TENSORS(X)                                                                                \
  X(rnn_w) X(rnn_u) X(rnn_b) X(h0) X(V) X(a_logits) X(E) X(wq) X(wk) X(wv) X(wo) X(bq) X(bk) X(bv) X(bo)       \
  X(ln1_gamma) X(ln1_beta) X(ln2_gamma) X(ln2_beta) X(ffn_w1) X(ffn_b1) X(ffn_w2) X(ffn_b2) X(w_out) X(G) X(A) \
  X(c)

// Calls f(name, p.tensor, q.tensor, ...) for every tensor, in declaration order.
template <class F, class First, class... Rest>
void zip_tensors(F&& f, First& first, Rest&... rest) {
#define LOADSCALE_VISIT(name) f(#name, first.name, rest.name...);
  LOADSCALE_MODEL_TENSORS(LOADSCALE_VISIT)
#undef LOADSCALE_VISIT
}

inline ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  zip_tensors([](const char*, auto& t) { t.setZero(); }, z);
  return z;
}

inline std::size_t parameter_count(const ModelParams& p) {
  std::size_t n = 0;
  zip_tensors([&](const char*, const auto& t) { n += static_cast<std::size_t>(t.size()); }, p);
  return n;
}

inline bool all_finite(const ModelParams& p) {
  bool ok = true;
  zip_tensors([&](const char*, const auto& t) { ok = ok && t.allFinite(); }, p);
  return ok;
}

inline double squared_norm(const ModelParams& p) {
  double s = 0.0;
  zip_tensors([&](const char*, const auto& t) { s += t.squaredNorm(); }, p);
  return s;
}

// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases, h0, c and a_logits
// start at zero; layer-norm scales at one.
inline ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int L = cfg.latent, D = cfg.embed, K = cfg.K, Fw = cfg.feat_width, Dff = cfg.ffn(), g = cfg.gates();
  std::mt19937_64 rng(seed);
  auto uniform = [&](Eigen::Index rows, Eigen::Index cols, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Mat m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    return m;
  };
  ModelParams p;
  p.rnn_w = uniform(g * L, L, L);
  p.rnn_u = uniform(g * L, 1, 1);
  p.rnn_b = Vec::Zero(g * L);
  p.h0 = Vec::Zero(L);
  p.V = uniform(Fw, L, Fw);
  p.a_logits = Vec::Zero(K);
  p.E = uniform(L, D, 1);
  p.wq = uniform(D, D, D);
  p.wk = uniform(D, D, D);
  p.wv = uniform(D, D, D);
  p.wo = uniform(D, D, D);
  p.bq = p.bk = p.bv = p.bo = Vec::Zero(D);
  p.ln1_gamma = p.ln2_gamma = Vec::Ones(D);
  p.ln1_beta = p.ln2_beta = Vec::Zero(D);
  p.ffn_w1 = uniform(D, Dff, D);
  p.ffn_b1 = Vec::Zero(Dff);
  p.ffn_w2 = uniform(Dff, D, Dff);
  p.ffn_b2 = Vec::Zero(D);
  p.w_out = uniform(D, 1, D);
  p.G = uniform(L, L, L);
  p.A = uniform(K, L, L);
  p.c = Vec::Zero(K);
  return p;
}

// Shapes must match `cfg` exactly.
inline void check_shapes(const ModelParams& p, const ModelConfig& cfg) {
  const auto L = cfg.latent, D = cfg.embed, K = cfg.K, Fw = cfg.feat_width, Dff = cfg.ffn(), g = cfg.gates();
  auto expect = [](const auto& t, Eigen::Index r, Eigen::Index c, const char* name) {
    if (t.rows() != r || t.cols() != c) throw ShapeError(std::string("parameter '") + name + "' has wrong shape");
  };
  expect(p.rnn_w, g * L, L, "rnn_w");
  expect(p.rnn_u, g * L, 1, "rnn_u");
  expect(p.rnn_b, g * L, 1, "rnn_b");
  expect(p.h0, L, 1, "h0");
  expect(p.V, Fw, L, "V");
  expect(p.a_logits, K, 1, "a_logits");
  expect(p.E, L, D, "E");
  for (const auto* w : {&p.wq, &p.wk, &p.wv, &p.wo}) expect(*w, D, D, "attention projection");
  for (const auto* b : {&p.bq, &p.bk, &p.bv, &p.bo, &p.ln1_gamma, &p.ln1_beta, &p.ln2_gamma, &p.ln2_beta, &p.ffn_b2})
    expect(*b, D, 1, "attention vector");
  expect(p.ffn_w1, D, Dff, "ffn_w1");
  expect(p.ffn_b1, Dff, 1, "ffn_b1");
  expect(p.ffn_w2, Dff, D, "ffn_w2");
  expect(p.w_out, D, 1, "w_out");
  expect(p.G, L, L, "G");
  expect(p.A, K, L, "A");
  expect(p.c, K, 1, "c");
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec sigmoid(const Vec& x) {
  return x.unaryExpr([](double v) { return sigmoid(v); });
}

inline Vec softmax(const Vec& x) {
  const Vec e = (x.array() - x.maxCoeff()).exp().matrix();
  return e / e.sum();
}

inline void softmax_rows(Mat& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    m.row(i).array() -= m.row(i).maxCoeff();
    m.row(i) = m.row(i).array().exp().matrix();
    m.row(i) /= m.row(i).sum();
  }
}

constexpr double kLayerNormEps = 1e-5;

struct LayerNormCache {
  Mat xhat;
  Vec rstd;
};

// Normalizes each row over its D features.
inline Mat layer_norm(const Mat& x, const Vec& gamma, const Vec& beta, LayerNormCache& cache) {
  const auto n = static_cast<double>(x.cols());
  cache.xhat.resize(x.rows(), x.cols());
  cache.rstd.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).sum() / n;
    const double var = (x.row(i).array() - mu).square().sum() / n;
    cache.rstd[i] = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.xhat.row(i) = (x.row(i).array() - mu) * cache.rstd[i];
  }
  Mat out = cache.xhat * gamma.asDiagonal();
  out.rowwise() += beta.transpose();
  return out;
}

inline Mat layer_norm_backward(const Mat& dout, const Vec& gamma, const LayerNormCache& cache, Vec& dgamma,
                               Vec& dbeta) {
  dgamma += (dout.array() * cache.xhat.array()).colwise().sum().transpose().matrix();
  dbeta += dout.colwise().sum().transpose();
  const Mat dxhat = dout * gamma.asDiagonal();
  const auto n = static_cast<double>(dout.cols());
  Mat dx(dout.rows(), dout.cols());
  for (Eigen::Index i = 0; i < dout.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / n;
    const double mean_dx = dxhat.row(i).dot(cache.xhat.row(i)) / n;
    dx.row(i) = cache.rstd[i] * (dxhat.row(i).array() - mean_d - cache.xhat.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Recurrent cell

struct CellCache {
  Vec h_prev;
  double x0 = 0.0;
  Vec h;           // output
  Vec update, reset, candidate, reset_h;  // GRU only
};

// Elman: h = tanh(W h_prev + u x0 + b).
// GRU:   z = sig(.), r = sig(.), n = tanh(W_n (r*h_prev) + u_n x0 + b_n),
//        h = (1 - z) * h_prev + z * n, so a closed update gate keeps the state.
inline Vec rnn_step(const Vec& h_prev, double x0, const ModelParams& p, const ModelConfig& cfg,
                    CellCache* cache = nullptr) {
  const Eigen::Index L = cfg.latent;
  Vec h;
  if (cfg.cell == CellType::Elman) {
    h = (p.rnn_w * h_prev + p.rnn_u * x0 + p.rnn_b).array().tanh().matrix();
    if (cache) *cache = CellCache{h_prev, x0, h, {}, {}, {}, {}};
    return h;
  }
  const Vec z = detail::sigmoid(p.rnn_w.topRows(L) * h_prev + p.rnn_u.head(L) * x0 + p.rnn_b.head(L));
  const Vec r = detail::sigmoid(p.rnn_w.middleRows(L, L) * h_prev + p.rnn_u.segment(L, L) * x0 +
                                p.rnn_b.segment(L, L));
  const Vec rh = r.cwiseProduct(h_prev);
  const Vec n = (p.rnn_w.bottomRows(L) * rh + p.rnn_u.tail(L) * x0 + p.rnn_b.tail(L)).array().tanh().matrix();
  h = (Vec::Ones(L) - z).cwiseProduct(h_prev) + z.cwiseProduct(n);
  if (cache) *cache = CellCache{h_prev, x0, h, z, r, n, rh};
  return h;
}

// Accumulates parameter gradients into g and returns dL/dh_prev.
inline Vec rnn_step_backward(const CellCache& c, const Vec& dh, const ModelParams& p, const ModelConfig& cfg,
                             ModelParams& g) {
  const Eigen::Index L = cfg.latent;
  if (cfg.cell == CellType::Elman) {
    const Vec dpre = dh.cwiseProduct((1.0 - c.h.array().square()).matrix());
    g.rnn_w.noalias() += dpre * c.h_prev.transpose();
    g.rnn_u += dpre * c.x0;
    g.rnn_b += dpre;
    return p.rnn_w.transpose() * dpre;
  }
  const Vec dz = dh.cwiseProduct(c.candidate - c.h_prev);
  const Vec dn = dh.cwiseProduct(c.update);
  Vec dh_prev = dh.cwiseProduct(Vec::Ones(L) - c.update);

  const Vec dan = dn.cwiseProduct((1.0 - c.candidate.array().square()).matrix());
  g.rnn_w.bottomRows(L).noalias() += dan * c.reset_h.transpose();
  g.rnn_u.tail(L) += dan * c.x0;
  g.rnn_b.tail(L) += dan;
  const Vec drh = p.rnn_w.bottomRows(L).transpose() * dan;
  const Vec dr = drh.cwiseProduct(c.h_prev);
  dh_prev += drh.cwiseProduct(c.reset);

  const Vec dar = dr.cwiseProduct((c.reset.array() * (1.0 - c.reset.array())).matrix());
  const Vec daz = dz.cwiseProduct((c.update.array() * (1.0 - c.update.array())).matrix());
  g.rnn_w.topRows(L).noalias() += daz * c.h_prev.transpose();
  g.rnn_w.middleRows(L, L).noalias() += dar * c.h_prev.transpose();
  g.rnn_u.head(L) += daz * c.x0;
  g.rnn_u.segment(L, L) += dar * c.x0;
  g.rnn_b.head(L) += daz;
  g.rnn_b.segment(L, L) += dar;
  dh_prev.noalias() += p.rnn_w.topRows(L).transpose() * daz;
  dh_prev.noalias() += p.rnn_w.middleRows(L, L).transpose() * dar;
  return dh_prev;
}

// ---------------------------------------------------------------------------
// Seasonal projection

struct FourierCache {
  Mat X;         // K x feat_width
  Mat projected; // K x L
  Vec weights;   // softmax(a_logits)
};

inline Vec fourier_project(const Mat& X, const ModelParams& p, FourierCache* cache = nullptr) {
  if (X.cols() != p.V.rows() || X.rows() != p.a_logits.size())
    throw ShapeError("Fourier feature matrix does not match V / a_logits");
  Mat projected = X * p.V;
  Vec a = detail::softmax(p.a_logits);
  Vec f = projected.transpose() * a;
  if (cache) *cache = FourierCache{X, std::move(projected), std::move(a)};
  return f;
}

inline void fourier_project_backward(const FourierCache& c, const Vec& df, ModelParams& g) {
  const Mat dproj = c.weights * df.transpose();  // K x L
  g.V.noalias() += c.X.transpose() * dproj;
  const Vec da = c.projected * df;
  g.a_logits += c.weights.cwiseProduct((da.array() - c.weights.dot(da)).matrix());
}

// ---------------------------------------------------------------------------
// Gated self-attention over latent feature tokens

struct AttentionCache {
  Vec z;
  Mat tokens;              // L x D
  Mat q, k, v;             // L x D
  std::vector<Mat> probs;  // per head, L x L
  Mat concat;              // L x D, heads side by side
  detail::LayerNormCache ln1;
  Mat hidden;              // LN1 output
  Mat ffn_pre;             // L x D_ff
  Mat ffn_act;
  detail::LayerNormCache ln2;
  Mat normed;              // LN2 output
  Vec delta;
  Vec gate;
};

inline Vec attention_block(const Vec& z, const ModelParams& p, const ModelConfig& cfg,
                           AttentionCache* cache = nullptr) {
  if (!cfg.use_attention) return z;
  const int H = cfg.heads, dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  AttentionCache local;
  AttentionCache& c = cache ? *cache : local;
  c.z = z;
  c.tokens = z.asDiagonal() * p.E;
  c.q = c.tokens * p.wq;
  c.q.rowwise() += p.bq.transpose();
  c.k = c.tokens * p.wk;
  c.k.rowwise() += p.bk.transpose();
  c.v = c.tokens * p.wv;
  c.v.rowwise() += p.bv.transpose();

  c.probs.resize(static_cast<std::size_t>(H));
  c.concat.resize(z.size(), cfg.embed);
  for (int h = 0; h < H; ++h) {
    Mat s = (c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose()) * scale;
    detail::softmax_rows(s);
    c.concat.middleCols(h * dh, dh).noalias() = s * c.v.middleCols(h * dh, dh);
    c.probs[static_cast<std::size_t>(h)] = std::move(s);
  }
  Mat attended = c.concat * p.wo;
  attended.rowwise() += p.bo.transpose();

  c.hidden = detail::layer_norm(c.tokens + attended, p.ln1_gamma, p.ln1_beta, c.ln1);
  c.ffn_pre = c.hidden * p.ffn_w1;
  c.ffn_pre.rowwise() += p.ffn_b1.transpose();
  c.ffn_act = c.ffn_pre.cwiseMax(0.0);
  Mat ffn_out = c.ffn_act * p.ffn_w2;
  ffn_out.rowwise() += p.ffn_b2.transpose();
  c.normed = detail::layer_norm(c.hidden + ffn_out, p.ln2_gamma, p.ln2_beta, c.ln2);

  c.delta = c.normed * p.w_out;
  c.gate = detail::sigmoid(p.G * z);
  return z + c.gate.cwiseProduct(c.delta);
}

// Returns dL/dz for the block input.
inline Vec attention_block_backward(const AttentionCache& c, const Vec& dzt, const ModelParams& p,
                                    const ModelConfig& cfg, ModelParams& g) {
  if (!cfg.use_attention) return dzt;
  const int H = cfg.heads, dh = cfg.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Vec dz = dzt;
  const Vec ddelta = dzt.cwiseProduct(c.gate);
  const Vec dgate_pre = dzt.cwiseProduct(c.delta).cwiseProduct((c.gate.array() * (1.0 - c.gate.array())).matrix());
  g.G.noalias() += dgate_pre * c.z.transpose();
  dz.noalias() += p.G.transpose() * dgate_pre;

  g.w_out.noalias() += c.normed.transpose() * ddelta;
  const Mat dnormed = ddelta * p.w_out.transpose();
  const Mat dres2 = detail::layer_norm_backward(dnormed, p.ln2_gamma, c.ln2, g.ln2_gamma, g.ln2_beta);

  // FFN branch
  g.ffn_w2.noalias() += c.ffn_act.transpose() * dres2;
  g.ffn_b2 += dres2.colwise().sum().transpose();
  Mat dpre = dres2 * p.ffn_w2.transpose();
  dpre = dpre.cwiseProduct((c.ffn_pre.array() > 0.0).cast<double>().matrix());
  g.ffn_w1.noalias() += c.hidden.transpose() * dpre;
  g.ffn_b1 += dpre.colwise().sum().transpose();
  const Mat dhidden = dres2 + dpre * p.ffn_w1.transpose();

  const Mat dres1 = detail::layer_norm_backward(dhidden, p.ln1_gamma, c.ln1, g.ln1_gamma, g.ln1_beta);
  Mat dtokens = dres1;

  g.wo.noalias() += c.concat.transpose() * dres1;
  g.bo += dres1.colwise().sum().transpose();
  const Mat dconcat = dres1 * p.wo.transpose();

  Mat dq(c.q.rows(), c.q.cols()), dk(c.k.rows(), c.k.cols()), dv(c.v.rows(), c.v.cols());
  for (int h = 0; h < H; ++h) {
    const Mat& P = c.probs[static_cast<std::size_t>(h)];
    const auto dO = dconcat.middleCols(h * dh, dh);
    const Mat dP = dO * c.v.middleCols(h * dh, dh).transpose();
    dv.middleCols(h * dh, dh).noalias() = P.transpose() * dO;
    Mat dS = P.cwiseProduct(dP);
    const Vec row_dot = dS.rowwise().sum();
    dS -= P.cwiseProduct(row_dot * Eigen::RowVectorXd::Ones(P.cols()));
    dS *= scale;
    dq.middleCols(h * dh, dh).noalias() = dS * c.k.middleCols(h * dh, dh);
    dk.middleCols(h * dh, dh).noalias() = dS.transpose() * c.q.middleCols(h * dh, dh);
  }
  g.wq.noalias() += c.tokens.transpose() * dq;
  g.wk.noalias() += c.tokens.transpose() * dk;
  g.wv.noalias() += c.tokens.transpose() * dv;
  g.bq += dq.colwise().sum().transpose();
  g.bk += dk.colwise().sum().transpose();
  g.bv += dv.colwise().sum().transpose();
  dtokens.noalias() += dq * p.wq.transpose();
  dtokens.noalias() += dk * p.wk.transpose();
  dtokens.noalias() += dv * p.wv.transpose();

  // tokens = diag(z) E
  g.E.noalias() += c.z.asDiagonal() * dtokens;
  dz += (dtokens.cwiseProduct(p.E)).rowwise().sum();
  return dz;
}

// ---------------------------------------------------------------------------
// Output head and the full sequence

inline Vec output_head(const Vec& zt, const ModelParams& p) { return p.A * zt + p.c; }

struct LatentTrace {
  std::vector<Vec> h, f, z, z_attended, yhat;
  std::size_t size() const { return yhat.size(); }
};

struct StepCache {
  CellCache cell;
  FourierCache fourier;
  AttentionCache attention;
};

namespace detail {

inline void check_sequence(std::span<const double> x0, std::span<const Mat> feats, const ModelConfig& cfg) {
  if (cfg.use_fourier && feats.size() != x0.size())
    throw ShapeError("feature sequence length differs from x0 sequence length");
}

}  // namespace detail

// Runs the model over a sequence starting from `h_init` (h0 when empty).
// When caches is non-null it receives one StepCache per step for backward.
inline LatentTrace forward_sequence(std::span<const double> x0, std::span<const Mat> feats,
                                    const ModelParams& p, const ModelConfig& cfg, const Vec* h_init = nullptr,
                                    std::vector<StepCache>* caches = nullptr) {
  detail::check_sequence(x0, feats, cfg);
  const std::size_t T = x0.size();
  LatentTrace tr;
  for (auto* v : {&tr.h, &tr.f, &tr.z, &tr.z_attended, &tr.yhat}) v->reserve(T);
  if (caches) caches->assign(T, StepCache{});
  Vec h = h_init ? *h_init : p.h0;
  for (std::size_t t = 0; t < T; ++t) {
    StepCache* sc = caches ? &(*caches)[t] : nullptr;
    h = rnn_step(h, x0[t], p, cfg, sc ? &sc->cell : nullptr);
    Vec f = cfg.use_fourier ? fourier_project(feats[t], p, sc ? &sc->fourier : nullptr)
                            : Vec::Zero(cfg.latent);
    Vec z = h + f;
    Vec zt = attention_block(z, p, cfg, sc ? &sc->attention : nullptr);
    tr.yhat.push_back(output_head(zt, p));
    tr.h.push_back(h);
    tr.f.push_back(std::move(f));
    tr.z.push_back(std::move(z));
    tr.z_attended.push_back(std::move(zt));
  }
  return tr;
}

}  // namespace loadscale
