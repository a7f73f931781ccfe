// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_LOSSES_HPP
#define DPA_LOSSES_HPP

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dpa/reranker.hpp"

namespace dpa {

inline double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

inline constexpr double kProbClamp = 1e-7;

/// Loss value plus its gradient w.r.t. the shared parameters (W, b).
struct LossGrad {
  double loss = 0.0;
  Vec grad_W;
  double grad_b = 0.0;

  Vec flattened() const {
    Vec flat = grad_W;
    flat.push_back(grad_b);
    return flat;
  }
};

/// One point-wise sample: (query, document, aligned/unaligned label).
struct TrainExample {
  std::string query_id;
  std::string doc_id;
  Vec q_emb;
  Vec d_emb;
  int label = 0;  // 1 = aligned (positive), 0 = unaligned (negative)
};

/// One ranking pair sharing a query: winner must outscore loser.
struct TrainPair {
  Vec q_emb;
  Vec d_win;
  Vec d_lose;
};

/// One element of a contrastive batch. Queries project through W', documents
/// through W; elements sharing a label are mutual positives.
struct SclItem {
  Vec emb;
  bool is_query = false;
  int label = 0;
};

namespace detail {

inline void add_outer(Vec& grad_W, std::size_t dim, double coeff,
                      std::span<const double> left, std::span<const double> right) {
  for (std::size_t i = 0; i < dim; ++i) {
    const double c = coeff * left[i];
    double* row = grad_W.data() + i * dim;
    for (std::size_t j = 0; j < dim; ++j) row[j] += c * right[j];
  }
}

}  // namespace detail

/// Mean binary cross-entropy of the logistic of the bilinear score, with
/// probabilities clamped to [1e-7, 1 - 1e-7]. Inside the clamp the gradient
/// is the usual (p - y); at the clamp the loss is flat, so the gradient
/// there is exactly zero (finite differences agree).
inline LossGrad point_loss_grad(const RerankerModel& model,
                                std::span<const TrainExample> batch) {
  if (batch.empty()) throw std::invalid_argument("point loss needs a non-empty batch");
  const std::size_t d = model.dim;
  LossGrad out;
  out.grad_W.assign(d * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (const auto& ex : batch) {
    const double z = model.score(ex.q_emb, ex.d_emb);
    const double p = stable_sigmoid(z);
    const double y = static_cast<double>(ex.label);
    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
    const double pc = std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
    out.loss += -(y * std::log(pc) + (1.0 - y) * std::log1p(-pc)) * inv_n;
    if (!clamped) {
      const double dz = (p - y) * inv_n;
      detail::add_outer(out.grad_W, d, dz, ex.q_emb, ex.d_emb);
      out.grad_b += dz;
    }
  }
  return out;
}

/// Mean softplus of the negated winner-loser margin over the supplied pairs
/// (for one subset of k documents that is exactly the 1/C(k,2) form).
/// The bias cancels inside the margin, so grad_b is identically zero.
inline LossGrad pair_loss_grad(const RerankerModel& model,
                               std::span<const TrainPair> pairs) {
  if (pairs.empty()) throw std::invalid_argument("pair loss needs at least one pair");
  const std::size_t d = model.dim;
  LossGrad out;
  out.grad_W.assign(d * d, 0.0);
  const double inv_n = 1.0 / static_cast<double>(pairs.size());

  Vec diff(d);
  for (const auto& pr : pairs) {
    const double margin = model.score(pr.q_emb, pr.d_win) - model.score(pr.q_emb, pr.d_lose);
    out.loss += softplus(-margin) * inv_n;
    const double dm = (stable_sigmoid(margin) - 1.0) * inv_n;
    for (std::size_t j = 0; j < d; ++j) diff[j] = pr.d_win[j] - pr.d_lose[j];
    detail::add_outer(out.grad_W, d, dm, pr.q_emb, diff);
  }
  return out;
}

/// Supervised contrastive loss over L2-normalized projections. Every batch
/// element acts as an anchor; anchors without a same-label partner are
/// skipped. The denominator sums exp(sim/tau) over all other elements, the
/// positive included, so each log term is <= 0 and the loss is >= 0.
inline LossGrad scl_loss_grad(const RerankerModel& model,
                              std::span<const SclItem> batch, double tau) {
  if (batch.size() < 2) throw std::invalid_argument("SCL needs a batch of >= 2");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
  const std::size_t n = batch.size();
  const std::size_t d = model.dim;

  // Projections and their normalizations.
  std::vector<Vec> raw(n), unit(n);
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = batch[i].is_query ? model.project_query(batch[i].emb)
                               : model.project_doc(batch[i].emb);
    double nn = 0.0;
    for (double v : raw[i]) nn += v * v;
    norms[i] = std::sqrt(nn);
    if (norms[i] == 0.0) {
      throw std::domain_error("SCL projection has zero norm; model is degenerate");
    }
    // NaN/inf norms propagate into the loss so training can report divergence
    unit[i] = raw[i];
    for (double& v : unit[i]) v /= norms[i];
  }

  std::vector<double> sims(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t a = 0; a < d; ++a) s += unit[i][a] * unit[j][a];
      sims[i * n + j] = s;
      sims[j * n + i] = s;
    }
  }

  std::vector<int> label_count(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (batch[i].label == batch[j].label) ++label_count[i];
    }
  }

  LossGrad out;
  out.grad_W.assign(d * d, 0.0);
  std::vector<double> coeff(n * n, 0.0);  // d(loss)/d(sim[anchor][other])

  for (std::size_t i = 0; i < n; ++i) {
    const int positives = label_count[i] - 1;
    if (positives < 1) continue;  // no same-label partner: anchor skipped

    double max_s = -1e300;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) max_s = std::max(max_s, sims[i * n + k] / tau);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) denom += std::exp(sims[i * n + k] / tau - max_s);
    }
    const double lse = max_s + std::log(denom);

    double pos_sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i || batch[j].label != batch[i].label) continue;
      pos_sum += sims[i * n + j] / tau;
    }
    out.loss += lse - pos_sum / positives;

    const double inv_pos_tau = 1.0 / (positives * tau);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      double c = std::exp(sims[i * n + k] / tau - max_s) / denom / tau;
      if (batch[k].label == batch[i].label) c -= inv_pos_tau;
      coeff[i * n + k] = c;
    }
  }

  // Chain back: sims -> unit -> raw -> W.
  Vec g_h(d), g_u(d);
  for (std::size_t m = 0; m < n; ++m) {
    std::fill(g_h.begin(), g_h.end(), 0.0);
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == m) continue;
      const double c = coeff[m * n + j] + coeff[j * n + m];
      if (c == 0.0) continue;
      any = true;
      for (std::size_t a = 0; a < d; ++a) g_h[a] += c * unit[j][a];
    }
    if (!any) continue;

    double dot = 0.0;
    for (std::size_t a = 0; a < d; ++a) dot += g_h[a] * unit[m][a];
    for (std::size_t a = 0; a < d; ++a) {
      g_u[a] = (g_h[a] - dot * unit[m][a]) / norms[m];
    }
    if (batch[m].is_query) {
      // raw = W' e  =>  dW[a][b] += e[a] * g_u[b]
      detail::add_outer(out.grad_W, d, 1.0, batch[m].emb, g_u);
    } else {
      // raw = W e   =>  dW[a][b] += g_u[a] * e[b]
      detail::add_outer(out.grad_W, d, 1.0, g_u, batch[m].emb);
    }
  }
  return out;
}

}  // namespace dpa

#endif  // DPA_LOSSES_HPP
