// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_MGDA_HPP
#define DPA_MGDA_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "dpa/reranker.hpp"

namespace dpa {

/// Simplex weights for the task losses. `degenerate` flags the all-zero
/// gradient case where uniform weights were returned as a fallback.
struct TaskWeights {
  std::vector<double> c;
  bool degenerate = false;
};

namespace detail {

/// f(alpha) = alpha' M alpha for the Gram matrix M of the task gradients.
inline double quad_form(const std::vector<double>& M, const std::vector<double>& alpha) {
  const std::size_t t = alpha.size();
  double acc = 0.0;
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = 0; j < t; ++j) acc += alpha[i] * M[i * t + j] * alpha[j];
  }
  return acc;
}

/// Solves the equality-constrained problem min a' M a, sum a = 1 restricted
/// to a support set, via the KKT system M_s a = lambda * 1. Returns false if
/// the face is singular or the solution leaves the simplex.
inline bool face_solution(const std::vector<double>& M, std::size_t t,
                          const std::vector<std::size_t>& support,
                          std::vector<double>& alpha_out) {
  const std::size_t s = support.size();
  // Gaussian elimination on [M_s | 1].
  std::vector<double> A(s * s);
  std::vector<double> rhs(s, 1.0);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) A[i * s + j] = M[support[i] * t + support[j]];
  }
  for (std::size_t col = 0; col < s; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < s; ++r) {
      if (std::fabs(A[r * s + col]) > std::fabs(A[pivot * s + col])) pivot = r;
    }
    if (std::fabs(A[pivot * s + col]) < 1e-12) return false;
    if (pivot != col) {
      for (std::size_t j = 0; j < s; ++j) std::swap(A[pivot * s + j], A[col * s + j]);
      std::swap(rhs[pivot], rhs[col]);
    }
    for (std::size_t r = col + 1; r < s; ++r) {
      const double f = A[r * s + col] / A[col * s + col];
      for (std::size_t j = col; j < s; ++j) A[r * s + j] -= f * A[col * s + j];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(s);
  for (std::size_t ri = s; ri-- > 0;) {
    double acc = rhs[ri];
    for (std::size_t j = ri + 1; j < s; ++j) acc -= A[ri * s + j] * x[j];
    x[ri] = acc / A[ri * s + ri];
  }
  double sum = 0.0;
  for (double v : x) sum += v;
  if (std::fabs(sum) < 1e-300) return false;

  alpha_out.assign(t, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    const double a = x[i] / sum;
    if (!(a >= 0.0)) return false;  // leaves the simplex (or NaN)
    alpha_out[support[i]] = a;
  }
  return true;
}

}  // namespace detail

/// Simplex weights minimizing || sum_t c_t g_t ||^2 (the MGDA-UB
/// subproblem): Frank-Wolfe with the analytic two-point line search, at most
/// 250 iterations or duality gap < 1e-10, then an exact face refinement for
/// T <= 3 since plain Frank-Wolfe can stall short of interior optima.
inline TaskWeights mgda_weights(const std::vector<Vec>& task_gradients) {
  const std::size_t t = task_gradients.size();
  if (t == 0) throw std::invalid_argument("mgda_weights needs at least one task");
  const std::size_t dim = task_gradients[0].size();
  for (const auto& g : task_gradients) {
    if (g.size() != dim) {
      throw std::invalid_argument("task gradients must share one dimension");
    }
  }

  if (t == 1) return {{1.0}, false};

  // Gram matrix of the gradients.
  std::vector<double> M(t * t);
  for (std::size_t i = 0; i < t; ++i) {
    for (std::size_t j = i; j < t; ++j) {
      double dot = 0.0;
      for (std::size_t a = 0; a < dim; ++a) dot += task_gradients[i][a] * task_gradients[j][a];
      M[i * t + j] = dot;
      M[j * t + i] = dot;
    }
  }

  double max_norm2 = 0.0;
  for (std::size_t i = 0; i < t; ++i) max_norm2 = std::max(max_norm2, M[i * t + i]);
  if (max_norm2 <= 1e-280) {
    return {std::vector<double>(t, 1.0 / static_cast<double>(t)), true};
  }

  std::vector<double> alpha(t, 1.0 / static_cast<double>(t));
  std::vector<double> v(t);
  for (int iter = 0; iter < 250; ++iter) {
    for (std::size_t i = 0; i < t; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < t; ++j) acc += M[i * t + j] * alpha[j];
      v[i] = acc;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < t; ++i) {
      if (v[i] < v[best]) best = i;
    }
    double f = 0.0;
    for (std::size_t i = 0; i < t; ++i) f += alpha[i] * v[i];
    const double gap = 2.0 * (f - v[best]);
    if (gap < 1e-10) break;

    // Line search between the current point w and g_best:
    // gamma* = (w.w - w.g) / ||w - g||^2, clipped to [0, 1].
    const double A = f, B = v[best], C = M[best * t + best];
    const double denom = A - 2.0 * B + C;
    double gamma;
    if (denom <= 0.0) {
      gamma = B < A ? 1.0 : 0.0;
    } else {
      gamma = std::clamp((A - B) / denom, 0.0, 1.0);
    }
    for (std::size_t i = 0; i < t; ++i) alpha[i] *= (1.0 - gamma);
    alpha[best] += gamma;
  }

  if (t <= 3) {
    double best_f = detail::quad_form(M, alpha);
    std::vector<double> candidate;
    std::vector<std::size_t> support;
    for (std::size_t mask = 1; mask < (std::size_t{1} << t); ++mask) {
      support.clear();
      for (std::size_t i = 0; i < t; ++i) {
        if (mask & (std::size_t{1} << i)) support.push_back(i);
      }
      if (support.size() == 1) {
        candidate.assign(t, 0.0);
        candidate[support[0]] = 1.0;
      } else if (!detail::face_solution(M, t, support, candidate)) {
        continue;
      }
      const double f = detail::quad_form(M, candidate);
      if (f < best_f) {
        best_f = f;
        alpha = candidate;
      }
    }
  }

  // Tidy: clip negative fuzz, renormalize to the simplex exactly.
  double sum = 0.0;
  for (double& a : alpha) {
    if (a < 0.0) a = 0.0;
    sum += a;
  }
  for (double& a : alpha) a /= sum;
  return {alpha, false};
}

/// The Pareto-descent direction implied by the weights: d = sum_t c_t g_t.
inline Vec combine_gradients(const std::vector<Vec>& task_gradients,
                             const std::vector<double>& weights) {
  if (task_gradients.empty() || task_gradients.size() != weights.size()) {
    throw std::invalid_argument("weights/gradients size mismatch");
  }
  Vec combined(task_gradients[0].size(), 0.0);
  for (std::size_t i = 0; i < task_gradients.size(); ++i) {
    for (std::size_t a = 0; a < combined.size(); ++a) {
      combined[a] += weights[i] * task_gradients[i][a];
    }
  }
  return combined;
}

}  // namespace dpa

#endif  // DPA_MGDA_HPP
