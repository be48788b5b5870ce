#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "eans/sampling.hpp"
#include "eans/scoring.hpp"

namespace eans {

/// How the substitution regularizer aggregates: |sum f_sub| or sum |f_sub|.
enum class SubRegMode { kAbsOfSum, kSumOfAbs };

struct LossConfig {
  double gamma = 9.0;
  /// Down-weight of f_sub inside the negative term.
  double lambda1 = 0.1;
  /// Weight of the substitution regularizer; negative means "same as lambda1".
  double lambda1_reg = -1.0;
  double lambda2 = 1.0;
  double alpha = 1.0;
  bool use_substitution = true;
  bool use_self_adv = false;
  SubRegMode reg_mode = SubRegMode::kAbsOfSum;

  double reg_weight() const { return lambda1_reg >= 0 ? lambda1_reg : lambda1; }
};

/// Value of the per-positive KG term and its partials.
struct KgLossTerms {
  double value = 0;
  double d_pos = 0;
  std::vector<double> d_neg;
  std::vector<double> d_sub;
};

struct SubLossTerms {
  double value = 0;
  std::vector<double> d_sub;
};

namespace detail {
inline void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs)
    if (!std::isfinite(x))
      throw NumericError(std::string("non-finite ") + what + " in loss input");
}
}  // namespace detail

/// -log s(gamma - f_pos) - sum_i w_i (1 - y_i) log s(f_neg_i - l1 f_sub_i - gamma)
/// with the substitution down-weight dropped when use_substitution is off.
inline KgLossTerms kg_loss(double f_pos, std::span<const double> f_negs,
                           std::span<const double> f_subs,
                           std::span<const std::uint8_t> y,
                           std::span<const double> weights,
                           const LossConfig& cfg) {
  detail::require_finite({&f_pos, 1}, "positive score");
  detail::require_finite(f_negs, "negative score");
  if (cfg.use_substitution) detail::require_finite(f_subs, "substitution score");
  detail::require_finite(weights, "weight");

  const std::size_t n = f_negs.size();
  KgLossTerms out;
  out.d_neg.assign(n, 0.0);
  out.d_sub.assign(n, 0.0);
  out.value = softplus(f_pos - cfg.gamma);
  out.d_pos = sigmoid(f_pos - cfg.gamma);
  const double l1 = cfg.use_substitution ? cfg.lambda1 : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i]) continue;
    const double fs = cfg.use_substitution ? f_subs[i] : 0.0;
    const double x = f_negs[i] - l1 * fs - cfg.gamma;
    out.value += weights[i] * softplus(-x);
    const double g = -weights[i] * sigmoid(-x);  // d/dx
    out.d_neg[i] = g;
    out.d_sub[i] = -l1 * g;
  }
  return out;
}

/// -(l2 / N) sum_i y_i log s(f_sub_i) + l1 * |sum_i f_sub_i|
/// (or l1 * sum_i |f_sub_i| under kSumOfAbs).
inline SubLossTerms sub_loss(std::span<const double> f_subs,
                             std::span<const std::uint8_t> y,
                             const LossConfig& cfg) {
  detail::require_finite(f_subs, "substitution score");
  const std::size_t n = f_subs.size();
  SubLossTerms out;
  out.d_sub.assign(n, 0.0);
  if (n == 0) return out;
  const double scale = cfg.lambda2 / static_cast<double>(n);
  const double reg = cfg.reg_weight();
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += f_subs[i];
    if (y[i]) {
      out.value += scale * softplus(-f_subs[i]);
      out.d_sub[i] = -scale * sigmoid(-f_subs[i]);
    }
  }
  if (cfg.reg_mode == SubRegMode::kAbsOfSum) {
    out.value += reg * std::abs(sum);
    const double s = sign0(sum);
    for (auto& d : out.d_sub) d += reg * s;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      out.value += reg * std::abs(f_subs[i]);
      out.d_sub[i] += reg * sign0(f_subs[i]);
    }
  }
  return out;
}

struct LossBreakdown {
  double total = 0;
  double kg_part = 0;
  double sub_part = 0;
  double mean_f_pos = 0;
  double mean_f_neg = 0;
};

/// Optional inputs for batch_loss.
struct BatchLossOptions {
  /// Per-negative weights to use instead of computing them (b * n values).
  /// Lets tests check that weights are treated as constants.
  const std::vector<double>* frozen_weights = nullptr;
};

/// Mean over positives of kg_loss + sub_loss for one batch. When `acc` is
/// given, the gradient of the total is routed through the score gradients
/// into it (positive, corrupted and substitution rows alike).
template <typename Real>
LossBreakdown batch_loss(const ModelParams<Real>& p,
                         std::span<const Triple> positives,
                         const NegativeBatch& nb, const LossConfig& cfg,
                         GradAccumulator* acc, BatchLossOptions opts = {}) {
  LossBreakdown out;
  const std::size_t b = positives.size();
  if (b == 0) return out;
  const int n = nb.n;
  const double inv_b = 1.0 / static_cast<double>(b);
  std::vector<double> f_neg(n), f_sub(n, 0.0), w(n);

  for (std::size_t j = 0; j < b; ++j) {
    const Triple& pos = positives[j];
    const auto ents = nb.row(j);
    const auto y = nb.row_labels(j);
    const EntityId anchor = corrupted_slot(pos, nb.side);

    const double f_pos = score(p, pos);
    for (int i = 0; i < n; ++i) {
      f_neg[i] = score(p, corrupt(pos, nb.side, ents[i]));
      if (cfg.use_substitution) f_sub[i] = substitution_score(p, anchor, ents[i]);
    }
    if (opts.frozen_weights) {
      std::copy_n(opts.frozen_weights->begin() + static_cast<std::ptrdiff_t>(j * n), n, w.begin());
    } else if (cfg.use_self_adv) {
      w = self_adv_weights(f_neg, cfg.alpha);
    } else {
      std::fill(w.begin(), w.end(), 1.0 / n);
    }

    const auto kg = kg_loss(f_pos, f_neg, f_sub, y, w, cfg);
    SubLossTerms sub;
    if (cfg.use_substitution) sub = sub_loss(f_sub, y, cfg);

    out.kg_part += kg.value * inv_b;
    out.sub_part += sub.value * inv_b;
    out.mean_f_pos += f_pos * inv_b;
    double mean_neg = 0;
    for (double v : f_neg) mean_neg += v;
    out.mean_f_neg += mean_neg / n * inv_b;

    if (!acc) continue;
    accumulate_score_grad(p, pos, kg.d_pos * inv_b, *acc);
    for (int i = 0; i < n; ++i) {
      if (kg.d_neg[i] != 0)
        accumulate_score_grad(p, corrupt(pos, nb.side, ents[i]),
                              kg.d_neg[i] * inv_b, *acc);
      if (cfg.use_substitution) {
        const double d = (kg.d_sub[i] + sub.d_sub[i]) * inv_b;
        if (d != 0) accumulate_substitution_grad(p, anchor, ents[i], d, *acc);
      }
    }
  }
  out.total = out.kg_part + out.sub_part;
  return out;
}

}  // namespace eans
