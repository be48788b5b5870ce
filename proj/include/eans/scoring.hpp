#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "eans/adam.hpp"
#include "eans/dataset.hpp"
#include "eans/params.hpp"

namespace eans {

// All five scores are dissimilarities: lower means more plausible.
//
//   transe    ||h + r - t||_1  (or _2)
//   transd    ||h_p + r - t_p||_2,  h_p = h + (w_h . h) w_r,  t_p likewise
//   distmult  -sum h r t
//   complex   -Re(sum h r conj(t))
//   rotate    ||h o exp(i theta) - t||_2
//
// Arithmetic is 64-bit regardless of the storage type.

namespace detail {

template <typename Real>
double dot(std::span<const Real> a, std::span<const Real> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return s;
}

// When `acc` is non-null, coef * df/dtheta is added into it.

template <typename Real>
double transe(const ModelParams<Real>& p, const Triple& tr, double coef,
              GradAccumulator* acc) {
  const auto h = p.table(tables::kEntityEmb).row(tr.head);
  const auto r = p.table(tables::kRelation).row(tr.relation);
  const auto t = p.table(tables::kEntityEmb).row(tr.tail);
  const std::size_t d = h.size();
  if (p.spec.transe_norm == Norm::kL1) {
    double f = 0;
    for (std::size_t j = 0; j < d; ++j)
      f += std::abs(static_cast<double>(h[j]) + static_cast<double>(r[j]) -
                    static_cast<double>(t[j]));
    if (acc) {
      auto gh = acc->row(tables::kEntityEmb, tr.head);
      auto gr = acc->row(tables::kRelation, tr.relation);
      auto gt = acc->row(tables::kEntityEmb, tr.tail);
      for (std::size_t j = 0; j < d; ++j) {
        const double s =
            coef * sign0(static_cast<double>(h[j]) + static_cast<double>(r[j]) -
                         static_cast<double>(t[j]));
        gh[j] += s;
        gr[j] += s;
        gt[j] -= s;
      }
    }
    return f;
  }
  double sq = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double x = static_cast<double>(h[j]) + static_cast<double>(r[j]) -
                     static_cast<double>(t[j]);
    sq += x * x;
  }
  const double f = std::sqrt(sq);
  if (acc && f > 0) {
    auto gh = acc->row(tables::kEntityEmb, tr.head);
    auto gr = acc->row(tables::kRelation, tr.relation);
    auto gt = acc->row(tables::kEntityEmb, tr.tail);
    for (std::size_t j = 0; j < d; ++j) {
      const double u = coef *
                       (static_cast<double>(h[j]) + static_cast<double>(r[j]) -
                        static_cast<double>(t[j])) /
                       f;
      gh[j] += u;
      gr[j] += u;
      gt[j] -= u;
    }
  }
  return f;
}

template <typename Real>
double transd(const ModelParams<Real>& p, const Triple& tr, double coef,
              GradAccumulator* acc) {
  using namespace tables;
  const auto h = p.table(kEntityEmb).row(tr.head);
  const auto wh = p.table(kEntityTransfer).row(tr.head);
  const auto t = p.table(kEntityEmb).row(tr.tail);
  const auto wt = p.table(kEntityTransfer).row(tr.tail);
  const auto r = p.table(kTransDRelationEmb).row(tr.relation);
  const auto wr = p.table(kTransDRelationTransfer).row(tr.relation);
  const std::size_t d = h.size();
  const double a = dot(wh, h);
  const double b = dot(wt, t);
  thread_local std::vector<double> diff;
  diff.resize(d);
  double sq = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double w = static_cast<double>(wr[j]);
    diff[j] = static_cast<double>(h[j]) + a * w + static_cast<double>(r[j]) -
              static_cast<double>(t[j]) - b * w;
    sq += diff[j] * diff[j];
  }
  const double f = std::sqrt(sq);
  if (acc && f > 0) {
    double u_wr = 0;
    for (std::size_t j = 0; j < d; ++j)
      u_wr += diff[j] / f * static_cast<double>(wr[j]);
    auto gh = acc->row(kEntityEmb, tr.head);
    auto gwh = acc->row(kEntityTransfer, tr.head);
    auto gt = acc->row(kEntityEmb, tr.tail);
    auto gwt = acc->row(kEntityTransfer, tr.tail);
    auto gr = acc->row(kTransDRelationEmb, tr.relation);
    auto gwr = acc->row(kTransDRelationTransfer, tr.relation);
    for (std::size_t j = 0; j < d; ++j) {
      const double u = diff[j] / f;
      gh[j] += coef * (u + static_cast<double>(wh[j]) * u_wr);
      gwh[j] += coef * static_cast<double>(h[j]) * u_wr;
      gt[j] -= coef * (u + static_cast<double>(wt[j]) * u_wr);
      gwt[j] -= coef * static_cast<double>(t[j]) * u_wr;
      gr[j] += coef * u;
      gwr[j] += coef * (a - b) * u;
    }
  }
  return f;
}

template <typename Real>
double distmult(const ModelParams<Real>& p, const Triple& tr, double coef,
                GradAccumulator* acc) {
  const auto h = p.table(tables::kEntityEmb).row(tr.head);
  const auto r = p.table(tables::kRelation).row(tr.relation);
  const auto t = p.table(tables::kEntityEmb).row(tr.tail);
  const std::size_t d = h.size();
  double s = 0;
  for (std::size_t j = 0; j < d; ++j)
    s += static_cast<double>(h[j]) * static_cast<double>(r[j]) *
         static_cast<double>(t[j]);
  if (acc) {
    auto gh = acc->row(tables::kEntityEmb, tr.head);
    auto gr = acc->row(tables::kRelation, tr.relation);
    auto gt = acc->row(tables::kEntityEmb, tr.tail);
    for (std::size_t j = 0; j < d; ++j) {
      const double hj = h[j], rj = r[j], tj = t[j];
      gh[j] -= coef * rj * tj;
      gr[j] -= coef * hj * tj;
      gt[j] -= coef * hj * rj;
    }
  }
  return -s;
}

template <typename Real>
double complex_(const ModelParams<Real>& p, const Triple& tr, double coef,
                GradAccumulator* acc) {
  const auto h = p.table(tables::kEntityEmb).row(tr.head);
  const auto r = p.table(tables::kRelation).row(tr.relation);
  const auto t = p.table(tables::kEntityEmb).row(tr.tail);
  const std::size_t d = h.size() / 2;
  double s = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double hr = h[j], hi = h[d + j], rr = r[j], ri = r[d + j],
                 tr_ = t[j], ti = t[d + j];
    s += hr * rr * tr_ + hi * rr * ti + hr * ri * ti - hi * ri * tr_;
  }
  if (acc) {
    auto gh = acc->row(tables::kEntityEmb, tr.head);
    auto gr = acc->row(tables::kRelation, tr.relation);
    auto gt = acc->row(tables::kEntityEmb, tr.tail);
    for (std::size_t j = 0; j < d; ++j) {
      const double hr = h[j], hi = h[d + j], rr = r[j], ri = r[d + j],
                   tr_ = t[j], ti = t[d + j];
      gh[j] -= coef * (rr * tr_ + ri * ti);
      gh[d + j] -= coef * (rr * ti - ri * tr_);
      gr[j] -= coef * (hr * tr_ + hi * ti);
      gr[d + j] -= coef * (hr * ti - hi * tr_);
      gt[j] -= coef * (hr * rr - hi * ri);
      gt[d + j] -= coef * (hi * rr + hr * ri);
    }
  }
  return -s;
}

template <typename Real>
double rotate(const ModelParams<Real>& p, const Triple& tr, double coef,
              GradAccumulator* acc) {
  const auto h = p.table(tables::kEntityEmb).row(tr.head);
  const auto theta = p.table(tables::kRelation).row(tr.relation);
  const auto t = p.table(tables::kEntityEmb).row(tr.tail);
  const std::size_t d = theta.size();
  thread_local std::vector<double> cs, sn, dre, dim;
  cs.resize(d);
  sn.resize(d);
  dre.resize(d);
  dim.resize(d);
  double sq = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double hr = h[j], hi = h[d + j];
    cs[j] = std::cos(static_cast<double>(theta[j]));
    sn[j] = std::sin(static_cast<double>(theta[j]));
    dre[j] = hr * cs[j] - hi * sn[j] - static_cast<double>(t[j]);
    dim[j] = hr * sn[j] + hi * cs[j] - static_cast<double>(t[d + j]);
    sq += dre[j] * dre[j] + dim[j] * dim[j];
  }
  const double f = std::sqrt(sq);
  if (acc && f > 0) {
    auto gh = acc->row(tables::kEntityEmb, tr.head);
    auto gth = acc->row(tables::kRelation, tr.relation);
    auto gt = acc->row(tables::kEntityEmb, tr.tail);
    for (std::size_t j = 0; j < d; ++j) {
      const double hr = h[j], hi = h[d + j];
      const double ure = coef * dre[j] / f, uim = coef * dim[j] / f;
      gh[j] += ure * cs[j] + uim * sn[j];
      gh[d + j] += -ure * sn[j] + uim * cs[j];
      gth[j] += ure * (-hr * sn[j] - hi * cs[j]) + uim * (hr * cs[j] - hi * sn[j]);
      gt[j] -= ure;
      gt[d + j] -= uim;
    }
  }
  return f;
}

template <typename Real>
double dispatch(const ModelParams<Real>& p, const Triple& tr, double coef,
                GradAccumulator* acc) {
  switch (p.spec.kind) {
    case ModelKind::kTransE: return transe(p, tr, coef, acc);
    case ModelKind::kTransD: return transd(p, tr, coef, acc);
    case ModelKind::kDistMult: return distmult(p, tr, coef, acc);
    case ModelKind::kComplEx: return complex_(p, tr, coef, acc);
    case ModelKind::kRotatE: return rotate(p, tr, coef, acc);
  }
  return 0;
}

}  // namespace detail

/// Dissimilarity f(h, r, t). The relation may be the substitution relation.
template <typename Real>
double score(const ModelParams<Real>& p, const Triple& t) {
  return detail::dispatch(p, t, 0.0, nullptr);
}

/// Adds coef * df/dtheta into `acc` and returns f.
template <typename Real>
double accumulate_score_grad(const ModelParams<Real>& p, const Triple& t,
                             double coef, GradAccumulator& acc) {
  return detail::dispatch(p, t, coef, &acc);
}

struct ScoreGrad {
  double value = 0;
  /// (table id, row) -> df/d row.
  std::map<std::pair<int, std::int32_t>, std::vector<double>> grads;
};

template <typename Real>
ScoreGrad score_grad(const ModelParams<Real>& p, const Triple& t) {
  GradAccumulator acc(p);
  ScoreGrad out;
  out.value = accumulate_score_grad(p, t, 1.0, acc);
  for (int tb = 0; tb < acc.num_tables(); ++tb)
    for (auto r : acc.touched_rows(tb)) {
      const auto g = acc.get(tb, r);
      out.grads[{tb, r}] = std::vector<double>(g.begin(), g.end());
    }
  return out;
}

/// f(e_pos, r_sub, e_neg): how well e_neg can stand in for e_pos.
template <typename Real>
double substitution_score(const ModelParams<Real>& p, EntityId e_pos,
                          EntityId e_neg) {
  return score(p, Triple{e_pos, p.spec.substitution_relation(), e_neg});
}

template <typename Real>
double accumulate_substitution_grad(const ModelParams<Real>& p, EntityId e_pos,
                                    EntityId e_neg, double coef,
                                    GradAccumulator& acc) {
  return accumulate_score_grad(
      p, Triple{e_pos, p.spec.substitution_relation(), e_neg}, coef, acc);
}

}  // namespace eans
