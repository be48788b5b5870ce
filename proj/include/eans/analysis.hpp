#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eans/config.hpp"
#include "eans/dataset.hpp"
#include "eans/eans_index.hpp"
#include "eans/evaluator.hpp"
#include "eans/sampling.hpp"
#include "eans/scoring.hpp"
#include "eans/trainer.hpp"

namespace eans {

/// How negatives are drawn when probing a checkpoint.
struct ProbeConfig {
  Strategy strategy = Strategy::kUniform;
  int n = 256;
  int batch_size = 1024;
  double sigma = 0;  // <= 0: 2|E| / k
  int k = 100;
  int kmeans_iters = 20;
  std::uint64_t seed = 0;

  static ProbeConfig from(const TrainConfig& t) {
    return {t.strategy, t.negatives, t.batch_size, t.sigma, t.k, t.kmeans_iters,
            t.seed};
  }
};

namespace detail {

/// Map to sample with: the checkpoint's own when given, otherwise a fresh
/// refresh of the parameters.
template <typename Real>
std::optional<VirtualIndexMap> probe_map(const ModelParams<Real>& p,
                                         const ProbeConfig& cfg,
                                         const VirtualIndexMap* stored) {
  if (cfg.strategy != Strategy::kEans) return std::nullopt;
  if (stored) return *stored;
  return refresh(p, cfg.k, refresh_seed(cfg.seed, 0), cfg.kmeans_iters);
}

/// Calls fn(positives, negatives) for `batches` freshly sampled batches.
template <typename Real, typename Fn>
void for_each_probe_batch(const ModelParams<Real>& p, const KgDataset& ds,
                          const ProbeConfig& cfg, const VirtualIndexMap* stored,
                          int batches, std::string_view stream, Fn&& fn) {
  const auto map = probe_map(p, cfg, stored);
  const SamplerConfig scfg{cfg.strategy, cfg.n,
                           cfg.sigma > 0 ? cfg.sigma
                                         : 2.0 * ds.num_entities() / cfg.k};
  std::vector<Triple> pos(static_cast<std::size_t>(cfg.batch_size));
  std::uniform_int_distribution<std::size_t> pick(0, ds.train.size() - 1);
  for (int b = 0; b < batches; ++b) {
    auto rng = make_stream(cfg.seed, stream, static_cast<std::uint64_t>(b));
    for (auto& t : pos) t = ds.train[pick(rng)];
    const auto nb = build_negative_batch(std::span<const Triple>(pos), b, scfg,
                                         map ? &*map : nullptr,
                                         ds.num_entities(), ds.filter, rng);
    fn(std::span<const Triple>(pos), nb);
  }
}

inline double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0 : s / static_cast<double>(xs.size());
}

inline double std_error(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0;
  const double m = mean_of(xs);
  double ss = 0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1) /
                   static_cast<double>(xs.size()));
}

}  // namespace detail

// --- score gaps -------------------------------------------------------------

struct ScoreGapRow {
  std::int64_t step = 0;
  Strategy strategy = Strategy::kUniform;
  int batches = 0;
  double mean_f_pos = 0;
  double mean_f_neg = 0;
  double se_pos = 0;  // standard error over per-batch means
  double se_neg = 0;
};

struct GapCheckpoint {
  std::int64_t step = 0;
  const ModelParams<float>* params = nullptr;
  const VirtualIndexMap* index_map = nullptr;
};

/// Mean dissimilarity of positives and of sampled negatives over `batches`
/// fresh mini-batches, one row per checkpoint per strategy.
inline std::vector<ScoreGapRow> score_gap_report(
    const std::vector<GapCheckpoint>& checkpoints, const KgDataset& ds,
    const ProbeConfig& base, const std::vector<Strategy>& strategies,
    int batches) {
  std::vector<ScoreGapRow> rows;
  for (const auto& ck : checkpoints) {
    for (Strategy s : strategies) {
      ProbeConfig cfg = base;
      cfg.strategy = s;
      std::vector<double> pos_means, neg_means;
      detail::for_each_probe_batch(
          *ck.params, ds, cfg, ck.index_map, batches, "analysis.gap",
          [&](std::span<const Triple> pos, const NegativeBatch& nb) {
            double sp = 0, sn = 0;
            for (std::size_t j = 0; j < pos.size(); ++j) {
              sp += score(*ck.params, pos[j]);
              for (EntityId e : nb.row(j))
                sn += score(*ck.params, corrupt(pos[j], nb.side, e));
            }
            pos_means.push_back(sp / static_cast<double>(pos.size()));
            neg_means.push_back(sn / static_cast<double>(pos.size() * nb.n));
          });
      rows.push_back({ck.step, s, batches, detail::mean_of(pos_means),
                      detail::mean_of(neg_means), detail::std_error(pos_means),
                      detail::std_error(neg_means)});
    }
  }
  return rows;
}

// --- negative weight CDF ------------------------------------------------------

/// Per positive, softmax of -f over its n negatives, sorted descending; the
/// sorted weight vectors are averaged over every positive of `batches`
/// mini-batches and cumulated. Entry i is the mass of the top i+1 negatives.
template <typename Real>
std::vector<double> neg_weight_cdf(const ModelParams<Real>& p,
                                   const KgDataset& ds, const ProbeConfig& cfg,
                                   const VirtualIndexMap* stored, int batches) {
  std::vector<double> avg(static_cast<std::size_t>(cfg.n), 0.0);
  std::size_t rows = 0;
  std::vector<double> f(static_cast<std::size_t>(cfg.n));
  detail::for_each_probe_batch(
      p, ds, cfg, stored, batches, "analysis.cdf",
      [&](std::span<const Triple> pos, const NegativeBatch& nb) {
        for (std::size_t j = 0; j < pos.size(); ++j) {
          const auto ents = nb.row(j);
          for (int i = 0; i < nb.n; ++i)
            f[i] = score(p, corrupt(pos[j], nb.side, ents[i]));
          auto w = self_adv_weights(f, 1.0);
          std::sort(w.begin(), w.end(), std::greater<>());
          for (int i = 0; i < nb.n; ++i) avg[i] += w[i];
          ++rows;
        }
      });
  double run = 0;
  for (auto& v : avg) {
    run += v / static_cast<double>(rows);
    v = run;
  }
  return avg;
}

// --- substitution histogram ---------------------------------------------------

enum class NegativeGroup { kTrueNegative = 0, kTrainFalseNegative = 1, kEvalFalseNegative = 2 };

inline const char* group_name(NegativeGroup g) {
  switch (g) {
    case NegativeGroup::kTrueNegative: return "true_negative";
    case NegativeGroup::kTrainFalseNegative: return "false_negative_train";
    case NegativeGroup::kEvalFalseNegative: return "false_negative_eval";
  }
  return "?";
}

struct GroupStats {
  std::size_t count = 0;
  double mean = 0;
  double sd = 0;
  double se() const {
    return count > 0 ? sd / std::sqrt(static_cast<double>(count)) : 0.0;
  }
};

struct SubstitutionHistogram {
  double lo = 0, hi = 0;
  int bins = 0;
  std::array<std::vector<std::size_t>, 3> counts;
  std::array<GroupStats, 3> stats;
  std::array<std::vector<double>, 3> values;  // raw f_sub per group

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& s : stats) n += s.count;
    return n;
  }
};

/// Two-sided gap between group means in units of pooled standard error.
inline double separation_in_se(const GroupStats& a, const GroupStats& b) {
  const double se = std::sqrt(a.se() * a.se() + b.se() * b.se());
  return se > 0 ? (a.mean - b.mean) / se : 0.0;
}

/// Samples negatives, scores f(anchor, r_sub, negative) for each, splits them
/// into true negatives, false negatives seen in training, and false negatives
/// only present in valid/test, and bins all three over their pooled range.
template <typename Real>
SubstitutionHistogram substitution_histogram(const ModelParams<Real>& p,
                                             bool substitution_trained,
                                             const KgDataset& ds,
                                             const ProbeConfig& cfg,
                                             const VirtualIndexMap* stored,
                                             int batches, int bins) {
  if (!substitution_trained)
    throw UserError("analysis",
                    "checkpoint was trained with use_substitution = 0: the "
                    "substitution relation exists but was never trained");
  if (bins < 1) throw ConfigError("hist_bins must be >= 1");
  SubstitutionHistogram h;
  h.bins = bins;
  detail::for_each_probe_batch(
      p, ds, cfg, stored, batches, "analysis.hist",
      [&](std::span<const Triple> pos, const NegativeBatch& nb) {
        for (std::size_t j = 0; j < pos.size(); ++j) {
          const EntityId anchor = corrupted_slot(pos[j], nb.side);
          const auto ents = nb.row(j);
          for (int i = 0; i < nb.n; ++i) {
            const Triple neg = corrupt(pos[j], nb.side, ents[i]);
            NegativeGroup g = NegativeGroup::kTrueNegative;
            if (nb.row_labels(j)[i]) g = NegativeGroup::kTrainFalseNegative;
            else if (ds.filter.contains(neg, FilterScope::kAllSplits))
              g = NegativeGroup::kEvalFalseNegative;
            h.values[static_cast<int>(g)].push_back(
                substitution_score(p, anchor, ents[i]));
          }
        }
      });
  bool any = false;
  for (const auto& vs : h.values)
    for (double v : vs) {
      if (!any) h.lo = h.hi = v;
      h.lo = std::min(h.lo, v);
      h.hi = std::max(h.hi, v);
      any = true;
    }
  const double width = h.hi > h.lo ? (h.hi - h.lo) / bins : 1.0;
  for (int g = 0; g < 3; ++g) {
    auto& c = h.counts[g];
    c.assign(static_cast<std::size_t>(bins), 0);
    const auto& vs = h.values[g];
    for (double v : vs) {
      const int b = std::min(bins - 1, static_cast<int>((v - h.lo) / width));
      ++c[static_cast<std::size_t>(b)];
    }
    auto& st = h.stats[g];
    st.count = vs.size();
    st.mean = detail::mean_of(vs);
    if (vs.size() > 1) {
      double ss = 0;
      for (double v : vs) ss += (v - st.mean) * (v - st.mean);
      st.sd = std::sqrt(ss / static_cast<double>(vs.size() - 1));
    }
  }
  return h;
}

// --- sweep ------------------------------------------------------------------

struct SweepCell {
  int n = 0;
  std::string strategy;
  TrainConfig config;
  Metrics metrics;
};

/// Training config for a named sweep strategy:
///   uniform       uniform sampling, no substitution loss
///   selfadv       uniform sampling with self-adversarial weights
///   eans          Gaussian sampling with the substitution loss
///   eans+selfadv  both
inline TrainConfig sweep_strategy_config(TrainConfig base, const std::string& name) {
  if (name == "uniform") {
    base.strategy = Strategy::kUniform;
    base.use_substitution = false;
    base.use_self_adv = false;
  } else if (name == "selfadv") {
    base.strategy = Strategy::kUniform;
    base.use_substitution = false;
    base.use_self_adv = true;
  } else if (name == "eans") {
    base.strategy = Strategy::kEans;
    base.use_substitution = true;
    base.use_self_adv = false;
  } else if (name == "eans+selfadv") {
    base.strategy = Strategy::kEans;
    base.use_substitution = true;
    base.use_self_adv = true;
  } else {
    throw ConfigError("unknown sweep strategy '" + name +
                      "' (expected uniform|selfadv|eans|eans+selfadv)");
  }
  return base;
}

/// One run per (n, strategy), with matched seeds; n varies slowest.
inline std::vector<SweepCell> run_sweep(const KgDataset& ds,
                                        const TrainConfig& base,
                                        const std::vector<int>& n_values,
                                        const std::vector<std::string>& strategies,
                                        Split split = Split::kTest,
                                        unsigned jobs = 1) {
  std::vector<SweepCell> cells;
  for (int n : n_values)
    for (const auto& s : strategies) {
      SweepCell c;
      c.n = n;
      c.strategy = s;
      c.config = sweep_strategy_config(base, s);
      c.config.negatives = n;
      cells.push_back(c);
    }
  run_cells(ds, cells, split, jobs);
  return cells;
}

// --- CSV writers ----------------------------------------------------------------

namespace detail {
inline std::ofstream open_csv(const std::filesystem::path& path,
                              const std::string& digest,
                              const std::vector<std::string>& notes = {}) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw UserError("analysis", "cannot write " + path.string());
  out << "# config_digest=" << digest << "\n";
  for (const auto& n : notes) out << "# " << n << "\n";
  return out;
}
}  // namespace detail

inline void write_gap_csv(const std::filesystem::path& path,
                          const std::string& digest,
                          const std::vector<ScoreGapRow>& rows) {
  auto out = detail::open_csv(
      path, digest,
      {"f is a dissimilarity (lower = more plausible); neg_* columns report -f"});
  out << "step,strategy,batches,mean_f_pos,mean_f_neg,se_pos,se_neg,"
         "score_pos,score_neg\n";
  for (const auto& r : rows)
    out << r.step << ',' << strategy_name(r.strategy) << ',' << r.batches << ','
        << detail::fmt_double(r.mean_f_pos) << ','
        << detail::fmt_double(r.mean_f_neg) << ',' << detail::fmt_double(r.se_pos)
        << ',' << detail::fmt_double(r.se_neg) << ','
        << detail::fmt_double(-r.mean_f_pos) << ','
        << detail::fmt_double(-r.mean_f_neg) << '\n';
}

inline void write_cdf_csv(const std::filesystem::path& path,
                          const std::string& digest, const ProbeConfig& cfg,
                          int batches, const std::vector<double>& cdf) {
  auto out = detail::open_csv(
      path, digest,
      {"strategy=" + std::string(strategy_name(cfg.strategy)) +
       " n=" + std::to_string(cfg.n) + " batch_size=" +
       std::to_string(cfg.batch_size) + " batches=" + std::to_string(batches)});
  out << "rank,cumulative_weight\n";
  for (std::size_t i = 0; i < cdf.size(); ++i)
    out << i + 1 << ',' << detail::fmt_double(cdf[i]) << '\n';
}

inline void write_hist_csv(const std::filesystem::path& path,
                           const std::string& digest,
                           const SubstitutionHistogram& h) {
  std::vector<std::string> notes = {
      "values are raw f(anchor, r_sub, negative); f is a dissimilarity"};
  for (int g = 0; g < 3; ++g)
    notes.push_back(std::string(group_name(static_cast<NegativeGroup>(g))) +
                    ": count=" + std::to_string(h.stats[g].count) +
                    " mean=" + detail::fmt_double(h.stats[g].mean) +
                    " sd=" + detail::fmt_double(h.stats[g].sd));
  auto out = detail::open_csv(path, digest, notes);
  out << "bin_lo,bin_hi,true_negative,false_negative_train,false_negative_eval\n";
  const double width = h.hi > h.lo ? (h.hi - h.lo) / h.bins : 1.0;
  for (int b = 0; b < h.bins; ++b)
    out << detail::fmt_double(h.lo + b * width) << ','
        << detail::fmt_double(h.lo + (b + 1) * width) << ',' << h.counts[0][b]
        << ',' << h.counts[1][b] << ',' << h.counts[2][b] << '\n';
}

template <typename Cell>
void write_grid_csv(const std::filesystem::path& path, const std::string& digest,
                    const std::vector<Cell>& cells,
                    std::function<std::string(const Cell&)> label,
                    const std::string& label_header) {
  auto out = detail::open_csv(path, digest);
  out << label_header << ",config_digest,mr,mrr,hits1,hits3,hits10\n";
  for (const auto& c : cells)
    out << label(c) << ',' << config_digest(c.config) << ','
        << detail::fmt_double(c.metrics.combined.mr) << ','
        << detail::fmt_double(c.metrics.combined.mrr) << ','
        << detail::fmt_double(c.metrics.combined.hits.at(1)) << ','
        << detail::fmt_double(c.metrics.combined.hits.at(3)) << ','
        << detail::fmt_double(c.metrics.combined.hits.at(10)) << '\n';
}

}  // namespace eans
