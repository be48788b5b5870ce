#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "eans/dataset.hpp"
#include "eans/sampling.hpp"
#include "eans/scoring.hpp"

#include <json.hpp>

namespace eans {

inline constexpr std::array<int, 3> kHitsAt = {1, 3, 10};

struct RankSummary {
  std::size_t count = 0;
  double mr = 0;
  double mrr = 0;
  std::map<int, double> hits;  // N -> fraction with rank <= N
};

struct Metrics {
  RankSummary head;      // predicting the head of (?, r, t)
  RankSummary tail;      // predicting the tail of (h, r, ?)
  RankSummary combined;  // both directions pooled
  bool filtered = true;
};

inline RankSummary summarize_ranks(std::span<const double> ranks) {
  RankSummary s;
  s.count = ranks.size();
  for (int n : kHitsAt) s.hits[n] = 0;
  if (ranks.empty()) return s;
  for (double r : ranks) {
    s.mr += r;
    s.mrr += 1.0 / r;
    for (int n : kHitsAt)
      if (r <= n) s.hits[n] += 1;
  }
  const double k = static_cast<double>(ranks.size());
  s.mr /= k;
  s.mrr /= k;
  for (auto& [_, v] : s.hits) v /= k;
  return s;
}

/// Rank of the true entity among all completions of the corrupted side.
/// Ties count half: rank = 1 + #better + #equal / 2. Under `filtered`, other
/// completions that form known triples (any split) are skipped.
template <typename Real>
double rank_triple(const ModelParams<Real>& p, const Triple& t, Side side,
                   const FilterIndex& filter, bool filtered = true) {
  const double f_true = score(p, t);
  const auto known = side == Side::kTail ? filter.known_tails(t.head, t.relation)
                                         : filter.known_heads(t.relation, t.tail);
  const EntityId truth = corrupted_slot(t, side);
  std::size_t better = 0, equal = 0;
  auto k = known.begin();
  for (EntityId c = 0; c < p.spec.num_entities; ++c) {
    if (c == truth) continue;
    if (filtered) {
      while (k != known.end() && *k < c) ++k;
      if (k != known.end() && *k == c) continue;
    }
    const double f = score(p, corrupt(t, side, c));
    if (f < f_true)
      ++better;
    else if (f == f_true)
      ++equal;
  }
  return 1.0 + static_cast<double>(better) + static_cast<double>(equal) / 2.0;
}

struct EvalOptions {
  bool filtered = true;
  unsigned threads = 1;
};

struct EvalRanks {
  std::vector<double> head, tail;
};

/// Ranks both sides of every triple. Work is split into contiguous chunks;
/// each rank lands in its own slot, so the result is independent of the
/// thread count.
template <typename Real>
EvalRanks rank_all(const ModelParams<Real>& p, std::span<const Triple> triples,
                   const FilterIndex& filter, EvalOptions opts = {}) {
  EvalRanks out;
  out.head.resize(triples.size());
  out.tail.resize(triples.size());
  auto work = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      out.head[i] = rank_triple(p, triples[i], Side::kHead, filter, opts.filtered);
      out.tail[i] = rank_triple(p, triples[i], Side::kTail, filter, opts.filtered);
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(opts.threads,
                                      static_cast<unsigned>(triples.size())));
  if (threads <= 1) {
    work(0, triples.size());
    return out;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (triples.size() + threads - 1) / threads;
  for (unsigned w = 0; w < threads; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(triples.size(), lo + chunk);
    if (lo < hi) pool.emplace_back(work, lo, hi);
  }
  for (auto& th : pool) th.join();
  return out;
}

template <typename Real>
Metrics evaluate(const ModelParams<Real>& p, std::span<const Triple> triples,
                 const FilterIndex& filter, EvalOptions opts = {}) {
  const auto ranks = rank_all(p, triples, filter, opts);
  Metrics m;
  m.filtered = opts.filtered;
  m.head = summarize_ranks(ranks.head);
  m.tail = summarize_ranks(ranks.tail);
  std::vector<double> both(ranks.head);
  both.insert(both.end(), ranks.tail.begin(), ranks.tail.end());
  m.combined = summarize_ranks(both);
  return m;
}

inline nlohmann::ordered_json to_json(const RankSummary& s) {
  nlohmann::ordered_json j;
  j["count"] = s.count;
  j["mr"] = s.mr;
  j["mrr"] = s.mrr;
  for (const auto& [n, v] : s.hits) j["hits@" + std::to_string(n)] = v;
  return j;
}

inline nlohmann::ordered_json to_json(const Metrics& m) {
  nlohmann::ordered_json j;
  j["setting"] = m.filtered ? "filtered" : "raw";
  j["combined"] = to_json(m.combined);
  j["head"] = to_json(m.head);
  j["tail"] = to_json(m.tail);
  return j;
}

inline std::string metrics_csv_header() {
  return "dataset,model,strategy,split,mr,mrr,hits1,hits3,hits10,"
         "head_mr,head_mrr,head_hits10,tail_mr,tail_mrr,tail_hits10";
}

inline std::string metrics_csv_row(std::string_view dataset,
                                   std::string_view model,
                                   std::string_view strategy,
                                   std::string_view split, const Metrics& m) {
  std::ostringstream os;
  os.precision(6);
  os << dataset << ',' << model << ',' << strategy << ',' << split << ','
     << m.combined.mr << ',' << m.combined.mrr << ','
     << m.combined.hits.at(1) << ',' << m.combined.hits.at(3) << ','
     << m.combined.hits.at(10) << ',' << m.head.mr << ',' << m.head.mrr << ','
     << m.head.hits.at(10) << ',' << m.tail.mr << ',' << m.tail.mrr << ','
     << m.tail.hits.at(10);
  return os.str();
}

}  // namespace eans
