#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "eans/dataset.hpp"
#include "eans/eans_index.hpp"

namespace eans {

enum class Strategy { kUniform, kEans };
enum class Side { kHead, kTail };

inline std::string_view strategy_name(Strategy s) {
  return s == Strategy::kEans ? "eans" : "uniform";
}

inline Strategy parse_strategy(std::string_view s) {
  if (s == "uniform") return Strategy::kUniform;
  if (s == "eans") return Strategy::kEans;
  throw ConfigError("unknown strategy '" + std::string(s) +
                    "' (expected uniform|eans)");
}

/// Uniform over [0, num_entities) excluding `pos`.
template <typename Urbg>
EntityId sample_uniform(std::int32_t num_entities, EntityId pos, Urbg& rng) {
  if (num_entities < 2)
    throw ConfigError("uniform sampling needs at least 2 entities");
  auto u = std::uniform_int_distribution<EntityId>(0, num_entities - 2)(rng);
  if (u >= pos) ++u;
  return u;
}

/// Negatives for one batch of positives. Row j holds the n corrupted entities
/// of positive j (all on the same side) and their false-negative labels.
struct NegativeBatch {
  Strategy strategy = Strategy::kUniform;
  Side side = Side::kTail;
  int n = 0;
  std::vector<EntityId> entities;  // positives.size() * n
  std::vector<std::uint8_t> labels;

  std::span<const EntityId> row(std::size_t j) const {
    return {entities.data() + j * n, static_cast<std::size_t>(n)};
  }
  std::span<const std::uint8_t> row_labels(std::size_t j) const {
    return {labels.data() + j * n, static_cast<std::size_t>(n)};
  }
};

/// Even batches corrupt heads, odd batches corrupt tails.
inline Side corruption_side(std::int64_t batch_index) {
  return batch_index % 2 == 0 ? Side::kHead : Side::kTail;
}

inline Triple corrupt(const Triple& t, Side side, EntityId e) {
  Triple c = t;
  (side == Side::kHead ? c.head : c.tail) = e;
  return c;
}

inline EntityId corrupted_slot(const Triple& t, Side side) {
  return side == Side::kHead ? t.head : t.tail;
}

struct SamplerConfig {
  Strategy strategy = Strategy::kUniform;
  int n = 1;
  double sigma = 0;  // used by kEans
};

/// Draws n negatives per positive (with replacement) and labels each with
/// training-split membership. False negatives are kept, not filtered.
template <typename Urbg>
NegativeBatch build_negative_batch(std::span<const Triple> positives,
                                   std::int64_t batch_index,
                                   const SamplerConfig& cfg,
                                   const VirtualIndexMap* map,
                                   std::int32_t num_entities,
                                   const FilterIndex& filter, Urbg& rng) {
  if (cfg.n < 1) throw ConfigError("negative count must be >= 1");
  if (cfg.strategy == Strategy::kEans) {
    if (map == nullptr || map->size() != static_cast<std::size_t>(num_entities))
      throw ConfigError("EANS sampling requires a current index map");
    if (!(cfg.sigma > 0)) throw ConfigError("EANS sampling requires sigma > 0");
  }
  NegativeBatch nb;
  nb.strategy = cfg.strategy;
  nb.side = corruption_side(batch_index);
  nb.n = cfg.n;
  nb.entities.resize(positives.size() * cfg.n);
  nb.labels.resize(positives.size() * cfg.n);
  for (std::size_t j = 0; j < positives.size(); ++j) {
    const auto& pos = positives[j];
    const EntityId anchor = corrupted_slot(pos, nb.side);
    for (int i = 0; i < cfg.n; ++i) {
      const EntityId e = cfg.strategy == Strategy::kEans
                             ? sample_eans(*map, anchor, cfg.sigma, rng)
                             : sample_uniform(num_entities, anchor, rng);
      nb.entities[j * cfg.n + i] = e;
      nb.labels[j * cfg.n + i] =
          filter.contains(corrupt(pos, nb.side, e), FilterScope::kTrainOnly) ? 1
                                                                             : 0;
    }
  }
  return nb;
}

/// softmax(-alpha * f) over one positive's negatives, with max subtraction.
/// Lower dissimilarity (harder negative) gets more weight.
inline std::vector<double> self_adv_weights(std::span<const double> f,
                                            double alpha) {
  std::vector<double> w(f.size());
  if (f.empty()) return w;
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : f) mx = std::max(mx, -alpha * v);
  double z = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    w[i] = std::exp(-alpha * f[i] - mx);
    z += w[i];
  }
  for (auto& v : w) v /= z;
  return w;
}

}  // namespace eans
