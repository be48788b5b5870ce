#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eans/common.hpp"

namespace eans {

enum class ModelKind { kTransE, kTransD, kDistMult, kComplEx, kRotatE };

inline std::string_view model_name(ModelKind k) {
  switch (k) {
    case ModelKind::kTransE: return "transe";
    case ModelKind::kTransD: return "transd";
    case ModelKind::kDistMult: return "distmult";
    case ModelKind::kComplEx: return "complex";
    case ModelKind::kRotatE: return "rotate";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::kTransE, ModelKind::kTransD, ModelKind::kDistMult,
                 ModelKind::kComplEx, ModelKind::kRotatE})
    if (model_name(k) == s) return k;
  throw ConfigError("unknown model '" + std::string(s) +
                    "' (expected transe|transd|distmult|complex|rotate)");
}

inline bool is_distance_model(ModelKind k) {
  return k == ModelKind::kTransE || k == ModelKind::kTransD ||
         k == ModelKind::kRotatE;
}

enum class Norm { kL1, kL2 };

struct ModelSpec {
  ModelKind kind = ModelKind::kTransE;
  int dim = 0;
  std::int32_t num_entities = 0;
  /// Original relations only; the substitution relation sits at this index.
  std::int32_t num_relations = 0;
  Norm transe_norm = Norm::kL1;

  RelationId substitution_relation() const { return num_relations; }
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Row-major dense table.
template <typename Real>
struct Table {
  std::string name;
  std::int32_t rows = 0;
  int cols = 0;
  std::vector<Real> data;

  Table() = default;
  Table(std::string n, std::int32_t r, int c)
      : name(std::move(n)), rows(r), cols(c),
        data(static_cast<std::size_t>(r) * c, Real(0)) {}

  std::span<Real> row(std::int32_t i) {
    return {data.data() + static_cast<std::size_t>(i) * cols,
            static_cast<std::size_t>(cols)};
  }
  std::span<const Real> row(std::int32_t i) const {
    return {data.data() + static_cast<std::size_t>(i) * cols,
            static_cast<std::size_t>(cols)};
  }
};

/// Learnable arrays for one model. Tables are addressed by a flat id: entity
/// tables first, relation tables after. Layout per model:
///   transe   entity.emb[d]                   relation.emb[d]
///   transd   entity.emb[d], entity.transfer[d]
///            relation.emb[d], relation.transfer[d]
///   distmult entity.emb[d]                   relation.emb[d]
///   complex  entity.emb[2d] (re | im)        relation.emb[2d] (re | im)
///   rotate   entity.emb[2d] (re | im)        relation.phase[d]
/// Relation tables carry num_relations + 1 rows; the last one is the
/// substitution relation.
template <typename Real>
struct ModelParams {
  ModelSpec spec;
  std::vector<Table<Real>> tables;
  int num_entity_tables = 0;

  Table<Real>& table(int id) { return tables[id]; }
  const Table<Real>& table(int id) const { return tables[id]; }

  template <typename Other>
  ModelParams<Other> cast() const {
    ModelParams<Other> out;
    out.spec = spec;
    out.num_entity_tables = num_entity_tables;
    for (const auto& t : tables) {
      Table<Other> c(t.name, t.rows, t.cols);
      for (std::size_t i = 0; i < t.data.size(); ++i)
        c.data[i] = static_cast<Other>(t.data[i]);
      out.tables.push_back(std::move(c));
    }
    return out;
  }
};

/// Fixed table ids per model.
namespace tables {
inline constexpr int kEntityEmb = 0;
// TransD
inline constexpr int kEntityTransfer = 1;
inline constexpr int kTransDRelationEmb = 2;
inline constexpr int kTransDRelationTransfer = 3;
// all other models
inline constexpr int kRelation = 1;
}  // namespace tables

/// Uniform initialization half-width: (gamma + 2) / d for distance models,
/// 1 / sqrt(d) for bilinear ones.
inline double init_bound(ModelKind kind, int dim, double gamma) {
  return is_distance_model(kind) ? (gamma + 2.0) / dim
                                 : 1.0 / std::sqrt(static_cast<double>(dim));
}

template <typename Real>
ModelParams<Real> make_empty_params(const ModelSpec& spec) {
  if (spec.dim < 1 || spec.num_entities < 1 || spec.num_relations < 1)
    throw ConfigError("dimensions must be positive (dim=" +
                      std::to_string(spec.dim) + ", entities=" +
                      std::to_string(spec.num_entities) + ", relations=" +
                      std::to_string(spec.num_relations) + ")");
  ModelParams<Real> p;
  p.spec = spec;
  const auto ne = spec.num_entities;
  const auto nr = spec.num_relations + 1;
  const int d = spec.dim;
  switch (spec.kind) {
    case ModelKind::kTransE:
    case ModelKind::kDistMult:
      p.tables = {{"entity.emb", ne, d}, {"relation.emb", nr, d}};
      p.num_entity_tables = 1;
      break;
    case ModelKind::kTransD:
      p.tables = {{"entity.emb", ne, d},
                  {"entity.transfer", ne, d},
                  {"relation.emb", nr, d},
                  {"relation.transfer", nr, d}};
      p.num_entity_tables = 2;
      break;
    case ModelKind::kComplEx:
      p.tables = {{"entity.emb", ne, 2 * d}, {"relation.emb", nr, 2 * d}};
      p.num_entity_tables = 1;
      break;
    case ModelKind::kRotatE:
      p.tables = {{"entity.emb", ne, 2 * d}, {"relation.phase", nr, d}};
      p.num_entity_tables = 1;
      break;
  }
  return p;
}

template <typename Real>
ModelParams<Real> init_params(const ModelSpec& spec, double gamma,
                              std::uint64_t seed) {
  auto p = make_empty_params<Real>(spec);
  auto rng = make_stream(seed, "init");
  const double b = init_bound(spec.kind, spec.dim, gamma);
  for (auto& t : p.tables) {
    const bool phase = t.name == "relation.phase";
    std::uniform_real_distribution<double> u(phase ? -std::numbers::pi : -b,
                                             phase ? std::numbers::pi : b);
    for (auto& v : t.data) v = static_cast<Real>(u(rng));
    if (phase)  // float rounding may land exactly on +pi
      for (auto& v : t.data)
        if (v >= static_cast<Real>(std::numbers::pi))
          v = -static_cast<Real>(std::numbers::pi);
  }
  return p;
}

/// Length of entity_repr: sum of entity-table widths.
template <typename Real>
std::size_t entity_repr_dim(const ModelParams<Real>& p) {
  std::size_t n = 0;
  for (int t = 0; t < p.num_entity_tables; ++t) n += p.tables[t].cols;
  return n;
}

/// Row `i` of every entity table concatenated in table-id order.
template <typename Real>
std::vector<double> entity_repr(const ModelParams<Real>& p, EntityId i) {
  std::vector<double> out;
  out.reserve(entity_repr_dim(p));
  for (int t = 0; t < p.num_entity_tables; ++t)
    for (Real v : p.tables[t].row(i)) out.push_back(static_cast<double>(v));
  return out;
}

template <typename Real>
bool all_finite(const ModelParams<Real>& p) {
  for (const auto& t : p.tables)
    for (Real v : t.data)
      if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

}  // namespace eans
