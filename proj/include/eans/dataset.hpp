#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eans/common.hpp"

namespace eans {

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

enum class Split { kTrain, kValid, kTest };
enum class FilterScope { kTrainOnly, kAllSplits };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
  }
  return "?";
}

/// Dense name <-> index dictionary.
class Dictionary {
 public:
  std::int32_t size() const { return static_cast<std::int32_t>(names_.size()); }

  /// Returns the index of `name`, assigning the next free one on first sight.
  std::int32_t intern(const std::string& name) {
    auto [it, inserted] = index_.try_emplace(name, size());
    if (inserted) names_.push_back(name);
    return it->second;
  }

  std::int32_t find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? -1 : it->second;
  }

  const std::string& name(std::int32_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::unordered_map<std::string, std::int32_t> index_;
  std::vector<std::string> names_;
};

/// Membership index over triples, with the two grouped views needed for
/// filtered ranking.
class FilterIndex {
 public:
  FilterIndex() = default;
  FilterIndex(std::int32_t num_entities, std::int32_t num_relations)
      : num_entities_(num_entities), num_relations_(num_relations) {}

  void add(const Triple& t, bool in_train) {
    const auto k = key(t);
    if (in_train) train_.insert(k);
    if (all_.insert(k).second) {
      tails_[pair_key(t.head, t.relation)].push_back(t.tail);
      heads_[pair_key(t.tail, t.relation)].push_back(t.head);
    }
  }

  /// Sorts the grouped views; call once after the last add().
  void finalize() {
    for (auto& [_, v] : tails_) std::sort(v.begin(), v.end());
    for (auto& [_, v] : heads_) std::sort(v.begin(), v.end());
  }

  bool contains(const Triple& t, FilterScope scope) const {
    const auto k = key(t);
    return scope == FilterScope::kTrainOnly ? train_.contains(k)
                                            : all_.contains(k);
  }

  /// Every tail completing (head, relation, ?) across all splits, sorted.
  std::span<const EntityId> known_tails(EntityId head, RelationId rel) const {
    return lookup(tails_, pair_key(head, rel));
  }

  /// Every head completing (?, relation, tail) across all splits, sorted.
  std::span<const EntityId> known_heads(RelationId rel, EntityId tail) const {
    return lookup(heads_, pair_key(tail, rel));
  }

  std::size_t size(FilterScope scope) const {
    return scope == FilterScope::kTrainOnly ? train_.size() : all_.size();
  }

  const std::unordered_map<std::uint64_t, std::vector<EntityId>>& tail_groups()
      const {
    return tails_;
  }

 private:
  std::uint64_t key(const Triple& t) const {
    return (static_cast<std::uint64_t>(t.head) *
                static_cast<std::uint64_t>(num_relations_) +
            static_cast<std::uint64_t>(t.relation)) *
               static_cast<std::uint64_t>(num_entities_) +
           static_cast<std::uint64_t>(t.tail);
  }
  std::uint64_t pair_key(EntityId e, RelationId r) const {
    return static_cast<std::uint64_t>(e) *
               static_cast<std::uint64_t>(num_relations_) +
           static_cast<std::uint64_t>(r);
  }
  static std::span<const EntityId> lookup(
      const std::unordered_map<std::uint64_t, std::vector<EntityId>>& m,
      std::uint64_t k) {
    auto it = m.find(k);
    if (it == m.end()) return {};
    return it->second;
  }

  std::int32_t num_entities_ = 0;
  std::int32_t num_relations_ = 0;
  std::unordered_set<std::uint64_t> train_;
  std::unordered_set<std::uint64_t> all_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
};

/// Counts and out-of-vocabulary notes produced while loading.
struct LoadReport {
  std::size_t train = 0, valid = 0, test = 0;
  std::vector<std::string> eval_only_entities;
  std::vector<std::string> eval_only_relations;
  bool entity_dict_used = false;
  bool relation_dict_used = false;

  std::string to_text() const {
    std::ostringstream os;
    os << "train_triples: " << train << "\n"
       << "valid_triples: " << valid << "\n"
       << "test_triples: " << test << "\n"
       << "entity_dict: " << (entity_dict_used ? "file" : "first-appearance")
       << "\n"
       << "relation_dict: "
       << (relation_dict_used ? "file" : "first-appearance") << "\n"
       << "eval_only_entities: " << eval_only_entities.size() << "\n";
    for (const auto& e : eval_only_entities) os << "  - " << e << "\n";
    os << "eval_only_relations: " << eval_only_relations.size() << "\n";
    for (const auto& r : eval_only_relations) os << "  - " << r << "\n";
    return os.str();
  }
};

struct KgDataset {
  Dictionary entities;
  Dictionary relations;
  std::vector<Triple> train, valid, test;
  FilterIndex filter;
  LoadReport report;

  std::int32_t num_entities() const { return entities.size(); }
  std::int32_t num_relations() const { return relations.size(); }

  const std::vector<Triple>& split(Split s) const {
    switch (s) {
      case Split::kTrain: return train;
      case Split::kValid: return valid;
      case Split::kTest: return test;
    }
    return train;
  }
};

struct SplitSelection {
  bool train = true;
  bool valid = true;
  bool test = true;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto ws = " \t\r\n\v\f";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

struct RawTriple {
  std::string head, relation, tail;
  std::size_t line;
};

inline std::vector<RawTriple> read_triple_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("missing file: " + p.string());
  std::vector<RawTriple> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto stripped = trim(line);
    if (stripped.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = stripped.find('\t', start);
      fields.push_back(trim(std::string_view(stripped).substr(
          start, tab == std::string::npos ? std::string::npos : tab - start)));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        fields[2].empty()) {
      throw DataError("malformed line " + std::to_string(lineno) + " in " +
                      p.string() + ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    out.push_back({fields[0], fields[1], fields[2], lineno});
  }
  return out;
}

/// Reads "index<TAB>name" lines; indices must be dense 0..n-1.
inline Dictionary read_dict_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot read dictionary: " + p.string());
  std::vector<std::pair<long, std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty()) continue;
    const auto tab = s.find('\t');
    if (tab == std::string::npos)
      throw DataError("malformed dictionary line " + std::to_string(lineno) +
                      " in " + p.string());
    long idx = 0;
    try {
      idx = std::stol(s.substr(0, tab));
    } catch (const std::exception&) {
      throw DataError("bad index on dictionary line " + std::to_string(lineno) +
                      " in " + p.string());
    }
    rows.emplace_back(idx, trim(std::string_view(s).substr(tab + 1)));
  }
  std::sort(rows.begin(), rows.end());
  Dictionary d;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != static_cast<long>(i))
      throw DataError("dictionary indices not dense 0..n-1 in " + p.string());
    if (d.intern(rows[i].second) != static_cast<std::int32_t>(i))
      throw DataError("duplicate name '" + rows[i].second + "' in " +
                      p.string());
  }
  return d;
}

}  // namespace detail

/// Loads `train.txt`, `valid.txt`, `test.txt` from `dir`. Indices are assigned
/// in first-appearance order over train, valid, test unless `entities.dict` /
/// `relations.dict` are present.
inline KgDataset load_dataset(const std::filesystem::path& dir,
                              SplitSelection which = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir))
    throw DataError("dataset directory not found: " + dir.string());

  KgDataset ds;
  const bool has_edict = fs::exists(dir / "entities.dict");
  const bool has_rdict = fs::exists(dir / "relations.dict");
  if (has_edict) ds.entities = detail::read_dict_file(dir / "entities.dict");
  if (has_rdict) ds.relations = detail::read_dict_file(dir / "relations.dict");
  ds.report.entity_dict_used = has_edict;
  ds.report.relation_dict_used = has_rdict;

  struct Pending {
    Split split;
    bool selected;
    const char* file;
  };
  const Pending plan[] = {{Split::kTrain, which.train, "train.txt"},
                          {Split::kValid, which.valid, "valid.txt"},
                          {Split::kTest, which.test, "test.txt"}};

  std::unordered_set<std::string> train_entities, train_relations;
  for (const auto& step : plan) {
    if (!step.selected) continue;
    const auto path = dir / step.file;
    auto raw = detail::read_triple_file(path);
    if (step.split == Split::kTrain && raw.empty())
      throw DataError("empty split: " + path.string());

    auto& out = step.split == Split::kTrain   ? ds.train
                : step.split == Split::kValid ? ds.valid
                                              : ds.test;
    out.reserve(raw.size());
    std::unordered_map<std::string, std::size_t> seen;
    for (const auto& r : raw) {
      auto [it, fresh] =
          seen.try_emplace(r.head + '\t' + r.relation + '\t' + r.tail, r.line);
      if (!fresh)
        throw DataError("duplicate triple on line " + std::to_string(r.line) +
                        " of " + path.string() + " (first seen on line " +
                        std::to_string(it->second) + ")");
      auto resolve = [&](Dictionary& d, bool fixed, const std::string& name,
                         const char* what) {
        if (!fixed) return d.intern(name);
        const auto i = d.find(name);
        if (i < 0)
          throw DataError(std::string(what) + " '" + name + "' on line " +
                          std::to_string(r.line) + " of " + path.string() +
                          " is not in the dictionary file");
        return i;
      };
      Triple t{resolve(ds.entities, has_edict, r.head, "entity"),
               resolve(ds.relations, has_rdict, r.relation, "relation"),
               resolve(ds.entities, has_edict, r.tail, "entity")};
      out.push_back(t);
      if (step.split == Split::kTrain) {
        train_entities.insert(r.head);
        train_entities.insert(r.tail);
        train_relations.insert(r.relation);
      } else {
        for (const auto* e : {&r.head, &r.tail})
          if (!train_entities.contains(*e)) {
            train_entities.insert(*e);  // report each name once
            ds.report.eval_only_entities.push_back(*e);
          }
        if (!train_relations.contains(r.relation)) {
          train_relations.insert(r.relation);
          ds.report.eval_only_relations.push_back(r.relation);
        }
      }
    }
  }
  if (ds.num_entities() == 0 || ds.num_relations() == 0)
    throw DataError("no triples loaded from " + dir.string());

  ds.report.train = ds.train.size();
  ds.report.valid = ds.valid.size();
  ds.report.test = ds.test.size();

  ds.filter = FilterIndex(ds.num_entities(), ds.num_relations());
  for (const auto& t : ds.train) ds.filter.add(t, true);
  for (const auto& t : ds.valid) ds.filter.add(t, false);
  for (const auto& t : ds.test) ds.filter.add(t, false);
  ds.filter.finalize();
  return ds;
}

}  // namespace eans
