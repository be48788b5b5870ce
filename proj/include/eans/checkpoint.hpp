#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "eans/adam.hpp"
#include "eans/dataset.hpp"
#include "eans/eans_index.hpp"
#include "eans/params.hpp"

namespace eans {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native little-endian floats");

// A checkpoint is a directory:
//   manifest.txt    "key = value" lines; one "array = name rows cols bytes"
//                   line per payload array, in payload order
//   payload.bin     raw little-endian float32 arrays: for every table its
//                   values, then Adam first moments, then second moments
//   index_map.tsv   virtual index map in effect (EANS runs only)

inline constexpr const char* kCheckpointFormat = "eans-checkpoint-1";

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::string config_digest;
  bool use_substitution = false;
  /// Free-form trainer state (e.g. best validation MRR so far).
  std::map<std::string, std::string> extra;
};

struct Checkpoint {
  ModelParams<float> params;
  OptimizerState<float> optimizer;
  CheckpointMeta meta;
  std::optional<VirtualIndexMap> index_map;
};

inline void save_checkpoint(const std::filesystem::path& dir,
                            const ModelParams<float>& params,
                            const OptimizerState<float>& opt,
                            const CheckpointMeta& meta,
                            const VirtualIndexMap* map = nullptr) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream manifest(dir / "manifest.txt");
  std::ofstream payload(dir / "payload.bin", std::ios::binary);
  if (!manifest || !payload)
    throw CheckpointError("cannot write checkpoint at " + dir.string());

  const auto& s = params.spec;
  manifest.precision(17);
  manifest << "format = " << kCheckpointFormat << "\n"
           << "model_kind = " << model_name(s.kind) << "\n"
           << "num_entities = " << s.num_entities << "\n"
           << "num_relations = " << s.num_relations << "\n"
           << "dim = " << s.dim << "\n"
           << "transe_norm = " << (s.transe_norm == Norm::kL1 ? "l1" : "l2")
           << "\n"
           << "step = " << opt.step << "\n"
           << "seed = " << meta.seed << "\n"
           << "config_digest = " << meta.config_digest << "\n"
           << "use_substitution = " << (meta.use_substitution ? 1 : 0) << "\n"
           << "adam_lr = " << opt.cfg.lr << "\n"
           << "adam_beta1 = " << opt.cfg.beta1 << "\n"
           << "adam_beta2 = " << opt.cfg.beta2 << "\n"
           << "adam_eps = " << opt.cfg.eps << "\n";
  for (const auto& [k, v] : meta.extra) manifest << "extra." << k << " = " << v << "\n";

  std::size_t total = 0;
  auto write_array = [&](const std::string& name, const Table<float>& t,
                         const std::vector<float>& data) {
    const std::size_t bytes = data.size() * sizeof(float);
    manifest << "array = " << name << " " << t.rows << " " << t.cols << " "
             << bytes << "\n";
    payload.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(bytes));
    total += bytes;
  };
  for (std::size_t i = 0; i < params.tables.size(); ++i) {
    const auto& t = params.tables[i];
    write_array(t.name, t, t.data);
    write_array(t.name + ".adam_m", t, opt.m[i]);
    write_array(t.name + ".adam_v", t, opt.v[i]);
  }
  manifest << "payload_bytes = " << total << "\n"
           << "index_map = " << (map ? "index_map.tsv" : "none") << "\n";
  if (!payload || !manifest)
    throw CheckpointError("write failed for checkpoint " + dir.string());
  if (map) write_index_map(dir / "index_map.tsv", *map);
  else std::filesystem::remove(dir / "index_map.tsv");
}

namespace detail {
inline std::multimap<std::string, std::string> read_manifest(
    const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw CheckpointError("cannot read manifest " + p.string());
  std::multimap<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (line.empty() || line[0] == '#' || eq == std::string::npos) continue;
    kv.emplace(trim(std::string_view(line).substr(0, eq)),
               trim(std::string_view(line).substr(eq + 1)));
  }
  return kv;
}

inline const std::string& manifest_get(
    const std::multimap<std::string, std::string>& kv, const std::string& k) {
  auto it = kv.find(k);
  if (it == kv.end()) throw CheckpointError("manifest missing key '" + k + "'");
  return it->second;
}
}  // namespace detail

/// Reads only the manifest's model description.
inline ModelSpec read_checkpoint_spec(const std::filesystem::path& dir) {
  const auto kv = detail::read_manifest(dir / "manifest.txt");
  if (detail::manifest_get(kv, "format") != kCheckpointFormat)
    throw CheckpointError("unsupported checkpoint format in " + dir.string());
  ModelSpec s;
  s.kind = parse_model_kind(detail::manifest_get(kv, "model_kind"));
  s.num_entities = std::stoi(detail::manifest_get(kv, "num_entities"));
  s.num_relations = std::stoi(detail::manifest_get(kv, "num_relations"));
  s.dim = std::stoi(detail::manifest_get(kv, "dim"));
  s.transe_norm =
      detail::manifest_get(kv, "transe_norm") == "l2" ? Norm::kL2 : Norm::kL1;
  return s;
}

/// Loads a checkpoint. With `expected` set, the stored model must match it
/// (kind first, then shapes).
inline Checkpoint load_checkpoint(const std::filesystem::path& dir,
                                  const std::optional<ModelSpec>& expected = {}) {
  const auto kv = detail::read_manifest(dir / "manifest.txt");
  const ModelSpec spec = read_checkpoint_spec(dir);
  if (expected) {
    if (expected->kind != spec.kind)
      throw CheckpointError("model kind mismatch: checkpoint holds " +
                            std::string(model_name(spec.kind)) + ", run expects " +
                            std::string(model_name(expected->kind)));
    if (!(*expected == spec))
      throw CheckpointError("shape mismatch between checkpoint and run");
  }

  Checkpoint ck;
  ck.params = make_empty_params<float>(spec);
  ck.meta.seed = std::stoull(detail::manifest_get(kv, "seed"));
  ck.meta.config_digest = detail::manifest_get(kv, "config_digest");
  ck.meta.use_substitution = detail::manifest_get(kv, "use_substitution") == "1";
  for (const auto& [k, v] : kv)
    if (k.rfind("extra.", 0) == 0) ck.meta.extra[k.substr(6)] = v;
  AdamConfig ac;
  ac.lr = std::stod(detail::manifest_get(kv, "adam_lr"));
  ac.beta1 = std::stod(detail::manifest_get(kv, "adam_beta1"));
  ac.beta2 = std::stod(detail::manifest_get(kv, "adam_beta2"));
  ac.eps = std::stod(detail::manifest_get(kv, "adam_eps"));
  ck.optimizer = OptimizerState<float>(ck.params, ac);
  ck.optimizer.step = std::stoll(detail::manifest_get(kv, "step"));

  // Expected payload layout from the manifest.
  std::vector<std::pair<std::string, std::size_t>> arrays;
  auto [lo, hi] = kv.equal_range("array");
  for (auto it = lo; it != hi; ++it) {
    std::istringstream is(it->second);
    std::string name;
    long rows = 0, cols = 0;
    std::size_t bytes = 0;
    is >> name >> rows >> cols >> bytes;
    arrays.emplace_back(name, bytes);
  }
  if (arrays.size() != ck.params.tables.size() * 3)
    throw CheckpointError("shape mismatch: manifest lists " +
                          std::to_string(arrays.size()) + " arrays");
  const auto declared = std::stoull(detail::manifest_get(kv, "payload_bytes"));
  const auto payload_path = dir / "payload.bin";
  if (!std::filesystem::exists(payload_path))
    throw CheckpointError("missing payload " + payload_path.string());
  if (std::filesystem::file_size(payload_path) != declared)
    throw CheckpointError("payload length mismatch: manifest declares " +
                          std::to_string(declared) + " bytes, file has " +
                          std::to_string(std::filesystem::file_size(payload_path)));

  std::ifstream payload(payload_path, std::ios::binary);
  std::size_t a = 0;
  auto read_into = [&](std::vector<float>& dst, const std::string& want) {
    const auto& [name, bytes] = arrays[a++];
    if (name != want || bytes != dst.size() * sizeof(float))
      throw CheckpointError("shape mismatch for array '" + want + "'");
    payload.read(reinterpret_cast<char*>(dst.data()),
                 static_cast<std::streamsize>(bytes));
    if (!payload) throw CheckpointError("payload length mismatch");
  };
  for (std::size_t i = 0; i < ck.params.tables.size(); ++i) {
    auto& t = ck.params.tables[i];
    read_into(t.data, t.name);
    read_into(ck.optimizer.m[i], t.name + ".adam_m");
    read_into(ck.optimizer.v[i], t.name + ".adam_v");
  }
  if (detail::manifest_get(kv, "index_map") != "none") {
    ck.index_map = read_index_map(dir / "index_map.tsv");
    if (ck.index_map->size() != static_cast<std::size_t>(spec.num_entities))
      throw CheckpointError("index map size does not match entity count");
  }
  return ck;
}

}  // namespace eans
