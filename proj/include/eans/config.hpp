#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eans/dataset.hpp"
#include "eans/objective.hpp"
#include "eans/params.hpp"
#include "eans/sampling.hpp"

namespace eans {

/// Every hyperparameter of a training run.
struct TrainConfig {
  ModelKind model = ModelKind::kTransE;
  int dim = 100;
  Norm transe_norm = Norm::kL1;
  int batch_size = 1024;
  int negatives = 256;
  double lr = 5e-5;
  double gamma = 9.0;
  double lambda1 = 0.1;
  double lambda1_reg = -1.0;  // < 0: reuse lambda1
  double lambda2 = 1.0;
  double alpha = 1.0;
  bool use_substitution = true;
  bool use_self_adv = false;
  SubRegMode sub_reg_mode = SubRegMode::kAbsOfSum;
  Strategy strategy = Strategy::kEans;
  double sigma = 0;  // <= 0: 2|E| / k
  int k = 100;
  int kmeans_iters = 20;
  std::int64_t max_steps = 100000;
  std::int64_t reorder_interval = 1000;
  std::uint64_t seed = 0;
  std::int64_t eval_interval = 10000;
  std::int64_t checkpoint_interval = 0;  // 0: final (and best) only
  std::int64_t log_interval = 100;
  unsigned eval_threads = 1;

  LossConfig loss() const {
    LossConfig c;
    c.gamma = gamma;
    c.lambda1 = lambda1;
    c.lambda1_reg = lambda1_reg;
    c.lambda2 = lambda2;
    c.alpha = alpha;
    c.use_substitution = use_substitution;
    c.use_self_adv = use_self_adv;
    c.reg_mode = sub_reg_mode;
    return c;
  }

  double resolved_sigma(std::int32_t num_entities) const {
    return sigma > 0 ? sigma : 2.0 * num_entities / k;
  }

  ModelSpec model_spec(const KgDataset& ds) const {
    return ModelSpec{model, dim, ds.num_entities(), ds.num_relations(),
                     transe_norm};
  }

  void validate() const;
};

/// TrainConfig plus the operator-facing options of the CLI.
struct RunConfig {
  TrainConfig train;
  std::string dataset = "data/toy";
  std::string out = "runs/default";
  std::string split = "test";
  std::vector<int> n_values = {1, 4, 8, 16};
  std::vector<std::string> strategies = {"eans", "selfadv"};
  int gap_batches = 1000;
  int cdf_batches = 100;
  int hist_bins = 50;
  int hist_batches = 200;
  unsigned jobs = 1;
};

namespace detail {

/// Shortest text that parses back to exactly `v`.
inline std::string fmt_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream is(v);
  T out{};
  is >> out;
  if (!is || !(is >> std::ws).eof())
    throw ConfigError("key '" + key + "': cannot parse '" + v + "'");
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

struct KeyDoc {
  const char* key;
  const char* doc;
};

}  // namespace detail

/// Documented keys, in the order they are written to resolved configs.
inline const std::vector<detail::KeyDoc>& config_keys() {
  static const std::vector<detail::KeyDoc> keys = {
      {"dataset", "directory with train.txt / valid.txt / test.txt"},
      {"out", "output directory"},
      {"model", "transe | transd | distmult | complex | rotate"},
      {"dim", "embedding dimension d"},
      {"transe_norm", "l1 | l2 (TransE only)"},
      {"batch_size", "positives per step b"},
      {"negatives", "negatives per positive n"},
      {"lr", "Adam learning rate"},
      {"gamma", "margin"},
      {"lambda1", "substitution down-weight (and regularizer weight)"},
      {"lambda1_reg", "regularizer weight override; -1 reuses lambda1"},
      {"lambda2", "substitution loss weight"},
      {"alpha", "self-adversarial temperature"},
      {"use_substitution", "train the substitution relation (0/1)"},
      {"use_self_adv", "self-adversarial negative weighting (0/1)"},
      {"sub_reg_mode", "abs_of_sum | sum_of_abs"},
      {"strategy", "uniform | eans"},
      {"sigma", "Gaussian width in virtual index space; <= 0 means 2|E|/k"},
      {"k", "number of k-means clusters"},
      {"kmeans_iters", "Lloyd iterations per refresh"},
      {"max_steps", "training steps"},
      {"reorder_interval", "steps between cluster refreshes"},
      {"seed", "root random seed"},
      {"eval_interval", "steps between validation evaluations; 0 disables"},
      {"checkpoint_interval", "steps between checkpoints; 0 keeps final/best only"},
      {"log_interval", "steps between training-log rows"},
      {"eval_threads", "worker threads for evaluation"},
      {"split", "evaluation split: valid | test | train"},
      {"n_values", "sweep: comma-separated negative counts"},
      {"strategies", "sweep: comma-separated of uniform, eans, selfadv, eans+selfadv"},
      {"gap_batches", "analysis gap: mini-batches per checkpoint"},
      {"cdf_batches", "analysis cdf: mini-batches averaged"},
      {"hist_bins", "analysis hist: bin count"},
      {"hist_batches", "analysis hist: mini-batches sampled"},
      {"jobs", "sweep/ablation cells run concurrently"},
  };
  return keys;
}

inline void TrainConfig::validate() const {
  auto positive = [](const char* key, double v) {
    if (!(v > 0)) throw ConfigError("key '" + std::string(key) + "' must be > 0");
  };
  positive("dim", dim);
  positive("batch_size", batch_size);
  positive("negatives", negatives);
  positive("lr", lr);
  positive("gamma", gamma);
  positive("log_interval", static_cast<double>(log_interval));
  if (lambda1 < 0 || lambda2 < 0)
    throw ConfigError("lambda1 and lambda2 must be >= 0");
  if (max_steps < 0) throw ConfigError("max_steps must be >= 0");
  if (eval_interval < 0 || checkpoint_interval < 0)
    throw ConfigError("intervals must be >= 0");
  if (strategy == Strategy::kEans) {
    positive("k", k);
    positive("reorder_interval", static_cast<double>(reorder_interval));
    positive("kmeans_iters", kmeans_iters);
  }
}

/// Applies one key to `cfg`. Unknown keys are rejected.
inline void set_config_value(RunConfig& cfg, const std::string& key,
                             const std::string& value) {
  using detail::parse_bool;
  using detail::parse_number;
  auto& t = cfg.train;
  static const std::map<std::string,
                        std::function<void(RunConfig&, const std::string&)>>
      setters = {
          {"dataset", [](RunConfig& c, const std::string& v) { c.dataset = v; }},
          {"out", [](RunConfig& c, const std::string& v) { c.out = v; }},
          {"split",
           [](RunConfig& c, const std::string& v) {
             if (v != "train" && v != "valid" && v != "test")
               throw ConfigError("key 'split': expected train|valid|test");
             c.split = v;
           }},
          {"n_values",
           [](RunConfig& c, const std::string& v) {
             c.n_values.clear();
             for (const auto& s : detail::split_list(v))
               c.n_values.push_back(parse_number<int>("n_values", s));
           }},
          {"strategies",
           [](RunConfig& c, const std::string& v) {
             c.strategies = detail::split_list(v);
           }},
          {"gap_batches",
           [](RunConfig& c, const std::string& v) {
             c.gap_batches = parse_number<int>("gap_batches", v);
           }},
          {"cdf_batches",
           [](RunConfig& c, const std::string& v) {
             c.cdf_batches = parse_number<int>("cdf_batches", v);
           }},
          {"hist_bins",
           [](RunConfig& c, const std::string& v) {
             c.hist_bins = parse_number<int>("hist_bins", v);
           }},
          {"hist_batches",
           [](RunConfig& c, const std::string& v) {
             c.hist_batches = parse_number<int>("hist_batches", v);
           }},
          {"jobs",
           [](RunConfig& c, const std::string& v) {
             c.jobs = parse_number<unsigned>("jobs", v);
           }},
      };
  if (auto it = setters.find(key); it != setters.end()) {
    it->second(cfg, value);
    return;
  }
  if (key == "model") t.model = parse_model_kind(value);
  else if (key == "dim") t.dim = parse_number<int>(key, value);
  else if (key == "transe_norm") {
    if (value == "l1") t.transe_norm = Norm::kL1;
    else if (value == "l2") t.transe_norm = Norm::kL2;
    else throw ConfigError("key 'transe_norm': expected l1|l2");
  } else if (key == "batch_size") t.batch_size = parse_number<int>(key, value);
  else if (key == "negatives") t.negatives = parse_number<int>(key, value);
  else if (key == "lr") t.lr = parse_number<double>(key, value);
  else if (key == "gamma") t.gamma = parse_number<double>(key, value);
  else if (key == "lambda1") t.lambda1 = parse_number<double>(key, value);
  else if (key == "lambda1_reg") t.lambda1_reg = parse_number<double>(key, value);
  else if (key == "lambda2") t.lambda2 = parse_number<double>(key, value);
  else if (key == "alpha") t.alpha = parse_number<double>(key, value);
  else if (key == "use_substitution") t.use_substitution = parse_bool(key, value);
  else if (key == "use_self_adv") t.use_self_adv = parse_bool(key, value);
  else if (key == "sub_reg_mode") {
    if (value == "abs_of_sum") t.sub_reg_mode = SubRegMode::kAbsOfSum;
    else if (value == "sum_of_abs") t.sub_reg_mode = SubRegMode::kSumOfAbs;
    else throw ConfigError("key 'sub_reg_mode': expected abs_of_sum|sum_of_abs");
  } else if (key == "strategy") t.strategy = parse_strategy(value);
  else if (key == "sigma") t.sigma = parse_number<double>(key, value);
  else if (key == "k") t.k = parse_number<int>(key, value);
  else if (key == "kmeans_iters") t.kmeans_iters = parse_number<int>(key, value);
  else if (key == "max_steps") t.max_steps = parse_number<std::int64_t>(key, value);
  else if (key == "reorder_interval")
    t.reorder_interval = parse_number<std::int64_t>(key, value);
  else if (key == "seed") t.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "eval_interval")
    t.eval_interval = parse_number<std::int64_t>(key, value);
  else if (key == "checkpoint_interval")
    t.checkpoint_interval = parse_number<std::int64_t>(key, value);
  else if (key == "log_interval")
    t.log_interval = parse_number<std::int64_t>(key, value);
  else if (key == "eval_threads") t.eval_threads = parse_number<unsigned>(key, value);
  else throw ConfigError("unknown key '" + key + "'");
}

/// Training keys only, in documented order. Digest input.
inline std::string train_config_text(const TrainConfig& t) {
  using detail::fmt_double;
  std::ostringstream os;
  os << "model = " << model_name(t.model) << "\n"
     << "dim = " << t.dim << "\n"
     << "transe_norm = " << (t.transe_norm == Norm::kL1 ? "l1" : "l2") << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "negatives = " << t.negatives << "\n"
     << "lr = " << fmt_double(t.lr) << "\n"
     << "gamma = " << fmt_double(t.gamma) << "\n"
     << "lambda1 = " << fmt_double(t.lambda1) << "\n"
     << "lambda1_reg = " << fmt_double(t.lambda1_reg) << "\n"
     << "lambda2 = " << fmt_double(t.lambda2) << "\n"
     << "alpha = " << fmt_double(t.alpha) << "\n"
     << "use_substitution = " << (t.use_substitution ? 1 : 0) << "\n"
     << "use_self_adv = " << (t.use_self_adv ? 1 : 0) << "\n"
     << "sub_reg_mode = "
     << (t.sub_reg_mode == SubRegMode::kAbsOfSum ? "abs_of_sum" : "sum_of_abs")
     << "\n"
     << "strategy = " << strategy_name(t.strategy) << "\n"
     << "sigma = " << fmt_double(t.sigma) << "\n"
     << "k = " << t.k << "\n"
     << "kmeans_iters = " << t.kmeans_iters << "\n"
     << "max_steps = " << t.max_steps << "\n"
     << "reorder_interval = " << t.reorder_interval << "\n"
     << "seed = " << t.seed << "\n"
     << "eval_interval = " << t.eval_interval << "\n"
     << "checkpoint_interval = " << t.checkpoint_interval << "\n"
     << "log_interval = " << t.log_interval << "\n"
     << "eval_threads = " << t.eval_threads << "\n";
  return os.str();
}

inline std::string config_digest(const TrainConfig& t) {
  return hex64(fnv1a(train_config_text(t)));
}

/// Full resolved config; parses back to an identical RunConfig.
inline std::string run_config_text(const RunConfig& c) {
  std::ostringstream os;
  os << "# resolved configuration, digest " << config_digest(c.train) << "\n"
     << "dataset = " << c.dataset << "\n"
     << "out = " << c.out << "\n"
     << train_config_text(c.train) << "split = " << c.split << "\n"
     << "n_values = " << detail::join(c.n_values) << "\n"
     << "strategies = " << detail::join(c.strategies) << "\n"
     << "gap_batches = " << c.gap_batches << "\n"
     << "cdf_batches = " << c.cdf_batches << "\n"
     << "hist_bins = " << c.hist_bins << "\n"
     << "hist_batches = " << c.hist_batches << "\n"
     << "jobs = " << c.jobs << "\n";
  return os.str();
}

/// Applies "key = value" lines (with '#' comments) from text.
inline void apply_config_text(RunConfig& cfg, std::string_view text,
                              const std::string& origin = "<text>") {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.erase(hash);
    const auto s = detail::trim(line);
    if (s.empty()) continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    set_config_value(cfg, detail::trim(std::string_view(s).substr(0, eq)),
                     detail::trim(std::string_view(s).substr(eq + 1)));
  }
}

inline void apply_config_file(RunConfig& cfg, const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read config file " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str(), p.string());
}

// --- presets --------------------------------------------------------------

struct PresetColumn {
  double lr, gamma, alpha, lambda1, lambda2;
};

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const char* ds : {"fb15k237", "wn18rr", "toy"})
    for (const char* m : {"transe", "transd", "distmult", "complex", "rotate"})
      out.push_back(std::string(ds) + "-" + m);
  return out;
}

/// Applies a named preset on top of `cfg`. The fb15k237-* and wn18rr-*
/// presets hold the best published EANS settings per model; toy-* presets
/// are desk-scale runs on the bundled dataset.
inline void apply_preset(RunConfig& cfg, std::string_view name) {
  const auto dash = name.find('-');
  if (dash == std::string_view::npos)
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  const std::string ds(name.substr(0, dash));
  const ModelKind model = parse_model_kind(name.substr(dash + 1));
  const bool bilinear = !is_distance_model(model);
  auto& t = cfg.train;
  t.model = model;
  t.strategy = Strategy::kEans;
  t.use_substitution = true;
  t.use_self_adv = false;
  t.k = 100;
  t.reorder_interval = 1000;
  t.sigma = 0;
  t.lambda1_reg = -1.0;
  if (ds == "fb15k237") {
    const PresetColumn c = bilinear ? PresetColumn{0.001, 200.0, 1.0, 0.05, 1.0}
                                    : PresetColumn{5e-5, 9.0, 1.0, 0.1, 1.0};
    cfg.dataset = "data/FB15k-237";
    t.dim = 1000;
    t.batch_size = 1024;
    t.negatives = 256;
    t.lr = c.lr;
    t.gamma = c.gamma;
    t.alpha = c.alpha;
    t.lambda1 = c.lambda1;
    t.lambda2 = c.lambda2;
    t.max_steps = 100000;
    t.eval_interval = 10000;
  } else if (ds == "wn18rr") {
    const PresetColumn c = bilinear ? PresetColumn{0.002, 200.0, 1.0, 0.01, 0.05}
                                    : PresetColumn{5e-5, 6.0, 0.5, 0.01, 0.05};
    cfg.dataset = "data/WN18RR";
    t.dim = 500;
    t.batch_size = 512;
    t.negatives = 1024;
    t.lr = c.lr;
    t.gamma = c.gamma;
    t.alpha = c.alpha;
    t.lambda1 = c.lambda1;
    t.lambda2 = c.lambda2;
    t.max_steps = 80000;
    t.eval_interval = 10000;
  } else if (ds == "toy") {
    cfg.dataset = "data/toy";
    t.dim = 100;
    t.batch_size = 128;
    t.negatives = 16;
    t.lr = bilinear ? 0.005 : 0.002;
    t.gamma = bilinear ? 10.0 : 6.0;
    t.alpha = 1.0;
    t.lambda1 = 0.01;
    t.lambda1_reg = 0.001;
    t.lambda2 = 0.05;
    t.k = 10;
    t.reorder_interval = 500;
    t.max_steps = 5000;
    t.eval_interval = 0;
    t.log_interval = 100;
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
}

}  // namespace eans
