#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "eans/checkpoint.hpp"
#include "eans/config.hpp"
#include "eans/dataset.hpp"
#include "eans/eans_index.hpp"
#include "eans/evaluator.hpp"
#include "eans/objective.hpp"
#include "eans/sampling.hpp"

namespace eans {

struct TrainLogRecord {
  std::int64_t step = 0;
  double loss = 0;
  double kg_part = 0;
  double sub_part = 0;
  double mean_f_pos = 0;
  double mean_f_neg = 0;
  double wall_ms = 0;
};

struct ValidationRecord {
  std::int64_t step = 0;
  double mrr = 0;
};

struct TrainLog {
  std::vector<TrainLogRecord> records;
  std::vector<ValidationRecord> validation;
};

inline constexpr const char* kTrainLogHeader =
    "step,loss,kg_part,sub_part,mean_f_pos,mean_f_neg,wall_ms";

struct TrainResult {
  ModelParams<float> params;
  OptimizerState<float> optimizer;
  TrainLog log;
  std::optional<VirtualIndexMap> index_map;
  /// Best validation MRR seen, with its parameters (only when validation ran).
  std::optional<ModelParams<float>> best_params;
  double best_valid_mrr = -1;
  std::int64_t best_step = 0;
};

struct TrainOptions {
  /// Writes checkpoints and logs under this directory when non-empty.
  std::filesystem::path out_dir;
  /// Continue from this checkpoint instead of initializing.
  const Checkpoint* resume = nullptr;
};

/// Seed for the cluster refresh that follows `step` (0 = before step 1).
inline std::uint64_t refresh_seed(std::uint64_t root, std::int64_t step) {
  auto rng = make_stream(root, "cluster", static_cast<std::uint64_t>(step));
  return rng();
}

/// Parameters as initialized for `cfg` (what a zero-step run returns).
inline ModelParams<float> initial_params(const KgDataset& ds,
                                         const TrainConfig& cfg) {
  return init_params<float>(cfg.model_spec(ds), cfg.gamma, cfg.seed);
}

namespace detail {

inline CheckpointMeta make_meta(const TrainConfig& cfg, double best_mrr,
                                std::int64_t best_step) {
  CheckpointMeta m;
  m.seed = cfg.seed;
  m.config_digest = config_digest(cfg);
  m.use_substitution = cfg.use_substitution;
  m.extra["best_valid_mrr"] = fmt_double(best_mrr);
  m.extra["best_step"] = std::to_string(best_step);
  m.extra["strategy"] = std::string(strategy_name(cfg.strategy));
  return m;
}

inline std::string step_dir_name(std::int64_t step) {
  std::string s = std::to_string(step);
  return "step_" + std::string(s.size() < 7 ? 7 - s.size() : 0, '0') + s;
}

}  // namespace detail

/// Runs the training loop: per step, a batch of positives drawn uniformly with
/// replacement, negatives from the configured strategy, the combined loss,
/// and one sparse Adam update. Under EANS the index map is built before the
/// first step and rebuilt after every `reorder_interval` steps. Each step
/// draws from its own RNG streams, so the run is a pure function of the
/// config and a resumed run matches an uninterrupted one bit for bit.
inline TrainResult train(const KgDataset& ds, const TrainConfig& cfg,
                         const TrainOptions& opts = {}) {
  namespace fs = std::filesystem;
  cfg.validate();
  const auto spec = cfg.model_spec(ds);
  const bool eans_mode = cfg.strategy == Strategy::kEans;
  if (eans_mode && cfg.k > ds.num_entities())
    throw ConfigError("k=" + std::to_string(cfg.k) + " exceeds entity count " +
                      std::to_string(ds.num_entities()));

  TrainResult res;
  AdamConfig adam;
  adam.lr = cfg.lr;
  if (opts.resume) {
    if (!(opts.resume->params.spec == spec))
      throw CheckpointError(opts.resume->params.spec.kind != spec.kind
                                ? "model kind mismatch"
                                : "shape mismatch between checkpoint and run");
    res.params = opts.resume->params;
    res.optimizer = opts.resume->optimizer;
    res.optimizer.cfg.lr = cfg.lr;
    res.index_map = opts.resume->index_map;
    if (auto it = opts.resume->meta.extra.find("best_valid_mrr");
        it != opts.resume->meta.extra.end())
      res.best_valid_mrr = std::stod(it->second);
    if (auto it = opts.resume->meta.extra.find("best_step");
        it != opts.resume->meta.extra.end())
      res.best_step = std::stoll(it->second);
  } else {
    res.params = init_params<float>(spec, cfg.gamma, cfg.seed);
    res.optimizer = OptimizerState<float>(res.params, adam);
  }

  const double sigma = cfg.resolved_sigma(ds.num_entities());
  if (eans_mode && !res.index_map)
    res.index_map = refresh(res.params, cfg.k,
                            refresh_seed(cfg.seed, res.optimizer.step),
                            cfg.kmeans_iters);

  std::ofstream log_csv;
  if (!opts.out_dir.empty()) {
    fs::create_directories(opts.out_dir / "logs");
    const auto path = opts.out_dir / "logs" / "train.csv";
    const bool fresh = !fs::exists(path) || opts.resume == nullptr;
    log_csv.open(path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) log_csv << kTrainLogHeader << "\n";
  }
  auto save = [&](const fs::path& dir, const ModelParams<float>& p) {
    save_checkpoint(dir, p, res.optimizer,
                    detail::make_meta(cfg, res.best_valid_mrr, res.best_step),
                    res.index_map ? &*res.index_map : nullptr);
  };

  const LossConfig loss_cfg = cfg.loss();
  SamplerConfig scfg{cfg.strategy, cfg.negatives, sigma};
  GradAccumulator grads(res.params);
  std::vector<Triple> batch(static_cast<std::size_t>(cfg.batch_size));
  std::uniform_int_distribution<std::size_t> pick(0, ds.train.size() - 1);
  const auto t0 = std::chrono::steady_clock::now();

  for (std::int64_t step = res.optimizer.step + 1; step <= cfg.max_steps; ++step) {
    auto batch_rng = make_stream(cfg.seed, "batch", static_cast<std::uint64_t>(step));
    auto sample_rng = make_stream(cfg.seed, "sample", static_cast<std::uint64_t>(step));
    for (auto& t : batch) t = ds.train[pick(batch_rng)];
    // The map only changes between steps, so one batch never mixes maps.
    const auto nb = build_negative_batch(
        std::span<const Triple>(batch), step - 1, scfg,
        res.index_map ? &*res.index_map : nullptr, ds.num_entities(), ds.filter,
        sample_rng);

    grads.clear();
    const auto lb = batch_loss(res.params, std::span<const Triple>(batch), nb,
                               loss_cfg, &grads);
    if (!std::isfinite(lb.total))
      throw NumericError("non-finite loss at step " + std::to_string(step));
    adam_step(res.optimizer, res.params, grads);

    if (step % cfg.log_interval == 0 || step == cfg.max_steps) {
      TrainLogRecord rec{step, lb.total, lb.kg_part, lb.sub_part, lb.mean_f_pos,
                         lb.mean_f_neg,
                         std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count()};
      res.log.records.push_back(rec);
      if (log_csv.is_open())
        log_csv << rec.step << ',' << detail::fmt_double(rec.loss) << ','
                << detail::fmt_double(rec.kg_part) << ','
                << detail::fmt_double(rec.sub_part) << ','
                << detail::fmt_double(rec.mean_f_pos) << ','
                << detail::fmt_double(rec.mean_f_neg) << ',' << rec.wall_ms
                << '\n';
    }

    if (eans_mode && step % cfg.reorder_interval == 0)
      res.index_map = refresh(res.params, cfg.k, refresh_seed(cfg.seed, step),
                              cfg.kmeans_iters);

    if (cfg.eval_interval > 0 && step % cfg.eval_interval == 0 &&
        !ds.valid.empty()) {
      const auto m = evaluate(res.params, std::span<const Triple>(ds.valid),
                              ds.filter, {true, cfg.eval_threads});
      res.log.validation.push_back({step, m.combined.mrr});
      if (m.combined.mrr > res.best_valid_mrr) {
        res.best_valid_mrr = m.combined.mrr;
        res.best_step = step;
        res.best_params = res.params;
        if (!opts.out_dir.empty())
          save(opts.out_dir / "checkpoints" / "best", res.params);
      }
    }
    if (!opts.out_dir.empty() && cfg.checkpoint_interval > 0 &&
        step % cfg.checkpoint_interval == 0)
      save(opts.out_dir / "checkpoints" / detail::step_dir_name(step), res.params);
  }
  if (!opts.out_dir.empty()) save(opts.out_dir / "checkpoints" / "final", res.params);
  return res;
}

// --- ablation -------------------------------------------------------------

/// Base config with Gaussian sampling and the substitution loss both off.
inline TrainConfig plain_uniform_config(TrainConfig base) {
  base.strategy = Strategy::kUniform;
  base.use_substitution = false;
  return base;
}

struct AblationCell {
  bool gauss = false;
  bool subs = false;
  TrainConfig config;
  Metrics metrics;
};

/// The four toggle combinations in table order:
/// (off, off), (on, off), (off, on), (on, on).
inline std::vector<AblationCell> ablation_cells(const TrainConfig& base) {
  std::vector<AblationCell> cells;
  for (auto [gauss, subs] : {std::pair{false, false}, std::pair{true, false},
                             std::pair{false, true}, std::pair{true, true}}) {
    AblationCell c;
    c.gauss = gauss;
    c.subs = subs;
    c.config = base;
    c.config.strategy = gauss ? Strategy::kEans : Strategy::kUniform;
    c.config.use_substitution = subs;
    cells.push_back(c);
  }
  return cells;
}

/// Runs `cells` (up to `jobs` at a time) and fills in their metrics on `split`.
template <typename Cell>
void run_cells(const KgDataset& ds, std::vector<Cell>& cells, Split split,
               unsigned jobs) {
  auto run_one = [&](Cell& c) {
    const auto r = train(ds, c.config);
    c.metrics = evaluate(r.params, std::span<const Triple>(ds.split(split)),
                         ds.filter, {true, c.config.eval_threads});
  };
  if (jobs <= 1) {
    for (auto& c : cells) run_one(c);
    return;
  }
  for (std::size_t i = 0; i < cells.size(); i += jobs) {
    std::vector<std::future<void>> fs;
    for (std::size_t j = i; j < std::min(cells.size(), i + jobs); ++j)
      fs.push_back(std::async(std::launch::async, run_one, std::ref(cells[j])));
    for (auto& f : fs) f.get();
  }
}

inline std::vector<AblationCell> run_ablation(const KgDataset& ds,
                                              const TrainConfig& base,
                                              Split split = Split::kTest,
                                              unsigned jobs = 1) {
  auto cells = ablation_cells(base);
  run_cells(ds, cells, split, jobs);
  return cells;
}

}  // namespace eans
