// Command-line front end: train, evaluate, analyze, sweep, ablation.
//
// Exit status: 0 success, 1 user error (config, data, checkpoint), 2 internal.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "eans/eans.hpp"

namespace fs = std::filesystem;
using namespace eans;

namespace {

struct ConfigArgs {
  std::string config;
  std::string preset;
  std::vector<std::string> sets;
  std::string dataset;
  std::string out;
};

void add_config_args(CLI::App* cmd, ConfigArgs& a) {
  cmd->add_option("--preset", a.preset, "named preset, applied first");
  cmd->add_option("--config", a.config, "key = value config file");
  cmd->add_option("--set", a.sets, "key=value override, applied last")
      ->allow_extra_args(false);
  cmd->add_option("--dataset", a.dataset, "dataset directory");
  cmd->add_option("--out", a.out, "output directory");
}

RunConfig resolve(const ConfigArgs& a) {
  RunConfig rc;
  if (!a.preset.empty()) apply_preset(rc, a.preset);
  if (!a.config.empty()) apply_config_file(rc, a.config);
  for (const auto& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(rc, detail::trim(std::string_view(kv).substr(0, eq)),
                     detail::trim(std::string_view(kv).substr(eq + 1)));
  }
  if (!a.dataset.empty()) rc.dataset = a.dataset;
  if (!a.out.empty()) rc.out = a.out;
  rc.train.validate();
  return rc;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p);
  out << text;
  if (!out) throw UserError("cli", "cannot write " + p.string());
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "valid") return Split::kValid;
  if (s == "test") return Split::kTest;
  throw ConfigError("unknown split '" + s + "' (expected train|valid|test)");
}

void append_metrics_row(const fs::path& csv, const std::string& row) {
  const bool fresh = !fs::exists(csv);
  if (csv.has_parent_path()) fs::create_directories(csv.parent_path());
  std::ofstream out(csv, std::ios::app);
  if (fresh) out << metrics_csv_header() << "\n";
  out << row << "\n";
}

std::string dataset_label(const std::string& path) {
  return fs::path(path).lexically_normal().filename().string();
}

Metrics evaluate_split(const ModelParams<float>& p, const KgDataset& ds,
                       Split split, unsigned threads) {
  if (split == Split::kTrain)
    std::cerr << "warning: evaluating on the training split\n";
  return evaluate(p, std::span<const Triple>(ds.split(split)), ds.filter,
                  {true, threads});
}

int cmd_train(const ConfigArgs& a, const std::string& resume_dir) {
  const RunConfig rc = resolve(a);
  const fs::path out(rc.out);
  write_text(out / "resolved.cfg", run_config_text(rc));
  const auto ds = load_dataset(rc.dataset);
  std::optional<Checkpoint> resume;
  if (!resume_dir.empty()) resume = load_checkpoint(resume_dir, rc.train.model_spec(ds));

  TrainOptions opts;
  opts.out_dir = out;
  opts.resume = resume ? &*resume : nullptr;
  const auto res = train(ds, rc.train, opts);
  if (!res.log.records.empty())
    std::cerr << "step " << res.log.records.back().step << " loss "
              << res.log.records.back().loss << "\n";

  const Split split = parse_split(rc.split);
  if (!ds.split(split).empty()) {
    const auto m = evaluate_split(res.params, ds, split, rc.train.eval_threads);
    std::cout << to_json(m).dump(2) << "\n";
    append_metrics_row(out / "metrics.csv",
                       metrics_csv_row(dataset_label(rc.dataset),
                                       model_name(rc.train.model),
                                       strategy_name(rc.train.strategy), rc.split, m));
  }
  return 0;
}

int cmd_evaluate(const std::string& ck_dir, const std::string& dataset,
                 const std::string& split_name, const std::string& out,
                 unsigned threads) {
  const Split split = parse_split(split_name);
  const auto ds = load_dataset(dataset);
  const auto spec = read_checkpoint_spec(ck_dir);
  if (spec.num_entities != ds.num_entities())
    throw DataError("entity count mismatch: checkpoint has " +
                    std::to_string(spec.num_entities) + ", dataset has " +
                    std::to_string(ds.num_entities()));
  if (spec.num_relations != ds.num_relations())
    throw DataError("relation count mismatch: checkpoint has " +
                    std::to_string(spec.num_relations) + ", dataset has " +
                    std::to_string(ds.num_relations()));
  const auto ck = load_checkpoint(ck_dir);
  const auto m = evaluate_split(ck.params, ds, split, threads);
  std::cout << to_json(m).dump(2) << "\n";
  std::string strategy = "unknown";
  if (auto it = ck.meta.extra.find("strategy"); it != ck.meta.extra.end())
    strategy = it->second;
  append_metrics_row(fs::path(out) / "metrics.csv",
                     metrics_csv_row(dataset_label(dataset), model_name(spec.kind),
                                     strategy, split_name, m));
  return 0;
}

int cmd_analyze(const std::string& kind, const ConfigArgs& a,
                const std::vector<std::string>& ck_dirs,
                const std::vector<std::string>& strategies) {
  const RunConfig rc = resolve(a);
  const fs::path out(rc.out);
  const auto ds = load_dataset(rc.dataset);
  const auto spec = rc.train.model_spec(ds);
  const auto digest = config_digest(rc.train);
  const ProbeConfig probe = ProbeConfig::from(rc.train);
  if (ck_dirs.empty()) throw ConfigError("analyze needs at least one --checkpoint");

  std::vector<Checkpoint> cks;
  for (const auto& d : ck_dirs) {
    const auto s = read_checkpoint_spec(d);
    if (s.num_entities != ds.num_entities())
      throw DataError("entity count mismatch between " + d + " and " + rc.dataset);
    cks.push_back(load_checkpoint(d, s.kind == spec.kind ? std::optional(spec)
                                                         : std::nullopt));
  }
  write_text(out / "resolved.cfg", run_config_text(rc));

  if (kind == "gap") {
    std::vector<Strategy> ss;
    for (const auto& s : strategies) ss.push_back(parse_strategy(s));
    if (ss.empty()) ss.push_back(rc.train.strategy);
    std::vector<GapCheckpoint> gc;
    for (const auto& ck : cks)
      gc.push_back({ck.optimizer.step, &ck.params,
                    ck.index_map ? &*ck.index_map : nullptr});
    const auto rows = score_gap_report(gc, ds, probe, ss, rc.gap_batches);
    write_gap_csv(out / "analysis" / "score_gap.csv", digest, rows);
  } else if (kind == "cdf") {
    const auto& ck = cks.front();
    const auto cdf = neg_weight_cdf(ck.params, ds, probe,
                                    ck.index_map ? &*ck.index_map : nullptr,
                                    rc.cdf_batches);
    write_cdf_csv(out / "analysis" / "neg_weight_cdf.csv", digest, probe,
                  rc.cdf_batches, cdf);
  } else if (kind == "hist") {
    const auto& ck = cks.front();
    const auto h = substitution_histogram(
        ck.params, ck.meta.use_substitution, ds, probe,
        ck.index_map ? &*ck.index_map : nullptr, rc.hist_batches, rc.hist_bins);
    write_hist_csv(out / "analysis" / "substitution_hist.csv", digest, h);
    for (int g = 0; g < 3; ++g)
      std::cout << group_name(static_cast<NegativeGroup>(g)) << ": count "
                << h.stats[g].count << " mean " << h.stats[g].mean << "\n";
  } else {
    throw ConfigError("unknown analysis '" + kind + "' (expected gap|cdf|hist)");
  }
  return 0;
}

int cmd_sweep(const ConfigArgs& a) {
  const RunConfig rc = resolve(a);
  const fs::path out(rc.out);
  write_text(out / "resolved.cfg", run_config_text(rc));
  const auto ds = load_dataset(rc.dataset);
  const auto cells = run_sweep(ds, rc.train, rc.n_values, rc.strategies,
                               parse_split(rc.split), rc.jobs);
  write_grid_csv<SweepCell>(
      out / "analysis" / "sweep.csv", config_digest(rc.train), cells,
      [](const SweepCell& c) { return std::to_string(c.n) + "," + c.strategy; },
      "n,strategy");
  for (const auto& c : cells)
    std::cout << "n=" << c.n << " " << c.strategy << " mrr " << c.metrics.combined.mrr
              << "\n";
  return 0;
}

int cmd_ablation(const ConfigArgs& a) {
  const RunConfig rc = resolve(a);
  const fs::path out(rc.out);
  write_text(out / "resolved.cfg", run_config_text(rc));
  const auto ds = load_dataset(rc.dataset);
  const auto cells = run_ablation(ds, rc.train, parse_split(rc.split), rc.jobs);
  write_grid_csv<AblationCell>(
      out / "analysis" / "ablation.csv", config_digest(rc.train), cells,
      [](const AblationCell& c) {
        return std::string(c.gauss ? "on" : "off") + "," + (c.subs ? "on" : "off");
      },
      "gauss,subs");
  for (const auto& c : cells)
    std::cout << "gauss=" << (c.gauss ? "on " : "off") << " subs="
              << (c.subs ? "on " : "off") << " mrr " << c.metrics.combined.mrr
              << " hits@10 " << c.metrics.combined.hits.at(10) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge graph embedding training with entity-aware negative sampling"};
  app.require_subcommand(1);

  ConfigArgs train_args, analyze_args, sweep_args, ablation_args;
  std::string resume;
  auto* train_cmd = app.add_subcommand("train", "train a model");
  add_config_args(train_cmd, train_args);
  train_cmd->add_option("--resume", resume, "continue from this checkpoint");

  std::string ck, eval_dataset, eval_split = "test", eval_out = ".";
  unsigned eval_threads = 1;
  auto* eval_cmd = app.add_subcommand("evaluate", "filtered ranking metrics");
  eval_cmd->add_option("--checkpoint", ck)->required();
  eval_cmd->add_option("--dataset", eval_dataset)->required();
  eval_cmd->add_option("--split", eval_split, "train|valid|test");
  eval_cmd->add_option("--out", eval_out, "directory for metrics.csv");
  eval_cmd->add_option("--threads", eval_threads);

  std::string kind;
  std::vector<std::string> ck_dirs, strategies;
  auto* analyze_cmd = app.add_subcommand("analyze", "score gap, weight CDF, substitution histogram");
  analyze_cmd->add_option("kind", kind, "gap|cdf|hist")->required();
  analyze_cmd->add_option("--checkpoint", ck_dirs, "checkpoint directory (repeatable)");
  analyze_cmd->add_option("--strategies", strategies, "gap: samplers to probe")
      ->delimiter(',');
  add_config_args(analyze_cmd, analyze_args);

  auto* sweep_cmd = app.add_subcommand("sweep", "MRR over n_values x strategies");
  add_config_args(sweep_cmd, sweep_args);
  auto* ablation_cmd = app.add_subcommand("ablation", "2x2 Gaussian / substitution grid");
  add_config_args(ablation_cmd, ablation_args);

  app.add_subcommand("presets", "list preset names")->callback([] {
    for (const auto& p : preset_names()) std::cout << p << "\n";
  });
  app.add_subcommand("keys", "list config keys")->callback([] {
    for (const auto& k : config_keys()) std::cout << k.key << "\t" << k.doc << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*train_cmd) return cmd_train(train_args, resume);
    if (*eval_cmd) return cmd_evaluate(ck, eval_dataset, eval_split, eval_out, eval_threads);
    if (*analyze_cmd) return cmd_analyze(kind, analyze_args, ck_dirs, strategies);
    if (*sweep_cmd) return cmd_sweep(sweep_args);
    if (*ablation_cmd) return cmd_ablation(ablation_args);
    return 0;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
}
