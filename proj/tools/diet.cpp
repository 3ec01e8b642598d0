// diet: command-line front end for training runs, sweeps, probing and
// loss/accuracy reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "diet/diet.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace diet;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string format = "jsonl";
};

void apply(TrainConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
}

nlohmann::json summary_of(const RunArtifact& run) {
  nlohmann::json j;
  j["config_hash"] = config_hash(run.config);
  j["mode"] = run.config.mode == TrainMode::diet ? "diet" : "supervised";
  j["label_smoothing"] = run.config.label_smoothing;
  j["epochs"] = run.metrics.empty() ? 0 : run.metrics.back().epoch;
  j["final_train_loss"] = run.metrics.empty() ? nlohmann::json(nullptr)
                                               : nlohmann::json(run.final_train_loss());
  auto probe = run.metrics.empty() ? std::nullopt : run.final_probe();
  j["final_probe_top1"] = probe ? nlohmann::json(*probe) : nlohmann::json(nullptr);
  return j;
}

void write_run_dir(const fs::path& dir, const TrainingState& st, MetricsFormat fmt) {
  fs::create_directories(dir);
  {
    std::ofstream cfg(dir / "config.txt");
    cfg << to_text(st.config);
  }
  write_metrics_file((dir / (fmt == MetricsFormat::csv ? "metrics.csv" : "metrics.jsonl")).string(),
                     st.metrics, fmt);
  save_checkpoint((dir / "checkpoint.bin").string(), st);
  RunArtifact art{st.config, st.metrics, st.encoder, st.head, (dir / "checkpoint.bin").string()};
  std::ofstream(dir / "summary.json") << summary_of(art).dump(2) << "\n";
}

void print_epoch(const MetricsRecord& m) {
  std::printf("epoch %4zu  loss %.6f  lr %.3e", m.epoch, m.train_loss, m.lr);
  if (m.probe_top1) std::printf("  probe %.4f", *m.probe_top1);
  std::printf("  %.1fs\n", m.wall_seconds);
  std::fflush(stdout);
}

int cmd_run(const std::string& config_path, const std::string& resume, const Overrides& o,
            bool quiet) {
  const auto fmt = parse_metrics_format(o.format);
  std::optional<Trainer> trainer;
  if (!resume.empty()) {
    TrainingState st = load_checkpoint(resume);
    if (o.seed && *o.seed != st.config.seed) {
      throw ConfigError("--seed cannot change the seed of a resumed run");
    }
    trainer.emplace(std::move(st), 0);
  } else {
    TrainConfig cfg = load_config(config_path);
    apply(cfg, o);
    trainer.emplace(cfg);
  }
  const fs::path dir = o.out_dir.empty()
                           ? fs::path("runs") / config_hash(trainer->state().config)
                           : fs::path(o.out_dir);
  while (!trainer->finished()) {
    const auto& m = trainer->run_epoch();
    if (!quiet) print_epoch(m);
  }
  write_run_dir(dir, trainer->state(), fmt);
  std::cout << summary_of(trainer->artifact()).dump() << "\n";
  return 0;
}

int cmd_sweep(const std::string& grid_path, unsigned workers, const Overrides& o) {
  const auto fmt = parse_metrics_format(o.format);
  auto grid = parse_grid(read_text_file(grid_path));
  for (auto& c : grid) apply(c, o);
  const fs::path root = o.out_dir.empty() ? fs::path("sweep") : fs::path(o.out_dir);
  std::vector<fs::path> dirs;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "run-%03zu-", i);
    dirs.push_back(root / (name + config_hash(grid[i])));
  }
  int failures = 0;
  sweep(grid, workers, [&](std::size_t i, const SweepOutcome& out) {
    if (!out.ok()) {
      ++failures;
      std::cerr << "run " << i << " failed: " << out.error << "\n";
      return;
    }
    // Sweep directories hold metrics and summaries for reporting; use
    // `diet run` when a resumable checkpoint is needed.
    fs::create_directories(dirs[i]);
    std::ofstream(dirs[i] / "config.txt") << to_text(out.run->config);
    write_metrics_file(
        (dirs[i] / (fmt == MetricsFormat::csv ? "metrics.csv" : "metrics.jsonl")).string(),
        out.run->metrics, fmt);
    std::ofstream(dirs[i] / "summary.json") << summary_of(*out.run).dump(2) << "\n";
    std::cout << "run " << i << " -> " << dirs[i].string() << "\n";
  });
  return failures == 0 ? 0 : 1;
}

int cmd_probe(const std::string& checkpoint, const std::string& data_path,
              const std::string& eval_path, std::size_t epochs) {
  TrainingState st = load_checkpoint(checkpoint);
  IndexedDataset train = load_dataset(data_path);
  std::optional<IndexedDataset> eval;
  if (!eval_path.empty()) eval = load_dataset(eval_path);
  label_audit::ProbeScope scope;
  ProbeConfig pc = st.config.probe;
  if (epochs) pc.epochs = epochs;
  const Matrix f = extract_features(st.encoder, train);
  const ProbeModel model = fit_probe(f, train.true_labels(), pc, train.n_classes());
  nlohmann::json j;
  j["checkpoint"] = checkpoint;
  j["train_top1"] = top1_accuracy(model, f, train.true_labels());
  if (eval) {
    j["eval_top1"] = top1_accuracy(model, extract_features(st.encoder, *eval),
                                   eval->true_labels());
  }
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_report(const std::string& runs_dir, bool as_json) {
  std::vector<ReportPoint> points;
  std::vector<fs::path> summaries;
  for (const auto& e : fs::recursive_directory_iterator(runs_dir)) {
    if (e.is_regular_file() && e.path().filename() == "summary.json") {
      summaries.push_back(e.path());
    }
  }
  std::sort(summaries.begin(), summaries.end());
  for (const auto& p : summaries) {
    std::ifstream in(p);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ReportError(p.string() + ": " + e.what());
    }
    if (j.value("mode", "diet") != "diet") continue;
    if (j["final_probe_top1"].is_null() || j["final_train_loss"].is_null()) {
      throw ReportError(p.string() + ": run has no final probe accuracy");
    }
    points.push_back({j["final_train_loss"].get<double>(), j["final_probe_top1"].get<double>(),
                      j["label_smoothing"].get<double>(),
                      p.parent_path().filename().string()});
  }
  const auto rep = correlation_report(std::move(points));
  if (as_json) {
    std::cout << to_json(rep).dump(2) << "\n";
  } else {
    std::cout << to_text(rep);
  }
  return 0;
}

int cmd_gen(const std::string& config_path, const std::string& out, int split,
            const Overrides& o) {
  TrainConfig cfg = load_config(config_path);
  apply(cfg, o);
  SyntheticSpec spec = cfg.data;
  spec.split = static_cast<std::uint64_t>(split);
  if (split == 1) spec.n_samples = cfg.test_samples;
  save_dataset(out, make_dataset(spec));
  std::cout << out << ": " << detail::describe(spec) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DIET training and evaluation"};
  app.require_subcommand(1);

  Overrides o;
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Override the run seed");
    sub->add_option("--out-dir", o.out_dir, "Output directory");
    sub->add_option("--format", o.format, "Metrics format")
        ->check(CLI::IsMember({"jsonl", "csv"}));
  };

  std::string config, resume, grid, checkpoint, data, eval, runs, out;
  unsigned workers = 1;
  std::size_t probe_epochs = 0;
  bool quiet = false, as_json = false;
  int split = 0;

  auto* run = app.add_subcommand("run", "Train one configuration");
  run->add_option("--config", config, "Config file");
  run->add_option("--resume", resume, "Continue from a checkpoint");
  run->add_flag("--quiet", quiet, "No per-epoch output");
  add_overrides(run);

  auto* sw = app.add_subcommand("sweep", "Train every configuration of a grid file");
  sw->add_option("--grid", grid, "Grid file")->required();
  sw->add_option("--workers", workers, "Concurrent runs")->check(CLI::PositiveNumber);
  add_overrides(sw);

  auto* pr = app.add_subcommand("probe", "Fit a linear probe on a checkpoint's encoder");
  pr->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  pr->add_option("--data", data, "Dataset file to fit the probe on")->required();
  pr->add_option("--eval-data", eval, "Dataset file to score");
  pr->add_option("--epochs", probe_epochs, "Probe iterations (default: from the config)");

  auto* rp = app.add_subcommand("report", "Spearman loss/accuracy report over run directories");
  rp->add_option("--runs", runs, "Directory holding run directories")->required();
  rp->add_flag("--json", as_json, "Emit JSON");

  auto* gen = app.add_subcommand("gen", "Write a config's dataset split to a file");
  gen->add_option("--config", config, "Config file")->required();
  gen->add_option("--out", out, "Output file")->required();
  gen->add_option("--split", split, "0: training split, 1: held-out split")
      ->check(CLI::Range(0, 1));
  add_overrides(gen);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      if (config.empty() == resume.empty()) {
        throw ConfigError("run needs exactly one of --config or --resume");
      }
      return cmd_run(config, resume, o, quiet);
    }
    if (*sw) return cmd_sweep(grid, workers, o);
    if (*pr) return cmd_probe(checkpoint, data, eval, probe_epochs);
    if (*rp) return cmd_report(runs, as_json);
    if (*gen) return cmd_gen(config, out, split, o);
  } catch (const DivergenceError& e) {
    std::cerr << "diverged at step " << e.step() << ": " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
