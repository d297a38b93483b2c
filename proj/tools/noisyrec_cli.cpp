// noisyrec command-line tool: data preparation, training, evaluation, reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>

#include "noisyrec/corpus.hpp"
#include "noisyrec/runner.hpp"

using namespace noisyrec;

namespace {

const std::vector<std::string> kConfigKeys = {
    "dataset", "variant", "d",      "steps", "epochs",  "batch_size", "lr",          "lr_decay",
    "k",       "spherical", "score_scale", "rec_loss", "kappa", "densify", "lambda", "tau",
    "alpha",   "beta",    "p_count", "pair_budget", "seed", "hist_bins", "eval_train", "output_dir"};

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& f) {
  cmd->add_option("-c,--config", f.config_file, "key=value or JSON config file");
  for (const auto& key : kConfigKeys) f.options[key] = cmd->add_option("--" + key, f.values[key], "config key " + key);
}

ExperimentConfig resolve_config(const ConfigFlags& f) {
  ExperimentConfig cfg = f.config_file.empty() ? ExperimentConfig{} : load_config(f.config_file);
  for (const auto& key : kConfigKeys)
    if (f.options.at(key)->count() > 0) apply_setting(cfg, key, f.values.at(key));
  validate(cfg);
  return cfg;
}

void print_summary(const std::vector<MetricsReport>& reports) {
  for (const auto& r : reports) {
    std::cout << r.split << ": hit_rate@" << r.k << "=" << r.hit_rate << " coverage=" << r.coverage << " arp=" << r.arp;
    if (r.iou_vs_bigram) std::cout << " iou_vs_bigram=" << *r.iou_vs_bigram;
    if (r.rbf) std::cout << " rbf=" << *r.rbf;
    std::cout << "\n";
  }
}

int cmd_prepare(const std::string& input, const std::string& format, const std::string& out, std::size_t min_support,
                double window_days, std::size_t subset) {
  const auto fmt = parse_format(format);
  auto ingested = ingest(input, fmt);
  if (ingested.malformed_rows > 0) std::cerr << "skipped " << ingested.malformed_rows << " malformed rows\n";
  PreprocessOptions opts;
  opts.min_item_support = min_support;
  opts.test_window = static_cast<TimeMs>(window_days * kMsPerDay);
  DatasetBundle b = preprocess(ingested.events, opts);
  b.provenance["source"] = json{{"path", input}, {"format", format}, {"malformed_rows", ingested.malformed_rows}};
  if (subset > 1) b = subset_fraction(b, subset);
  save_bundle(b, out);
  std::cout << "items " << b.vocab.size() << " train " << b.train.size() << " test " << b.test.size() << "\n";
  return 0;
}

int cmd_imbalance(const std::string& input, const std::string& format, const std::string& out, double ratio,
                  std::uint64_t seed) {
  const auto fmt = parse_format(format);
  auto ingested = ingest(input, fmt);
  auto result = imbalance_detailed(ingested.events, ratio, seed);
  std::unordered_set<std::string> removed(result.removed_items.begin(), result.removed_items.end());
  std::ifstream in(input);
  std::ofstream os(out, std::ios::binary);
  if (!in || !os) throw Error("cannot open '" + input + "' or '" + out + "'");
  std::string line;
  std::size_t kept = 0, dropped = 0;
  while (std::getline(in, line)) {
    auto e = parse_row(line, fmt);
    if (e && removed.contains(e->item_key)) {
      ++dropped;
      continue;
    }
    os << line << '\n';
    kept += e.has_value();
  }
  std::cout << "removed " << result.removed_items.size() << " of " << result.first_quartile_size
            << " first-quartile items; kept " << kept << " rows, dropped " << dropped << "\n";
  return 0;
}

int cmd_synth(const SynthOptions& o, const std::string& out) {
  DatasetBundle b = synth_corpus(o);
  save_bundle(b, out);
  std::cout << "items " << b.vocab.size() << " train " << b.train.size() << " test " << b.test.size() << "\n";
  return 0;
}

int cmd_train(const ConfigFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);
  if (cfg.dataset.empty()) throw Error("train: --dataset is required");
  DatasetBundle data = load_bundle(cfg.dataset);
  std::optional<TrainResult> trained;
  RunRecord rec = run_experiment(cfg, data, &std::cerr, &trained);
  write_run(rec, run_directory(cfg), data, trained);
  print_summary(rec.reports);
  std::cout << rec.run_dir << "\n";
  return 0;
}

int cmd_evaluate(const ConfigFlags& flags, const std::string& checkpoint, const std::string& split,
                 const std::string& out) {
  ExperimentConfig cfg = resolve_config(flags);
  if (cfg.dataset.empty()) throw Error("evaluate: --dataset is required");
  DatasetBundle data = load_bundle(cfg.dataset);
  std::vector<MetricsReport> reports;
  std::vector<std::string> splits = split == "both" ? std::vector<std::string>{"train", "test"}
                                                    : std::vector<std::string>{split};
  if (!checkpoint.empty()) {
    LoadedModel m = load_model(checkpoint, data);
    cfg.variant = m.variant;
    for (const auto& s : splits) reports.push_back(evaluate_split(cfg, data, s, &m.params, &m.model));
  } else {
    if (is_model_variant(cfg.variant)) throw Error("evaluate: model variants need --checkpoint");
    for (const auto& s : splits) reports.push_back(evaluate_split(cfg, data, s, nullptr, nullptr));
  }
  json j = json::array();
  for (const auto& r : reports) j.push_back(to_json(r));
  if (!out.empty()) write_text(out, j.dump(2) + "\n");
  print_summary(reports);
  return 0;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& out) {
  std::vector<RunRecord> records;
  for (const auto& r : runs) {
    std::filesystem::path p(r);
    if (std::filesystem::is_directory(p)) p /= "run.json";
    std::ifstream in(p);
    if (!in) throw Error("cannot read '" + p.string() + "'");
    records.push_back(run_record_from_json(json::parse(in)));
  }
  const std::string csv = comparison_csv(records);
  if (out.empty()) std::cout << csv;
  else write_text(out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Session-based recommendation with stochastic exposure modelling"};
  app.require_subcommand(1);

  std::string input, format = "yoochoose", out;
  std::size_t min_support = 5, subset = 1;
  double window_days = 1.0;
  auto* prepare = app.add_subcommand("prepare", "Ingest a raw clickstream and write a dataset bundle");
  prepare->add_option("--input", input, "raw clickstream file")->required();
  prepare->add_option("--format", format, "yoochoose or diginetica");
  prepare->add_option("--out", out, "bundle path")->required();
  prepare->add_option("--min-support", min_support, "minimum item support");
  prepare->add_option("--test-days", window_days, "test window in days");
  prepare->add_option("--subset", subset, "keep the newest 1/N of training examples");

  double ratio = 0.0;
  std::uint64_t seed = 1;
  auto* imb = app.add_subcommand("imbalance", "Remove a share of the most popular items from a raw file");
  imb->add_option("--input", input, "raw clickstream file")->required();
  imb->add_option("--format", format, "yoochoose or diginetica");
  imb->add_option("--out", out, "filtered raw file")->required();
  imb->add_option("--ratio", ratio, "share of first-quartile items to remove")->required();
  imb->add_option("--seed", seed, "selection seed");

  SynthOptions so;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic Markov corpus bundle");
  synth->add_option("--items", so.n_items);
  synth->add_option("--sessions", so.n_sessions);
  synth->add_option("--sharpness", so.sharpness);
  synth->add_option("--seed", so.seed);
  synth->add_option("--days", so.days);
  synth->add_option("--out", out, "bundle path")->required();

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "Train or run a variant and write a run directory");
  add_config_flags(train, train_flags);

  ConfigFlags eval_flags;
  std::string checkpoint, split = "test";
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint or baseline on a bundle");
  add_config_flags(evaluate, eval_flags);
  evaluate->add_option("--checkpoint", checkpoint, "model checkpoint");
  evaluate->add_option("--split", split, "train, test or both");
  evaluate->add_option("--out", out, "write the reports as JSON");

  std::vector<std::string> runs;
  auto* report = app.add_subcommand("report", "Merge run records into one comparison CSV");
  report->add_option("runs", runs, "run directories or run.json files")->required();
  report->add_option("--out", out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*prepare) return cmd_prepare(input, format, out, min_support, window_days, subset);
    if (*imb) return cmd_imbalance(input, format, out, ratio, seed);
    if (*synth) return cmd_synth(so, out);
    if (*train) return cmd_train(train_flags);
    if (*evaluate) return cmd_evaluate(eval_flags, checkpoint, split, out);
    if (*report) return cmd_report(runs, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
