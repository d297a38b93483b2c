#pragma once

// Experiment configuration, synthetic corpora, the training loop, evaluation
// and run records.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "noisyrec/baselines.hpp"
#include "noisyrec/checksum.hpp"
#include "noisyrec/corpus.hpp"
#include "noisyrec/metrics.hpp"
#include "noisyrec/objective.hpp"
#include "noisyrec/params.hpp"
#include "noisyrec/rng.hpp"
#include "noisyrec/srgnn.hpp"

namespace noisyrec {

using json = nlohmann::json;

// -- configuration -------------------------------------------------------------

struct ExperimentConfig {
  std::string dataset;
  std::string variant = "srgnn";  // random | bigram | srgnn | noisy
  std::size_t d = 100;
  std::size_t steps = 1;
  std::size_t epochs = 15;
  std::size_t batch_size = 32;
  double lr = 0.001;
  double lr_decay = 0.1;  // lr multiplier applied after every epoch
  std::size_t k = 20;
  std::optional<bool> spherical;     // default: on for noisy, off otherwise
  std::optional<double> score_scale; // default: 12 when spherical, else 1
  std::string rec_loss = "bce";      // bce | ce, for the srgnn variant
  double kappa = 250.0;
  bool densify = true;
  double lambda = 0.5;
  double tau = 2.0;
  double alpha = 0.1;
  double beta = 0.0;
  std::size_t p_count = 10;
  std::size_t pair_budget = 4096;
  std::uint64_t seed = 1;
  std::size_t hist_bins = 40;
  bool eval_train = true;
  std::string output_dir = "runs";
};

inline bool is_model_variant(const std::string& v) { return v == "srgnn" || v == "noisy"; }

inline void validate(const ExperimentConfig& c) {
  if (c.variant != "random" && c.variant != "bigram" && !is_model_variant(c.variant))
    throw Error("config: unknown variant '" + c.variant + "'");
  if (c.variant == "noisy" && c.spherical == false) throw Error("config: the noisy variant needs spherical embeddings");
  if (c.rec_loss != "bce" && c.rec_loss != "ce") throw Error("config: rec_loss must be bce or ce");
  if (c.batch_size == 0) throw Error("config: batch_size must be >= 1");
  if (c.k == 0) throw Error("config: k must be >= 1");
  if (!(c.lr > 0)) throw Error("config: lr must be > 0");
  if (!(c.tau > 0)) throw Error("config: tau must be > 0");
  if (!(c.kappa >= 0)) throw Error("config: kappa must be >= 0");
  if (!(c.alpha >= 0 && c.alpha < 1)) throw Error("config: alpha must be in [0, 1)");
  if (!(c.lambda >= 0)) throw Error("config: lambda must be >= 0");
}

inline json to_json(const ExperimentConfig& c) {
  return json{{"dataset", c.dataset},
              {"variant", c.variant},
              {"d", c.d},
              {"steps", c.steps},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"lr_decay", c.lr_decay},
              {"k", c.k},
              {"spherical", c.spherical ? json(*c.spherical) : json(nullptr)},
              {"score_scale", c.score_scale ? json(*c.score_scale) : json(nullptr)},
              {"rec_loss", c.rec_loss},
              {"kappa", std::isinf(c.kappa) ? json("inf") : json(c.kappa)},
              {"densify", c.densify},
              {"lambda", c.lambda},
              {"tau", c.tau},
              {"alpha", c.alpha},
              {"beta", c.beta},
              {"p_count", c.p_count},
              {"pair_budget", c.pair_budget},
              {"seed", c.seed},
              {"hist_bins", c.hist_bins},
              {"eval_train", c.eval_train},
              {"output_dir", c.output_dir}};
}

namespace detail {

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw Error("config: " + key + " expects a boolean, got '" + v + "'");
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw Error("config: " + key + " expects a number, got '" + v + "'");
  return x;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long x = 0;
  try {
    if (!v.empty() && v[0] != '-') x = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw Error("config: " + key + " expects a non-negative integer, got '" + v + "'");
  return x;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

/// Sets one key from its textual value.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  const std::string v = trim(value);
  if (key == "dataset") c.dataset = v;
  else if (key == "variant") c.variant = v;
  else if (key == "d") c.d = parse_uint(key, v);
  else if (key == "steps") c.steps = parse_uint(key, v);
  else if (key == "epochs") c.epochs = parse_uint(key, v);
  else if (key == "batch_size") c.batch_size = parse_uint(key, v);
  else if (key == "lr") c.lr = parse_double(key, v);
  else if (key == "lr_decay") c.lr_decay = parse_double(key, v);
  else if (key == "k") c.k = parse_uint(key, v);
  else if (key == "spherical") c.spherical = parse_bool(key, v);
  else if (key == "score_scale") c.score_scale = parse_double(key, v);
  else if (key == "rec_loss") c.rec_loss = v;
  else if (key == "kappa") c.kappa = v == "inf" ? INFINITY : parse_double(key, v);
  else if (key == "densify") c.densify = parse_bool(key, v);
  else if (key == "lambda") c.lambda = parse_double(key, v);
  else if (key == "tau") c.tau = parse_double(key, v);
  else if (key == "alpha") c.alpha = parse_double(key, v);
  else if (key == "beta") c.beta = parse_double(key, v);
  else if (key == "p_count") c.p_count = parse_uint(key, v);
  else if (key == "pair_budget") c.pair_budget = parse_uint(key, v);
  else if (key == "seed") c.seed = parse_uint(key, v);
  else if (key == "hist_bins") c.hist_bins = parse_uint(key, v);
  else if (key == "eval_train") c.eval_train = parse_bool(key, v);
  else if (key == "output_dir") c.output_dir = v;
  else throw Error("config: unknown key '" + key + "'");
}

inline std::string json_scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

inline ExperimentConfig config_from_json(const json& j, ExperimentConfig c = {}) {
  if (!j.is_object()) throw Error("config: JSON root must be an object");
  for (const auto& [key, v] : j.items()) {
    if (v.is_null()) {
      if (key == "spherical") c.spherical.reset();
      else if (key == "score_scale") c.score_scale.reset();
      continue;
    }
    apply_setting(c, key, json_scalar_text(v));
  }
  return c;
}

/// JSON object, or key=value lines with '#' comments.
inline ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {}) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw Error(std::string("config: ") + e.what());
    }
    return config_from_json(j, std::move(base));
  }
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config: line " + std::to_string(lineno) + " is not key=value");
    apply_setting(base, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

inline bool resolved_spherical(const ExperimentConfig& c) { return c.spherical.value_or(c.variant == "noisy"); }

inline ModelConfig model_config(const ExperimentConfig& c, std::size_t n_items) {
  ModelConfig m;
  m.n_items = n_items;
  m.dim = c.d;
  m.steps = c.steps;
  m.spherical = resolved_spherical(c);
  m.score_scale = c.score_scale.value_or(default_score_scale(m.spherical));
  m.rec_loss = c.rec_loss == "ce" ? RecLoss::ce : RecLoss::bce;
  return m;
}

inline NoisyConfig noisy_config(const ExperimentConfig& c) {
  NoisyConfig n;
  n.enabled = c.variant == "noisy";
  n.densify = c.densify;
  n.densify_kappa = c.kappa;
  n.fake = {c.alpha, c.beta, c.p_count, c.kappa};
  n.unif = {c.tau, c.pair_budget, c.lambda};
  return n;
}

inline json model_meta(const ModelConfig& m) {
  return json{{"n_items", m.n_items},
              {"d", m.dim},
              {"steps", m.steps},
              {"spherical", m.spherical},
              {"score_scale", m.score_scale},
              {"rec_loss", m.rec_loss == RecLoss::ce ? "ce" : "bce"}};
}

inline ModelConfig model_from_meta(const json& j) {
  ModelConfig m;
  m.n_items = j.at("n_items");
  m.dim = j.at("d");
  m.steps = j.at("steps");
  m.spherical = j.at("spherical");
  m.score_scale = j.at("score_scale");
  m.rec_loss = j.at("rec_loss") == "ce" ? RecLoss::ce : RecLoss::bce;
  return m;
}

inline std::string vocab_checksum(const ItemVocab& v) {
  Fnv1a h;
  for (const auto& raw : v.index_to_raw) {
    h.update(raw);
    h.update("\n");
  }
  return h.hex();
}

// -- synthetic corpus ----------------------------------------------------------

struct SynthOptions {
  std::size_t n_items = 200;
  std::size_t n_sessions = 5000;
  double sharpness = 0.8;
  std::uint64_t seed = 1;
  double zipf_exponent = 1.0;
  std::size_t min_length = 2;
  std::size_t max_length = 8;
  std::size_t days = 10;
};

/// Generator parameters, exposed so tests can compute exact expectations.
struct SynthModel {
  std::vector<double> start;             // planted popularity skew over first clicks
  std::vector<std::size_t> successor;    // planted dominant successor
  double sharpness = 0.0;
};

inline SynthModel synth_model(const SynthOptions& o) {
  if (o.n_items < 10) throw Error("synth: need at least 10 items");
  if (!(o.sharpness >= 0.0 && o.sharpness <= 1.0)) throw Error("synth: sharpness must be in [0, 1]");
  SynthModel m;
  m.sharpness = o.sharpness;
  Rng rng = Rng::derive(o.seed, 0x51, 0);
  std::vector<std::size_t> rank(o.n_items);
  std::iota(rank.begin(), rank.end(), 0);
  rng.shuffle(std::span<std::size_t>(rank));
  m.start.resize(o.n_items);
  double z = 0.0;
  for (std::size_t i = 0; i < o.n_items; ++i) z += m.start[i] = std::pow(static_cast<double>(rank[i] + 1), -o.zipf_exponent);
  for (double& p : m.start) p /= z;
  // a random cyclic order so every item is some item's dominant successor
  std::vector<std::size_t> cycle(o.n_items);
  std::iota(cycle.begin(), cycle.end(), 0);
  rng.shuffle(std::span<std::size_t>(cycle));
  m.successor.resize(o.n_items);
  for (std::size_t i = 0; i < o.n_items; ++i) m.successor[cycle[i]] = cycle[(i + 1) % o.n_items];
  return m;
}

inline std::size_t draw_from(const std::vector<double>& p, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (u < p[i]) return i;
    u -= p[i];
  }
  return p.size() - 1;
}

/// Sessions from a mixture of the dominant-successor chain (weight sharpness)
/// and uniform jumps; first clicks follow the planted skew.
inline std::vector<RawEvent> synth_events(const SynthOptions& o) {
  const SynthModel m = synth_model(o);
  if (o.min_length < 2 || o.max_length < o.min_length) throw Error("synth: invalid session length range");
  std::vector<RawEvent> events;
  const TimeMs base = *parse_utc("2014-04-01T00:00:00Z");
  const double span = static_cast<double>(o.days) * kMsPerDay;
  for (std::size_t s = 0; s < o.n_sessions; ++s) {
    Rng rng = Rng::derive(o.seed, 0x52, s);
    const std::size_t len = o.min_length + rng.index(o.max_length - o.min_length + 1);
    const TimeMs t0 = base + static_cast<TimeMs>(span * static_cast<double>(s) / static_cast<double>(o.n_sessions));
    std::size_t item = draw_from(m.start, rng);
    for (std::size_t k = 0; k < len; ++k) {
      if (k > 0) item = rng.uniform() < m.sharpness ? m.successor[item] : rng.index(o.n_items);
      const TimeMs t = t0 + static_cast<TimeMs>(k) * 30'000;
      events.push_back(RawEvent{"s" + std::to_string(s), t, "i" + std::to_string(item), t});
    }
  }
  return events;
}

inline DatasetBundle synth_corpus(const SynthOptions& o, const PreprocessOptions& p = {}) {
  DatasetBundle b = preprocess(synth_events(o), p);
  b.provenance["synthetic"] = json{{"n_items", o.n_items},     {"n_sessions", o.n_sessions}, {"sharpness", o.sharpness},
                                   {"seed", o.seed},           {"zipf_exponent", o.zipf_exponent},
                                   {"min_length", o.min_length}, {"max_length", o.max_length}, {"days", o.days}};
  return b;
}

// -- training and evaluation --------------------------------------------------------

struct RunRecord {
  ExperimentConfig config;
  std::size_t n_items = 0;
  std::vector<double> epoch_losses;
  double wall_seconds = 0.0;
  std::vector<MetricsReport> reports;
  std::string checkpoint;
  std::string run_dir;
};

inline json to_json(const RunRecord& r) {
  json reports = json::array();
  for (const auto& m : r.reports) reports.push_back(to_json(m));
  return json{{"config", to_json(r.config)}, {"n_items", r.n_items},   {"epoch_losses", r.epoch_losses},
              {"wall_seconds", r.wall_seconds}, {"reports", reports}, {"checkpoint", r.checkpoint},
              {"run_dir", r.run_dir}};
}

inline RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.config = config_from_json(j.at("config"));
  r.n_items = j.at("n_items");
  r.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
  r.wall_seconds = j.at("wall_seconds");
  for (const auto& m : j.at("reports")) r.reports.push_back(report_from_json(m));
  r.checkpoint = j.value("checkpoint", "");
  r.run_dir = j.value("run_dir", "");
  return r;
}

struct TrainResult {
  ParamSet params;
  ModelConfig model;
  std::vector<double> epoch_losses;
};

/// Mini-batch Adam over the training split. The lr is multiplied by
/// cfg.lr_decay after every epoch.
inline TrainResult train_model(const ExperimentConfig& cfg, const DatasetBundle& data, std::ostream* log = nullptr) {
  validate(cfg);
  if (!is_model_variant(cfg.variant)) throw Error("train_model: '" + cfg.variant + "' has no parameters");
  TrainResult out;
  out.model = model_config(cfg, data.vocab.size());
  const NoisyConfig nc = noisy_config(cfg);
  out.params = init_params(out.model, cfg.seed);
  if (data.train.empty()) throw Error("train_model: empty training split");

  std::vector<std::size_t> order(data.train.size());
  AdamConfig adam;
  adam.lr = cfg.lr;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng = Rng::derive(cfg.seed, epoch, 0, stream::shuffle);
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg.batch_size) {
      const std::size_t hi = std::min(order.size(), lo + cfg.batch_size);
      std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                   order.begin() + static_cast<std::ptrdiff_t>(hi));
      std::vector<SplitExample> batch;
      batch.reserve(ids.size());
      for (std::size_t i : ids) batch.push_back(data.train[i]);
      const auto graphs = build_graphs(batch);
      const Realization real =
          sample_realization(out.params, out.model, nc, batch, ids, graphs, cfg.seed, epoch, n_batches);
      double loss = 0.0;
      try {
        out.params.zero_grad();
        ad::Tape tape;
        ad::Var l = batch_loss(tape, out.params, out.model, nc, batch, graphs, real);
        loss = l.value().item();
        tape.backward(l);
      } catch (const Error& e) {
        throw Error("training diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(n_batches) +
                    ": " + e.what());
      }
      adam_step(out.params, adam);
      total += loss;
      ++n_batches;
    }
    out.epoch_losses.push_back(total / static_cast<double>(n_batches));
    if (log)
      *log << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << std::setprecision(6) << out.epoch_losses.back()
           << " lr " << adam.lr << "\n";
    adam.lr *= cfg.lr_decay;
  }
  return out;
}

/// Full report for one split. `params` is null for the baselines.
inline MetricsReport evaluate_split(const ExperimentConfig& cfg, const DatasetBundle& data, const std::string& split,
                                    ParamSet* params, const ModelConfig* model) {
  const auto& examples = split == "train" ? data.train : data.test;
  if (split != "train" && split != "test") throw Error("evaluate: split must be train or test");
  const std::size_t n = data.vocab.size();
  if (cfg.k > n) throw Error("evaluate: K exceeds catalog size");
  const BigramTable bigram = build_bigram(data.train, n);
  const RecLists bigram_lists = bigram_recommend_all(bigram, examples, cfg.k);
  RecLists lists;
  if (cfg.variant == "random") {
    lists = random_recommend_all(n, examples.size(), cfg.k, Rng::derive(cfg.seed, split == "train" ? 1 : 2).next_u64());
  } else if (cfg.variant == "bigram") {
    lists = bigram_lists;
  } else {
    if (!params || !model) throw Error("evaluate: model variant needs parameters");
    lists = recommend_all(*params, *model, examples, cfg.k);
  }
  MetricsReport r = list_metrics(split, lists, targets_of(examples), data.vocab.train_popularity, cfg.k, &bigram_lists);
  r.rbf_tau = cfg.tau;
  if (params && n >= 2) {
    const Tensor& table = params->value("embedding");
    Rng rng = Rng::derive(cfg.seed, 0x7bf);
    r.rbf = rbf_statistic(table, cfg.tau, cfg.pair_budget, rng);
    r.nn_histogram = nn_cosine_histogram(table, cfg.hist_bins);
  }
  return r;
}

inline std::vector<MetricsReport> evaluate_all(const ExperimentConfig& cfg, const DatasetBundle& data, ParamSet* params,
                                               const ModelConfig* model) {
  std::vector<MetricsReport> out;
  if (cfg.eval_train) out.push_back(evaluate_split(cfg, data, "train", params, model));
  out.push_back(evaluate_split(cfg, data, "test", params, model));
  return out;
}

/// Train (for model variants) and evaluate, without touching the filesystem.
inline RunRecord run_experiment(const ExperimentConfig& cfg, const DatasetBundle& data, std::ostream* log = nullptr,
                                std::optional<TrainResult>* trained = nullptr) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config = cfg;
  rec.n_items = data.vocab.size();
  if (is_model_variant(cfg.variant)) {
    TrainResult tr = train_model(cfg, data, log);
    rec.epoch_losses = tr.epoch_losses;
    rec.reports = evaluate_all(cfg, data, &tr.params, &tr.model);
    if (trained) *trained = std::move(tr);
  } else {
    rec.reports = evaluate_all(cfg, data, nullptr, nullptr);
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

inline std::string config_hash(const ExperimentConfig& cfg) {
  json j = to_json(cfg);
  j.erase("output_dir");
  return fnv1a_hex(j.dump()).substr(0, 8);
}

inline std::string utc_stamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write '" + p.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + p.string() + "'");
}

/// Writes run.json, metrics.csv, histogram CSVs and (for models) model.ckpt
/// into `dir`.
inline void write_run(RunRecord& rec, const std::filesystem::path& dir, const DatasetBundle& data,
                      const std::optional<TrainResult>& trained) {
  std::filesystem::create_directories(dir);
  rec.run_dir = dir.string();
  if (trained) {
    json meta{{"model", model_meta(trained->model)},
              {"variant", rec.config.variant},
              {"vocab_checksum", vocab_checksum(data.vocab)},
              {"config", to_json(rec.config)}};
    rec.checkpoint = (dir / "model.ckpt").string();
    save_checkpoint(trained->params, meta, rec.checkpoint);
  }
  for (const auto& m : rec.reports)
    if (m.nn_histogram) write_text(dir / ("nn_cosine_" + m.split + ".csv"), histogram_csv(*m.nn_histogram));
  write_text(dir / "metrics.csv", metrics_csv(rec.reports));
  write_text(dir / "run.json", to_json(rec).dump(2) + "\n");
}

inline std::filesystem::path run_directory(const ExperimentConfig& cfg) {
  return std::filesystem::path(cfg.output_dir) / (config_hash(cfg) + "-" + utc_stamp());
}

struct LoadedModel {
  ParamSet params;
  ModelConfig model;
  std::string variant;
};

/// Loads a checkpoint and checks it was trained on this vocabulary.
inline LoadedModel load_model(const std::string& path, const DatasetBundle& data) {
  Checkpoint ck = load_checkpoint(path);
  LoadedModel m{std::move(ck.params), model_from_meta(ck.meta.at("model")), ck.meta.value("variant", "srgnn")};
  if (m.model.n_items != data.vocab.size() || ck.meta.value("vocab_checksum", "") != vocab_checksum(data.vocab))
    throw Error("checkpoint '" + path + "' was trained on a different item vocabulary");
  return m;
}

/// Comparison table: one row per (run, split).
inline std::string comparison_csv(const std::vector<RunRecord>& runs) {
  std::ostringstream out;
  out.precision(10);
  out << "run,variant,split,k,hit_rate,coverage,arp,iou_vs_bigram,q1,q2,q3,q4,rbf,final_loss\n";
  for (const auto& r : runs)
    for (const auto& m : r.reports) {
      out << (r.run_dir.empty() ? config_hash(r.config) : std::filesystem::path(r.run_dir).filename().string()) << ','
          << r.config.variant << ',' << m.split << ',' << m.k << ',' << m.hit_rate << ',' << m.coverage << ','
          << m.arp << ',';
      if (m.iou_vs_bigram) out << *m.iou_vs_bigram;
      out << ',' << m.quartiles[0] << ',' << m.quartiles[1] << ',' << m.quartiles[2] << ',' << m.quartiles[3] << ',';
      if (m.rbf) out << *m.rbf;
      out << ',';
      if (!r.epoch_losses.empty()) out << r.epoch_losses.back();
      out << '\n';
    }
  return out.str();
}

}  // namespace noisyrec
