// emochain: batch CLI for the classifier-chain emotion scoring pipeline.

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "emochain/augment.hpp"
#include "emochain/data.hpp"
#include "emochain/io_util.hpp"
#include "emochain/model.hpp"
#include "emochain/training.hpp"

namespace fs = std::filesystem;
using namespace emochain;

namespace {

struct RunConfig {
  std::string manifest;
  std::string feature_dir;
  std::string model_out = "model.ecm";
  std::string report_out = "report";
  std::string chain_order_in;
  std::size_t feature_dim = 0;  // 0: inferred from the first feature file
  std::size_t embed_dim = 32;
  std::size_t attention_dim = 16;
  double lr_chain = 1e-4;
  double lr_frontend = 1e-5;
  std::size_t batch_size = 8;
  std::size_t min_epochs = 10;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  bool lr_halving = true;
  std::uint64_t seed = 0;
  std::size_t k = 5;
  std::size_t fold_index = 0;
  bool parallel = true;
};

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::size_t parse_count(const std::string& v, const std::string& key) {
  std::size_t consumed = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != v.size() || v.empty()) {
    throw std::runtime_error("config key '" + key + "': '" + v + "' is not a count");
  }
  return std::size_t(x);
}

double parse_real(const std::string& v, const std::string& key) {
  std::size_t consumed = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != v.size() || v.empty()) {
    throw std::runtime_error("config key '" + key + "': '" + v + "' is not a number");
  }
  return x;
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw std::runtime_error("config key '" + key + "': '" + v + "' is not a boolean");
}

void apply_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "manifest") cfg.manifest = value;
  else if (key == "feature_dir") cfg.feature_dir = value;
  else if (key == "model_out") cfg.model_out = value;
  else if (key == "report_out") cfg.report_out = value;
  else if (key == "chain_order_in") cfg.chain_order_in = value;
  else if (key == "feature_dim") cfg.feature_dim = parse_count(value, key);
  else if (key == "embed_dim") cfg.embed_dim = parse_count(value, key);
  else if (key == "attention_dim") cfg.attention_dim = parse_count(value, key);
  else if (key == "lr_chain") cfg.lr_chain = parse_real(value, key);
  else if (key == "lr_frontend") cfg.lr_frontend = parse_real(value, key);
  else if (key == "batch_size") cfg.batch_size = parse_count(value, key);
  else if (key == "min_epochs") cfg.min_epochs = parse_count(value, key);
  else if (key == "max_epochs") cfg.max_epochs = parse_count(value, key);
  else if (key == "patience") cfg.patience = parse_count(value, key);
  else if (key == "lr_halving") cfg.lr_halving = parse_bool(value, key);
  else if (key == "seed") cfg.seed = parse_count(value, key);
  else if (key == "k") cfg.k = parse_count(value, key);
  else if (key == "fold_index") cfg.fold_index = parse_count(value, key);
  else if (key == "parallel") cfg.parallel = parse_bool(value, key);
  else throw std::runtime_error("unknown config key '" + key + "'");
}

RunConfig load_config_file(const std::string& path) {
  RunConfig cfg;
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open config file '" + path + "'");
  }
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected 'key = value'");
    }
    apply_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

// Command-line flags override config-file values.
struct Overrides {
  std::optional<std::string> manifest, feature_dir, model_out, report_out, chain_order_in;
  std::optional<std::size_t> feature_dim, embed_dim, attention_dim, batch_size, min_epochs,
      max_epochs, patience, k, fold_index;
  std::optional<double> lr_chain, lr_frontend;
  std::optional<bool> lr_halving, parallel;
  std::optional<std::uint64_t> seed;
};

void add_run_flags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--manifest", o.manifest, "manifest CSV path");
  cmd->add_option("--feature-dir", o.feature_dir, "directory for relative feature paths");
  cmd->add_option("--model-out", o.model_out, "output model file");
  cmd->add_option("--report-out", o.report_out, "report path prefix (.csv and .log)");
  cmd->add_option("--chain-order-in", o.chain_order_in, "chain-order file to train with");
  cmd->add_option("--feature-dim", o.feature_dim, "feature dimension (0 = infer)");
  cmd->add_option("--embed-dim", o.embed_dim, "embedding width");
  cmd->add_option("--attention-dim", o.attention_dim, "attention width");
  cmd->add_option("--lr-chain", o.lr_chain, "chain/pooling learning rate");
  cmd->add_option("--lr-frontend", o.lr_frontend, "front-end learning rate");
  cmd->add_option("--batch-size", o.batch_size, "mini-batch size (>= 2)");
  cmd->add_option("--min-epochs", o.min_epochs, "minimum epochs before early stop");
  cmd->add_option("--max-epochs", o.max_epochs, "maximum epochs");
  cmd->add_option("--patience", o.patience, "early-stopping patience");
  cmd->add_option("--lr-halving", o.lr_halving, "halve LRs on non-improving epochs");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--k", o.k, "cross-validation folds");
  cmd->add_option("--fold-index", o.fold_index, "which fold to train/validate on");
  cmd->add_option("--parallel", o.parallel, "use the OpenMP batch kernels");
}

RunConfig make_config(const std::string& config_path, const Overrides& o) {
  RunConfig cfg = config_path.empty() ? RunConfig{} : load_config_file(config_path);
  if (o.manifest) cfg.manifest = *o.manifest;
  if (o.feature_dir) cfg.feature_dir = *o.feature_dir;
  if (o.model_out) cfg.model_out = *o.model_out;
  if (o.report_out) cfg.report_out = *o.report_out;
  if (o.chain_order_in) cfg.chain_order_in = *o.chain_order_in;
  if (o.feature_dim) cfg.feature_dim = *o.feature_dim;
  if (o.embed_dim) cfg.embed_dim = *o.embed_dim;
  if (o.attention_dim) cfg.attention_dim = *o.attention_dim;
  if (o.lr_chain) cfg.lr_chain = *o.lr_chain;
  if (o.lr_frontend) cfg.lr_frontend = *o.lr_frontend;
  if (o.batch_size) cfg.batch_size = *o.batch_size;
  if (o.min_epochs) cfg.min_epochs = *o.min_epochs;
  if (o.max_epochs) cfg.max_epochs = *o.max_epochs;
  if (o.patience) cfg.patience = *o.patience;
  if (o.lr_halving) cfg.lr_halving = *o.lr_halving;
  if (o.seed) cfg.seed = *o.seed;
  if (o.k) cfg.k = *o.k;
  if (o.fold_index) cfg.fold_index = *o.fold_index;
  if (o.parallel) cfg.parallel = *o.parallel;
  return cfg;
}

TrainConfig to_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.lr_chain = cfg.lr_chain;
  t.lr_frontend = cfg.lr_frontend;
  t.batch_size = cfg.batch_size;
  t.min_epochs = cfg.min_epochs;
  t.max_epochs = cfg.max_epochs;
  t.patience = cfg.patience;
  t.lr_halving = cfg.lr_halving;
  t.seed = cfg.seed;
  t.exec = cfg.parallel ? Exec::parallel : Exec::serial;
  return t;
}

struct LoadedData {
  Manifest manifest;
  std::vector<DataSample> samples;
};

LoadedData load_data(const RunConfig& cfg) {
  if (cfg.manifest.empty()) {
    throw std::runtime_error("no manifest given (config key 'manifest' or --manifest)");
  }
  LoadedData d;
  d.manifest = load_manifest(cfg.manifest);
  d.samples = samples_from_manifest(d.manifest, fs::path(cfg.manifest).parent_path(),
                                    cfg.feature_dir);
  return d;
}

std::size_t infer_feature_dim(const RunConfig& cfg, const std::vector<DataSample>& samples) {
  if (cfg.feature_dim != 0) return cfg.feature_dim;
  return read_features(samples.front().feature_path).dim;
}

std::vector<DataSample> pick(const std::vector<DataSample>& samples,
                             const std::set<std::string>& ids) {
  std::vector<DataSample> out;
  out.reserve(ids.size());
  for (const DataSample& s : samples) {
    if (ids.count(s.file_id)) out.push_back(s);
  }
  return out;
}

ChainOrder read_chain_order_file(const std::string& path, const EmotionSet& emotions) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open chain-order file '" + path + "'");
  }
  std::string line;
  std::getline(is, line);
  ChainOrder order;
  std::stringstream ss(line);
  std::string name;
  while (std::getline(ss, name, ',')) {
    order.order.push_back(emotions.index_of(trim(name)));
  }
  if (!order.is_permutation(emotions.size())) {
    throw std::runtime_error("chain-order file '" + path +
                             "' is not a permutation of the emotion set");
  }
  return order;
}

void write_chain_order_file(const fs::path& path, const ChainOrder& order,
                            const EmotionSet& emotions) {
  io::atomic_write(path, [&](std::ostream& os) {
    for (std::size_t i = 0; i < order.order.size(); ++i) {
      os << (i ? "," : "") << emotions.names[order.order[i]];
    }
    os << "\n";
  });
}

// --- subcommand bodies ---

int cmd_split(const std::string& manifest_path, std::size_t k, std::uint64_t seed,
              const std::string& out_dir) {
  const Manifest manifest = load_manifest(manifest_path);
  const std::vector<FoldSplit> folds = speaker_disjoint_kfold(manifest, k, seed);
  for (const FoldSplit& fold : folds) {
    const fs::path out = fs::path(out_dir) / ("fold_" + std::to_string(fold.fold_index) + ".csv");
    io::atomic_write(out, [&](std::ostream& os) {
      os << "set,file_id\n";
      for (const std::string& id : fold.train_ids) os << "train," << id << "\n";
      for (const std::string& id : fold.val_ids) os << "val," << id << "\n";
    });
  }
  std::cout << "wrote " << folds.size() << " fold files to " << out_dir << "\n";
  return 0;
}

int cmd_chain_order(const RunConfig& cfg, const std::string& out_path, bool all_folds) {
  LoadedData data = load_data(cfg);
  const std::vector<FoldSplit> folds = speaker_disjoint_kfold(data.manifest, cfg.k, cfg.seed);
  if (cfg.fold_index >= folds.size()) {
    throw std::runtime_error("fold_index out of range");
  }
  const std::vector<FoldSplit> splits =
      all_folds ? folds : std::vector<FoldSplit>{folds[cfg.fold_index]};

  ModelDims dims{infer_feature_dim(cfg, data.samples), cfg.embed_dim, cfg.attention_dim};
  const EmotionSet emotions = EmotionSet::canonical();
  const Vector base =
      train_base_predictors(data.samples, splits, dims, emotions, to_train_config(cfg),
                            make_file_provider());
  const ChainOrder order = compute_chain_order(base);
  write_chain_order_file(out_path, order, emotions);
  for (std::size_t i = 0; i < order.order.size(); ++i) {
    std::cout << (i ? "," : "") << emotions.names[order.order[i]];
  }
  std::cout << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  LoadedData data = load_data(cfg);
  const std::vector<FoldSplit> folds = speaker_disjoint_kfold(data.manifest, cfg.k, cfg.seed);
  if (cfg.fold_index >= folds.size()) {
    throw std::runtime_error("fold_index out of range");
  }
  const FoldSplit& split = folds[cfg.fold_index];
  const std::vector<DataSample> train_set = pick(data.samples, split.train_ids);
  const std::vector<DataSample> val_set = pick(data.samples, split.val_ids);

  const EmotionSet emotions = EmotionSet::canonical();
  const ChainOrder order = cfg.chain_order_in.empty()
                               ? ChainOrder::identity(emotions.size())
                               : read_chain_order_file(cfg.chain_order_in, emotions);
  const std::size_t d = infer_feature_dim(cfg, data.samples);
  EmotionChainModel model =
      init_model(d, cfg.embed_dim, cfg.attention_dim, emotions, order, cfg.seed);

  const TrainResult result =
      train(model, train_set, val_set, to_train_config(cfg), make_file_provider());
  save_model(cfg.model_out, result.model);
  write_report_csv(cfg.report_out + ".csv", result.report, emotions);
  write_report_log(cfg.report_out + ".log", result.report);
  std::printf("best epoch %zu val_mean_ccc=%.6f (%s)\n", result.report.best_epoch,
              result.report.best_val_ccc, result.report.stop_reason.c_str());
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& manifest_path,
                 const std::string& feature_dir, const std::string& reduction_name,
                 std::size_t k, std::uint64_t seed, const std::string& out_path) {
  const EmotionChainModel model = load_model(model_path);
  RunConfig cfg;
  cfg.manifest = manifest_path;
  cfg.feature_dir = feature_dir;
  LoadedData data = load_data(cfg);

  Reduction reduction;
  std::vector<std::vector<std::size_t>> fold_rows;
  const std::vector<std::vector<std::size_t>>* folds_ptr = nullptr;
  if (reduction_name == "pooled") {
    reduction = Reduction::pooled;
  } else if (reduction_name == "per-fold-mean") {
    reduction = Reduction::per_fold_mean;
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
      row_of[data.samples[i].file_id] = i;
    }
    for (const FoldSplit& f : speaker_disjoint_kfold(data.manifest, k, seed)) {
      std::vector<std::size_t> rows;
      for (const std::string& id : f.val_ids) rows.push_back(row_of.at(id));
      fold_rows.push_back(std::move(rows));
    }
    folds_ptr = &fold_rows;
  } else {
    throw std::runtime_error("unknown reduction '" + reduction_name +
                             "' (expected pooled or per-fold-mean)");
  }

  const EvalResult r =
      evaluate(model, data.samples, make_file_provider(), reduction, folds_ptr);
  for (std::size_t e = 0; e < model.emotions.size(); ++e) {
    std::printf("%-12s %.6f\n", model.emotions.names[e].c_str(), r.per_emotion[e]);
  }
  std::printf("%-12s %.6f\n", "mean", r.mean_ccc);
  if (!out_path.empty()) {
    io::atomic_write(out_path, [&](std::ostream& os) {
      os << "emotion,ccc\n";
      char buf[32];
      for (std::size_t e = 0; e < model.emotions.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", r.per_emotion[e]);
        os << model.emotions.names[e] << ',' << buf << "\n";
      }
      std::snprintf(buf, sizeof(buf), "%.17g", r.mean_ccc);
      os << "mean," << buf << "\n";
    });
  }
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& out_path,
                const std::vector<std::string>& feature_files) {
  const EmotionChainModel model = load_model(model_path);
  io::atomic_write(out_path, [&](std::ostream& os) {
    os << "File_ID";
    for (const std::string& name : model.emotions.names) {
      std::string header = name;
      header[0] = char(std::toupper((unsigned char)header[0]));
      os << ',' << header;
    }
    os << "\n";
    char buf[32];
    for (const std::string& file : feature_files) {
      const FeatureSequence features = read_features(file);
      const EmotionScores scores = infer(model, features);
      os << fs::path(file).stem().string();
      for (double s : scores) {
        std::snprintf(buf, sizeof(buf), "%.17g", s);
        os << ',' << buf;
      }
      os << "\n";
    }
  });
  std::cout << "wrote predictions for " << feature_files.size() << " file(s) to "
            << out_path << "\n";
  return 0;
}

int cmd_adapt(const std::string& model_path, const std::string& manifest_path,
              const std::string& feature_dir, const std::string& out_path,
              const AdaptConfig& adapt_cfg) {
  const EmotionChainModel model = load_model(model_path);
  RunConfig cfg;
  cfg.manifest = manifest_path;
  cfg.feature_dir = feature_dir;
  LoadedData data = load_data(cfg);
  const EmotionChainModel adapted =
      adapt_few_shot(model, data.samples, adapt_cfg, make_file_provider());
  save_model(out_path, adapted);
  std::cout << "adapted on " << data.samples.size() << " support sample(s)\n";
  return 0;
}

int cmd_augment(const std::string& in_path, const std::string& out_path,
                std::optional<double> cents, std::optional<double> rate,
                std::uint64_t seed) {
  Waveform w = read_wav(in_path);
  if (!cents && !rate) {
    w = random_augment(w, AugmentConfig{}, seed);
  } else {
    if (cents) w = pitch_shift(w, *cents);
    if (rate) w = time_stretch(w, *rate);
  }
  write_wav(out_path, w);
  if (w.clipped > 0) {
    std::cerr << "warning: clipped " << w.clipped << " sample(s)\n";
  }
  return 0;
}

int cmd_synth(const std::string& out_dir, std::size_t n_samples, std::size_t n_speakers,
              std::size_t feature_dim, std::uint64_t seed, const SyntheticOptions& opt) {
  const SyntheticDataset ds =
      generate_synthetic_dataset(n_samples, n_speakers, feature_dim, seed, out_dir, opt);
  std::cout << "wrote " << ds.manifest.records.size() << " samples to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"classifier-chain emotion scoring for nonverbal vocalization features"};
  app.require_subcommand(1);

  // split
  auto* split = app.add_subcommand("split", "write speaker-disjoint k-fold files");
  std::string split_manifest, split_out;
  std::size_t split_k = 5;
  std::uint64_t split_seed = 0;
  split->add_option("--manifest", split_manifest, "manifest CSV")->required();
  split->add_option("--k", split_k, "number of folds");
  split->add_option("--seed", split_seed, "shuffle seed");
  split->add_option("--out-dir", split_out, "output directory")->required();

  // chain-order
  auto* chain = app.add_subcommand("chain-order",
                                   "train per-emotion base predictors and order the chain");
  std::string chain_config, chain_out;
  bool chain_all_folds = false;
  Overrides chain_ov;
  chain->add_option("--config", chain_config, "key = value config file");
  chain->add_option("--out", chain_out, "output order file")->required();
  chain->add_flag("--all-folds", chain_all_folds, "average base CCCs over all folds");
  add_run_flags(chain, chain_ov);

  // train
  auto* train_cmd = app.add_subcommand("train", "train the chain model on one fold");
  std::string train_config;
  Overrides train_ov;
  train_cmd->add_option("--config", train_config, "key = value config file");
  add_run_flags(train_cmd, train_ov);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "per-emotion CCC of a model on a manifest");
  std::string eval_model, eval_manifest, eval_feature_dir, eval_out;
  std::string eval_reduction = "pooled";
  std::size_t eval_k = 5;
  std::uint64_t eval_seed = 0;
  eval_cmd->add_option("--model", eval_model, "model file")->required();
  eval_cmd->add_option("--manifest", eval_manifest, "manifest CSV")->required();
  eval_cmd->add_option("--feature-dir", eval_feature_dir, "feature directory");
  eval_cmd->add_option("--reduction", eval_reduction, "pooled or per-fold-mean");
  eval_cmd->add_option("--k", eval_k, "folds for per-fold-mean");
  eval_cmd->add_option("--seed", eval_seed, "fold seed for per-fold-mean");
  eval_cmd->add_option("--out", eval_out, "also write a CSV summary here");

  // predict
  auto* pred_cmd = app.add_subcommand("predict", "score feature files with a model");
  std::string pred_model, pred_out;
  std::vector<std::string> pred_files;
  pred_cmd->add_option("--model", pred_model, "model file")->required();
  pred_cmd->add_option("--out", pred_out, "output CSV")->required();
  pred_cmd->add_option("files", pred_files, "feature files")->required();

  // adapt
  auto* adapt_cmd = app.add_subcommand("adapt", "few-shot fine-tune on support samples");
  std::string adapt_model, adapt_manifest, adapt_feature_dir, adapt_out;
  AdaptConfig adapt_cfg;
  bool adapt_serial = false;
  adapt_cmd->add_option("--model", adapt_model, "model file")->required();
  adapt_cmd->add_option("--manifest", adapt_manifest, "support manifest CSV")->required();
  adapt_cmd->add_option("--feature-dir", adapt_feature_dir, "feature directory");
  adapt_cmd->add_option("--out", adapt_out, "adapted model file")->required();
  adapt_cmd->add_option("--lr", adapt_cfg.lr, "adaptation learning rate");
  adapt_cmd->add_option("--epochs", adapt_cfg.epochs, "adaptation epochs");
  adapt_cmd->add_option("--batch-size", adapt_cfg.batch_size, "batch size");
  adapt_cmd->add_option("--seed", adapt_cfg.seed, "shuffle seed");
  adapt_cmd->add_flag("--serial", adapt_serial, "disable the OpenMP kernels");

  // augment
  auto* aug_cmd = app.add_subcommand("augment", "pitch-shift / rate-change a WAV file");
  std::string aug_in, aug_out;
  std::optional<double> aug_cents, aug_rate;
  std::uint64_t aug_seed = 0;
  aug_cmd->add_option("--in", aug_in, "input WAV")->required();
  aug_cmd->add_option("--out", aug_out, "output WAV")->required();
  aug_cmd->add_option("--cents", aug_cents, "pitch shift in cents");
  aug_cmd->add_option("--rate", aug_rate, "speaking-rate factor");
  aug_cmd->add_option("--seed", aug_seed, "seed for random draws when no --cents/--rate");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  std::size_t synth_samples = 400, synth_speakers = 20, synth_dim = 16;
  std::uint64_t synth_seed = 1;
  SyntheticOptions synth_opt;
  std::string synth_noise_emotion;
  synth_cmd->add_option("--out-dir", synth_out, "output directory")->required();
  synth_cmd->add_option("--samples", synth_samples, "number of samples");
  synth_cmd->add_option("--speakers", synth_speakers, "number of speakers");
  synth_cmd->add_option("--feature-dim", synth_dim, "feature dimension");
  synth_cmd->add_option("--seed", synth_seed, "generation seed");
  synth_cmd->add_option("--driver-noise", synth_opt.driver_noise,
                        "per-sample noise on the driver carrier");
  synth_cmd->add_option("--direct-scale", synth_opt.direct_dependent_scale,
                        "direct carrier scale of the dependent emotion");
  synth_cmd->add_option("--noise-emotion", synth_noise_emotion,
                        "emotion whose scores are pure noise");

  CLI11_PARSE(app, argc, argv);

  try {
    if (split->parsed()) {
      return cmd_split(split_manifest, split_k, split_seed, split_out);
    }
    if (chain->parsed()) {
      return cmd_chain_order(make_config(chain_config, chain_ov), chain_out, chain_all_folds);
    }
    if (train_cmd->parsed()) {
      return cmd_train(make_config(train_config, train_ov));
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(eval_model, eval_manifest, eval_feature_dir, eval_reduction,
                          eval_k, eval_seed, eval_out);
    }
    if (pred_cmd->parsed()) {
      return cmd_predict(pred_model, pred_out, pred_files);
    }
    if (adapt_cmd->parsed()) {
      adapt_cfg.exec = adapt_serial ? Exec::serial : Exec::parallel;
      return cmd_adapt(adapt_model, adapt_manifest, adapt_feature_dir, adapt_out, adapt_cfg);
    }
    if (aug_cmd->parsed()) {
      return cmd_augment(aug_in, aug_out, aug_cents, aug_rate, aug_seed);
    }
    if (synth_cmd->parsed()) {
      if (!synth_noise_emotion.empty()) {
        synth_opt.noise_emotion = EmotionSet::canonical().index_of(synth_noise_emotion);
      }
      return cmd_synth(synth_out, synth_samples, synth_speakers, synth_dim, synth_seed,
                       synth_opt);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
