#include "emochain/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "emochain/io_util.hpp"
#include "emochain/rng.hpp"

namespace emochain {

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void check_grads_finite(const EmotionChainModel& model, std::span<const double> grads) {
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("non-finite gradient in " + param_name_at(model, i));
    }
  }
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(idx[i], idx[rng.below(i + 1)]);
  }
  return idx;
}

Matrix gather_targets(std::span<const DataSample> samples,
                      std::span<const std::size_t> rows, std::size_t c_count) {
  Matrix t(rows.size(), c_count);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const EmotionScores& s = samples[rows[i]].scores;
    if (s.size() != c_count) {
      throw std::invalid_argument("sample '" + samples[rows[i]].file_id +
                                  "' has " + std::to_string(s.size()) +
                                  " scores, model expects " + std::to_string(c_count));
    }
    for (std::size_t e = 0; e < c_count; ++e) t.at(i, e) = s[e];
  }
  return t;
}

CccLoss mse_loss(const Matrix& truth, const Matrix& pred) {
  CccLoss r;
  r.grad = Matrix(pred.rows, pred.cols);
  const double scale = 1.0 / double(pred.rows * pred.cols);
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - truth.data[i];
    r.loss += d * d * scale;
    r.grad.data[i] = 2.0 * d * scale;
  }
  return r;
}

EvalResult evaluate_rows(const Matrix& truth, const Matrix& pred, Reduction reduction,
                         const std::vector<std::vector<std::size_t>>* folds) {
  EvalResult result;
  if (reduction == Reduction::pooled) {
    result.per_emotion = per_emotion_ccc(truth, pred);
  } else {
    if (folds == nullptr || folds->empty()) {
      throw std::invalid_argument("evaluate: per-fold reduction needs fold partitions");
    }
    result.per_emotion.assign(truth.cols, 0.0);
    for (const std::vector<std::size_t>& fold : *folds) {
      if (fold.size() < 2) {
        throw std::invalid_argument("evaluate: fold with fewer than 2 samples");
      }
      Matrix ft(fold.size(), truth.cols), fp(fold.size(), truth.cols);
      for (std::size_t i = 0; i < fold.size(); ++i) {
        for (std::size_t e = 0; e < truth.cols; ++e) {
          ft.at(i, e) = truth.at(fold[i], e);
          fp.at(i, e) = pred.at(fold[i], e);
        }
      }
      const Vector fold_ccc = per_emotion_ccc(ft, fp);
      for (std::size_t e = 0; e < truth.cols; ++e) result.per_emotion[e] += fold_ccc[e];
    }
    for (double& x : result.per_emotion) x /= double(folds->size());
  }
  double sum = 0.0;
  for (double x : result.per_emotion) sum += x;
  result.mean_ccc = sum / double(result.per_emotion.size());
  return result;
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: size mismatch");
  }
  if (!(lr > 0.0)) {
    throw std::invalid_argument("adam_step: learning rate must be positive");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state size mismatch");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(kBeta1, double(state.step));
  const double bc2 = 1.0 - std::pow(kBeta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) {
      throw std::runtime_error("adam_step: non-finite gradient at index " +
                               std::to_string(i));
    }
    state.m[i] = kBeta1 * state.m[i] + (1.0 - kBeta1) * g;
    state.v[i] = kBeta2 * state.v[i] + (1.0 - kBeta2) * g * g;
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
}

FeatureProvider make_file_provider() {
  auto cache = std::make_shared<std::unordered_map<std::string, FeatureSequence>>();
  auto mutex = std::make_shared<std::mutex>();
  return [cache, mutex](const DataSample& sample, int) -> FeatureSequence {
    {
      std::lock_guard<std::mutex> lock(*mutex);
      auto it = cache->find(sample.feature_path);
      if (it != cache->end()) return it->second;
    }
    FeatureSequence fs = read_features(sample.feature_path);
    std::lock_guard<std::mutex> lock(*mutex);
    return cache->emplace(sample.feature_path, std::move(fs)).first->second;
  };
}

FeatureProvider make_augmenting_provider(WaveformLookup lookup, FeatureExtractor extractor,
                                         AugmentConfig config, std::uint64_t base_seed) {
  return [lookup, extractor, config, base_seed](const DataSample& sample,
                                                int epoch) -> FeatureSequence {
    Waveform w = lookup(sample);
    if (epoch >= 0) {
      const std::uint64_t seed =
          mix_seed(mix_seed(base_seed, std::uint64_t(epoch)), hash_str(sample.file_id));
      w = random_augment(w, config, seed);
    }
    return extractor(w);
  };
}

TrainResult train(const EmotionChainModel& init, std::span<const DataSample> train_set,
                  std::span<const DataSample> val_set, const TrainConfig& config,
                  const FeatureProvider& provider) {
  if (config.batch_size < 2) {
    throw std::invalid_argument("train: batch size must be at least 2 (CCC needs variance)");
  }
  if (config.min_epochs > config.max_epochs || config.max_epochs == 0) {
    throw std::invalid_argument("train: bad epoch range");
  }
  if (config.patience == 0) {
    throw std::invalid_argument("train: patience must be at least 1");
  }
  if (train_set.size() < 2) {
    throw std::invalid_argument("train: training set too small to form a CCC batch");
  }
  if (val_set.size() < 2) {
    throw std::invalid_argument("train: validation set needs at least 2 samples");
  }

  EmotionChainModel model = init;
  const std::size_t c_count = model.emotion_count();
  const std::size_t p_total = param_count(model);
  const std::size_t p_front = frontend_param_count(model);

  std::vector<double> flat = flatten_params(model);
  AdamState front_state, chain_state;
  double lr_front = config.lr_frontend;
  double lr_chain = config.lr_chain;

  TrainReport report;
  std::vector<double> best_flat = flat;
  double best_ccc = -std::numeric_limits<double>::infinity();
  std::size_t epochs_since_improve = 0;

  // validation features are fixed across epochs
  std::vector<FeatureSequence> val_features;
  val_features.reserve(val_set.size());
  for (const DataSample& s : val_set) val_features.push_back(provider(s, -1));
  const std::vector<std::size_t> val_rows = [&] {
    std::vector<std::size_t> r(val_set.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
    return r;
  }();
  const Matrix val_targets = gather_targets(val_set, val_rows, c_count);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(config.seed, 0x50c1a1 + epoch));
    const std::vector<std::size_t> order = shuffled_indices(train_set.size(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t batch_count = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t b = std::min(config.batch_size, order.size() - start);
      if (b < 2) {
        ++report.dropped_batches;  // cannot compute CCC over one sample
        continue;
      }
      std::span<const std::size_t> rows(order.data() + start, b);
      std::vector<FeatureSequence> features;
      features.reserve(b);
      for (std::size_t r : rows) features.push_back(provider(train_set[r], int(epoch)));
      const Matrix targets = gather_targets(train_set, rows, c_count);

      TeacherForwardBatch batch(model, features, targets, config.exec);
      const CccLoss loss = mean_ccc_loss(targets, batch.predictions());
      const std::vector<double> grads = batch.backward(loss.grad);
      check_grads_finite(model, grads);

      adam_step(std::span<double>(flat.data(), p_front),
                std::span<const double>(grads.data(), p_front), front_state, lr_front);
      adam_step(std::span<double>(flat.data() + p_front, p_total - p_front),
                std::span<const double>(grads.data() + p_front, p_total - p_front),
                chain_state, lr_chain);
      set_params(model, flat);

      loss_sum += loss.loss;
      ++batch_count;
    }
    if (batch_count == 0) {
      throw std::runtime_error("train: no usable batches (training set exhausted by drops)");
    }

    const Matrix val_pred = batch_infer(model, val_features, config.exec);
    const Vector val_ccc = per_emotion_ccc(val_targets, val_pred);
    double val_mean = 0.0;
    for (double x : val_ccc) val_mean += x;
    val_mean /= double(val_ccc.size());

    report.epochs.push_back(EpochStats{epoch, loss_sum / double(batch_count), val_mean,
                                       val_ccc, lr_chain, lr_front});

    if (val_mean > best_ccc) {
      best_ccc = val_mean;
      best_flat = flat;
      report.best_epoch = epoch;
      epochs_since_improve = 0;
    } else {
      ++epochs_since_improve;
      if (config.lr_halving) {
        lr_chain *= 0.5;
        lr_front *= 0.5;
        report.lr_halvings.push_back(epoch);
      }
    }
    if (epochs_since_improve >= config.patience && epoch >= config.min_epochs) {
      report.stop_reason = "early_stop";
      break;
    }
  }
  if (report.stop_reason.empty()) report.stop_reason = "max_epochs";
  report.best_val_ccc = best_ccc;

  set_params(model, best_flat);
  return TrainResult{std::move(model), std::move(report)};
}

EvalResult evaluate(const EmotionChainModel& model, std::span<const DataSample> samples,
                    const FeatureProvider& provider, Reduction reduction,
                    const std::vector<std::vector<std::size_t>>* folds, Exec exec) {
  if (samples.size() < 2) {
    throw std::invalid_argument("evaluate: need at least 2 samples");
  }
  const std::size_t c_count = model.emotion_count();
  std::vector<FeatureSequence> features;
  features.reserve(samples.size());
  for (const DataSample& s : samples) features.push_back(provider(s, -1));
  const std::vector<std::size_t> rows = [&] {
    std::vector<std::size_t> r(samples.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = i;
    return r;
  }();
  const Matrix truth = gather_targets(samples, rows, c_count);
  const Matrix pred = batch_infer(model, features, exec);
  return evaluate_rows(truth, pred, reduction, folds);
}

Vector train_base_predictors(std::span<const DataSample> samples,
                             std::span<const FoldSplit> splits, const ModelDims& dims,
                             const EmotionSet& emotions, const TrainConfig& config,
                             const FeatureProvider& provider) {
  if (splits.empty()) {
    throw std::invalid_argument("train_base_predictors: need at least one split");
  }
  std::unordered_map<std::string, const DataSample*> by_id;
  for (const DataSample& s : samples) by_id[s.file_id] = &s;

  const std::size_t c_count = emotions.size();
  Vector result(c_count, 0.0);
  for (std::size_t e = 0; e < c_count; ++e) {
    double acc = 0.0;
    for (std::size_t f = 0; f < splits.size(); ++f) {
      auto slice = [&](const std::set<std::string>& ids) {
        std::vector<DataSample> out;
        out.reserve(ids.size());
        for (const std::string& id : ids) {
          auto it = by_id.find(id);
          if (it == by_id.end()) {
            throw std::invalid_argument("train_base_predictors: split id '" + id +
                                        "' not in sample set");
          }
          DataSample s = *it->second;
          s.scores = EmotionScores{s.scores.at(e)};
          out.push_back(std::move(s));
        }
        return out;
      };
      const std::vector<DataSample> tr = slice(splits[f].train_ids);
      const std::vector<DataSample> va = slice(splits[f].val_ids);

      TrainConfig cfg = config;
      cfg.seed = mix_seed(config.seed, 0xba5e + e * splits.size() + f);
      EmotionChainModel single =
          init_model(dims.feature_dim, dims.embed_dim, dims.attention_dim,
                     EmotionSet{{emotions.names[e]}}, ChainOrder::identity(1), cfg.seed);
      const TrainResult r = train(single, tr, va, cfg, provider);
      acc += r.report.best_val_ccc;
    }
    result[e] = acc / double(splits.size());
  }
  return result;
}

EmotionChainModel adapt_few_shot(const EmotionChainModel& model,
                                 std::span<const DataSample> support,
                                 const AdaptConfig& config, const FeatureProvider& provider) {
  if (support.empty()) {
    throw std::invalid_argument("adapt_few_shot: empty support set");
  }
  if (config.epochs == 0) {
    throw std::invalid_argument("adapt_few_shot: epochs must be positive");
  }

  // A single support sample is duplicated to reach batch size 2; its batch
  // has constant targets, so CCC degenerates and MSE is used instead.
  std::vector<DataSample> pool(support.begin(), support.end());
  const bool use_mse = pool.size() == 1;
  if (use_mse) pool.push_back(pool[0]);

  EmotionChainModel adapted = model;
  const std::size_t c_count = adapted.emotion_count();
  const std::size_t batch = std::clamp<std::size_t>(config.batch_size, 2, pool.size());

  std::vector<double> flat = flatten_params(adapted);
  AdamState state;

  if (config.lr == 0.0) {
    return adapted;  // explicit no-op, bit-identical copy
  }

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(config.seed, 0xada7 + epoch));
    const std::vector<std::size_t> order = shuffled_indices(pool.size(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t b = std::min(batch, order.size() - start);
      if (b < 2) continue;
      std::span<const std::size_t> rows(order.data() + start, b);
      std::vector<FeatureSequence> features;
      features.reserve(b);
      for (std::size_t r : rows) features.push_back(provider(pool[r], int(epoch)));
      const Matrix targets = gather_targets(pool, rows, c_count);

      TeacherForwardBatch fwd(adapted, features, targets, config.exec);
      const CccLoss loss =
          use_mse ? mse_loss(targets, fwd.predictions()) : mean_ccc_loss(targets, fwd.predictions());
      const std::vector<double> grads = fwd.backward(loss.grad);
      check_grads_finite(adapted, grads);
      adam_step(flat, grads, state, config.lr);
      set_params(adapted, flat);
    }
  }
  return adapted;
}

void write_report_csv(const std::filesystem::path& path, const TrainReport& report,
                      const EmotionSet& emotions) {
  io::atomic_write(path, [&](std::ostream& os) {
    os << "epoch,train_loss,val_mean_ccc";
    for (const std::string& name : emotions.names) os << ",ccc_" << name;
    os << ",lr_chain,lr_frontend\n";
    char buf[32];
    auto num = [&](double v) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      os << buf;
    };
    for (const EpochStats& e : report.epochs) {
      os << e.epoch << ',';
      num(e.train_loss);
      os << ',';
      num(e.val_mean_ccc);
      for (double c : e.val_per_emotion) {
        os << ',';
        num(c);
      }
      os << ',';
      num(e.lr_chain);
      os << ',';
      num(e.lr_frontend);
      os << '\n';
    }
  });
}

void write_report_log(const std::filesystem::path& path, const TrainReport& report) {
  io::atomic_write(path, [&](std::ostream& os) {
    os << "train_mode=" << report.train_mode << " eval_mode=" << report.eval_mode << "\n";
    char buf[128];
    for (const EpochStats& e : report.epochs) {
      std::snprintf(buf, sizeof(buf),
                    "epoch %zu train_loss=%.6f val_mean_ccc=%.6f lr_chain=%g lr_frontend=%g",
                    e.epoch, e.train_loss, e.val_mean_ccc, e.lr_chain, e.lr_frontend);
      os << buf << "\n";
      if (std::find(report.lr_halvings.begin(), report.lr_halvings.end(), e.epoch) !=
          report.lr_halvings.end()) {
        os << "lr halved at epoch " << e.epoch << "\n";
      }
    }
    if (report.dropped_batches > 0) {
      os << "dropped " << report.dropped_batches << " size-1 batch(es)\n";
    }
    std::snprintf(buf, sizeof(buf), "best epoch %zu val_mean_ccc=%.6f (%s)",
                  report.best_epoch, report.best_val_ccc, report.stop_reason.c_str());
    os << buf << "\n";
  });
}

std::vector<DataSample> samples_from_manifest(const Manifest& manifest,
                                              const std::filesystem::path& manifest_dir,
                                              const std::filesystem::path& feature_dir) {
  std::vector<DataSample> out;
  out.reserve(manifest.records.size());
  for (const SampleRecord& rec : manifest.records) {
    DataSample s;
    s.file_id = rec.file_id;
    s.speaker_id = rec.speaker_id;
    s.feature_path =
        resolve_feature_path(rec.feature_path, manifest_dir, feature_dir).string();
    s.scores = rec.scores;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace emochain
