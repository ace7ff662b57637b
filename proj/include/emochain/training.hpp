#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emochain/augment.hpp"
#include "emochain/batch_kernels.hpp"
#include "emochain/data.hpp"
#include "emochain/metrics.hpp"
#include "emochain/model.hpp"

namespace emochain {

struct TrainConfig {
  double lr_chain = 1e-4;
  double lr_frontend = 1e-5;
  std::size_t batch_size = 8;  // must be >= 2: CCC needs batch variance
  std::size_t min_epochs = 10;
  std::size_t max_epochs = 50;
  std::size_t patience = 10;
  bool lr_halving = true;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
  std::optional<AugmentConfig> augment;  // consumed by augmenting providers
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

// Standard Adam with beta1=0.9, beta2=0.999, eps=1e-8 and bias correction.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr);

// One training sample: metadata plus its target scores (length = the emotion
// count of the model being trained).
struct DataSample {
  std::string file_id;
  std::string speaker_id;
  std::string feature_path;
  EmotionScores scores;
};

// Supplies the features for a sample at a given epoch. epoch < 0 means
// evaluation: providers must return un-augmented features there.
using FeatureProvider = std::function<FeatureSequence(const DataSample&, int epoch)>;

// Reads (and caches) feature files from DataSample::feature_path.
FeatureProvider make_file_provider();

using WaveformLookup = std::function<Waveform(const DataSample&)>;
using FeatureExtractor = std::function<FeatureSequence(const Waveform&)>;

// On-the-fly waveform augmentation: for epoch >= 0 the waveform is augmented
// with a seed derived from (base_seed, epoch, file_id) — independent of
// scheduling order — then passed to the extractor.
FeatureProvider make_augmenting_provider(WaveformLookup lookup, FeatureExtractor extractor,
                                         AugmentConfig config, std::uint64_t base_seed);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_mean_ccc = 0.0;
  Vector val_per_emotion;
  double lr_chain = 0.0;
  double lr_frontend = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;  // 1-based
  double best_val_ccc = 0.0;
  std::string stop_reason;  // "max_epochs" | "early_stop"
  std::vector<std::size_t> lr_halvings;
  std::size_t dropped_batches = 0;
  std::string train_mode = "teacher_forced";
  std::string eval_mode = "autoregressive";
};

struct TrainResult {
  EmotionChainModel model;  // snapshot of the best-validation epoch
  TrainReport report;
};

// One epoch: shuffle, teacher-forced mini-batches under the negated mean-CCC
// loss, Adam with separate front-end / chain learning-rate groups; then an
// autoregressive validation pass. Learning rates halve on every epoch whose
// validation mean CCC fails to improve the running best; training stops
// after `patience` such epochs (never before min_epochs) or at max_epochs.
// Trailing batches of size 1 are dropped and counted.
TrainResult train(const EmotionChainModel& init, std::span<const DataSample> train_set,
                  std::span<const DataSample> val_set, const TrainConfig& config,
                  const FeatureProvider& provider);

enum class Reduction { pooled, per_fold_mean };

struct EvalResult {
  Vector per_emotion;
  double mean_ccc = 0.0;
};

// Autoregressive inference over the whole set; per-emotion CCC either pooled
// over all rows or averaged across the given fold index lists.
EvalResult evaluate(const EmotionChainModel& model, std::span<const DataSample> samples,
                    const FeatureProvider& provider, Reduction reduction = Reduction::pooled,
                    const std::vector<std::vector<std::size_t>>* folds = nullptr,
                    Exec exec = Exec::parallel);

struct ModelDims {
  std::size_t feature_dim = 0;
  std::size_t embed_dim = 32;
  std::size_t attention_dim = 16;
};

// Trains one single-output model per emotion (front end + pooling + one
// head, no chaining) under the same protocol and returns each emotion's best
// validation CCC averaged over the given splits. Feed the result to
// compute_chain_order.
Vector train_base_predictors(std::span<const DataSample> samples,
                             std::span<const FoldSplit> splits, const ModelDims& dims,
                             const EmotionSet& emotions, const TrainConfig& config,
                             const FeatureProvider& provider);

struct AdaptConfig {
  double lr = 1e-6;  // applied to every parameter group
  std::size_t epochs = 10;
  std::size_t batch_size = 8;  // clamped to the support size
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;
};

// Few-shot fine-tuning on a handful of samples from one speaker: fixed epoch
// count, no early stopping, one learning rate for the whole network. The
// input model is untouched. A single support sample is duplicated to reach
// batch size 2; CCC is degenerate on two identical rows, so that case trains
// under mean squared error instead.
EmotionChainModel adapt_few_shot(const EmotionChainModel& model,
                                 std::span<const DataSample> support,
                                 const AdaptConfig& config, const FeatureProvider& provider);

// Machine-readable per-epoch summary (CSV) and the line-oriented log.
void write_report_csv(const std::filesystem::path& path, const TrainReport& report,
                      const EmotionSet& emotions);
void write_report_log(const std::filesystem::path& path, const TrainReport& report);

// Converts manifest records into training samples, resolving feature paths.
std::vector<DataSample> samples_from_manifest(const Manifest& manifest,
                                              const std::filesystem::path& manifest_dir,
                                              const std::filesystem::path& feature_dir = {});

}  // namespace emochain
