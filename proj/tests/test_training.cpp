#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <fstream>
#include <map>

#include "doctest.h"
#include "emochain/data.hpp"
#include "emochain/io_util.hpp"
#include "emochain/rng.hpp"
#include "emochain/training.hpp"
#include "oracles.hpp"

using namespace emochain;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  SyntheticDataset dataset;
  std::vector<DataSample> samples;
  std::vector<DataSample> train_set;
  std::vector<DataSample> val_set;
};

Fixture make_fixture(std::size_t n, std::size_t speakers, std::size_t d, std::uint64_t seed,
                     const SyntheticOptions& opt = {}) {
  Fixture f;
  f.dataset = generate_synthetic_dataset(n, speakers, d, seed,
                                         oracle::tmp_dir("train_fixture"), opt);
  f.samples = samples_from_manifest(f.dataset.manifest, f.dataset.dir);
  const auto folds = speaker_disjoint_kfold(f.dataset.manifest, 4, seed);
  for (const DataSample& s : f.samples) {
    (folds[0].train_ids.count(s.file_id) ? f.train_set : f.val_set).push_back(s);
  }
  return f;
}

TrainConfig fast_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.lr_chain = 3e-3;
  cfg.lr_frontend = 3e-4;
  cfg.min_epochs = 3;
  cfg.max_epochs = 10;
  cfg.patience = 10;
  cfg.seed = seed;
  return cfg;
}

std::vector<FeatureSequence> load_all(const std::vector<DataSample>& samples,
                                      const FeatureProvider& provider) {
  std::vector<FeatureSequence> out;
  for (const DataSample& s : samples) out.push_back(provider(s, -1));
  return out;
}

}  // namespace

TEST_CASE("adam first step moves by about lr in the gradient direction") {
  std::vector<double> params{1.0, -2.0, 0.5};
  const std::vector<double> grads{0.3, -4.0, 0.05};
  AdamState state;
  const double lr = 1e-2;
  const std::vector<double> before = params;
  adam_step(params, grads, state, lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double step = before[i] - params[i];
    const double want = lr * (grads[i] > 0 ? 1.0 : -1.0);
    CHECK(std::abs(step - want) / std::abs(want) <= 1e-6);
  }
}

TEST_CASE("adam leaves parameters untouched under zero gradients") {
  std::vector<double> params{0.25, -1.5};
  const std::vector<double> zeros{0.0, 0.0};
  AdamState state;
  const std::vector<double> before = params;
  for (int i = 0; i < 5; ++i) adam_step(params, zeros, state, 1e-2);
  CHECK(params == before);
}

TEST_CASE("two learning-rate groups scale updates 10:1") {
  std::vector<double> a{1.0}, b{1.0};
  AdamState sa, sb;
  adam_step(a, std::vector<double>{0.7}, sa, 1e-4);
  adam_step(b, std::vector<double>{0.7}, sb, 1e-5);
  const double da = 1.0 - a[0];
  const double db = 1.0 - b[0];
  CHECK(std::abs(da / db - 10.0) <= 1e-9);
}

TEST_CASE("adam rejects non-finite gradients") {
  std::vector<double> params{1.0};
  AdamState state;
  CHECK_THROWS_AS(adam_step(params, std::vector<double>{std::nan("")}, state, 1e-3),
                  std::runtime_error);
}

TEST_CASE("serial and OpenMP batch kernels are bit-identical") {
  Rng rng(404);
  const EmotionSet emotions = EmotionSet::canonical();
  const EmotionChainModel model =
      init_model(9, 12, 7, emotions, ChainOrder::identity(10), 5);
  std::vector<FeatureSequence> features;
  for (int i = 0; i < 12; ++i) {
    FeatureSequence fs(3 + rng.below(20), 9);
    for (double& v : fs.values) v = rng.uniform(-1.0, 1.0);
    features.push_back(std::move(fs));
  }
  Matrix targets(features.size(), emotions.size());
  for (double& v : targets.data) v = rng.uniform(0.0, 1.0);

  TeacherForwardBatch serial(model, features, targets, Exec::serial);
  TeacherForwardBatch parallel(model, features, targets, Exec::parallel);
  CHECK(serial.predictions().data == parallel.predictions().data);

  const CccLoss loss = mean_ccc_loss(targets, serial.predictions());
  CHECK(serial.backward(loss.grad) == parallel.backward(loss.grad));

  CHECK(batch_infer(model, features, Exec::serial).data ==
        batch_infer(model, features, Exec::parallel).data);
}

TEST_CASE("training learns the synthetic task and is fully deterministic") {
  const Fixture f = make_fixture(120, 8, 10, 31);
  const TrainConfig cfg = fast_config(31);
  const EmotionChainModel init =
      init_model(10, 16, 8, EmotionSet::canonical(), ChainOrder::identity(10), 31);
  const FeatureProvider provider = make_file_provider();

  const TrainResult a = train(init, f.train_set, f.val_set, cfg, provider);
  CHECK(a.report.best_val_ccc > 0.5);
  CHECK(a.report.train_mode == "teacher_forced");
  CHECK(a.report.eval_mode == "autoregressive");

  const TrainResult b = train(init, f.train_set, f.val_set, cfg, provider);
  CHECK(flatten_params(a.model) == flatten_params(b.model));
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i) {
    CHECK(a.report.epochs[i].train_loss == b.report.epochs[i].train_loss);
    CHECK(a.report.epochs[i].val_mean_ccc == b.report.epochs[i].val_mean_ccc);
  }

  // serial execution matches the parallel default bit for bit
  TrainConfig serial_cfg = cfg;
  serial_cfg.exec = Exec::serial;
  const TrainResult c = train(init, f.train_set, f.val_set, serial_cfg, provider);
  CHECK(flatten_params(a.model) == flatten_params(c.model));
}

TEST_CASE("shuffled labels early-stop near zero CCC") {
  Fixture f = make_fixture(100, 8, 8, 77);
  // destroy the feature-label relationship by rotating scores across samples
  std::vector<EmotionScores> scores;
  for (const DataSample& s : f.train_set) scores.push_back(s.scores);
  for (std::size_t i = 0; i < f.train_set.size(); ++i) {
    f.train_set[i].scores = scores[(i + 17) % scores.size()];
  }
  TrainConfig cfg = fast_config(77);
  cfg.min_epochs = 5;
  cfg.max_epochs = 30;
  cfg.patience = 4;
  const EmotionChainModel init =
      init_model(8, 10, 6, EmotionSet::canonical(), ChainOrder::identity(10), 77);
  const TrainResult r = train(init, f.train_set, f.val_set, cfg, make_file_provider());
  CHECK(r.report.stop_reason == "early_stop");
  CHECK(std::abs(r.report.best_val_ccc) <= 0.2);
  CHECK(r.report.epochs.size() < 30);

  // learning rates never increase, and every halving is logged
  for (std::size_t i = 1; i < r.report.epochs.size(); ++i) {
    CHECK(r.report.epochs[i].lr_chain <= r.report.epochs[i - 1].lr_chain);
    CHECK(r.report.epochs[i].lr_frontend <= r.report.epochs[i - 1].lr_frontend);
  }
  CHECK(!r.report.lr_halvings.empty());
}

TEST_CASE("the returned model is the best-epoch snapshot") {
  const Fixture f = make_fixture(90, 6, 8, 13);
  TrainConfig cfg = fast_config(13);
  cfg.max_epochs = 8;
  const EmotionChainModel init =
      init_model(8, 12, 6, EmotionSet::canonical(), ChainOrder::identity(10), 13);
  const FeatureProvider provider = make_file_provider();
  const TrainResult r = train(init, f.train_set, f.val_set, cfg, provider);

  double best = -2.0;
  for (const EpochStats& e : r.report.epochs) best = std::max(best, e.val_mean_ccc);
  CHECK(r.report.best_val_ccc == best);
  CHECK(r.report.epochs[r.report.best_epoch - 1].val_mean_ccc == best);

  // re-evaluating the returned model reproduces the best epoch's numbers
  const EvalResult ev = evaluate(r.model, f.val_set, provider, Reduction::pooled, nullptr,
                                 cfg.exec);
  CHECK(ev.per_emotion == r.report.epochs[r.report.best_epoch - 1].val_per_emotion);
}

TEST_CASE("evaluate edge models") {
  const Fixture f = make_fixture(40, 4, 8, 3);
  const FeatureProvider provider = make_file_provider();

  SUBCASE("a model echoed into the ground truth scores 1.0 everywhere") {
    const EmotionChainModel m =
        init_model(8, 10, 5, EmotionSet::canonical(), ChainOrder::identity(10), 3);
    std::vector<DataSample> echoed = f.samples;
    for (DataSample& s : echoed) {
      s.scores = infer(m, provider(s, -1));
    }
    const EvalResult r = evaluate(m, echoed, provider);
    for (double c : r.per_emotion) CHECK(c == 1.0);
    CHECK(r.mean_ccc == 1.0);
  }

  SUBCASE("a constant-output model scores 0 everywhere") {
    EmotionChainModel m =
        init_model(8, 10, 5, EmotionSet::canonical(), ChainOrder::identity(10), 3);
    std::vector<double> zeros(param_count(m), 0.0);
    set_params(m, zeros);
    const EvalResult r = evaluate(m, f.samples, provider);
    for (double c : r.per_emotion) CHECK(c == 0.0);
  }

  SUBCASE("fewer than two samples is fatal") {
    std::vector<DataSample> one{f.samples[0]};
    CHECK_THROWS_AS((void)evaluate(EmotionChainModel{}, one, provider),
                    std::invalid_argument);
  }
}

TEST_CASE("pooled and per-fold-mean reductions differ when folds differ") {
  const EmotionChainModel m =
      init_model(6, 8, 4, EmotionSet::canonical(), ChainOrder::identity(10), 21);
  Rng rng(22);
  std::vector<DataSample> samples;
  std::map<std::string, FeatureSequence> features;
  for (int i = 0; i < 4; ++i) {
    DataSample s;
    s.file_id = "s" + std::to_string(i);
    FeatureSequence fs(5, 6);
    for (double& v : fs.values) v = rng.uniform(-1.0, 1.0);
    features[s.file_id] = fs;
    // fold 1's targets sit on a shifted scale, so fold statistics differ
    s.scores.assign(10, 0.0);
    for (double& v : s.scores) v = (i < 2) ? rng.uniform(0.0, 0.4) : rng.uniform(0.5, 1.0);
    samples.push_back(std::move(s));
  }
  const FeatureProvider provider = [&](const DataSample& s, int) {
    return features.at(s.file_id);
  };

  const std::vector<std::vector<std::size_t>> folds{{0, 1}, {2, 3}};
  const EvalResult pooled = evaluate(m, samples, provider, Reduction::pooled);
  const EvalResult per_fold =
      evaluate(m, samples, provider, Reduction::per_fold_mean, &folds);

  // oracle recomputation from the model's own predictions
  Matrix pred(4, 10), truth(4, 10);
  for (std::size_t i = 0; i < 4; ++i) {
    const EmotionScores y = infer(m, features.at(samples[i].file_id));
    for (std::size_t e = 0; e < 10; ++e) {
      pred.at(i, e) = y[e];
      truth.at(i, e) = samples[i].scores[e];
    }
  }
  for (std::size_t e = 0; e < 10; ++e) {
    Vector sp(4), st(4);
    for (std::size_t i = 0; i < 4; ++i) {
      sp[i] = pred.at(i, e);
      st[i] = truth.at(i, e);
    }
    CHECK(std::abs(pooled.per_emotion[e] - oracle::ccc(sp, st)) <= 1e-12);
    const double f0 =
        oracle::ccc(Vector{sp[0], sp[1]}, Vector{st[0], st[1]});
    const double f1 =
        oracle::ccc(Vector{sp[2], sp[3]}, Vector{st[2], st[3]});
    CHECK(std::abs(per_fold.per_emotion[e] - 0.5 * (f0 + f1)) <= 1e-12);
  }
  CHECK(std::abs(pooled.mean_ccc - per_fold.mean_ccc) > 1e-6);
  CHECK_THROWS_AS((void)evaluate(m, samples, provider, Reduction::per_fold_mean, nullptr),
                  std::invalid_argument);
}

TEST_CASE("base predictors separate easy from noise emotions") {
  SyntheticOptions opt;
  opt.noise_emotion = 2;  // awkwardness becomes pure label noise
  const Fixture f = make_fixture(100, 8, 8, 55, opt);
  TrainConfig cfg = fast_config(55);
  cfg.lr_chain = 1e-2;
  cfg.lr_frontend = 1e-3;
  cfg.max_epochs = 10;
  cfg.min_epochs = 5;
  const auto folds = speaker_disjoint_kfold(f.dataset.manifest, 4, 55);
  const std::vector<FoldSplit> split{folds[0]};
  const ModelDims dims{8, 10, 6};
  const FeatureProvider provider = make_file_provider();

  const Vector ccc_a = train_base_predictors(f.samples, split, dims,
                                             EmotionSet::canonical(), cfg, provider);
  REQUIRE(ccc_a.size() == 10);
  CHECK(ccc_a[0] > ccc_a[2]);  // amusement is learnable, awkwardness is noise

  const ChainOrder order = compute_chain_order(ccc_a);
  std::size_t pos_easy = 0, pos_noise = 0;
  for (std::size_t p = 0; p < order.order.size(); ++p) {
    if (order.order[p] == 0) pos_easy = p;
    if (order.order[p] == 2) pos_noise = p;
  }
  CHECK(pos_easy < pos_noise);

  const Vector ccc_b = train_base_predictors(f.samples, split, dims,
                                             EmotionSet::canonical(), cfg, provider);
  CHECK(ccc_a == ccc_b);
}

TEST_CASE("few-shot adaptation") {
  const Fixture f = make_fixture(120, 8, 10, 41);
  TrainConfig cfg = fast_config(41);
  cfg.max_epochs = 8;
  const EmotionChainModel init =
      init_model(10, 14, 7, EmotionSet::canonical(), ChainOrder::identity(10), 41);
  const FeatureProvider provider = make_file_provider();
  const TrainResult base = train(init, f.train_set, f.val_set, cfg, provider);

  // two samples of a strongly shifted unseen speaker
  SyntheticOptions shifted;
  shifted.speaker_offset_scale = 0.9;
  const SyntheticDataset other = generate_synthetic_dataset(
      16, 8, 10, 4242, oracle::tmp_dir("adapt_support"), shifted);
  const std::vector<DataSample> other_samples =
      samples_from_manifest(other.manifest, other.dir);
  std::vector<DataSample> support;
  for (const DataSample& s : other_samples) {
    if (s.speaker_id == other_samples[0].speaker_id) support.push_back(s);
  }
  support.resize(2);

  SUBCASE("zero learning rate is an exact no-op") {
    AdaptConfig acfg;
    acfg.lr = 0.0;
    const EmotionChainModel adapted = adapt_few_shot(base.model, support, acfg, provider);
    CHECK(flatten_params(adapted) == flatten_params(base.model));
  }

  SUBCASE("support CCC strictly improves and adaptation is deterministic") {
    AdaptConfig acfg;
    acfg.lr = 1e-3;
    acfg.epochs = 10;
    acfg.seed = 7;
    const EvalResult before = evaluate(base.model, support, provider);
    const EmotionChainModel adapted = adapt_few_shot(base.model, support, acfg, provider);
    const EvalResult after = evaluate(adapted, support, provider);
    CHECK(after.mean_ccc > before.mean_ccc);

    const EmotionChainModel again = adapt_few_shot(base.model, support, acfg, provider);
    CHECK(flatten_params(adapted) == flatten_params(again));
  }

  SUBCASE("a single support sample trains under the MSE fallback") {
    std::vector<DataSample> one{support[0]};
    AdaptConfig acfg;
    acfg.lr = 1e-2;
    acfg.epochs = 15;
    const FeatureSequence fs = provider(one[0], -1);
    auto sq_err = [&](const EmotionChainModel& m) {
      const EmotionScores y = infer(m, fs);
      double acc = 0.0;
      for (std::size_t e = 0; e < y.size(); ++e) {
        acc += (y[e] - one[0].scores[e]) * (y[e] - one[0].scores[e]);
      }
      return acc;
    };
    const double before = sq_err(base.model);
    const EmotionChainModel adapted = adapt_few_shot(base.model, one, acfg, provider);
    CHECK(sq_err(adapted) < before);
  }

  SUBCASE("empty support set is fatal") {
    CHECK_THROWS_AS(
        (void)adapt_few_shot(base.model, std::vector<DataSample>{}, AdaptConfig{}, provider),
        std::invalid_argument);
  }
}

TEST_CASE("trailing size-1 batches are dropped and counted") {
  Fixture f = make_fixture(60, 5, 8, 91);
  f.train_set.resize(5);  // 5 samples, batch 2 -> one dropped per epoch
  TrainConfig cfg = fast_config(91);
  cfg.batch_size = 2;
  cfg.min_epochs = 3;
  cfg.max_epochs = 4;
  cfg.patience = 10;
  const EmotionChainModel init =
      init_model(8, 8, 4, EmotionSet::canonical(), ChainOrder::identity(10), 91);
  const TrainResult r = train(init, f.train_set, f.val_set, cfg, make_file_provider());
  CHECK(r.report.dropped_batches == r.report.epochs.size());
}

TEST_CASE("training configuration errors") {
  const Fixture f = make_fixture(40, 4, 8, 19);
  const EmotionChainModel init =
      init_model(8, 8, 4, EmotionSet::canonical(), ChainOrder::identity(10), 19);
  const FeatureProvider provider = make_file_provider();

  TrainConfig bad = fast_config(19);
  bad.batch_size = 1;
  CHECK_THROWS_AS((void)train(init, f.train_set, f.val_set, bad, provider),
                  std::invalid_argument);

  TrainConfig cfg = fast_config(19);
  std::vector<DataSample> tiny{f.train_set[0]};
  CHECK_THROWS_AS((void)train(init, tiny, f.val_set, cfg, provider), std::invalid_argument);

  TrainConfig no_patience = fast_config(19);
  no_patience.patience = 0;
  CHECK_THROWS_AS((void)train(init, f.train_set, f.val_set, no_patience, provider),
                  std::invalid_argument);
}

TEST_CASE("augmenting provider derives per-(epoch, sample) seeds") {
  Waveform tone;
  tone.sample_rate = 16000;
  tone.samples = oracle::make_sine(440.0, 16000.0, 8000, 0.6);

  const WaveformLookup lookup = [&](const DataSample&) { return tone; };
  const FeatureExtractor extractor = [](const Waveform& w) {
    const std::size_t d = 8;
    const std::size_t t = std::min<std::size_t>(16, w.samples.size() / d);
    FeatureSequence fs(t, d);
    for (std::size_t i = 0; i < t * d; ++i) fs.values[i] = w.samples[i];
    return fs;
  };
  const FeatureProvider provider =
      make_augmenting_provider(lookup, extractor, AugmentConfig{}, 99);

  DataSample s;
  s.file_id = "clip1";
  CHECK(provider(s, 0) == provider(s, 0));
  CHECK(provider(s, 0) != provider(s, 1));
  CHECK(provider(s, -1) == extractor(tone));

  DataSample s2 = s;
  s2.file_id = "clip2";
  CHECK(provider(s, 3) != provider(s2, 3));
}

TEST_CASE("report files are written with one record per epoch") {
  const Fixture f = make_fixture(60, 5, 8, 61);
  TrainConfig cfg = fast_config(61);
  cfg.max_epochs = 4;
  const EmotionChainModel init =
      init_model(8, 8, 4, EmotionSet::canonical(), ChainOrder::identity(10), 61);
  const TrainResult r = train(init, f.train_set, f.val_set, cfg, make_file_provider());

  const fs::path dir = oracle::tmp_dir("report");
  write_report_csv(dir / "rep.csv", r.report, EmotionSet::canonical());
  write_report_log(dir / "rep.log", r.report);

  std::ifstream is(dir / "rep.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line.find("epoch,train_loss,val_mean_ccc,ccc_amusement") == 0);
  CHECK(line.find("ccc_triumph,lr_chain,lr_frontend") != std::string::npos);
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == r.report.epochs.size());

  const std::string log = io::read_file(dir / "rep.log");
  CHECK(log.find("train_mode=teacher_forced") != std::string::npos);
  CHECK(log.find("eval_mode=autoregressive") != std::string::npos);
  CHECK(log.find("best epoch") != std::string::npos);
}
