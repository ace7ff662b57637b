// Compares the serial reference batch kernels against the OpenMP ones and
// verifies that both produce bit-identical results.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "emochain/batch_kernels.hpp"
#include "emochain/metrics.hpp"
#include "emochain/model.hpp"
#include "emochain/rng.hpp"

using namespace emochain;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<FeatureSequence> random_batch(std::size_t b, std::size_t t, std::size_t d,
                                          std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureSequence> out;
  out.reserve(b);
  for (std::size_t i = 0; i < b; ++i) {
    FeatureSequence fs(t, d);
    for (double& x : fs.values) x = rng.uniform(-1.0, 1.0);
    out.push_back(std::move(fs));
  }
  return out;
}

Matrix random_targets(std::size_t b, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix t(b, c);
  for (double& x : t.data) x = rng.uniform(0.05, 0.95);
  return t;
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t batch = 64;
  std::size_t reps = 10;
  if (argc > 1) batch = std::stoul(argv[1]);
  if (argc > 2) reps = std::stoul(argv[2]);

  const std::size_t d = 32, h = 64, a = 32, t = 60;
  const EmotionSet emotions = EmotionSet::canonical();
  const EmotionChainModel model =
      init_model(d, h, a, emotions, ChainOrder::identity(emotions.size()), 7);
  const std::vector<FeatureSequence> features = random_batch(batch, t, d, 11);
  const Matrix targets = random_targets(batch, emotions.size(), 13);

  std::printf("batch=%zu frames=%zu feature_dim=%zu embed_dim=%zu reps=%zu\n", batch, t, d,
              h, reps);

  std::vector<double> grads_serial, grads_parallel;
  Matrix pred_serial, pred_parallel;
  double grad_ms[2] = {0, 0};
  double infer_ms[2] = {0, 0};

  for (int mode = 0; mode < 2; ++mode) {
    const Exec exec = mode == 0 ? Exec::serial : Exec::parallel;
    auto t0 = Clock::now();
    for (std::size_t r = 0; r < reps; ++r) {
      TeacherForwardBatch fwd(model, features, targets, exec);
      const CccLoss loss = mean_ccc_loss(targets, fwd.predictions());
      std::vector<double> g = fwd.backward(loss.grad);
      if (r == 0) (mode == 0 ? grads_serial : grads_parallel) = std::move(g);
    }
    grad_ms[mode] = ms_since(t0) / double(reps);

    t0 = Clock::now();
    for (std::size_t r = 0; r < reps; ++r) {
      Matrix p = batch_infer(model, features, exec);
      if (r == 0) (mode == 0 ? pred_serial : pred_parallel) = std::move(p);
    }
    infer_ms[mode] = ms_since(t0) / double(reps);
  }

  const bool grads_equal = grads_serial == grads_parallel;
  const bool preds_equal = pred_serial.data == pred_parallel.data;

  std::printf("%-24s %10s %10s %9s\n", "kernel", "serial ms", "openmp ms", "speedup");
  std::printf("%-24s %10.2f %10.2f %8.2fx\n", "teacher forward+grad", grad_ms[0], grad_ms[1],
              grad_ms[0] / grad_ms[1]);
  std::printf("%-24s %10.2f %10.2f %8.2fx\n", "autoregressive infer", infer_ms[0],
              infer_ms[1], infer_ms[0] / infer_ms[1]);
  std::printf("bitwise identical: grads=%s predictions=%s\n", grads_equal ? "yes" : "NO",
              preds_equal ? "yes" : "NO");
  return (grads_equal && preds_equal) ? 0 : 1;
}
