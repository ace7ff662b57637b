#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "emochain/augment.hpp"
#include "emochain/data.hpp"
#include "emochain/io_util.hpp"
#include "emochain/model.hpp"
#include "oracles.hpp"

using namespace emochain;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() / "emochain_cli_io";
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(++counter));
  const fs::path err = dir / ("err" + std::to_string(counter));
  const std::string cmd = std::string(EMOCHAIN_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = io::read_file(out);
  r.err = io::read_file(err);
  return r;
}

// one small dataset shared by the CLI cases
const fs::path& dataset_dir() {
  static const fs::path dir = [] {
    const fs::path d = oracle::tmp_dir("cli_data");
    (void)generate_synthetic_dataset(80, 8, 10, 11, d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("help and argument errors") {
  CHECK(run_cli("--help").exit_code == 0);
  CHECK(run_cli("train --help").exit_code == 0);
  CHECK(run_cli("augment --help").out.find("--cents") != std::string::npos);

  const RunResult unknown = run_cli("train --no-such-flag");
  CHECK(unknown.exit_code != 0);
  CHECK(!unknown.err.empty());

  const RunResult nocmd = run_cli("");
  CHECK(nocmd.exit_code != 0);
}

TEST_CASE("split writes deterministic speaker-disjoint fold files") {
  const fs::path manifest = dataset_dir() / "manifest.csv";
  const fs::path out1 = oracle::tmp_dir("cli_split1");
  const fs::path out2 = oracle::tmp_dir("cli_split2");

  const RunResult r1 =
      run_cli("split --manifest " + manifest.string() + " --k 4 --seed 9 --out-dir " +
              out1.string());
  CHECK(r1.exit_code == 0);
  for (int f = 0; f < 4; ++f) {
    CHECK(fs::exists(out1 / ("fold_" + std::to_string(f) + ".csv")));
  }

  const RunResult r2 =
      run_cli("split --manifest " + manifest.string() + " --k 4 --seed 9 --out-dir " +
              out2.string());
  CHECK(r2.exit_code == 0);
  CHECK(io::read_file(out1 / "fold_0.csv") == io::read_file(out2 / "fold_0.csv"));

  // more folds than speakers: one-line diagnostic on stderr, non-zero exit
  const RunResult bad = run_cli("split --manifest " + manifest.string() +
                                " --k 40 --seed 9 --out-dir " + out1.string());
  CHECK(bad.exit_code != 0);
  CHECK(bad.err.find("error:") != std::string::npos);
}

TEST_CASE("train then evaluate, predict and adapt end to end") {
  const fs::path dir = oracle::tmp_dir("cli_train");
  const fs::path manifest = dataset_dir() / "manifest.csv";

  // config file with a flag override on top
  const fs::path config = dir / "run.conf";
  {
    std::ofstream os(config);
    os << "manifest = " << manifest.string() << "\n"
       << "model_out = " << (dir / "file_value.ecm").string() << "\n"
       << "report_out = " << (dir / "rep").string() << "\n"
       << "embed_dim = 12\n"
       << "attention_dim = 6\n"
       << "lr_chain = 3e-3\n"
       << "lr_frontend = 3e-4\n"
       << "min_epochs = 3\n"
       << "max_epochs = 6\n"
       << "k = 4\n"
       << "seed = 5\n";
  }
  const fs::path model_path = dir / "model.ecm";
  const RunResult tr = run_cli("train --config " + config.string() + " --model-out " +
                               model_path.string());
  CHECK(tr.exit_code == 0);
  CHECK(fs::exists(model_path));  // flag overrides the file value
  CHECK(!fs::exists(dir / "file_value.ecm"));
  CHECK(fs::exists(dir / "rep.csv"));
  CHECK(fs::exists(dir / "rep.log"));
  CHECK(tr.out.find("best epoch") != std::string::npos);

  // rerun reproduces identical outputs
  const std::string model_bytes = io::read_file(model_path);
  const std::string report_bytes = io::read_file(dir / "rep.csv");
  const RunResult tr2 = run_cli("train --config " + config.string() + " --model-out " +
                                model_path.string());
  CHECK(tr2.exit_code == 0);
  CHECK(io::read_file(model_path) == model_bytes);
  CHECK(io::read_file(dir / "rep.csv") == report_bytes);

  SUBCASE("evaluate prints per-emotion lines and a mean") {
    const RunResult ev = run_cli("evaluate --model " + model_path.string() +
                                 " --manifest " + manifest.string() + " --out " +
                                 (dir / "eval.csv").string());
    CHECK(ev.exit_code == 0);
    CHECK(ev.out.find("amusement") != std::string::npos);
    CHECK(ev.out.find("mean") != std::string::npos);
    const std::string csv = io::read_file(dir / "eval.csv");
    CHECK(csv.find("emotion,ccc") == 0);
    CHECK(run_cli("evaluate --model " + model_path.string() + " --manifest " +
                  manifest.string() + " --reduction per-fold-mean --k 4")
              .exit_code == 0);
    CHECK(run_cli("evaluate --model " + model_path.string() + " --manifest " +
                  manifest.string() + " --reduction bogus")
              .exit_code != 0);
  }

  SUBCASE("predict writes canonical columns and deterministic rows") {
    const std::string f1 = (dataset_dir() / "features/sample00003.ftr").string();
    const fs::path pred_csv = dir / "pred.csv";
    const RunResult pr = run_cli("predict --model " + model_path.string() + " --out " +
                                 pred_csv.string() + " " + f1 + " " + f1);
    CHECK(pr.exit_code == 0);
    std::ifstream is(pred_csv);
    std::string header, row1, row2;
    std::getline(is, header);
    std::getline(is, row1);
    std::getline(is, row2);
    CHECK(header ==
          "File_ID,Amusement,Awe,Awkwardness,Distress,Excitement,Fear,Horror,Sadness,"
          "Surprise,Triumph");
    CHECK(row1 == row2);  // identical input listed twice
    CHECK(row1.find("sample00003") == 0);
    std::stringstream ss(row1.substr(row1.find(',') + 1));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }

  SUBCASE("adapt writes a distinct model; lr 0 reproduces the input") {
    Manifest support;
    support.emotion_set = EmotionSet::canonical();
    const Manifest full = load_manifest(manifest);
    for (const SampleRecord& r : full.records) {
      if (r.speaker_id == full.records[0].speaker_id && support.records.size() < 2) {
        SampleRecord copy = r;
        copy.feature_path = (dataset_dir() / r.feature_path).string();
        support.records.push_back(copy);
      }
    }
    const fs::path support_csv = dir / "support.csv";
    save_manifest(support_csv, support);

    const fs::path adapted = dir / "adapted.ecm";
    const RunResult ad = run_cli("adapt --model " + model_path.string() + " --manifest " +
                                 support_csv.string() + " --out " + adapted.string() +
                                 " --lr 1e-3 --epochs 5");
    CHECK(ad.exit_code == 0);
    CHECK(io::read_file(adapted) != io::read_file(model_path));

    const fs::path noop = dir / "noop.ecm";
    const RunResult ad0 = run_cli("adapt --model " + model_path.string() + " --manifest " +
                                  support_csv.string() + " --out " + noop.string() +
                                  " --lr 0 --epochs 5");
    CHECK(ad0.exit_code == 0);
    CHECK(io::read_file(noop) == io::read_file(model_path));
  }
}

TEST_CASE("train fails cleanly when a feature file is missing") {
  const fs::path dir = oracle::tmp_dir("cli_missing");
  Manifest m = load_manifest(dataset_dir() / "manifest.csv");
  m.records[0].feature_path = "features/not_there.ftr";
  save_manifest(dir / "broken.csv", m);
  for (const SampleRecord& r : m.records) {
    if (r.feature_path != "features/not_there.ftr") {
      fs::create_directories((dir / r.feature_path).parent_path());
      fs::copy_file(dataset_dir() / r.feature_path, dir / r.feature_path);
    }
  }
  const RunResult r = run_cli("train --manifest " + (dir / "broken.csv").string() +
                              " --model-out " + (dir / "m.ecm").string() +
                              " --report-out " + (dir / "rep").string() +
                              " --min-epochs 3 --max-epochs 3 --k 4");
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("not_there.ftr") != std::string::npos);
  CHECK(!fs::exists(dir / "m.ecm"));  // no partial outputs
}

TEST_CASE("unknown config keys are rejected") {
  const fs::path dir = oracle::tmp_dir("cli_badconf");
  const fs::path config = dir / "bad.conf";
  {
    std::ofstream os(config);
    os << "manifest = x.csv\nlearning_rate = 0.1\n";
  }
  const RunResult r = run_cli("train --config " + config.string());
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("unknown config key 'learning_rate'") != std::string::npos);
}

TEST_CASE("chain-order emits a parsable permutation with the easy emotion first") {
  const fs::path dir = oracle::tmp_dir("cli_order");
  SyntheticOptions opt;
  opt.noise_emotion = 2;
  (void)generate_synthetic_dataset(80, 8, 8, 23, dir, opt);

  const fs::path order_path = dir / "order.txt";
  const RunResult r = run_cli(
      "chain-order --manifest " + (dir / "manifest.csv").string() + " --out " +
      order_path.string() +
      " --embed-dim 10 --attention-dim 6 --lr-chain 1e-2 --lr-frontend 1e-3"
      " --min-epochs 5 --max-epochs 8 --k 4 --seed 23");
  CHECK(r.exit_code == 0);

  std::ifstream is(order_path);
  std::string line;
  std::getline(is, line);
  const EmotionSet set = EmotionSet::canonical();
  std::vector<std::size_t> order;
  std::stringstream ss(line);
  std::string name;
  std::size_t pos_easy = 99, pos_noise = 99;
  while (std::getline(ss, name, ',')) {
    const std::size_t idx = set.index_of(name);
    if (idx == 0) pos_easy = order.size();
    if (idx == 2) pos_noise = order.size();
    order.push_back(idx);
  }
  ChainOrder parsed;
  parsed.order = order;
  CHECK(parsed.is_permutation(set.size()));
  CHECK(pos_easy < pos_noise);
}

TEST_CASE("augment command") {
  const fs::path dir = oracle::tmp_dir("cli_augment");
  Waveform w;
  w.sample_rate = 16000;
  w.samples = oracle::make_sine(440.0, 16000.0, 12000, 0.6);
  write_wav(dir / "in.wav", w);

  SUBCASE("explicit zero shift and unit rate reproduce the input interior") {
    const RunResult r = run_cli("augment --in " + (dir / "in.wav").string() + " --out " +
                                (dir / "out.wav").string() + " --cents 0 --rate 1.0");
    CHECK(r.exit_code == 0);
    const Waveform out = read_wav(dir / "out.wav");
    REQUIRE(out.samples.size() == w.samples.size());
    double worst = 0.0;
    for (std::size_t i = 1024; i + 1024 < out.samples.size(); ++i) {
      worst = std::max(worst, std::abs(out.samples[i] - w.samples[i]));
    }
    CHECK(worst <= 2.0 / 32768.0);  // algorithm identity plus 16-bit quantization
  }

  SUBCASE("seeded random augmentation is reproducible") {
    const RunResult r1 = run_cli("augment --in " + (dir / "in.wav").string() + " --out " +
                                 (dir / "a.wav").string() + " --seed 7");
    const RunResult r2 = run_cli("augment --in " + (dir / "in.wav").string() + " --out " +
                                 (dir / "b.wav").string() + " --seed 7");
    CHECK(r1.exit_code == 0);
    CHECK(r2.exit_code == 0);
    CHECK(io::read_file(dir / "a.wav") == io::read_file(dir / "b.wav"));
  }

  SUBCASE("unreadable input fails with a diagnostic") {
    const RunResult r = run_cli("augment --in " + (dir / "missing.wav").string() +
                                " --out " + (dir / "x.wav").string());
    CHECK(r.exit_code != 0);
    CHECK(!r.err.empty());
  }
}

TEST_CASE("synth is deterministic at the byte level") {
  const fs::path a = oracle::tmp_dir("cli_synth_a");
  const fs::path b = oracle::tmp_dir("cli_synth_b");
  const std::string args = " --samples 30 --speakers 5 --feature-dim 8 --seed 77";
  CHECK(run_cli("synth --out-dir " + a.string() + args).exit_code == 0);
  CHECK(run_cli("synth --out-dir " + b.string() + args).exit_code == 0);
  CHECK(io::read_file(a / "manifest.csv") == io::read_file(b / "manifest.csv"));
  CHECK(io::read_file(a / "features/sample00004.ftr") ==
        io::read_file(b / "features/sample00004.ftr"));
}
