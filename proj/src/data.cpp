#include "emochain/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "emochain/io_util.hpp"
#include "emochain/rng.hpp"

namespace emochain {

namespace {

constexpr char kFeatureMagic[4] = {'F', 'T', 'R', '1'};

const std::vector<std::string>& csv_emotion_headers() {
  static const std::vector<std::string> headers = {
      "Amusement", "Awe",     "Awkwardness", "Distress", "Excitement",
      "Fear",      "Horror",  "Sadness",     "Surprise", "Triumph"};
  return headers;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_score(const std::string& text, std::size_t row, const std::string& column) {
  std::size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != text.size() || text.empty()) {
    throw std::runtime_error("manifest row " + std::to_string(row) + " column " +
                             column + ": '" + text + "' is not a number");
  }
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::runtime_error("manifest row " + std::to_string(row) + " column " +
                             column + ": score " + text + " outside [0,1]");
  }
  return v;
}

std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) {
    throw std::runtime_error("cannot open manifest '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(is, line)) {
    throw std::runtime_error("manifest '" + path.string() + "': missing header row");
  }
  const std::vector<std::string> header = split_csv_line(line);

  const EmotionSet emotions = EmotionSet::canonical();
  // column position of every required header
  std::map<std::string, std::size_t> wanted;
  wanted["File_ID"] = SIZE_MAX;
  wanted["Speaker_ID"] = SIZE_MAX;
  wanted["Feature_Path"] = SIZE_MAX;
  for (const std::string& h : csv_emotion_headers()) wanted[h] = SIZE_MAX;

  for (std::size_t i = 0; i < header.size(); ++i) {
    auto it = wanted.find(header[i]);
    if (it == wanted.end()) {
      throw std::runtime_error("manifest: unknown column '" + header[i] + "'");
    }
    if (it->second != SIZE_MAX) {
      throw std::runtime_error("manifest: duplicate column '" + header[i] + "'");
    }
    it->second = i;
  }
  for (const auto& [name, pos] : wanted) {
    if (pos == SIZE_MAX) {
      throw std::runtime_error("manifest: missing column '" + name + "'");
    }
  }

  Manifest m;
  m.emotion_set = emotions;
  std::unordered_set<std::string> seen_ids;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::runtime_error("manifest row " + std::to_string(row) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(fields.size()));
    }
    SampleRecord rec;
    rec.file_id = fields[wanted["File_ID"]];
    rec.speaker_id = fields[wanted["Speaker_ID"]];
    rec.feature_path = fields[wanted["Feature_Path"]];
    rec.scores.resize(emotions.size());
    for (std::size_t e = 0; e < emotions.size(); ++e) {
      const std::string& col = csv_emotion_headers()[e];
      rec.scores[e] = parse_score(fields[wanted[col]], row, col);
    }
    if (!seen_ids.insert(rec.file_id).second) {
      throw std::runtime_error("manifest row " + std::to_string(row) +
                               ": duplicate file_id '" + rec.file_id + "'");
    }
    m.records.push_back(std::move(rec));
  }
  if (m.records.empty()) {
    throw std::runtime_error("manifest '" + path.string() + "' has no records");
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const Manifest& manifest) {
  io::atomic_write(path, [&](std::ostream& os) {
    os << "File_ID,Speaker_ID";
    for (const std::string& h : csv_emotion_headers()) os << ',' << h;
    os << ",Feature_Path\n";
    for (const SampleRecord& rec : manifest.records) {
      os << rec.file_id << ',' << rec.speaker_id;
      for (double s : rec.scores) os << ',' << format_score(s);
      os << ',' << rec.feature_path << '\n';
    }
  });
}

std::vector<FoldSplit> speaker_disjoint_kfold(const Manifest& manifest, std::size_t k,
                                              std::uint64_t seed) {
  if (k < 2) {
    throw std::invalid_argument("speaker_disjoint_kfold: k must be at least 2");
  }
  std::set<std::string> speaker_set;
  for (const SampleRecord& r : manifest.records) speaker_set.insert(r.speaker_id);
  std::vector<std::string> speakers(speaker_set.begin(), speaker_set.end());
  if (speakers.size() < k) {
    throw std::invalid_argument("speaker_disjoint_kfold: " +
                                std::to_string(speakers.size()) +
                                " speakers cannot fill " + std::to_string(k) + " folds");
  }

  // Sorted-then-shuffled makes the split independent of manifest row order.
  Rng rng(mix_seed(seed, 0xf01d));
  for (std::size_t i = speakers.size() - 1; i > 0; --i) {
    std::swap(speakers[i], speakers[rng.below(i + 1)]);
  }

  // contiguous groups, sizes differing by at most one
  const std::size_t base = speakers.size() / k;
  const std::size_t extra = speakers.size() % k;
  std::unordered_map<std::string, std::size_t> group_of;
  std::size_t pos = 0;
  for (std::size_t g = 0; g < k; ++g) {
    const std::size_t size = base + (g < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) group_of[speakers[pos++]] = g;
  }

  std::vector<FoldSplit> folds(k);
  for (std::size_t g = 0; g < k; ++g) folds[g].fold_index = g;
  for (const SampleRecord& r : manifest.records) {
    const std::size_t g = group_of.at(r.speaker_id);
    for (std::size_t f = 0; f < k; ++f) {
      if (f == g) {
        folds[f].val_ids.insert(r.file_id);
      } else {
        folds[f].train_ids.insert(r.file_id);
      }
    }
  }
  return folds;
}

FeatureSequence read_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open feature file '" + path.string() + "'");
  }
  char magic[4];
  io::read_exact(is, magic, 4);
  if (std::memcmp(magic, kFeatureMagic, 4) != 0) {
    throw std::runtime_error("not a feature file: '" + path.string() + "'");
  }
  const std::uint32_t version = io::read_u32(is);
  if (version != 1) {
    throw std::runtime_error("unsupported feature file version " + std::to_string(version));
  }
  const std::uint32_t t = io::read_u32(is);
  const std::uint32_t d = io::read_u32(is);
  if (t == 0 || d == 0) {
    throw std::runtime_error("feature file has degenerate shape " + std::to_string(t) +
                             "x" + std::to_string(d));
  }
  FeatureSequence fs(t, d);
  for (double& x : fs.values) {
    const float v = io::read_f32(is);
    if (!std::isfinite(v)) {
      throw std::runtime_error("feature file contains a non-finite value");
    }
    x = double(v);
  }
  return fs;
}

void write_features(const std::filesystem::path& path, const FeatureSequence& features) {
  if (features.frames == 0 || features.dim == 0) {
    throw std::invalid_argument("write_features: degenerate shape");
  }
  if (!all_finite(features.values)) {
    throw std::invalid_argument("write_features: non-finite value");
  }
  io::atomic_write(path, [&](std::ostream& os) {
    os.write(kFeatureMagic, 4);
    io::write_u32(os, 1);
    io::write_u32(os, std::uint32_t(features.frames));
    io::write_u32(os, std::uint32_t(features.dim));
    for (double x : features.values) io::write_f32(os, float(x));
  });
}

// ---------------------------------------------------------------------------
// synthetic dataset

namespace {

// Fixed affine score map over the latents; the driver emotion owns latent 0
// exclusively so the dependent emotion is reachable only through it.
double affine_score(std::size_t emotion, const Vector& g) {
  struct Coef {
    std::size_t k1, k2;
    double a1, a2;
  };
  static const Coef kCoefs[10] = {
      {0, 0, 0.45, 0.0},    // amusement (driver default)
      {1, 2, 0.40, 0.05},   // awe
      {2, 3, 0.40, 0.05},   // awkwardness
      {1, 3, -0.40, 0.05},  // distress
      {3, 1, 0.40, -0.05},  // excitement
      {2, 3, -0.40, -0.05}, // fear
      {3, 2, -0.40, 0.05},  // horror
      {1, 1, 0.0, 0.0},     // sadness (dependent default; overwritten)
      {1, 2, 0.22, -0.22},  // surprise
      {2, 3, -0.22, -0.22}, // triumph
  };
  const Coef& c = kCoefs[emotion % 10];
  auto latent = [&](std::size_t k) { return g[k % g.size()]; };
  return 0.5 + c.a1 * latent(c.k1) + c.a2 * latent(c.k2);
}

// Gram-Schmidt orthonormal directions in feature space.
std::vector<Vector> make_directions(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<Vector> dirs;
  while (dirs.size() < count) {
    Vector v(dim);
    for (double& x : v) x = rng.gaussian();
    for (const Vector& u : dirs) {
      double d = 0.0;
      for (std::size_t i = 0; i < dim; ++i) d += v[i] * u[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= d * u[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-6) continue;
    for (double& x : v) x /= norm;
    dirs.push_back(std::move(v));
  }
  return dirs;
}

}  // namespace

SyntheticDataset generate_synthetic_dataset(std::size_t n_samples, std::size_t n_speakers,
                                            std::size_t feature_dim, std::uint64_t seed,
                                            const std::filesystem::path& out_dir,
                                            const SyntheticOptions& options) {
  if (n_speakers < 2 || n_samples < n_speakers) {
    throw std::invalid_argument(
        "generate_synthetic_dataset: need n_samples >= n_speakers >= 2");
  }
  const std::size_t k_lat = options.latent_dims;
  if (k_lat < 2 || feature_dim < k_lat + 1) {
    throw std::invalid_argument(
        "generate_synthetic_dataset: feature_dim must exceed latent_dims");
  }
  if (options.max_frames < options.min_frames || options.min_frames == 0) {
    throw std::invalid_argument("generate_synthetic_dataset: bad frame range");
  }
  const EmotionSet emotions = EmotionSet::canonical();
  const std::size_t c_count = emotions.size();
  const std::size_t drv = options.driver_emotion;
  const std::size_t dep = options.dependent_emotion;
  if (drv >= c_count || dep >= c_count || drv == dep) {
    throw std::invalid_argument("generate_synthetic_dataset: bad dependency pair");
  }

  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "features");

  Rng dir_rng(mix_seed(seed, 1));
  // one direction per latent plus one weak direct carrier for the dependent score
  const std::vector<Vector> dirs = make_directions(k_lat + 1, feature_dim, dir_rng);

  Rng spk_rng(mix_seed(seed, 2));
  std::vector<Vector> speaker_offset(n_speakers, Vector(feature_dim));
  for (auto& v : speaker_offset) {
    for (double& x : v) x = options.speaker_offset_scale * spk_rng.gaussian();
  }

  SyntheticDataset out;
  out.dir = out_dir;
  out.manifest.emotion_set = emotions;
  out.latents = Matrix(n_samples, k_lat + 1);

  Rng rng(mix_seed(seed, 3));
  for (std::size_t s = 0; s < n_samples; ++s) {
    const std::size_t spk = s % n_speakers;
    Vector g(k_lat);
    for (double& x : g) x = rng.uniform(-1.0, 1.0);

    EmotionScores scores(c_count);
    for (std::size_t e = 0; e < c_count; ++e) scores[e] = affine_score(e, g);
    if (options.bump_dependency) {
      scores[drv] = sigmoid(options.bump_k * (g[0] + options.bump_shift));
      scores[1] = sigmoid(-options.bump_k * (g[0] - options.bump_shift2));
      scores[dep] = sigmoid(options.bump_out_gain * (scores[drv] + scores[1]) +
                            options.bump_out_bias);
    } else {
      scores[dep] = sigmoid(options.dependency_gain * (scores[drv] - 0.5) +
                            options.dependency_bias);
    }
    if (options.noise_emotion) {
      scores[*options.noise_emotion] = 0.2 + 0.6 * rng.uniform();
    }

    for (std::size_t k = 0; k < k_lat; ++k) out.latents.at(s, k) = g[k];
    out.latents.at(s, k_lat) = scores[dep];

    const double driver_eta = options.driver_noise > 0.0
                                  ? options.driver_noise * rng.gaussian()
                                  : 0.0;

    const std::size_t t_count =
        options.min_frames + rng.below(options.max_frames - options.min_frames + 1);
    FeatureSequence feat(t_count, feature_dim);
    for (std::size_t t = 0; t < t_count; ++t) {
      for (std::size_t d = 0; d < feature_dim; ++d) {
        double x = speaker_offset[spk][d];
        for (std::size_t k = 0; k < k_lat; ++k) {
          const double carrier = g[k] + (k == 0 ? driver_eta : 0.0);
          const double scale =
              options.signal_scale * (k == 0 ? options.driver_carrier_scale : 1.0);
          x += scale * carrier * dirs[k][d];
        }
        x += options.direct_dependent_scale * (scores[dep] - 0.5) * dirs[k_lat][d];
        x += options.frame_noise * rng.gaussian();
        feat.at(t, d) = x;
      }
    }

    char id[32];
    std::snprintf(id, sizeof(id), "sample%05zu", s);
    char spk_id[32];
    std::snprintf(spk_id, sizeof(spk_id), "spk%04zu", spk);
    const std::string rel = std::string("features/") + id + ".ftr";
    write_features(out_dir / rel, feat);

    SampleRecord rec;
    rec.file_id = id;
    rec.speaker_id = spk_id;
    rec.scores = std::move(scores);
    rec.feature_path = rel;
    out.manifest.records.push_back(std::move(rec));
  }

  save_manifest(out_dir / "manifest.csv", out.manifest);
  return out;
}

std::filesystem::path resolve_feature_path(const std::string& feature_path,
                                           const std::filesystem::path& manifest_dir,
                                           const std::filesystem::path& feature_dir) {
  const std::filesystem::path p(feature_path);
  if (p.is_absolute()) return p;
  if (!feature_dir.empty()) return feature_dir / p;
  return manifest_dir / p;
}

}  // namespace emochain
