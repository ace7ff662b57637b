#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emochain/model.hpp"

namespace emochain {

struct SampleRecord {
  std::string file_id;
  std::string speaker_id;
  EmotionScores scores;  // canonical order, entries in [0,1]
  std::string feature_path;
};

struct Manifest {
  std::vector<SampleRecord> records;
  EmotionSet emotion_set;
};

struct FoldSplit {
  std::size_t fold_index = 0;
  std::set<std::string> train_ids;
  std::set<std::string> val_ids;
};

// CSV with header File_ID,Speaker_ID,<ten emotion columns>,Feature_Path.
// Emotion columns may appear in any order; they are mapped to canonical
// order on load. Errors name the offending row and column.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Speakers are shuffled deterministically by seed and partitioned into k
// groups whose sizes differ by at most one; fold i validates on group i's
// samples. Speaker sets of train and validation are disjoint in every fold.
std::vector<FoldSplit> speaker_disjoint_kfold(const Manifest& manifest, std::size_t k,
                                              std::uint64_t seed);

// Binary feature file: magic "FTR1", little-endian u32 version=1, u32 T,
// u32 D, then T*D little-endian f32, frame-major. Values are promoted to
// f64 in memory.
FeatureSequence read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureSequence& features);

// --- synthetic dataset -----------------------------------------------------

// Scores are driven by a small per-sample latent vector; features embed the
// latents along fixed directions plus speaker offsets and frame noise. One
// designated emotion's score is a deterministic function of another's
// (negative dependency), which is what makes chain gains measurable.
struct SyntheticOptions {
  std::size_t latent_dims = 4;
  std::size_t driver_emotion = 0;     // amusement
  std::size_t dependent_emotion = 7;  // sadness
  double dependency_gain = -4.0;      // s_dep = sigmoid(gain*(s_driver-0.5)+bias)
  double dependency_bias = 0.0;
  double direct_dependent_scale = 0.2;  // weak direct carrier of the dependent score
  double signal_scale = 1.0;
  double driver_noise = 0.0;  // per-sample noise on the driver's feature carrier
  double speaker_offset_scale = 0.15;
  double frame_noise = 0.25;
  std::optional<std::size_t> noise_emotion;  // random scores, absent from features
  std::size_t min_frames = 20;
  std::size_t max_frames = 80;

  // Two-driver dependency: the driver emotion and emotion 1 become opposed
  // sigmoid ramps of latent 0, and the dependent score is sigmoid-affine in
  // their sum — a non-monotone bump of the latent that a chain head
  // consuming both driver scores expresses directly.
  bool bump_dependency = false;
  double bump_k = 5.0;
  double bump_shift = 0.6;    // ramp-up center (driver emotion)
  double bump_shift2 = 0.2;   // ramp-down center (emotion 1)
  double bump_out_gain = 3.0;
  double bump_out_bias = -4.05;
  double driver_carrier_scale = 1.0;  // latent-0 amplitude in the features
};

struct SyntheticDataset {
  Manifest manifest;
  // n x (latent_dims + 1): the latents plus the dependent emotion's score,
  // i.e. everything the scores are affine in.
  Matrix latents;
  std::filesystem::path dir;
};

// Writes manifest.csv plus features/<file_id>.ftr under out_dir and returns
// the in-memory manifest. Byte-identical for identical arguments.
SyntheticDataset generate_synthetic_dataset(std::size_t n_samples, std::size_t n_speakers,
                                            std::size_t feature_dim, std::uint64_t seed,
                                            const std::filesystem::path& out_dir,
                                            const SyntheticOptions& options = {});

// Resolves a record's feature path against an optional feature dir, falling
// back to the manifest's own directory for relative paths.
std::filesystem::path resolve_feature_path(const std::string& feature_path,
                                           const std::filesystem::path& manifest_dir,
                                           const std::filesystem::path& feature_dir = {});

}  // namespace emochain
