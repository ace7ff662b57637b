#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace emochain {

struct Waveform {
  std::uint32_t sample_rate = 0;
  std::vector<double> samples;  // in [-1, 1]
  // Samples clipped back into [-1, 1] by the operation that produced this
  // waveform.
  std::size_t clipped = 0;
};

struct AugmentConfig {
  double pitch_min_cents = -300.0;
  double pitch_max_cents = 300.0;
  double rate_min = 0.8;
  double rate_max = 1.2;
};

// RIFF/WAVE PCM, 16-bit, mono. Samples map to [-1, 1) by division by 32768.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

// Pitch-preserving stretch via a phase vocoder (1024-sample Hann window,
// 256-sample hop). Output length is round(len/rate); rate must lie in
// [0.5, 2.0]. rate 1.0 reproduces the input away from the edges.
Waveform time_stretch(const Waveform& w, double rate);

// Resample by 2^(cents/1200) then stretch back to the original duration.
// |cents| <= 1200.
Waveform pitch_shift(const Waveform& w, double cents);

// Removes leading/trailing frames whose RMS falls below the loudest frame's
// RMS plus threshold_db (threshold_db < 0). Never returns empty: an
// all-silent input keeps its single loudest frame.
Waveform vad_trim(const Waveform& w, double frame_ms = 30.0, double threshold_db = -40.0);

struct AugmentDraw {
  double cents = 0.0;
  double rate = 1.0;
};

// The deterministic parameter draw used by random_augment.
AugmentDraw augment_draw(const AugmentConfig& config, std::uint64_t seed);

// Draws cents ~ U(pitch range) and rate ~ U(rate range) from the seed, then
// applies pitch_shift followed by time_stretch.
Waveform random_augment(const Waveform& w, const AugmentConfig& config, std::uint64_t seed);

}  // namespace emochain
