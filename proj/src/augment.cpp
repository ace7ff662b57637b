#include "emochain/augment.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

#include "emochain/io_util.hpp"
#include "emochain/rng.hpp"

namespace emochain {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::size_t kFftSize = 1024;
constexpr std::size_t kHop = 256;

void check_waveform(const Waveform& w, const char* op) {
  if (w.sample_rate == 0) {
    throw std::invalid_argument(std::string(op) + ": sample rate must be positive");
  }
  if (w.samples.empty()) {
    throw std::invalid_argument(std::string(op) + ": empty waveform");
  }
}

double clip_sample(double x, std::size_t& clipped) {
  if (x > 1.0) {
    ++clipped;
    return 1.0;
  }
  if (x < -1.0) {
    ++clipped;
    return -1.0;
  }
  return x;
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? kTwoPi : -kTwoPi) / double(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= double(n);
  }
}

const std::vector<double>& hann_window() {
  static const std::vector<double> w = [] {
    std::vector<double> v(kFftSize);
    for (std::size_t i = 0; i < kFftSize; ++i) {
      v[i] = 0.5 - 0.5 * std::cos(kTwoPi * double(i) / double(kFftSize));
    }
    return v;
  }();
  return w;
}

double wrap_phase(double x) { return x - kTwoPi * std::round(x / kTwoPi); }

// Catmull-Rom interpolation with clamped edges; exact at integer positions.
double cubic_at(const std::vector<double>& s, double t) {
  const auto n = std::ptrdiff_t(s.size());
  const std::ptrdiff_t i = std::ptrdiff_t(std::floor(t));
  const double f = t - double(i);
  auto sample = [&](std::ptrdiff_t k) {
    return s[std::size_t(std::clamp<std::ptrdiff_t>(k, 0, n - 1))];
  };
  const double x0 = sample(i - 1), x1 = sample(i), x2 = sample(i + 1), x3 = sample(i + 2);
  return x1 + 0.5 * f *
                  (x2 - x0 +
                   f * (2.0 * x0 - 5.0 * x1 + 4.0 * x2 - x3 + f * (3.0 * (x1 - x2) + x3 - x0)));
}

Waveform resample(const Waveform& w, double step) {
  const std::size_t out_len =
      std::max<std::size_t>(1, std::size_t(std::llround(double(w.samples.size()) / step)));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    out.samples[i] = clip_sample(cubic_at(w.samples, double(i) * step), out.clipped);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// WAV I/O

Waveform read_wav(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  auto u16 = [&](std::size_t off) {
    return std::uint16_t(std::uint8_t(bytes[off])) |
           (std::uint16_t(std::uint8_t(bytes[off + 1])) << 8);
  };
  auto u32 = [&](std::size_t off) {
    return std::uint32_t(std::uint8_t(bytes[off])) |
           (std::uint32_t(std::uint8_t(bytes[off + 1])) << 8) |
           (std::uint32_t(std::uint8_t(bytes[off + 2])) << 16) |
           (std::uint32_t(std::uint8_t(bytes[off + 3])) << 24);
  };

  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 ||
      bytes.compare(8, 4, "WAVE") != 0) {
    throw std::runtime_error("not a RIFF/WAVE file: '" + path.string() + "'");
  }

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  std::size_t off = 12;
  while (off + 8 <= bytes.size()) {
    const std::string id = bytes.substr(off, 4);
    const std::uint32_t size = u32(off + 4);
    const std::size_t body = off + 8;
    if (id == "fmt ") {
      if (size < 16 || body + 16 > bytes.size()) {
        throw std::runtime_error("malformed fmt chunk");
      }
      format = u16(body);
      channels = u16(body + 2);
      rate = u32(body + 4);
      bits = u16(body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) {
        throw std::runtime_error("missing fmt chunk before data");
      }
      if (format != 1) {
        throw std::runtime_error("unsupported WAV format (non-PCM)");
      }
      if (channels != 1) {
        throw std::runtime_error("unsupported channel count: " + std::to_string(channels));
      }
      if (bits != 16) {
        throw std::runtime_error("unsupported bit depth: " + std::to_string(bits));
      }
      if (rate == 0) {
        throw std::runtime_error("malformed fmt chunk: zero sample rate");
      }
      if (body + size > bytes.size()) {
        throw std::runtime_error("unexpected end of file in data chunk");
      }
      const std::size_t n = size / 2;
      if (n == 0) {
        throw std::runtime_error("empty data chunk");
      }
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::int16_t s = std::int16_t(u16(body + 2 * i));
        w.samples[i] = double(s) / 32768.0;
      }
      return w;
    }
    off = body + size + (size & 1);  // chunks are word-aligned
  }
  throw std::runtime_error(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  check_waveform(w, "write_wav");
  const std::uint32_t data_size = std::uint32_t(w.samples.size() * 2);
  io::atomic_write(path, [&](std::ostream& os) {
    os.write("RIFF", 4);
    io::write_u32(os, 36 + data_size);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    io::write_u32(os, 16);
    const std::uint16_t fmt_tag = 1, channels = 1, bits = 16;
    const std::uint16_t block_align = channels * bits / 8;
    char fmt[8] = {char(fmt_tag), char(fmt_tag >> 8), char(channels), char(channels >> 8)};
    os.write(fmt, 4);
    io::write_u32(os, w.sample_rate);
    io::write_u32(os, w.sample_rate * block_align);
    char tail[4] = {char(block_align), char(block_align >> 8), char(bits), char(bits >> 8)};
    os.write(tail, 4);
    os.write("data", 4);
    io::write_u32(os, data_size);
    for (double x : w.samples) {
      const long long q =
          std::clamp<long long>(std::llround(x * 32768.0), -32768, 32767);
      const std::uint16_t u = std::uint16_t(std::int16_t(q));
      char b[2] = {char(u & 0xff), char(u >> 8)};
      os.write(b, 2);
    }
  });
}

// ---------------------------------------------------------------------------
// phase vocoder

Waveform time_stretch(const Waveform& w, double rate) {
  check_waveform(w, "time_stretch");
  if (!(rate >= 0.5 && rate <= 2.0)) {
    throw std::invalid_argument("time_stretch: rate " + std::to_string(rate) +
                                " out of range [0.5, 2.0]");
  }
  const std::size_t n_in = w.samples.size();
  const std::size_t out_len =
      std::max<std::size_t>(1, std::size_t(std::llround(double(n_in) / rate)));

  std::vector<double> padded = w.samples;
  padded.resize(n_in + 2 * kFftSize + kHop, 0.0);

  const std::vector<double>& win = hann_window();
  const std::size_t bins = kFftSize / 2;

  std::vector<double> ola(out_len + 2 * kFftSize, 0.0);
  std::vector<double> wsum(out_len + 2 * kFftSize, 0.0);
  std::vector<double> prev_phase(bins + 1, 0.0);
  std::vector<double> acc_phase(bins + 1, 0.0);
  std::vector<std::complex<double>> buf(kFftSize);

  std::size_t prev_pos = 0;
  for (std::size_t k = 0;; ++k) {
    const std::size_t pos_a = k * kHop;
    const std::size_t pos_s = std::size_t(std::llround(double(pos_a) / rate));
    if (k > 0 && pos_s >= out_len) break;
    if (pos_a + kFftSize > padded.size()) break;

    for (std::size_t i = 0; i < kFftSize; ++i) {
      buf[i] = {padded[pos_a + i] * win[i], 0.0};
    }
    fft(buf, false);

    for (std::size_t b = 0; b <= bins; ++b) {
      const double mag = std::abs(buf[b]);
      const double phase = std::arg(buf[b]);
      const double omega = kTwoPi * double(b) / double(kFftSize);
      if (k == 0) {
        acc_phase[b] = phase;
      } else {
        const double expected = omega * double(kHop);
        const double delta = wrap_phase(phase - prev_phase[b] - expected);
        const double freq = omega + delta / double(kHop);
        acc_phase[b] += freq * double(pos_s - prev_pos);
      }
      prev_phase[b] = phase;
      buf[b] = std::polar(mag, acc_phase[b]);
    }
    for (std::size_t b = 1; b < bins; ++b) {
      buf[kFftSize - b] = std::conj(buf[b]);
    }
    fft(buf, true);

    for (std::size_t i = 0; i < kFftSize; ++i) {
      ola[pos_s + i] += buf[i].real() * win[i];
      wsum[pos_s + i] += win[i] * win[i];
    }
    prev_pos = pos_s;
  }

  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(out_len);
  for (std::size_t i = 0; i < out_len; ++i) {
    const double x = wsum[i] > 1e-8 ? ola[i] / wsum[i] : 0.0;
    out.samples[i] = clip_sample(x, out.clipped);
  }
  return out;
}

Waveform pitch_shift(const Waveform& w, double cents) {
  check_waveform(w, "pitch_shift");
  if (!(std::abs(cents) <= 1200.0)) {
    throw std::invalid_argument("pitch_shift: cents " + std::to_string(cents) +
                                " out of range [-1200, 1200]");
  }
  const double ratio = std::exp2(cents / 1200.0);
  Waveform resampled = resample(w, ratio);
  double rate = double(resampled.samples.size()) / double(w.samples.size());
  rate = std::clamp(rate, 0.5, 2.0);
  Waveform out = time_stretch(resampled, rate);
  out.clipped += resampled.clipped;
  // stretch rounding can land one sample off the original length
  if (out.samples.size() > w.samples.size()) {
    out.samples.resize(w.samples.size());
  } else {
    while (out.samples.size() < w.samples.size()) {
      out.samples.push_back(out.samples.back());
    }
  }
  return out;
}

Waveform vad_trim(const Waveform& w, double frame_ms, double threshold_db) {
  check_waveform(w, "vad_trim");
  if (!(frame_ms >= 10.0 && frame_ms <= 50.0)) {
    throw std::invalid_argument("vad_trim: frame_ms out of range [10, 50]");
  }
  if (!(threshold_db < 0.0)) {
    throw std::invalid_argument("vad_trim: threshold_db must be negative");
  }
  const std::size_t frame_len = std::max<std::size_t>(
      1, std::size_t(std::llround(double(w.sample_rate) * frame_ms / 1000.0)));
  const std::size_t n = w.samples.size();
  const std::size_t n_frames = (n + frame_len - 1) / frame_len;

  std::vector<double> rms(n_frames);
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t lo = f * frame_len;
    const std::size_t hi = std::min(n, lo + frame_len);
    double acc = 0.0;
    for (std::size_t i = lo; i < hi; ++i) acc += w.samples[i] * w.samples[i];
    rms[f] = std::sqrt(acc / double(hi - lo));
  }
  std::size_t loudest = 0;
  for (std::size_t f = 1; f < n_frames; ++f) {
    if (rms[f] > rms[loudest]) loudest = f;
  }
  const double peak_db = 20.0 * std::log10(rms[loudest] + 1e-12);
  const double floor_db = peak_db + threshold_db;
  auto keep = [&](std::size_t f) {
    return rms[f] >= 1e-8 && 20.0 * std::log10(rms[f] + 1e-12) >= floor_db;
  };

  std::size_t first = 0;
  while (first < n_frames && !keep(first)) ++first;
  if (first == n_frames) {
    // everything is silence; keep the loudest frame
    const std::size_t lo = loudest * frame_len;
    const std::size_t hi = std::min(n, lo + frame_len);
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples.assign(w.samples.begin() + std::ptrdiff_t(lo),
                       w.samples.begin() + std::ptrdiff_t(hi));
    return out;
  }
  std::size_t last = n_frames - 1;
  while (last > first && !keep(last)) --last;

  const std::size_t lo = first * frame_len;
  const std::size_t hi = std::min(n, (last + 1) * frame_len);
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.assign(w.samples.begin() + std::ptrdiff_t(lo),
                     w.samples.begin() + std::ptrdiff_t(hi));
  return out;
}

AugmentDraw augment_draw(const AugmentConfig& config, std::uint64_t seed) {
  if (config.pitch_min_cents > config.pitch_max_cents ||
      config.rate_min > config.rate_max || config.rate_min <= 0.0) {
    throw std::invalid_argument("random_augment: bad augment config");
  }
  Rng rng(mix_seed(seed, 0xa46));
  AugmentDraw d;
  d.cents = rng.uniform(config.pitch_min_cents, config.pitch_max_cents);
  d.rate = rng.uniform(config.rate_min, config.rate_max);
  return d;
}

Waveform random_augment(const Waveform& w, const AugmentConfig& config, std::uint64_t seed) {
  const AugmentDraw d = augment_draw(config, seed);
  Waveform shifted = pitch_shift(w, d.cents);
  Waveform out = time_stretch(shifted, d.rate);
  out.clipped += shifted.clipped;
  return out;
}

}  // namespace emochain
