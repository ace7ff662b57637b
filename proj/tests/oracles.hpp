// Independent oracles used by the test suites. These deliberately avoid the
// library's own computation paths: raw-moment CCC in extended precision,
// naive triple-loop linear algebra, Goertzel-scan peak measurement, and a
// direct normal-equations least-squares fit.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

// CCC from raw moments, accumulated in long double.
inline double ccc(std::span<const double> s, std::span<const double> t) {
  const std::size_t n = s.size();
  long double sum_s = 0, sum_t = 0, sum_ss = 0, sum_tt = 0, sum_st = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sum_s += s[i];
    sum_t += t[i];
    sum_ss += (long double)s[i] * s[i];
    sum_tt += (long double)t[i] * t[i];
    sum_st += (long double)s[i] * t[i];
  }
  const long double ms = sum_s / n, mt = sum_t / n;
  const long double var_s = sum_ss / n - ms * ms;
  const long double var_t = sum_tt / n - mt * mt;
  const long double cov = sum_st / n - ms * mt;
  const long double denom = var_s + var_t + (ms - mt) * (ms - mt);
  if (denom == 0.0L) return 0.0;
  return double(2.0L * cov / denom);
}

inline std::vector<double> naive_linear(const std::vector<double>& x,
                                        const std::vector<std::vector<double>>& w,
                                        const std::vector<double>& b) {
  std::vector<double> out(w.size());
  for (std::size_t k = 0; k < w.size(); ++k) {
    double acc = 0.0;
    for (std::size_t d = 0; d < x.size(); ++d) acc += w[k][d] * x[d];
    out[k] = acc + b[k];
  }
  return out;
}

inline std::vector<double> softmax_ld(const std::vector<double>& v) {
  long double sum = 0;
  std::vector<long double> e(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    e[i] = std::exp((long double)v[i]);
    sum += e[i];
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = double(e[i] / sum);
  return out;
}

inline double goertzel_power(std::span<const double> x, double k_over_n) {
  const double w = 2.0 * std::numbers::pi * k_over_n;
  const double c = 2.0 * std::cos(w);
  double s1 = 0, s2 = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(x.size()));
    const double s0 = hann * x[i] + c * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  return s1 * s1 + s2 * s2 - c * s1 * s2;
}

// Dominant frequency of a (near-)pure tone via a Goertzel bin scan with
// parabolic refinement; edge windows are skipped.
inline double dominant_freq(std::span<const double> samples, double sample_rate) {
  const std::size_t skip = samples.size() > 5000 ? 1536 : 0;
  const std::size_t n = std::min<std::size_t>(8192, samples.size() - 2 * skip);
  std::span<const double> x = samples.subspan(skip, n);
  std::vector<double> p(n / 2, 0.0);
  for (std::size_t k = 1; k < n / 2; ++k) p[k] = goertzel_power(x, double(k) / double(n));
  std::size_t best = 1;
  for (std::size_t k = 2; k + 1 < n / 2; ++k) {
    if (p[k] > p[best]) best = k;
  }
  const double l = std::log(p[best - 1] + 1e-300);
  const double m = std::log(p[best] + 1e-300);
  const double r = std::log(p[best + 1] + 1e-300);
  const double shift = 0.5 * (l - r) / (l - 2.0 * m + r);
  return (double(best) + shift) * sample_rate / double(n);
}

// Least squares y ~ [x, 1] via normal equations with a tiny ridge.
inline std::vector<double> least_squares(const std::vector<std::vector<double>>& x,
                                         const std::vector<double>& y) {
  const std::size_t n = x.size();
  const std::size_t d = x[0].size() + 1;
  std::vector<std::vector<double>> a(d, std::vector<double>(d + 1, 0.0));
  auto feat = [&](std::size_t row, std::size_t j) {
    return j < x[row].size() ? x[row][j] : 1.0;
  };
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      long double acc = 0;
      for (std::size_t r = 0; r < n; ++r) acc += (long double)feat(r, i) * feat(r, j);
      a[i][j] = double(acc) + (i == j ? 1e-9 : 0.0);
    }
    long double acc = 0;
    for (std::size_t r = 0; r < n; ++r) acc += (long double)feat(r, i) * y[r];
    a[i][d] = double(acc);
  }
  for (std::size_t col = 0; col < d; ++col) {  // gaussian elimination
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < d; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    }
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t j = col; j <= d; ++j) a[r][j] -= f * a[col][j];
    }
  }
  std::vector<double> beta(d);
  for (std::size_t i = 0; i < d; ++i) beta[i] = a[i][d] / a[i][i];
  return beta;
}

inline std::vector<double> make_sine(double freq, double sample_rate, std::size_t n,
                                     double amp = 0.8) {
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = amp * std::sin(2.0 * std::numbers::pi * freq * double(i) / sample_rate);
  }
  return s;
}

// Fresh scratch directory under the system temp root.
inline std::filesystem::path tmp_dir(const std::string& tag) {
  static std::uint64_t counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("emochain_" + tag + "_" + std::to_string(++counter));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
