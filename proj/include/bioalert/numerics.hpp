#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "bioalert/errors.hpp"

namespace bioalert {

using DenseVec = std::vector<double>;

struct DenseMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major

  DenseMat() = default;
  DenseMat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), values(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

// Entries sorted strictly ascending by index; stored values are nonzero.
struct SparseVec {
  std::size_t dim = 0;
  std::vector<std::pair<std::size_t, double>> entries;
};

inline DenseVec to_dense(const SparseVec& s) {
  DenseVec out(s.dim, 0.0);
  for (const auto& [j, v] : s.entries) out[j] = v;
  return out;
}

inline SparseVec sparse_from_dense(const DenseVec& v) {
  SparseVec out;
  out.dim = v.size();
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] != 0.0) out.entries.emplace_back(j, v[j]);
  }
  return out;
}

// Seeded generator used by every stochastic operation in the project.
// The engine is std::mt19937_64 (fully specified by the standard); the
// distribution code lives here because the standard library's distributions
// are implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  double log_uniform(double lo, double hi) {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  // [0, n) without modulo bias
  std::uint64_t uniform_int(std::uint64_t n) {
    if (n == 0) throw NumericError("uniform_int: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
    for (;;) {
      const std::uint64_t v = next_u64();
      if (v >= threshold) return v % n;
    }
  }

  // Box-Muller; one value per call so the stream layout stays obvious.
  double normal() {
    const double u1 = 1.0 - next_double();  // (0, 1]
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Fisher-Yates over [0, n); our own loop because std::shuffle's engine use
  // is implementation-defined.
  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(uniform_int(i));
      std::swap(idx[i - 1], idx[j]);
    }
    return idx;
  }

 private:
  std::mt19937_64 engine_;
};

inline double dot(const DenseVec& a, const DenseVec& b) {
  if (a.size() != b.size())
    throw DataError("dot: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double dot(const SparseVec& a, const DenseVec& b) {
  if (a.dim != b.size())
    throw DataError("dot: dimension mismatch (" + std::to_string(a.dim) + " vs " +
                    std::to_string(b.size()) + ")");
  double sum = 0.0;
  for (const auto& [j, v] : a.entries) sum += v * b[j];
  return sum;
}

inline double l2_norm(const DenseVec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// A document feature vector is sparse (bag-of-ngrams) or dense (RNN).
using FeatureVec = std::variant<SparseVec, DenseVec>;

inline std::size_t feature_dim(const FeatureVec& f) {
  if (const auto* s = std::get_if<SparseVec>(&f)) return s->dim;
  return std::get<DenseVec>(f).size();
}

inline double feature_dot(const FeatureVec& f, const DenseVec& w) {
  if (const auto* s = std::get_if<SparseVec>(&f)) return dot(*s, w);
  return dot(std::get<DenseVec>(f), w);
}

// acc += scale * f
inline void add_scaled(DenseVec& acc, const FeatureVec& f, double scale) {
  if (const auto* s = std::get_if<SparseVec>(&f)) {
    for (const auto& [j, v] : s->entries) acc[j] += scale * v;
  } else {
    const auto& d = std::get<DenseVec>(f);
    for (std::size_t j = 0; j < d.size(); ++j) acc[j] += scale * d[j];
  }
}

// Central-difference check of an analytic gradient. Returns the worst
// component-wise relative error, with max(|a|,|b|,1e-8) in the denominator.
inline double grad_check(const std::function<double(const DenseVec&)>& f,
                         const DenseVec& analytic_grad, const DenseVec& point,
                         double eps) {
  if (!(eps > 0.0)) throw NumericError("grad_check: eps must be positive");
  if (analytic_grad.size() != point.size())
    throw DataError("grad_check: gradient/point dimension mismatch");
  DenseVec x = point;
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    x[i] = point[i] + eps;
    const double fp = f(x);
    x[i] = point[i] - eps;
    const double fm = f(x);
    x[i] = point[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("grad_check: non-finite function value at coordinate " +
                         std::to_string(i));
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::abs(numeric), std::abs(analytic_grad[i]), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic_grad[i]) / denom);
  }
  return worst;
}

}  // namespace bioalert
