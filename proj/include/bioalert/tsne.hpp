#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bioalert/corpus.hpp"
#include "bioalert/errors.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

struct TsneConfig {
  double perplexity = 30.0;           // must satisfy 1 < perplexity < n
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;  // also the momentum switch point
  std::uint64_t seed = 0;
  std::size_t max_points = 5000;      // larger inputs are randomly subsampled
};

struct Projection {
  std::vector<std::array<double, 2>> points;
  std::vector<std::optional<Label>> labels;
  std::vector<std::size_t> source_indices;  // into the input vector list
  double kl_initial = 0.0;
  double kl_final = 0.0;
};

namespace detail {

// Symmetrized, normalized affinities with per-point bandwidths bisected so the
// conditional entropy hits ln(perplexity) within 1e-5.
inline DenseMat tsne_affinities(const std::vector<DenseVec>& vectors, double perplexity) {
  const std::size_t n = vectors.size();
  DenseMat sqdist(n, n);
  double max_sqdist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double d = 0.0;
      for (std::size_t c = 0; c < vectors[i].size(); ++c) {
        const double diff = vectors[i][c] - vectors[j][c];
        d += diff * diff;
      }
      sqdist.at(i, j) = d;
      sqdist.at(j, i) = d;
      max_sqdist = std::max(max_sqdist, d);
    }
  }
  if (max_sqdist == 0.0) throw NumericError("degenerate affinities");

  const double target_entropy = std::log(perplexity);
  DenseMat conditional(n, n);
  DenseVec row(n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0, beta_lo = 0.0, beta_hi = std::numeric_limits<double>::infinity();
    bool have_row = false;
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] = j == i ? 0.0 : std::exp(-beta * sqdist.at(i, j));
        sum += row[j];
      }
      double entropy = -std::numeric_limits<double>::infinity();
      if (sum > 0.0) {
        // H = ln(sum) + beta * E[d]; derived from p_j = exp(-beta d_j)/sum
        double weighted = 0.0;
        for (std::size_t j = 0; j < n; ++j) weighted += row[j] * sqdist.at(i, j);
        entropy = std::log(sum) + beta * weighted / sum;
        for (std::size_t j = 0; j < n; ++j) conditional.at(i, j) = row[j] / sum;
        have_row = true;
      }
      if (std::abs(entropy - target_entropy) < 1e-5) break;
      if (entropy > target_entropy) {
        beta_lo = beta;
        beta = std::isinf(beta_hi) ? beta * 2.0 : 0.5 * (beta_lo + beta_hi);
      } else {
        beta_hi = beta;
        beta = 0.5 * (beta_lo + beta_hi);
      }
    }
    if (!have_row) throw NumericError("degenerate affinities");
  }

  DenseMat p(n, n);
  const double inv_2n = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p.at(i, j) = (conditional.at(i, j) + conditional.at(j, i)) * inv_2n;
  return p;
}

inline double tsne_kl(const DenseMat& p, const std::vector<std::array<double, 2>>& y) {
  const std::size_t n = y.size();
  double q_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      q_sum += 2.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double pij = p.at(i, j);
      if (pij <= 0.0) continue;
      const double dx = y[i][0] - y[j][0];
      const double dy = y[i][1] - y[j][1];
      const double qij = std::max(1.0 / ((1.0 + dx * dx + dy * dy) * q_sum), 1e-12);
      kl += pij * std::log(pij / qij);
    }
  }
  return kl;
}

}  // namespace detail

// Exact O(n^2) t-SNE with momentum (0.5 then 0.8 after the exaggeration
// phase) and early exaggeration. Inputs above max_points are subsampled.
inline Projection project(const std::vector<DenseVec>& vectors,
                          std::span<const std::optional<Label>> labels,
                          const TsneConfig& config) {
  if (vectors.size() < 3) throw DataError("project: need at least 3 vectors");
  if (!(config.perplexity > 1.0)) throw DataError("project: perplexity must exceed 1");
  if (!(config.learning_rate > 0.0)) throw DataError("project: learning rate must be positive");
  if (!labels.empty() && labels.size() != vectors.size())
    throw DataError("project: labels/vectors length mismatch");

  Rng rng(config.seed);
  Projection result;
  result.source_indices.resize(vectors.size());
  for (std::size_t k = 0; k < vectors.size(); ++k) result.source_indices[k] = k;
  if (vectors.size() > config.max_points) {
    const auto order = rng.permutation(vectors.size());
    result.source_indices.assign(order.begin(), order.begin() + config.max_points);
    std::sort(result.source_indices.begin(), result.source_indices.end());
  }
  const std::size_t n = result.source_indices.size();
  if (!(config.perplexity < static_cast<double>(n)))
    throw DataError("project: perplexity must be below the point count");

  std::vector<DenseVec> sample;
  sample.reserve(n);
  for (const std::size_t idx : result.source_indices) {
    if (vectors[idx].size() != vectors[result.source_indices[0]].size())
      throw DataError("project: inconsistent vector dimensions");
    sample.push_back(vectors[idx]);
  }
  for (const std::size_t idx : result.source_indices)
    result.labels.push_back(labels.empty() ? std::nullopt : labels[idx]);

  const DenseMat p = detail::tsne_affinities(sample, config.perplexity);

  auto& y = result.points;
  y.resize(n);
  for (auto& pt : y) {
    pt[0] = rng.normal() * 1e-4;
    pt[1] = rng.normal() * 1e-4;
  }
  result.kl_initial = detail::tsne_kl(p, y);

  std::vector<std::array<double, 2>> velocity(n, {0.0, 0.0});
  std::vector<std::array<double, 2>> grad(n);
  for (int iter = 0; iter < config.iterations; ++iter) {
    const bool exaggerate = iter < config.exaggeration_iterations;
    const double p_scale = exaggerate ? config.early_exaggeration : 1.0;
    const double momentum = exaggerate ? 0.5 : 0.8;

    double q_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[i][0] - y[j][0];
        const double dy = y[i][1] - y[j][1];
        q_sum += 2.0 / (1.0 + dx * dx + dy * dy);
      }
    }
    for (auto& g : grad) g = {0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double dx = y[i][0] - y[j][0];
        const double dy = y[i][1] - y[j][1];
        const double w = 1.0 / (1.0 + dx * dx + dy * dy);
        const double qij = w / q_sum;
        const double coeff = 4.0 * (p_scale * p.at(i, j) - qij) * w;
        grad[i][0] += coeff * dx;
        grad[i][1] += coeff * dy;
        grad[j][0] -= coeff * dx;
        grad[j][1] -= coeff * dy;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < 2; ++c) {
        velocity[i][c] = momentum * velocity[i][c] - config.learning_rate * grad[i][c];
        y[i][c] += velocity[i][c];
        if (!std::isfinite(y[i][c]))
          throw NumericError("project: divergence at iteration " + std::to_string(iter + 1));
      }
    }
  }
  result.kl_final = detail::tsne_kl(p, y);
  return result;
}

// CSV: id, x, y, label (label column empty for unlabeled points).
inline void write_points_csv(const std::string& path, const Projection& projection,
                             std::span<const std::string> ids) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write points file: " + path);
  out << "id,x,y,label\n";
  out.precision(17);
  for (std::size_t k = 0; k < projection.points.size(); ++k) {
    const std::size_t src = projection.source_indices[k];
    out << (src < ids.size() ? ids[src] : std::to_string(src)) << ','
        << projection.points[k][0] << ',' << projection.points[k][1] << ',';
    if (projection.labels[k]) out << label_name(*projection.labels[k]);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

// Minimal scatter plot, one color per class.
inline void write_points_svg(const std::string& path, const Projection& projection) {
  const double size = 640.0, margin = 40.0;
  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  if (!projection.points.empty()) {
    min_x = max_x = projection.points[0][0];
    min_y = max_y = projection.points[0][1];
    for (const auto& pt : projection.points) {
      min_x = std::min(min_x, pt[0]); max_x = std::max(max_x, pt[0]);
      min_y = std::min(min_y, pt[1]); max_y = std::max(max_y, pt[1]);
    }
  }
  const double span_x = max_x - min_x > 0 ? max_x - min_x : 1.0;
  const double span_y = max_y - min_y > 0 ? max_y - min_y : 1.0;

  std::ofstream out(path);
  if (!out) throw DataError("cannot write svg file: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << static_cast<int>(size)
      << "\" height=\"" << static_cast<int>(size) << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out.precision(6);
  for (std::size_t k = 0; k < projection.points.size(); ++k) {
    const double px = margin + (projection.points[k][0] - min_x) / span_x * (size - 2 * margin);
    const double py = margin + (projection.points[k][1] - min_y) / span_y * (size - 2 * margin);
    const char* color = "#888888";
    if (projection.labels[k])
      color = *projection.labels[k] == Label::Event ? "#d62728" : "#1f77b4";
    out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"3\" fill=\"" << color
        << "\" fill-opacity=\"0.7\"/>\n";
  }
  out << "</svg>\n";
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace bioalert
