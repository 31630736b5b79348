#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bioalert/bow.hpp"
#include "bioalert/corpus.hpp"
#include "bioalert/errors.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

struct LogRegModel {
  DenseVec weights;
  double bias = 0.0;
  double lambda = 0.0;
  double threshold = 0.5;
};

struct NaiveBayesModel {
  double log_prior_event = 0.0;
  double log_prior_other = 0.0;
  DenseVec log_lik_event;  // log-sum-exp over terms is 0
  DenseVec log_lik_other;
  double alpha = 1.0;
};

struct LinearSvmModel {
  DenseVec weights;
  double bias = 0.0;
  double c = 1.0;
  std::vector<double> objective_trace;  // objective at the averaged iterate, per epoch
};

struct LogRegOptions {
  double tolerance = 1e-5;  // gradient-norm stop
  int max_iterations = 500;
  double threshold = 0.5;
};

struct Prediction {
  Label label = Label::Other;
  double probability = 0.0;  // P(Event)
};

namespace detail {

inline double lr_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double lr_logistic_loss(double z, double y) {
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - y * z;
}

struct LrObjective {
  double loss = 0.0;
  DenseVec grad_w;
  double grad_b = 0.0;
};

inline LrObjective lr_objective(std::span<const FeatureVec> features,
                                std::span<const Label> labels, const DenseVec& w, double b,
                                double lambda) {
  LrObjective out;
  out.grad_w.assign(w.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(features.size());
  for (std::size_t k = 0; k < features.size(); ++k) {
    const double z = feature_dot(features[k], w) + b;
    const double y = labels[k] == Label::Event ? 1.0 : 0.0;
    out.loss += lr_logistic_loss(z, y) * inv_n;
    const double dz = (lr_sigmoid(z) - y) * inv_n;
    add_scaled(out.grad_w, features[k], dz);
    out.grad_b += dz;
  }
  for (std::size_t j = 0; j < w.size(); ++j) {
    out.loss += 0.5 * lambda * w[j] * w[j];
    out.grad_w[j] += lambda * w[j];
  }
  return out;
}

inline void require_both_classes(std::span<const Label> labels) {
  bool pos = false, neg = false;
  for (const Label l : labels) (l == Label::Event ? pos : neg) = true;
  if (!pos || !neg) throw DataError("both classes required");
}

}  // namespace detail

// Minimizes mean logistic loss + (lambda/2)|w|^2 (bias unregularized) by
// gradient descent with backtracking line search, down to gradient norm
// `tolerance` or the iteration cap. Zero initialization; the seed only feeds
// the determinism contract, the path itself is already deterministic.
inline LogRegModel train_logreg(std::span<const FeatureVec> features,
                                std::span<const Label> labels, double lambda, Rng& rng,
                                const LogRegOptions& options = {}) {
  if (features.empty() || features.size() != labels.size())
    throw DataError("train_logreg: features/labels mismatch or empty");
  detail::require_both_classes(labels);
  const std::size_t dim = feature_dim(features.front());
  for (const auto& f : features)
    if (feature_dim(f) != dim) throw DataError("train_logreg: inconsistent dimensions");
  (void)rng;

  LogRegModel model;
  model.weights.assign(dim, 0.0);
  model.lambda = lambda;
  model.threshold = options.threshold;

  double step = 1.0;
  auto current = detail::lr_objective(features, labels, model.weights, model.bias, lambda);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    double grad_sq = current.grad_b * current.grad_b;
    for (double g : current.grad_w) grad_sq += g * g;
    if (std::sqrt(grad_sq) <= options.tolerance) break;

    // Armijo backtracking from a slightly optimistic step
    step = std::min(step * 2.0, 1e4);
    DenseVec w_next(dim);
    double b_next = 0.0;
    for (;;) {
      for (std::size_t j = 0; j < dim; ++j)
        w_next[j] = model.weights[j] - step * current.grad_w[j];
      b_next = model.bias - step * current.grad_b;
      const auto trial = detail::lr_objective(features, labels, w_next, b_next, lambda);
      if (trial.loss <= current.loss - 1e-4 * step * grad_sq) {
        model.weights = std::move(w_next);
        model.bias = b_next;
        current = trial;
        break;
      }
      step *= 0.5;
      if (step < 1e-18)
        throw NumericError("train_logreg: line search failed at iteration " +
                           std::to_string(iter + 1));
      w_next.assign(dim, 0.0);
    }
    if (!std::isfinite(current.loss))
      throw NumericError("train_logreg: non-finite loss at iteration " +
                         std::to_string(iter + 1));
  }
  return model;
}

// probability = sigmoid(w.x + b); Event iff probability > threshold, ties to
// Other.
inline Prediction predict(const LogRegModel& model, const FeatureVec& features) {
  if (feature_dim(features) != model.weights.size())
    throw DataError("predict: dimension mismatch (" + std::to_string(feature_dim(features)) +
                    " vs " + std::to_string(model.weights.size()) + ")");
  Prediction out;
  out.probability = detail::lr_sigmoid(feature_dot(features, model.weights) + model.bias);
  out.label = out.probability > model.threshold ? Label::Event : Label::Other;
  return out;
}

// Multinomial NB over raw counts with add-alpha smoothing.
inline NaiveBayesModel train_naive_bayes(std::span<const CountRow> rows,
                                         std::span<const Label> labels, double alpha) {
  if (rows.empty() || rows.size() != labels.size())
    throw DataError("train_naive_bayes: rows/labels mismatch or empty");
  if (!(alpha > 0.0)) throw DataError("train_naive_bayes: alpha must be positive");
  detail::require_both_classes(labels);
  const std::size_t dim = rows.front().counts.dim;

  NaiveBayesModel model;
  model.alpha = alpha;
  DenseVec count_event(dim, 0.0), count_other(dim, 0.0);
  std::int64_t n_event = 0, n_other = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].counts.dim != dim)
      throw DataError("train_naive_bayes: inconsistent row dimensions");
    DenseVec& target = labels[k] == Label::Event ? count_event : count_other;
    (labels[k] == Label::Event ? n_event : n_other)++;
    for (const auto& [j, c] : rows[k].counts.entries) target[j] += c;
  }
  const auto n_total = static_cast<double>(rows.size());
  model.log_prior_event = std::log(static_cast<double>(n_event) / n_total);
  model.log_prior_other = std::log(static_cast<double>(n_other) / n_total);

  const auto fill = [&](const DenseVec& counts, DenseVec& out) {
    double total = 0.0;
    for (double c : counts) total += c;
    const double denom = total + alpha * static_cast<double>(dim);
    out.resize(dim);
    for (std::size_t j = 0; j < dim; ++j) out[j] = std::log((counts[j] + alpha) / denom);
  };
  fill(count_event, model.log_lik_event);
  fill(count_other, model.log_lik_other);
  return model;
}

// Posterior by max; P(Event) via the two-class log-sum-exp.
inline Prediction predict_naive_bayes(const NaiveBayesModel& model, const CountRow& row) {
  if (row.counts.dim != model.log_lik_event.size())
    throw DataError("predict_naive_bayes: dimension mismatch");
  double score_event = model.log_prior_event;
  double score_other = model.log_prior_other;
  for (const auto& [j, c] : row.counts.entries) {
    score_event += c * model.log_lik_event[j];
    score_other += c * model.log_lik_other[j];
  }
  const double m = std::max(score_event, score_other);
  const double pe = std::exp(score_event - m);
  const double po = std::exp(score_other - m);
  Prediction out;
  out.probability = pe / (pe + po);
  out.label = out.probability > 0.5 ? Label::Event : Label::Other;
  return out;
}

struct SvmOptions {
  int epochs = 2000;
};

// (1/2)|w|^2 + C sum hinge, minimized by deterministic full-batch subgradient
// descent (Pegasos-style schedule on the equivalent scaled objective) with
// suffix-averaged iterates as the returned model.
inline LinearSvmModel train_linear_svm(std::span<const FeatureVec> features,
                                       std::span<const Label> labels, double c, Rng& rng,
                                       const SvmOptions& options = {}) {
  if (features.empty() || features.size() != labels.size())
    throw DataError("train_linear_svm: features/labels mismatch or empty");
  if (!(c > 0.0)) throw DataError("train_linear_svm: C must be positive");
  detail::require_both_classes(labels);
  (void)rng;
  const std::size_t dim = feature_dim(features.front());
  const auto n = static_cast<double>(features.size());
  // scaled objective: (reg/2)|w|^2 + (1/n) sum hinge, reg = 1/(C n)
  const double reg = 1.0 / (c * n);

  DenseVec w(dim, 0.0), w_avg(dim, 0.0);
  double b = 0.0, b_avg = 0.0;
  std::size_t avg_count = 0;

  LinearSvmModel model;
  model.c = c;

  const auto objective = [&](const DenseVec& wv, double bv) {
    double obj = 0.0;
    for (double x : wv) obj += 0.5 * x * x;
    for (std::size_t k = 0; k < features.size(); ++k) {
      const double y = labels[k] == Label::Event ? 1.0 : -1.0;
      const double margin = y * (feature_dot(features[k], wv) + bv);
      if (margin < 1.0) obj += c * (1.0 - margin);
    }
    return obj;
  };

  DenseVec grad(dim);
  for (int t = 1; t <= options.epochs; ++t) {
    grad.assign(dim, 0.0);
    double grad_b = 0.0;
    for (std::size_t k = 0; k < features.size(); ++k) {
      const double y = labels[k] == Label::Event ? 1.0 : -1.0;
      const double margin = y * (feature_dot(features[k], w) + b);
      if (margin < 1.0) {
        add_scaled(grad, features[k], -y / n);
        grad_b -= y / n;
      }
    }
    const double eta = 1.0 / (reg * static_cast<double>(t));
    for (std::size_t j = 0; j < dim; ++j) w[j] -= eta * (reg * w[j] + grad[j]);
    b -= eta * grad_b;

    // average the back half of the trajectory
    if (t * 2 >= options.epochs) {
      ++avg_count;
      const double mix = 1.0 / static_cast<double>(avg_count);
      for (std::size_t j = 0; j < dim; ++j) w_avg[j] += (w[j] - w_avg[j]) * mix;
      b_avg += (b - b_avg) * mix;
      model.objective_trace.push_back(objective(w_avg, b_avg));
    }
  }
  model.weights = std::move(w_avg);
  model.bias = b_avg;
  return model;
}

inline Label predict_svm(const LinearSvmModel& model, const FeatureVec& features) {
  if (feature_dim(features) != model.weights.size())
    throw DataError("predict_svm: dimension mismatch");
  const double score = feature_dot(features, model.weights) + model.bias;
  return score > 0.0 ? Label::Event : Label::Other;
}

}  // namespace bioalert
