#pragma once

#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioalert/errors.hpp"
#include "bioalert/features.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

// Event is the positive class.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fn = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fn + fp + tn; }
};

struct ConfigDescriptor {
  Representation rep = Representation::Tf;
  View view = View::Both;
  std::map<std::string, double> hyperparams;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
  // Degenerate denominators (e.g. no positive predictions) report 0 with the
  // matching flag set instead of erroring; live streams produce such batches.
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
  ConfusionMatrix matrix;
  ConfigDescriptor config;
};

inline EvalReport compute_metrics(const ConfusionMatrix& matrix) {
  if (matrix.total() <= 0) throw DataError("compute_metrics: empty confusion matrix");
  EvalReport report;
  report.matrix = matrix;
  const auto tp = static_cast<double>(matrix.tp);
  if (matrix.tp + matrix.fp > 0)
    report.precision = tp / static_cast<double>(matrix.tp + matrix.fp);
  else
    report.precision_degenerate = true;
  if (matrix.tp + matrix.fn > 0)
    report.recall = tp / static_cast<double>(matrix.tp + matrix.fn);
  else
    report.recall_degenerate = true;
  if (report.precision + report.recall > 0.0)
    report.f1 = 2.0 * report.precision * report.recall / (report.precision + report.recall);
  else
    report.f1_degenerate = true;
  report.accuracy = static_cast<double>(matrix.tp + matrix.tn) /
                    static_cast<double>(matrix.total());
  return report;
}

// Deterministic pass over a labeled corpus.
inline EvalReport evaluate(const FittedModels& fitted, std::span<const AlertDocument> docs) {
  ConfusionMatrix matrix;
  for (const auto& d : docs) {
    if (!d.label) throw DataError("evaluate: unlabeled document \"" + d.id + "\"");
    const Prediction pred = predict_document(fitted, d);
    const bool is_event = *d.label == Label::Event;
    const bool said_event = pred.label == Label::Event;
    if (said_event && is_event) ++matrix.tp;
    else if (said_event && !is_event) ++matrix.fp;
    else if (!said_event && is_event) ++matrix.fn;
    else ++matrix.tn;
  }
  EvalReport report = compute_metrics(matrix);
  report.config.rep = fitted.rep;
  report.config.view = fitted.view;
  report.config.hyperparams = fitted.hyperparams;
  report.config.seed = fitted.seed;
  return report;
}

// ---------------------------------------------------------------------------
// Random hyperparameter search.

struct ParamSpec {
  enum class Kind { LogUniform, Uniform, Choice };
  Kind kind = Kind::LogUniform;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> choices;
};

using SearchSpace = std::vector<std::pair<std::string, ParamSpec>>;

using HyperPoint = std::map<std::string, double>;

struct Trial {
  HyperPoint point;
  EvalReport dev_metrics;
  std::uint64_t seed = 0;
};

struct TrialLog {
  std::vector<Trial> trials;
  std::size_t selected = 0;
};

// Trains one configuration at a sampled point and reports its dev metrics.
using TrialObjective = std::function<EvalReport(const HyperPoint&, std::uint64_t seed)>;

// Samples `budget` points (log-uniform scales, uniform-discrete choices),
// trains each with a per-trial seed derived from the master stream, and
// selects by dev F1 with accuracy then lowest-index tiebreaks.
inline TrialLog random_search(const SearchSpace& space, int budget,
                              const TrialObjective& objective, Rng& rng) {
  if (space.empty()) throw DataError("random_search: empty search space");
  if (budget < 1) throw DataError("random_search: budget must be >= 1");

  TrialLog log;
  for (int t = 0; t < budget; ++t) {
    Trial trial;
    for (const auto& [name, spec] : space) {
      double value = 0.0;
      switch (spec.kind) {
        case ParamSpec::Kind::LogUniform:
          value = rng.log_uniform(spec.lo, spec.hi);
          break;
        case ParamSpec::Kind::Uniform:
          value = rng.uniform(spec.lo, spec.hi);
          break;
        case ParamSpec::Kind::Choice:
          if (spec.choices.empty()) throw DataError("random_search: empty choice list");
          value = spec.choices[rng.uniform_int(spec.choices.size())];
          break;
      }
      trial.point[name] = value;
    }
    trial.seed = rng.next_u64();
    log.trials.push_back(std::move(trial));
  }
  for (auto& trial : log.trials) trial.dev_metrics = objective(trial.point, trial.seed);

  log.selected = 0;
  for (std::size_t k = 1; k < log.trials.size(); ++k) {
    const EvalReport& best = log.trials[log.selected].dev_metrics;
    const EvalReport& cur = log.trials[k].dev_metrics;
    if (cur.f1 > best.f1 || (cur.f1 == best.f1 && cur.accuracy > best.accuracy))
      log.selected = k;
  }
  return log;
}

// ---------------------------------------------------------------------------
// Report formatting. Percentages carry one decimal place.

inline nlohmann::json report_to_json(const EvalReport& r) {
  nlohmann::json j;
  j["config"]["rep"] = representation_name(r.config.rep);
  j["config"]["view"] = view_name(r.config.view);
  j["config"]["seed"] = r.config.seed;
  j["config"]["hyperparams"] = r.config.hyperparams;
  j["matrix"] = {{"tp", r.matrix.tp}, {"fn", r.matrix.fn}, {"fp", r.matrix.fp},
                 {"tn", r.matrix.tn}};
  j["metrics"] = {{"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1},
                  {"accuracy", r.accuracy}};
  j["degenerate"] = {{"precision", r.precision_degenerate},
                     {"recall", r.recall_degenerate},
                     {"f1", r.f1_degenerate}};
  return j;
}

inline std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", fraction * 100.0);
  return buf;
}

inline std::string report_to_text(const EvalReport& r) {
  std::string out;
  out += "Model  Text   Prec.  Rec.   F-scr. Acc.\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %-6s %-6s %-6s %-6s %-6s\n",
                representation_name(r.config.rep).c_str(), view_name(r.config.view).c_str(),
                format_percent(r.precision).c_str(), format_percent(r.recall).c_str(),
                format_percent(r.f1).c_str(), format_percent(r.accuracy).c_str());
  out += line;
  std::snprintf(line, sizeof(line), "matrix: tp=%lld fn=%lld fp=%lld tn=%lld\n",
                static_cast<long long>(r.matrix.tp), static_cast<long long>(r.matrix.fn),
                static_cast<long long>(r.matrix.fp), static_cast<long long>(r.matrix.tn));
  out += line;
  if (r.precision_degenerate) out += "note: precision degenerate (no positive predictions)\n";
  if (r.recall_degenerate) out += "note: recall degenerate (no positive gold labels)\n";
  return out;
}

inline nlohmann::json trial_log_to_json(const TrialLog& log) {
  nlohmann::json j;
  j["selected_index"] = log.selected;
  j["trials"] = nlohmann::json::array();
  for (const auto& t : log.trials) {
    nlohmann::json jt;
    jt["point"] = t.point;
    jt["seed"] = t.seed;
    jt["dev_metrics"] = report_to_json(t.dev_metrics);
    j["trials"].push_back(jt);
  }
  return j;
}

}  // namespace bioalert
