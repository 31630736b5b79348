#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bioalert/bilstm.hpp"
#include "bioalert/bow.hpp"
#include "bioalert/corpus.hpp"
#include "bioalert/errors.hpp"
#include "bioalert/glove.hpp"
#include "bioalert/linear_models.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

enum class Representation { Tf, Lcr, Rnn };
enum class View { Title, Description, Both };

inline std::string representation_name(Representation r) {
  switch (r) {
    case Representation::Tf: return "tf";
    case Representation::Lcr: return "lcr";
    default: return "rnn";
  }
}

inline Representation parse_representation(const std::string& s) {
  if (s == "tf") return Representation::Tf;
  if (s == "lcr") return Representation::Lcr;
  if (s == "rnn") return Representation::Rnn;
  throw DataError("unknown representation \"" + s + "\" (expected tf|lcr|rnn)");
}

inline std::string view_name(View v) {
  switch (v) {
    case View::Title: return "title";
    case View::Description: return "desc";
    default: return "both";
  }
}

inline View parse_view(const std::string& s) {
  if (s == "title") return View::Title;
  if (s == "desc") return View::Description;
  if (s == "both") return View::Both;
  throw DataError("unknown view \"" + s + "\" (expected title|desc|both)");
}

// Everything a trained (rep, view) configuration needs at inference time.
// Title and description never share vocabularies or encoders.
struct FittedModels {
  Representation rep = Representation::Tf;
  View view = View::Both;

  std::optional<Vocabulary> title_vocab;
  std::optional<Vocabulary> desc_vocab;
  std::optional<LcrModel> title_lcr;
  std::optional<LcrModel> desc_lcr;

  std::optional<BiLstmEncoder> title_encoder;
  std::optional<BiLstmEncoder> desc_encoder;
  std::uint64_t embedding_checksum = 0;
  std::size_t embedding_dim = 0;

  LogRegModel head;

  std::uint64_t seed = 0;
  std::map<std::string, double> hyperparams;

  bool uses_title() const { return view == View::Title || view == View::Both; }
  bool uses_description() const { return view == View::Description || view == View::Both; }
};

namespace detail {

inline SparseVec bow_view_vector(const FittedModels& fitted, const std::string& text,
                                 bool is_title) {
  const auto& vocab = is_title ? fitted.title_vocab : fitted.desc_vocab;
  const char* which = is_title ? "title" : "description";
  if (!vocab)
    throw DataError(std::string("feature_vector: missing fitted ") + which + " vocabulary");
  const CountRow row = count_row(tokenize(text), *vocab);
  if (fitted.rep == Representation::Tf) return tfidf_vector(row, *vocab);
  const auto& lcr = is_title ? fitted.title_lcr : fitted.desc_lcr;
  if (!lcr) throw DataError(std::string("feature_vector: missing fitted ") + which +
                            " log-count-ratio model");
  return lcr_vector(row, *lcr);
}

inline DenseVec rnn_view_vector(const FittedModels& fitted, const std::string& text,
                                bool is_title) {
  const auto& encoder = is_title ? fitted.title_encoder : fitted.desc_encoder;
  if (!encoder)
    throw DataError(std::string("feature_vector: missing fitted ") +
                    (is_title ? "title" : "description") + " encoder");
  TokenSeq tokens = tokenize(text);
  if (tokens.empty()) tokens.push_back(kUnkToken);
  return encode(*encoder, tokens);
}

inline SparseVec concat_sparse(const SparseVec& first, const SparseVec& second) {
  SparseVec out;
  out.dim = first.dim + second.dim;
  out.entries = first.entries;
  out.entries.reserve(first.entries.size() + second.entries.size());
  for (const auto& [j, v] : second.entries) out.entries.emplace_back(first.dim + j, v);
  return out;
}

}  // namespace detail

// The Both view is the description block first, then the title block.
inline FeatureVec feature_vector(const AlertDocument& doc, const FittedModels& fitted) {
  const Representation rep = fitted.rep;
  const View view = fitted.view;
  if (rep == Representation::Rnn) {
    switch (view) {
      case View::Title: return detail::rnn_view_vector(fitted, doc.title, true);
      case View::Description: return detail::rnn_view_vector(fitted, doc.description, false);
      case View::Both: {
        DenseVec desc = detail::rnn_view_vector(fitted, doc.description, false);
        const DenseVec title = detail::rnn_view_vector(fitted, doc.title, true);
        desc.insert(desc.end(), title.begin(), title.end());
        return desc;
      }
    }
  }
  switch (view) {
    case View::Title: return detail::bow_view_vector(fitted, doc.title, true);
    case View::Description: return detail::bow_view_vector(fitted, doc.description, false);
    default:
      return detail::concat_sparse(detail::bow_view_vector(fitted, doc.description, false),
                                   detail::bow_view_vector(fitted, doc.title, true));
  }
}

inline Prediction predict_document(const FittedModels& fitted, const AlertDocument& doc) {
  return predict(fitted.head, feature_vector(doc, fitted));
}

// Hyperparameters for fitting one (rep, view) configuration.
struct FitConfig {
  Representation rep = Representation::Tf;
  View view = View::Both;
  double lambda = 1e-4;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  // bag-of-ngrams head
  int logreg_max_iterations = 500;
  double logreg_tolerance = 1e-5;
  // rnn
  std::size_t hidden_size = 128;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  int max_epochs = 30;
  int patience = 5;
  double input_dropout = 0.0;
  bool finetune_embeddings = false;

  std::map<std::string, double> to_map() const {
    std::map<std::string, double> m;
    m["lambda"] = lambda;
    m["threshold"] = threshold;
    if (rep == Representation::Rnn) {
      m["hidden_size"] = static_cast<double>(hidden_size);
      m["learning_rate"] = learning_rate;
      m["batch_size"] = static_cast<double>(batch_size);
      m["max_epochs"] = static_cast<double>(max_epochs);
      m["input_dropout"] = input_dropout;
      m["finetune_embeddings"] = finetune_embeddings ? 1.0 : 0.0;
    }
    return m;
  }
};

namespace detail {

inline void require_labels(std::span<const AlertDocument> docs, const char* where) {
  for (const auto& d : docs)
    if (!d.label)
      throw DataError(std::string(where) + ": unlabeled document \"" + d.id + "\"");
}

inline std::vector<JointExample> make_joint_examples(std::span<const AlertDocument> docs,
                                                     View view) {
  std::vector<JointExample> out;
  out.reserve(docs.size());
  for (const auto& d : docs) {
    JointExample ex;
    ex.label = *d.label;
    switch (view) {
      case View::Title:
        ex.views.push_back(tokenize(d.title));
        break;
      case View::Description:
        ex.views.push_back(tokenize(d.description));
        break;
      case View::Both:
        ex.views.push_back(tokenize(d.description));
        ex.views.push_back(tokenize(d.title));
        break;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace detail

// Fits the full pipeline for one configuration. The dev set drives early
// stopping for the RNN representation and is otherwise unused. Embeddings are
// required for rep == Rnn and ignored otherwise.
inline FittedModels fit_models(std::span<const AlertDocument> train,
                               std::span<const AlertDocument> dev,
                               std::shared_ptr<const EmbeddingTable> embeddings,
                               const FitConfig& config) {
  if (train.empty()) throw DataError("fit_models: empty training corpus");
  detail::require_labels(train, "fit_models");

  FittedModels fitted;
  fitted.rep = config.rep;
  fitted.view = config.view;
  fitted.seed = config.seed;
  fitted.hyperparams = config.to_map();

  Rng rng(config.seed);

  if (config.rep == Representation::Rnn) {
    if (!embeddings) throw DataError("fit_models: rnn representation requires embeddings");
    detail::require_labels(dev, "fit_models");
    const auto train_examples = detail::make_joint_examples(train, config.view);
    const auto dev_examples = detail::make_joint_examples(dev, config.view);
    JointTrainConfig joint;
    joint.hidden_size = config.hidden_size;
    joint.learning_rate = config.learning_rate;
    joint.lambda = config.lambda;
    joint.batch_size = config.batch_size;
    joint.max_epochs = config.max_epochs;
    joint.patience = config.patience;
    joint.input_dropout = config.input_dropout;
    joint.finetune_embeddings = config.finetune_embeddings;
    joint.threshold = config.threshold;
    const std::size_t num_views = config.view == View::Both ? 2 : 1;
    JointModel joint_model =
        train_joint(embeddings, train_examples, dev_examples, num_views, joint, rng);
    fitted.head = std::move(joint_model.head);
    fitted.embedding_dim = embeddings->dim;
    if (config.view == View::Both) {
      fitted.desc_encoder = std::move(joint_model.encoders[0]);
      fitted.title_encoder = std::move(joint_model.encoders[1]);
    } else if (config.view == View::Title) {
      fitted.title_encoder = std::move(joint_model.encoders[0]);
    } else {
      fitted.desc_encoder = std::move(joint_model.encoders[0]);
    }
    return fitted;
  }

  // bag-of-ngrams paths: fit per-view vocabularies (and LCR) on train only
  std::vector<Label> labels;
  labels.reserve(train.size());
  for (const auto& d : train) labels.push_back(*d.label);

  const auto fit_view = [&](bool is_title) {
    std::vector<TokenSeq> docs;
    docs.reserve(train.size());
    for (const auto& d : train) docs.push_back(tokenize(is_title ? d.title : d.description));
    Vocabulary vocab = fit_vocabulary(docs);
    if (config.rep == Representation::Lcr) {
      std::vector<CountRow> rows;
      rows.reserve(docs.size());
      for (const auto& doc : docs) rows.push_back(count_row(doc, vocab));
      LcrModel lcr = fit_lcr(rows, labels);
      if (is_title) fitted.title_lcr = std::move(lcr);
      else fitted.desc_lcr = std::move(lcr);
    }
    if (is_title) fitted.title_vocab = std::move(vocab);
    else fitted.desc_vocab = std::move(vocab);
  };
  if (fitted.uses_description()) fit_view(false);
  if (fitted.uses_title()) fit_view(true);

  std::vector<FeatureVec> features;
  features.reserve(train.size());
  for (const auto& d : train) features.push_back(feature_vector(d, fitted));

  LogRegOptions lr_options;
  lr_options.max_iterations = config.logreg_max_iterations;
  lr_options.tolerance = config.logreg_tolerance;
  lr_options.threshold = config.threshold;
  fitted.head = train_logreg(features, labels, config.lambda, rng, lr_options);
  return fitted;
}

}  // namespace bioalert
