#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "bioalert/corpus.hpp"
#include "bioalert/errors.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

// Unigram+bigram index over the training corpus. doc_freq[j] counts documents
// containing term j at least once; num_docs is the training corpus size.
struct Vocabulary {
  std::vector<std::string> terms;  // index -> term, first-occurrence order
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::int64_t> doc_freq;
  std::int64_t num_docs = 0;

  std::size_t size() const { return terms.size(); }
};

// One row of the document count matrix; entries are positive integers.
struct CountRow {
  SparseVec counts;
};

// Smoothed class count vectors and their log-count ratio.
struct LcrModel {
  DenseVec p;  // positive counts, every entry >= 1
  DenseVec q;  // negative counts, every entry >= 1
  DenseVec r;  // log((p/|p|1) / (q/|q|1))
};

inline Vocabulary fit_vocabulary(std::span<const TokenSeq> train_docs) {
  if (train_docs.empty()) throw DataError("empty corpus");
  Vocabulary vocab;
  vocab.num_docs = static_cast<std::int64_t>(train_docs.size());
  for (const auto& doc : train_docs) {
    std::unordered_set<std::size_t> seen_in_doc;
    for (auto& term : ngram_terms(doc)) {
      auto [it, inserted] = vocab.index.try_emplace(term, vocab.terms.size());
      if (inserted) {
        vocab.terms.push_back(term);
        vocab.doc_freq.push_back(0);
      }
      if (seen_in_doc.insert(it->second).second) ++vocab.doc_freq[it->second];
    }
  }
  return vocab;
}

// Raw occurrence counts over the vocabulary; out-of-vocabulary terms ignored.
inline CountRow count_row(const TokenSeq& doc, const Vocabulary& vocab) {
  std::map<std::size_t, double> counts;  // ordered so entries come out sorted
  for (auto& term : ngram_terms(doc)) {
    const auto it = vocab.index.find(term);
    if (it != vocab.index.end()) counts[it->second] += 1.0;
  }
  CountRow row;
  row.counts.dim = vocab.size();
  row.counts.entries.assign(counts.begin(), counts.end());
  return row;
}

// Component j = (F_kj / max_j' F_kj') * ln(N / n_j). An all-OOV document has
// no max-norm, so it maps to the zero vector.
inline SparseVec tfidf_vector(const CountRow& row, const Vocabulary& vocab) {
  SparseVec out;
  out.dim = vocab.size();
  if (row.counts.entries.empty()) return out;
  double max_count = 0.0;
  for (const auto& [j, c] : row.counts.entries) max_count = std::max(max_count, c);
  for (const auto& [j, c] : row.counts.entries) {
    const double idf = std::log(static_cast<double>(vocab.num_docs) /
                                static_cast<double>(vocab.doc_freq[j]));
    const double value = (c / max_count) * idf;
    if (value != 0.0) out.entries.emplace_back(j, value);
  }
  return out;
}

// p = y'(1+F), q = (1-y)'(1+F), r = ln((p/|p|1)/(q/|q|1)), all elementwise.
inline LcrModel fit_lcr(std::span<const CountRow> rows, std::span<const Label> labels) {
  if (rows.size() != labels.size())
    throw DataError("fit_lcr: rows/labels length mismatch");
  if (rows.empty()) throw DataError("fit_lcr: empty corpus");
  const std::size_t dim = rows.front().counts.dim;

  std::int64_t num_pos = 0, num_neg = 0;
  for (const Label l : labels) (l == Label::Event ? num_pos : num_neg)++;
  if (num_pos == 0 || num_neg == 0) throw DataError("both classes required");

  LcrModel model;
  model.p.assign(dim, static_cast<double>(num_pos));  // the "1 +" term per positive doc
  model.q.assign(dim, static_cast<double>(num_neg));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].counts.dim != dim) throw DataError("fit_lcr: inconsistent row dimensions");
    DenseVec& target = labels[k] == Label::Event ? model.p : model.q;
    for (const auto& [j, c] : rows[k].counts.entries) target[j] += c;
  }

  double p_norm = 0.0, q_norm = 0.0;
  for (double v : model.p) p_norm += v;
  for (double v : model.q) q_norm += v;

  model.r.resize(dim);
  for (std::size_t j = 0; j < dim; ++j)
    model.r[j] = std::log((model.p[j] / p_norm) / (model.q[j] / q_norm));
  return model;
}

// sign(F_k) (.) r: the ratio where the term occurs, zero elsewhere.
inline SparseVec lcr_vector(const CountRow& row, const LcrModel& model) {
  if (row.counts.dim != model.r.size())
    throw DataError("lcr_vector: row/model dimension mismatch");
  SparseVec out;
  out.dim = row.counts.dim;
  for (const auto& [j, c] : row.counts.entries) {
    if (model.r[j] != 0.0) out.entries.emplace_back(j, model.r[j]);
  }
  return out;
}

}  // namespace bioalert
