#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "bioalert/corpus.hpp"
#include "bioalert/errors.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

// Symmetric weighted co-occurrence counts. Raw tallies are kept per window
// offset as exact integers and converted to floats once, in a fixed order, so
// the table is bit-identical under any document permutation.
struct CooccurrenceTable {
  std::vector<std::string> words;  // index -> word, first-occurrence order
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::tuple<std::size_t, std::size_t, double>> entries;  // sorted (i,j), X_ij > 0

  std::size_t num_words() const { return words.size(); }
};

// For every position pair (s, t) with 0 < t - s <= window, weight 1/(t-s) is
// added to X_ij and X_ji (the same cell twice when i == j).
inline CooccurrenceTable build_cooccurrence(std::span<const TokenSeq> docs, int window) {
  if (window < 1) throw DataError("build_cooccurrence: window must be >= 1");
  CooccurrenceTable table;
  const auto word_id = [&](const std::string& w) {
    auto [it, inserted] = table.index.try_emplace(w, table.words.size());
    if (inserted) table.words.push_back(w);
    return it->second;
  };

  // cell (i,j) -> count per offset (offset-1 indexed)
  std::unordered_map<std::uint64_t, std::vector<std::int64_t>> tallies;
  const auto win = static_cast<std::size_t>(window);
  for (const auto& doc : docs) {
    for (std::size_t s = 0; s < doc.size(); ++s) {
      const std::size_t i = word_id(doc[s]);
      const std::size_t t_end = std::min(doc.size(), s + win + 1);
      for (std::size_t t = s + 1; t < t_end; ++t) {
        const std::size_t j = word_id(doc[t]);
        const std::size_t offset = t - s;
        const auto bump = [&](std::size_t a, std::size_t b) {
          auto& counts = tallies[(static_cast<std::uint64_t>(a) << 32) | b];
          if (counts.empty()) counts.resize(win, 0);
          ++counts[offset - 1];
        };
        bump(i, j);
        bump(j, i);
      }
    }
  }

  table.entries.reserve(tallies.size());
  for (const auto& [key, counts] : tallies) {
    double value = 0.0;
    for (std::size_t off = 0; off < counts.size(); ++off)
      if (counts[off] != 0)
        value += static_cast<double>(counts[off]) / static_cast<double>(off + 1);
    table.entries.emplace_back(key >> 32, key & 0xFFFFFFFFu, value);
  }
  std::sort(table.entries.begin(), table.entries.end());
  return table;
}

struct EmbeddingTable {
  std::size_t dim = 0;
  std::vector<std::string> words;
  std::unordered_map<std::string, std::size_t> index;
  DenseMat vectors;     // num_words x dim
  DenseVec unk_vector;  // mean of all word vectors

  // Row for a word, or the mean vector for anything unseen.
  DenseVec lookup(const std::string& word) const {
    const auto it = index.find(word);
    if (it == index.end()) return unk_vector;
    DenseVec v(dim);
    for (std::size_t c = 0; c < dim; ++c) v[c] = vectors.at(it->second, c);
    return v;
  }

  void recompute_unk() {
    unk_vector.assign(dim, 0.0);
    if (words.empty()) return;
    for (std::size_t r = 0; r < words.size(); ++r)
      for (std::size_t c = 0; c < dim; ++c) unk_vector[c] += vectors.at(r, c);
    for (double& v : unk_vector) v /= static_cast<double>(words.size());
  }
};

struct GloveConfig {
  int dim = 256;
  int epochs = 15;
  double x_max = 100.0;
  double alpha = 0.75;
  double learning_rate = 0.05;  // adagrad base step
};

struct GloveResult {
  EmbeddingTable table;
  // objective_trace[0] is the objective at initialization; one entry per epoch after.
  std::vector<double> objective_trace;
};

// Weighted least squares of Pennington et al.: sum over nonzero cells of
// f(X_ij) (w_i.wc_j + b_i + bc_j - ln X_ij)^2, f(x) = min((x/x_max)^alpha, 1),
// minimized by per-entry adagrad. Final vectors are w + wc.
inline GloveResult train_glove(const CooccurrenceTable& table, const GloveConfig& config,
                               Rng& rng) {
  if (config.dim < 1) throw DataError("train_glove: dim must be positive");
  if (config.epochs < 1) throw DataError("train_glove: epochs must be positive");
  if (table.entries.empty()) throw DataError("train_glove: empty co-occurrence table");

  const std::size_t n = table.num_words();
  const auto dim = static_cast<std::size_t>(config.dim);

  DenseMat main_vecs(n, dim), ctx_vecs(n, dim);
  DenseVec main_bias(n, 0.0), ctx_bias(n, 0.0);
  const double init_scale = 0.5 / static_cast<double>(config.dim);
  for (auto* m : {&main_vecs, &ctx_vecs})
    for (double& v : m->values) v = rng.uniform(-init_scale, init_scale);

  DenseMat g2_main(n, dim, 1.0), g2_ctx(n, dim, 1.0);
  DenseVec g2_mb(n, 1.0), g2_cb(n, 1.0);

  const auto cell_weight = [&](double x) {
    return x < config.x_max ? std::pow(x / config.x_max, config.alpha) : 1.0;
  };
  const auto objective = [&]() {
    double total = 0.0;
    for (const auto& [i, j, x] : table.entries) {
      double pred = main_bias[i] + ctx_bias[j] - std::log(x);
      for (std::size_t c = 0; c < dim; ++c) pred += main_vecs.at(i, c) * ctx_vecs.at(j, c);
      total += cell_weight(x) * pred * pred;
    }
    return total;
  };

  GloveResult result;
  result.objective_trace.push_back(objective());

  std::vector<std::size_t> order(table.entries.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k)
      std::swap(order[k - 1], order[rng.uniform_int(k)]);
    for (const std::size_t k : order) {
      const auto& [i, j, x] = table.entries[k];
      double pred = main_bias[i] + ctx_bias[j] - std::log(x);
      for (std::size_t c = 0; c < dim; ++c) pred += main_vecs.at(i, c) * ctx_vecs.at(j, c);
      const double f_diff = 2.0 * cell_weight(x) * pred;
      for (std::size_t c = 0; c < dim; ++c) {
        const double gw = f_diff * ctx_vecs.at(j, c);
        const double gc = f_diff * main_vecs.at(i, c);
        g2_main.at(i, c) += gw * gw;
        g2_ctx.at(j, c) += gc * gc;
        main_vecs.at(i, c) -= config.learning_rate * gw / std::sqrt(g2_main.at(i, c));
        ctx_vecs.at(j, c) -= config.learning_rate * gc / std::sqrt(g2_ctx.at(j, c));
      }
      g2_mb[i] += f_diff * f_diff;
      g2_cb[j] += f_diff * f_diff;
      main_bias[i] -= config.learning_rate * f_diff / std::sqrt(g2_mb[i]);
      ctx_bias[j] -= config.learning_rate * f_diff / std::sqrt(g2_cb[j]);
      if (!std::isfinite(pred))
        throw NumericError("train_glove: non-finite residual at epoch " +
                           std::to_string(epoch + 1));
    }
    result.objective_trace.push_back(objective());
  }

  EmbeddingTable& emb = result.table;
  emb.dim = dim;
  emb.words = table.words;
  emb.index = table.index;
  emb.vectors = DenseMat(n, dim);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < dim; ++c)
      emb.vectors.at(r, c) = main_vecs.at(r, c) + ctx_vecs.at(r, c);
  emb.recompute_unk();
  return result;
}

// Text format: one line per word, "word v1 v2 ... vdim".
inline void save_embeddings(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out.precision(17);
  for (std::size_t r = 0; r < table.words.size(); ++r) {
    out << table.words[r];
    for (std::size_t c = 0; c < table.dim; ++c) out << ' ' << table.vectors.at(r, c);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path);
  EmbeddingTable table;
  std::vector<DenseVec> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    DenseVec row;
    double v;
    while (ls >> v) row.push_back(v);
    if (word.empty() || row.empty())
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed embedding line");
    if (table.dim == 0) table.dim = row.size();
    if (row.size() != table.dim)
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(table.dim) + " values, got " + std::to_string(row.size()));
    if (!table.index.try_emplace(word, table.words.size()).second)
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate word \"" + word + "\"");
    table.words.push_back(word);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": empty embedding file");
  table.vectors = DenseMat(rows.size(), table.dim);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < table.dim; ++c) table.vectors.at(r, c) = rows[r][c];
  table.recompute_unk();
  return table;
}

// FNV-1a over raw file bytes; model files reference embeddings by this value.
inline std::uint64_t file_checksum(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file for checksum: " + path);
  std::uint64_t hash = 1469598103934665603ull;
  char buffer[4096];
  while (in.read(buffer, sizeof(buffer)) || in.gcount() > 0) {
    for (std::streamsize k = 0; k < in.gcount(); ++k) {
      hash ^= static_cast<unsigned char>(buffer[k]);
      hash *= 1099511628211ull;
    }
  }
  return hash;
}

}  // namespace bioalert
