#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "bioalert/errors.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

enum class Label { Event, Other };

inline std::string label_name(Label l) { return l == Label::Event ? "event" : "other"; }

inline Label parse_label(std::string_view s) {
  if (s == "event") return Label::Event;
  if (s == "other") return Label::Other;
  throw DataError("unknown label \"" + std::string(s) + "\" (expected \"event\" or \"other\")");
}

// One retrieved alert: two views of the same article plus metadata.
struct AlertDocument {
  std::string id;
  std::string title;
  std::string description;
  std::optional<Label> label;
  std::optional<std::string> retrieved_at;  // ISO-8601, unused downstream
  std::optional<std::string> url;           // unused downstream
};

using TokenSeq = std::vector<std::string>;

struct CorpusStats {
  std::size_t num_texts = 0;
  std::size_t vocab_size = 0;  // distinct unigrams
  std::size_t median_length = 0;
  double mean_length = 0.0;
};

struct SplitSpec {
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  double test_fraction = 0.1;
  std::uint64_t seed = 0;
};

struct SplitResult {
  std::vector<AlertDocument> train;
  std::vector<AlertDocument> dev;
  std::vector<AlertDocument> test;
};

namespace detail {

inline bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 codepoint at s[i]; malformed bytes are passed through as
// single opaque codepoints so foreign text never aborts tokenization.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  const unsigned char b0 = byte(i);
  std::size_t len = 1;
  char32_t cp = b0;
  if ((b0 & 0x80) == 0x00) {
    len = 1;
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0 && i + 1 < s.size()) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0 && i + 2 < s.size()) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0 && i + 3 < s.size()) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const unsigned char bk = byte(i + k);
    if ((bk & 0xC0) != 0x80) {  // truncated sequence: emit lead byte alone
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += len;
  return cp;
}

inline bool is_edge_punct(char32_t cp) {
  if (cp >= 128) return false;
  const char c = static_cast<char>(cp);
  return std::ispunct(static_cast<unsigned char>(c)) != 0;
}

}  // namespace detail

// Lowercase, split on Unicode whitespace, strip leading/trailing punctuation.
// Internal punctuation (hyphens, apostrophes) is kept; emptied tokens drop.
inline TokenSeq tokenize(std::string_view text) {
  TokenSeq tokens;
  std::string current;
  std::vector<std::size_t> cp_starts;  // byte offset of each codepoint in current

  const auto flush = [&]() {
    if (current.empty()) return;
    // strip edge punctuation codepoint by codepoint
    std::size_t begin_cp = 0, end_cp = cp_starts.size();
    const auto cp_at = [&](std::size_t k) {
      std::size_t i = cp_starts[k];
      return detail::decode_utf8(current, i);
    };
    while (begin_cp < end_cp && detail::is_edge_punct(cp_at(begin_cp))) ++begin_cp;
    while (end_cp > begin_cp && detail::is_edge_punct(cp_at(end_cp - 1))) --end_cp;
    if (begin_cp < end_cp) {
      const std::size_t b = cp_starts[begin_cp];
      const std::size_t e = end_cp < cp_starts.size() ? cp_starts[end_cp] : current.size();
      tokens.emplace_back(current.substr(b, e - b));
    }
    current.clear();
    cp_starts.clear();
  };

  std::size_t i = 0;
  while (i < text.size()) {
    const std::size_t start = i;
    char32_t cp = detail::decode_utf8(text, i);
    if (detail::is_unicode_space(cp)) {
      flush();
      continue;
    }
    if (cp < 128) cp = static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
    if (cp < 128) {
      cp_starts.push_back(current.size());
      current.push_back(static_cast<char>(cp));
    } else {
      cp_starts.push_back(current.size());
      current.append(text.substr(start, i - start));
    }
  }
  flush();
  return tokens;
}

// All unigrams in order, then adjacent bigrams joined by one space.
inline std::vector<std::string> ngram_terms(const TokenSeq& seq) {
  std::vector<std::string> terms;
  terms.reserve(seq.size() * 2);
  for (const auto& t : seq) terms.push_back(t);
  for (std::size_t i = 0; i + 1 < seq.size(); ++i) terms.push_back(seq[i] + " " + seq[i + 1]);
  return terms;
}

// Median is the lower middle element for even counts.
inline CorpusStats corpus_stats(std::span<const TokenSeq> docs) {
  if (docs.empty()) throw DataError("empty corpus");
  CorpusStats stats;
  stats.num_texts = docs.size();
  std::unordered_set<std::string> unigrams;
  std::vector<std::size_t> lengths;
  lengths.reserve(docs.size());
  std::size_t total = 0;
  for (const auto& doc : docs) {
    lengths.push_back(doc.size());
    total += doc.size();
    for (const auto& t : doc) unigrams.insert(t);
  }
  std::sort(lengths.begin(), lengths.end());
  stats.vocab_size = unigrams.size();
  stats.median_length = lengths[(lengths.size() - 1) / 2];
  stats.mean_length = static_cast<double>(total) / static_cast<double>(docs.size());
  return stats;
}

// Deterministic shuffle by seed; dev/test get floored shares and the train
// set takes the remainder (30,893 at 80/10/10 -> 24,715 / 3,089 / 3,089).
inline SplitResult split_dataset(std::span<const AlertDocument> docs, const SplitSpec& spec) {
  const double sum = spec.train_fraction + spec.dev_fraction + spec.test_fraction;
  const bool in_range = spec.train_fraction >= 0 && spec.train_fraction <= 1 &&
                        spec.dev_fraction >= 0 && spec.dev_fraction <= 1 &&
                        spec.test_fraction >= 0 && spec.test_fraction <= 1;
  if (!in_range || std::abs(sum - 1.0) > 1e-9)
    throw DataError("split fractions must lie in [0,1] and sum to 1");
  for (const auto& d : docs) {
    if (!d.label) throw DataError("split_dataset: unlabeled document \"" + d.id + "\"");
  }

  Rng rng(spec.seed);
  const std::vector<std::size_t> order = rng.permutation(docs.size());

  const std::size_t n = docs.size();
  const auto n_dev = static_cast<std::size_t>(static_cast<double>(n) * spec.dev_fraction);
  const auto n_test = static_cast<std::size_t>(static_cast<double>(n) * spec.test_fraction);
  const std::size_t n_train = n - n_dev - n_test;

  SplitResult out;
  out.train.reserve(n_train);
  out.dev.reserve(n_dev);
  out.test.reserve(n_test);
  for (std::size_t k = 0; k < n; ++k) {
    const AlertDocument& d = docs[order[k]];
    if (k < n_train)
      out.train.push_back(d);
    else if (k < n_train + n_dev)
      out.dev.push_back(d);
    else
      out.test.push_back(d);
  }
  return out;
}

namespace detail {

inline AlertDocument parse_document(const nlohmann::json& j) {
  AlertDocument doc;
  if (!j.is_object()) throw DataError("record is not a JSON object");
  const auto require_string = [&](const char* key) {
    if (!j.contains(key) || !j.at(key).is_string())
      throw DataError(std::string("missing or non-string \"") + key + "\"");
    return j.at(key).get<std::string>();
  };
  doc.id = require_string("id");
  if (doc.id.empty()) throw DataError("empty \"id\"");
  doc.title = require_string("title");
  doc.description = require_string("description");
  if (j.contains("label")) {
    if (!j.at("label").is_string()) throw DataError("non-string \"label\"");
    doc.label = parse_label(j.at("label").get<std::string>());
  }
  if (j.contains("retrieved_at")) {
    if (!j.at("retrieved_at").is_string()) throw DataError("non-string \"retrieved_at\"");
    doc.retrieved_at = j.at("retrieved_at").get<std::string>();
  }
  if (j.contains("url")) {
    if (!j.at("url").is_string()) throw DataError("non-string \"url\"");
    doc.url = j.at("url").get<std::string>();
  }
  return doc;
}

inline nlohmann::json document_to_json(const AlertDocument& doc) {
  nlohmann::json j;
  j["id"] = doc.id;
  j["title"] = doc.title;
  j["description"] = doc.description;
  if (doc.label) j["label"] = label_name(*doc.label);
  if (doc.retrieved_at) j["retrieved_at"] = *doc.retrieved_at;
  if (doc.url) j["url"] = *doc.url;
  return j;
}

}  // namespace detail

// UTF-8 JSONL, one document per line. Order preserved. A corpus must be
// uniformly labeled or uniformly unlabeled; mixes are rejected.
inline std::vector<AlertDocument> load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<AlertDocument> docs;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    AlertDocument doc;
    try {
      doc = detail::parse_document(j);
    } catch (const DataError& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (!seen_ids.insert(doc.id).second)
      throw DataError(path + ":" + std::to_string(line_no) + ": duplicate id \"" + doc.id + "\"");
    docs.push_back(std::move(doc));
  }
  if (!docs.empty()) {
    const bool first_labeled = docs.front().label.has_value();
    for (const auto& d : docs) {
      if (d.label.has_value() != first_labeled)
        throw DataError(path + ": corpus mixes labeled and unlabeled documents (id \"" +
                        d.id + "\")");
    }
  }
  return docs;
}

inline void write_corpus(const std::string& path, std::span<const AlertDocument> docs) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const auto& d : docs) out << detail::document_to_json(d).dump() << "\n";
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace bioalert
