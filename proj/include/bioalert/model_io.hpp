#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "bioalert/errors.hpp"
#include "bioalert/features.hpp"

namespace bioalert {

// Model container: "BALM" magic, u32 format version, then labeled sections
// ([u32 name length][name][u64 payload length][payload]). Doubles are stored
// as little-endian IEEE-754 bits so a round-trip preserves predictions
// exactly. Embedding tables are referenced by checksum, not embedded.
inline constexpr std::uint32_t kModelFormatVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) bytes_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void u64(std::uint64_t v) {
    for (int k = 0; k < 8; ++k) bytes_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void vec(const DenseVec& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void mat(const DenseMat& m) {
    u64(m.rows);
    u64(m.cols);
    for (double x : m.values) f64(x);
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + k])) << (8 * k);
    pos_ += 8;
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t len = u32();
    need(len);
    std::string s = bytes_.substr(pos_, len);
    pos_ += len;
    return s;
  }
  DenseVec vec() {
    const std::uint64_t len = u64();
    DenseVec v(len);
    for (auto& x : v) x = f64();
    return v;
  }
  DenseMat mat() {
    DenseMat m;
    m.rows = u64();
    m.cols = u64();
    m.values.resize(m.rows * m.cols);
    for (auto& x : m.values) x = f64();
    return m;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t count) const {
    if (pos_ + count > bytes_.size()) throw DataError("bad model file: truncated section");
  }
  std::string bytes_;
  std::size_t pos_ = 0;
};

inline std::string pack_vocabulary(const Vocabulary& vocab) {
  ByteWriter w;
  w.u64(static_cast<std::uint64_t>(vocab.num_docs));
  w.u64(vocab.terms.size());
  for (std::size_t j = 0; j < vocab.terms.size(); ++j) {
    w.str(vocab.terms[j]);
    w.u64(static_cast<std::uint64_t>(vocab.doc_freq[j]));
  }
  return w.bytes();
}

inline Vocabulary unpack_vocabulary(const std::string& payload) {
  ByteReader r(payload);
  Vocabulary vocab;
  vocab.num_docs = static_cast<std::int64_t>(r.u64());
  const std::uint64_t count = r.u64();
  for (std::uint64_t j = 0; j < count; ++j) {
    std::string term = r.str();
    vocab.doc_freq.push_back(static_cast<std::int64_t>(r.u64()));
    vocab.index.emplace(term, vocab.terms.size());
    vocab.terms.push_back(std::move(term));
  }
  if (!r.done()) throw DataError("bad model file: trailing bytes in vocabulary section");
  return vocab;
}

inline std::string pack_lcr(const LcrModel& m) {
  ByteWriter w;
  w.vec(m.p);
  w.vec(m.q);
  w.vec(m.r);
  return w.bytes();
}

inline LcrModel unpack_lcr(const std::string& payload) {
  ByteReader r(payload);
  LcrModel m;
  m.p = r.vec();
  m.q = r.vec();
  m.r = r.vec();
  if (!r.done()) throw DataError("bad model file: trailing bytes in lcr section");
  return m;
}

inline void pack_lstm(ByteWriter& w, const LstmParams& p) {
  w.u64(p.hidden);
  w.u64(p.input);
  for (const auto* m : {&p.w_i, &p.w_f, &p.w_g, &p.w_o, &p.u_i, &p.u_f, &p.u_g, &p.u_o})
    w.mat(*m);
  for (const auto* b : {&p.b_i, &p.b_f, &p.b_g, &p.b_o}) w.vec(*b);
}

inline LstmParams unpack_lstm(ByteReader& r) {
  LstmParams p;
  p.hidden = r.u64();
  p.input = r.u64();
  for (auto* m : {&p.w_i, &p.w_f, &p.w_g, &p.w_o, &p.u_i, &p.u_f, &p.u_g, &p.u_o})
    *m = r.mat();
  for (auto* b : {&p.b_i, &p.b_f, &p.b_g, &p.b_o}) *b = r.vec();
  if (p.w_i.rows != p.hidden || p.w_i.cols != p.input)
    throw DataError("bad model file: inconsistent encoder shapes");
  return p;
}

inline std::string pack_encoder(const BiLstmEncoder& enc) {
  ByteWriter w;
  pack_lstm(w, enc.forward_params);
  pack_lstm(w, enc.backward_params);
  return w.bytes();
}

inline BiLstmEncoder unpack_encoder(const std::string& payload) {
  ByteReader r(payload);
  BiLstmEncoder enc;
  enc.forward_params = unpack_lstm(r);
  enc.backward_params = unpack_lstm(r);
  if (!r.done()) throw DataError("bad model file: trailing bytes in encoder section");
  return enc;
}

inline std::string pack_head(const LogRegModel& head) {
  ByteWriter w;
  w.vec(head.weights);
  w.f64(head.bias);
  w.f64(head.lambda);
  w.f64(head.threshold);
  return w.bytes();
}

inline LogRegModel unpack_head(const std::string& payload) {
  ByteReader r(payload);
  LogRegModel head;
  head.weights = r.vec();
  head.bias = r.f64();
  head.lambda = r.f64();
  head.threshold = r.f64();
  if (!r.done()) throw DataError("bad model file: trailing bytes in head section");
  return head;
}

}  // namespace detail

inline void save_model(const std::string& path, const FittedModels& fitted) {
  std::map<std::string, std::string> sections;  // ordered -> stable bytes

  nlohmann::json meta;
  meta["rep"] = representation_name(fitted.rep);
  meta["view"] = view_name(fitted.view);
  meta["seed"] = fitted.seed;
  meta["hyperparams"] = fitted.hyperparams;
  if (fitted.rep == Representation::Rnn) {
    meta["embedding_checksum"] = fitted.embedding_checksum;
    meta["embedding_dim"] = fitted.embedding_dim;
  }
  sections["meta"] = meta.dump();

  if (fitted.title_vocab) sections["vocab_title"] = detail::pack_vocabulary(*fitted.title_vocab);
  if (fitted.desc_vocab) sections["vocab_desc"] = detail::pack_vocabulary(*fitted.desc_vocab);
  if (fitted.title_lcr) sections["lcr_title"] = detail::pack_lcr(*fitted.title_lcr);
  if (fitted.desc_lcr) sections["lcr_desc"] = detail::pack_lcr(*fitted.desc_lcr);
  if (fitted.title_encoder)
    sections["encoder_title"] = detail::pack_encoder(*fitted.title_encoder);
  if (fitted.desc_encoder) sections["encoder_desc"] = detail::pack_encoder(*fitted.desc_encoder);
  sections["head"] = detail::pack_head(fitted.head);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file: " + path);
  detail::ByteWriter header;
  header.u32(0x4D4C4142u);  // "BALM"
  header.u32(kModelFormatVersion);
  out.write(header.bytes().data(), static_cast<std::streamsize>(header.bytes().size()));
  for (const auto& [name, payload] : sections) {
    detail::ByteWriter w;
    w.str(name);
    w.u64(payload.size());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  }
  if (!out) throw DataError("write failed: " + path);
}

// Loads every section; RNN models come back without embeddings attached (see
// attach_embeddings).
inline FittedModels load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("bad model file: cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8) throw DataError("bad model file: too short");
  detail::ByteReader header(bytes.substr(0, 8));
  if (header.u32() != 0x4D4C4142u) throw DataError("bad model file: wrong magic");
  const std::uint32_t version = header.u32();
  if (version != kModelFormatVersion)
    throw DataError("bad model file: unsupported format version " + std::to_string(version));

  std::map<std::string, std::string> sections;
  std::size_t pos = 8;
  while (pos < bytes.size()) {
    if (pos + 4 > bytes.size()) throw DataError("bad model file: truncated section header");
    detail::ByteReader r(bytes.substr(pos, std::min<std::size_t>(bytes.size() - pos, 1u << 20)));
    const std::string name = r.str();
    const std::uint64_t len = r.u64();
    const std::size_t payload_at = pos + 4 + name.size() + 8;
    if (payload_at + len > bytes.size()) throw DataError("bad model file: truncated payload");
    sections[name] = bytes.substr(payload_at, len);
    pos = payload_at + len;
  }

  const auto section = [&](const char* name) -> const std::string& {
    const auto it = sections.find(name);
    if (it == sections.end())
      throw DataError(std::string("bad model file: missing section \"") + name + "\"");
    return it->second;
  };

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(section("meta"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model file: meta section: ") + e.what());
  }

  FittedModels fitted;
  try {
    fitted.rep = parse_representation(meta.at("rep").get<std::string>());
    fitted.view = parse_view(meta.at("view").get<std::string>());
    fitted.seed = meta.at("seed").get<std::uint64_t>();
    fitted.hyperparams =
        meta.at("hyperparams").get<std::map<std::string, double>>();
    if (fitted.rep == Representation::Rnn) {
      fitted.embedding_checksum = meta.at("embedding_checksum").get<std::uint64_t>();
      fitted.embedding_dim = meta.at("embedding_dim").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad model file: meta section: ") + e.what());
  }

  if (sections.count("vocab_title"))
    fitted.title_vocab = detail::unpack_vocabulary(section("vocab_title"));
  if (sections.count("vocab_desc"))
    fitted.desc_vocab = detail::unpack_vocabulary(section("vocab_desc"));
  if (sections.count("lcr_title")) fitted.title_lcr = detail::unpack_lcr(section("lcr_title"));
  if (sections.count("lcr_desc")) fitted.desc_lcr = detail::unpack_lcr(section("lcr_desc"));
  if (sections.count("encoder_title"))
    fitted.title_encoder = detail::unpack_encoder(section("encoder_title"));
  if (sections.count("encoder_desc"))
    fitted.desc_encoder = detail::unpack_encoder(section("encoder_desc"));
  fitted.head = detail::unpack_head(section("head"));

  if (fitted.rep == Representation::Rnn) {
    if (fitted.uses_title() && !fitted.title_encoder)
      throw DataError("bad model file: missing title encoder");
    if (fitted.uses_description() && !fitted.desc_encoder)
      throw DataError("bad model file: missing description encoder");
  } else {
    if (fitted.uses_title() && !fitted.title_vocab)
      throw DataError("bad model file: missing title vocabulary");
    if (fitted.uses_description() && !fitted.desc_vocab)
      throw DataError("bad model file: missing description vocabulary");
    if (fitted.rep == Representation::Lcr) {
      if (fitted.uses_title() && !fitted.title_lcr)
        throw DataError("bad model file: missing title lcr section");
      if (fitted.uses_description() && !fitted.desc_lcr)
        throw DataError("bad model file: missing description lcr section");
    }
  }
  return fitted;
}

// Verifies the embedding file checksum recorded at training time and wires
// the table into the model's encoders.
inline void attach_embeddings(FittedModels& fitted,
                              std::shared_ptr<const EmbeddingTable> embeddings,
                              std::uint64_t checksum) {
  if (fitted.rep != Representation::Rnn)
    throw DataError("attach_embeddings: model has no rnn representation");
  if (checksum != fitted.embedding_checksum)
    throw DataError("embedding file checksum mismatch: model was trained with a different "
                    "embedding table");
  if (embeddings->dim != fitted.embedding_dim)
    throw DataError("embedding dimension mismatch: expected " +
                    std::to_string(fitted.embedding_dim) + ", got " +
                    std::to_string(embeddings->dim));
  if (fitted.title_encoder) fitted.title_encoder->embeddings = embeddings;
  if (fitted.desc_encoder) fitted.desc_encoder->embeddings = embeddings;
}

}  // namespace bioalert
