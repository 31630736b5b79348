#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bioalert/corpus.hpp"
#include "bioalert/errors.hpp"
#include "bioalert/glove.hpp"
#include "bioalert/linear_models.hpp"
#include "bioalert/numerics.hpp"

namespace bioalert {

// Token substituted for an empty text so every document yields a vector. The
// tokenizer strips '<' and '>', so this string can never occur in real input
// and always resolves to the embedding table's mean vector.
inline constexpr const char* kUnkToken = "<unk>";

// One direction's cell parameters. Gate order throughout: input, forget,
// candidate, output.
struct LstmParams {
  std::size_t hidden = 0;  // H
  std::size_t input = 0;   // d
  DenseMat w_i, w_f, w_g, w_o;  // H x d
  DenseMat u_i, u_f, u_g, u_o;  // H x H
  DenseVec b_i, b_f, b_g, b_o;  // H
};

// Weights uniform(-0.08, 0.08); biases zero except the forget gate at 1.0.
inline LstmParams make_lstm_params(std::size_t hidden, std::size_t input, Rng& rng) {
  LstmParams p;
  p.hidden = hidden;
  p.input = input;
  for (auto* m : {&p.w_i, &p.w_f, &p.w_g, &p.w_o}) *m = DenseMat(hidden, input);
  for (auto* m : {&p.u_i, &p.u_f, &p.u_g, &p.u_o}) *m = DenseMat(hidden, hidden);
  for (auto* m : {&p.w_i, &p.w_f, &p.w_g, &p.w_o, &p.u_i, &p.u_f, &p.u_g, &p.u_o})
    for (double& v : m->values) v = rng.uniform(-0.08, 0.08);
  for (auto* b : {&p.b_i, &p.b_f, &p.b_g, &p.b_o}) b->assign(hidden, 0.0);
  p.b_f.assign(hidden, 1.0);
  return p;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// a = W x + U h_prev + b for one gate
inline void gate_preactivation(const DenseMat& w, const DenseMat& u, const DenseVec& b,
                               const DenseVec& x, const DenseVec& h_prev, DenseVec& out) {
  const std::size_t h_dim = b.size();
  out.assign(h_dim, 0.0);
  for (std::size_t r = 0; r < h_dim; ++r) {
    double s = b[r];
    const double* wr = &w.values[r * w.cols];
    for (std::size_t c = 0; c < w.cols; ++c) s += wr[c] * x[c];
    const double* ur = &u.values[r * u.cols];
    for (std::size_t c = 0; c < u.cols; ++c) s += ur[c] * h_prev[c];
    out[r] = s;
  }
}

}  // namespace detail

struct LstmStepResult {
  DenseVec h;
  DenseVec c;
};

// Standard cell: i,f,o through the logistic sigmoid, candidate through tanh;
// c = f.c_prev + i.g; h = o.tanh(c).
inline LstmStepResult lstm_step(const LstmParams& params, const DenseVec& x,
                                const DenseVec& h_prev, const DenseVec& c_prev) {
  if (x.size() != params.input || h_prev.size() != params.hidden ||
      c_prev.size() != params.hidden)
    throw DataError("lstm_step: dimension mismatch");
  DenseVec ai, af, ag, ao;
  detail::gate_preactivation(params.w_i, params.u_i, params.b_i, x, h_prev, ai);
  detail::gate_preactivation(params.w_f, params.u_f, params.b_f, x, h_prev, af);
  detail::gate_preactivation(params.w_g, params.u_g, params.b_g, x, h_prev, ag);
  detail::gate_preactivation(params.w_o, params.u_o, params.b_o, x, h_prev, ao);
  LstmStepResult out;
  out.h.resize(params.hidden);
  out.c.resize(params.hidden);
  for (std::size_t r = 0; r < params.hidden; ++r) {
    const double i = detail::sigmoid(ai[r]);
    const double f = detail::sigmoid(af[r]);
    const double g = std::tanh(ag[r]);
    const double o = detail::sigmoid(ao[r]);
    out.c[r] = f * c_prev[r] + i * g;
    out.h[r] = o * std::tanh(out.c[r]);
  }
  return out;
}

namespace detail {

// Forward pass cache for one direction, inputs in processing order.
struct LstmTrace {
  std::vector<DenseVec> x;
  std::vector<DenseVec> gate_i, gate_f, gate_g, gate_o;  // post-nonlinearity
  std::vector<DenseVec> c, h, tanh_c;
};

inline LstmTrace lstm_forward(const LstmParams& params, std::span<const DenseVec> inputs) {
  LstmTrace trace;
  const std::size_t k = inputs.size();
  trace.x.assign(inputs.begin(), inputs.end());
  for (auto* v : {&trace.gate_i, &trace.gate_f, &trace.gate_g, &trace.gate_o, &trace.c,
                  &trace.h, &trace.tanh_c})
    v->resize(k);
  DenseVec h_prev(params.hidden, 0.0), c_prev(params.hidden, 0.0);
  DenseVec ai, af, ag, ao;
  for (std::size_t t = 0; t < k; ++t) {
    gate_preactivation(params.w_i, params.u_i, params.b_i, inputs[t], h_prev, ai);
    gate_preactivation(params.w_f, params.u_f, params.b_f, inputs[t], h_prev, af);
    gate_preactivation(params.w_g, params.u_g, params.b_g, inputs[t], h_prev, ag);
    gate_preactivation(params.w_o, params.u_o, params.b_o, inputs[t], h_prev, ao);
    auto& gi = trace.gate_i[t]; gi.resize(params.hidden);
    auto& gf = trace.gate_f[t]; gf.resize(params.hidden);
    auto& gg = trace.gate_g[t]; gg.resize(params.hidden);
    auto& go = trace.gate_o[t]; go.resize(params.hidden);
    auto& c = trace.c[t]; c.resize(params.hidden);
    auto& h = trace.h[t]; h.resize(params.hidden);
    auto& tc = trace.tanh_c[t]; tc.resize(params.hidden);
    for (std::size_t r = 0; r < params.hidden; ++r) {
      gi[r] = sigmoid(ai[r]);
      gf[r] = sigmoid(af[r]);
      gg[r] = std::tanh(ag[r]);
      go[r] = sigmoid(ao[r]);
      c[r] = gf[r] * c_prev[r] + gi[r] * gg[r];
      tc[r] = std::tanh(c[r]);
      h[r] = go[r] * tc[r];
    }
    h_prev = h;
    c_prev = c;
  }
  return trace;
}

struct LstmGrads {
  DenseMat w_i, w_f, w_g, w_o;
  DenseMat u_i, u_f, u_g, u_o;
  DenseVec b_i, b_f, b_g, b_o;

  explicit LstmGrads(const LstmParams& p) {
    for (auto* m : {&w_i, &w_f, &w_g, &w_o}) *m = DenseMat(p.hidden, p.input);
    for (auto* m : {&u_i, &u_f, &u_g, &u_o}) *m = DenseMat(p.hidden, p.hidden);
    for (auto* b : {&b_i, &b_f, &b_g, &b_o}) b->assign(p.hidden, 0.0);
  }
};

// Backpropagation through time. dh_steps[t] is dL/dh_t in processing order;
// accumulates into grads, and into dx (per-step input gradients) when given.
inline void lstm_backward(const LstmParams& params, const LstmTrace& trace,
                          const std::vector<DenseVec>& dh_steps, LstmGrads& grads,
                          std::vector<DenseVec>* dx) {
  const std::size_t k = trace.x.size();
  const std::size_t hd = params.hidden;
  const DenseVec zero_state(hd, 0.0);
  DenseVec dh_carry(hd, 0.0), dc_carry(hd, 0.0);
  DenseVec da_i(hd), da_f(hd), da_g(hd), da_o(hd);
  if (dx) dx->assign(k, DenseVec(params.input, 0.0));
  for (std::size_t ti = k; ti > 0; --ti) {
    const std::size_t t = ti - 1;
    const DenseVec& h_prev_v = t > 0 ? trace.h[t - 1] : zero_state;
    const DenseVec& c_prev_v = t > 0 ? trace.c[t - 1] : zero_state;
    for (std::size_t r = 0; r < hd; ++r) {
      const double dh = dh_steps[t][r] + dh_carry[r];
      const double i = trace.gate_i[t][r];
      const double f = trace.gate_f[t][r];
      const double g = trace.gate_g[t][r];
      const double o = trace.gate_o[t][r];
      const double tc = trace.tanh_c[t][r];
      const double dc = dc_carry[r] + dh * o * (1.0 - tc * tc);
      const double do_ = dh * tc;
      const double di = dc * g;
      const double dg = dc * i;
      const double df = dc * c_prev_v[r];
      dc_carry[r] = dc * f;
      da_i[r] = di * i * (1.0 - i);
      da_f[r] = df * f * (1.0 - f);
      da_g[r] = dg * (1.0 - g * g);
      da_o[r] = do_ * o * (1.0 - o);
    }
    const DenseVec& x = trace.x[t];
    struct GatePack { const DenseVec* da; DenseMat* w; DenseMat* u; DenseVec* b;
                      const DenseMat* wp; const DenseMat* up; };
    const GatePack gates[4] = {
        {&da_i, &grads.w_i, &grads.u_i, &grads.b_i, &params.w_i, &params.u_i},
        {&da_f, &grads.w_f, &grads.u_f, &grads.b_f, &params.w_f, &params.u_f},
        {&da_g, &grads.w_g, &grads.u_g, &grads.b_g, &params.w_g, &params.u_g},
        {&da_o, &grads.w_o, &grads.u_o, &grads.b_o, &params.w_o, &params.u_o}};
    dh_carry.assign(hd, 0.0);
    for (const auto& gate : gates) {
      const DenseVec& da = *gate.da;
      for (std::size_t r = 0; r < hd; ++r) {
        const double a = da[r];
        if (a == 0.0) continue;
        double* wr = &gate.w->values[r * params.input];
        for (std::size_t c = 0; c < params.input; ++c) wr[c] += a * x[c];
        double* ur = &gate.u->values[r * hd];
        for (std::size_t c = 0; c < hd; ++c) ur[c] += a * h_prev_v[c];
        (*gate.b)[r] += a;
        const double* upr = &gate.up->values[r * hd];
        for (std::size_t c = 0; c < hd; ++c) dh_carry[c] += upr[c] * a;
        if (dx) {
          const double* wpr = &gate.wp->values[r * params.input];
          double* dxr = (*dx)[t].data();
          for (std::size_t c = 0; c < params.input; ++c) dxr[c] += wpr[c] * a;
        }
      }
    }
  }
}

}  // namespace detail

// Paired forward/backward parameters over a shared embedding table.
struct BiLstmEncoder {
  LstmParams forward_params;
  LstmParams backward_params;
  std::shared_ptr<const EmbeddingTable> embeddings;

  std::size_t hidden() const { return forward_params.hidden; }
  std::size_t doc_vector_size() const { return 4 * forward_params.hidden; }
};

inline BiLstmEncoder make_encoder(std::size_t hidden,
                                  std::shared_ptr<const EmbeddingTable> embeddings,
                                  Rng& rng) {
  BiLstmEncoder enc;
  enc.forward_params = make_lstm_params(hidden, embeddings->dim, rng);
  enc.backward_params = make_lstm_params(hidden, embeddings->dim, rng);
  enc.embeddings = std::move(embeddings);
  return enc;
}

namespace detail {

struct EncodeTrace {
  std::vector<DenseVec> inputs;  // embedded tokens, document order
  LstmTrace forward;             // over inputs
  LstmTrace backward;            // over reversed inputs
  DenseVec doc_vector;           // length 4H
};

// Document vector layout: [ mean over t of (backward state at t, forward
// state at t) | final backward state | final forward state ]. The backward
// state "at t" is the one that has consumed x_k..x_t, i.e. backward trace
// step k-1-t.
inline EncodeTrace encode_with_trace(const BiLstmEncoder& enc,
                                     std::span<const DenseVec> inputs) {
  const std::size_t k = inputs.size();
  const std::size_t hd = enc.hidden();
  EncodeTrace trace;
  trace.inputs.assign(inputs.begin(), inputs.end());
  trace.forward = lstm_forward(enc.forward_params, inputs);
  std::vector<DenseVec> reversed(inputs.rbegin(), inputs.rend());
  trace.backward = lstm_forward(enc.backward_params, reversed);

  DenseVec& v = trace.doc_vector;
  v.assign(4 * hd, 0.0);
  for (std::size_t t = 0; t < k; ++t) {
    const DenseVec& b_state = trace.backward.h[k - 1 - t];
    const DenseVec& f_state = trace.forward.h[t];
    for (std::size_t r = 0; r < hd; ++r) {
      v[r] += b_state[r];
      v[hd + r] += f_state[r];
    }
  }
  for (std::size_t r = 0; r < 2 * hd; ++r) v[r] /= static_cast<double>(k);
  for (std::size_t r = 0; r < hd; ++r) {
    v[2 * hd + r] = trace.backward.h[k - 1][r];  // final backward state
    v[3 * hd + r] = trace.forward.h[k - 1][r];   // final forward state
  }
  return trace;
}

struct EncoderGrads {
  LstmGrads forward;
  LstmGrads backward;

  explicit EncoderGrads(const BiLstmEncoder& enc)
      : forward(enc.forward_params), backward(enc.backward_params) {}
};

// Splits dL/d(doc vector) into the per-step dh streams of both directions
// and runs BPTT. dx, when requested, is returned in document order.
inline void encode_backward(const BiLstmEncoder& enc, const EncodeTrace& trace,
                            const DenseVec& d_doc_vector, EncoderGrads& grads,
                            std::vector<DenseVec>* dx) {
  const std::size_t k = trace.inputs.size();
  const std::size_t hd = enc.hidden();
  const double inv_k = 1.0 / static_cast<double>(k);

  std::vector<DenseVec> dh_forward(k, DenseVec(hd, 0.0));
  std::vector<DenseVec> dh_backward(k, DenseVec(hd, 0.0));  // processing order
  for (std::size_t t = 0; t < k; ++t) {
    for (std::size_t r = 0; r < hd; ++r) {
      dh_backward[k - 1 - t][r] += d_doc_vector[r] * inv_k;
      dh_forward[t][r] += d_doc_vector[hd + r] * inv_k;
    }
  }
  for (std::size_t r = 0; r < hd; ++r) {
    dh_backward[k - 1][r] += d_doc_vector[2 * hd + r];
    dh_forward[k - 1][r] += d_doc_vector[3 * hd + r];
  }

  lstm_backward(enc.forward_params, trace.forward, dh_forward, grads.forward, dx);
  std::vector<DenseVec> dx_rev;
  lstm_backward(enc.backward_params, trace.backward, dh_backward, grads.backward,
                dx ? &dx_rev : nullptr);
  if (dx) {
    for (std::size_t t = 0; t < k; ++t) {
      DenseVec& acc = (*dx)[t];
      const DenseVec& extra = dx_rev[k - 1 - t];
      for (std::size_t c = 0; c < acc.size(); ++c) acc[c] += extra[c];
    }
  }
}

inline std::vector<DenseVec> embed_tokens(const EmbeddingTable& table, const TokenSeq& tokens) {
  std::vector<DenseVec> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(table.lookup(t));
  return out;
}

}  // namespace detail

// Eq-style document vector of length 4H. Empty documents are the caller's
// problem: substitute a single kUnkToken.
inline DenseVec encode(const BiLstmEncoder& enc, const TokenSeq& tokens) {
  if (tokens.empty()) throw DataError("encode: empty document");
  if (!enc.embeddings) throw DataError("encode: encoder has no embedding table");
  const auto inputs = detail::embed_tokens(*enc.embeddings, tokens);
  return detail::encode_with_trace(enc, inputs).doc_vector;
}

// ---------------------------------------------------------------------------
// Joint training of one or two encoders with a logistic-regression head.

struct JointExample {
  std::vector<TokenSeq> views;  // one per encoder; description first for Both
  Label label = Label::Other;
};

struct JointTrainConfig {
  std::size_t hidden_size = 128;
  double learning_rate = 0.05;  // adagrad base step
  double lambda = 1e-4;         // L2 on head weights only
  std::size_t batch_size = 32;
  int max_epochs = 30;
  int patience = 5;             // epochs without dev-F1 improvement
  double clip_norm = 5.0;       // global gradient-norm clip
  double input_dropout = 0.0;
  bool finetune_embeddings = false;
  double threshold = 0.5;
};

struct JointModel {
  std::vector<BiLstmEncoder> encoders;
  LogRegModel head;
  // Set only when finetune_embeddings was on; encoders reference it.
  std::shared_ptr<EmbeddingTable> tuned_embeddings;
  double initial_train_loss = 0.0;
  std::vector<double> train_loss_trace;  // mean batch loss per epoch
  std::vector<double> dev_f1_trace;
  int best_epoch = -1;
};

namespace detail {

struct JointGrads {
  std::vector<EncoderGrads> encoders;
  DenseVec head_w;
  double head_b = 0.0;

  JointGrads(const std::vector<BiLstmEncoder>& encs, std::size_t head_dim) {
    for (const auto& e : encs) encoders.emplace_back(e);
    head_w.assign(head_dim, 0.0);
  }
};

inline double logistic_loss(double z, double y) {
  // ln(1 + e^z) - y z, computed stably
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return softplus - y * z;
}

inline const TokenSeq& view_or_unk(const TokenSeq& view, const TokenSeq& unk) {
  return view.empty() ? unk : view;
}

}  // namespace detail

// Mean logistic loss over the batch plus (lambda/2)|w|^2 on the head.
// Shared by the trainer and by finite-difference tests.
inline double joint_batch_loss(const std::vector<BiLstmEncoder>& encoders,
                               const LogRegModel& head,
                               std::span<const JointExample> batch, double lambda) {
  if (batch.empty()) throw DataError("joint_batch_loss: empty batch");
  static const TokenSeq unk{kUnkToken};
  double total = 0.0;
  for (const auto& ex : batch) {
    double z = head.bias;
    std::size_t offset = 0;
    for (std::size_t e = 0; e < encoders.size(); ++e) {
      const DenseVec v = encode(encoders[e], detail::view_or_unk(ex.views[e], unk));
      for (std::size_t r = 0; r < v.size(); ++r) z += head.weights[offset + r] * v[r];
      offset += v.size();
    }
    total += detail::logistic_loss(z, ex.label == Label::Event ? 1.0 : 0.0);
  }
  double reg = 0.0;
  for (double w : head.weights) reg += w * w;
  return total / static_cast<double>(batch.size()) + 0.5 * lambda * reg;
}

namespace detail {

// Loss plus analytic gradients for one mini-batch. Gradients flow through the
// mean and final-state pooling into both LSTM directions of every encoder.
// When emb_grads is non-null, per-word input gradients are accumulated there
// (keyed by embedding row; OOV tokens contribute nothing).
inline double joint_batch_grads(const std::vector<BiLstmEncoder>& encoders,
                                const LogRegModel& head,
                                std::span<const JointExample> batch, double lambda,
                                JointGrads& grads,
                                std::vector<DenseVec>* emb_grads,
                                const std::vector<std::vector<std::vector<double>>>* dropout_masks) {
  static const TokenSeq unk{kUnkToken};
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t bi = 0; bi < batch.size(); ++bi) {
    const auto& ex = batch[bi];
    std::vector<EncodeTrace> traces(encoders.size());
    double z = head.bias;
    std::size_t offset = 0;
    for (std::size_t e = 0; e < encoders.size(); ++e) {
      const TokenSeq& toks = view_or_unk(ex.views[e], unk);
      auto inputs = embed_tokens(*encoders[e].embeddings, toks);
      if (dropout_masks) {
        const auto& mask = (*dropout_masks)[bi][e];
        std::size_t m = 0;
        for (auto& x : inputs)
          for (double& v : x) v *= mask[m++];
      }
      traces[e] = encode_with_trace(encoders[e], inputs);
      const DenseVec& v = traces[e].doc_vector;
      for (std::size_t r = 0; r < v.size(); ++r) z += head.weights[offset + r] * v[r];
      offset += v.size();
    }
    const double y = ex.label == Label::Event ? 1.0 : 0.0;
    total += logistic_loss(z, y);
    const double dz = (sigmoid(z) - y) * inv_n;

    grads.head_b += dz;
    offset = 0;
    for (std::size_t e = 0; e < encoders.size(); ++e) {
      const DenseVec& v = traces[e].doc_vector;
      DenseVec dv(v.size());
      for (std::size_t r = 0; r < v.size(); ++r) {
        grads.head_w[offset + r] += dz * v[r];
        dv[r] = dz * head.weights[offset + r];
      }
      offset += v.size();

      std::vector<DenseVec> dx;
      encode_backward(encoders[e], traces[e], dv, grads.encoders[e],
                      emb_grads ? &dx : nullptr);
      if (emb_grads) {
        const TokenSeq& toks = view_or_unk(ex.views[e], unk);
        const auto& table = *encoders[e].embeddings;
        for (std::size_t t = 0; t < toks.size(); ++t) {
          const auto it = table.index.find(toks[t]);
          if (it == table.index.end()) continue;
          if (dropout_masks) {
            const auto& mask = (*dropout_masks)[bi][e];
            for (std::size_t c = 0; c < dx[t].size(); ++c)
              dx[t][c] *= mask[t * table.dim + c];
          }
          DenseVec& acc = (*emb_grads)[it->second];
          for (std::size_t c = 0; c < dx[t].size(); ++c) acc[c] += dx[t][c];
        }
      }
    }
  }
  for (std::size_t j = 0; j < head.weights.size(); ++j)
    grads.head_w[j] += lambda * head.weights[j];
  double reg = 0.0;
  for (double w : head.weights) reg += w * w;
  return total * inv_n + 0.5 * lambda * reg;
}

// Adagrad state mirroring a parameter block.
struct Adagrad {
  double rate;
  double eps = 1e-8;

  void step(DenseVec& param, const DenseVec& grad, DenseVec& accum, double scale) const {
    for (std::size_t k = 0; k < param.size(); ++k) {
      const double g = grad[k] * scale;
      accum[k] += g * g;
      param[k] -= rate * g / (std::sqrt(accum[k]) + eps);
    }
  }
  void step(DenseMat& param, const DenseMat& grad, DenseMat& accum, double scale) const {
    for (std::size_t k = 0; k < param.values.size(); ++k) {
      const double g = grad.values[k] * scale;
      accum.values[k] += g * g;
      param.values[k] -= rate * g / (std::sqrt(accum.values[k]) + eps);
    }
  }
};

inline double squared_sum(const DenseVec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}
inline double squared_sum(const DenseMat& m) {
  double s = 0.0;
  for (double x : m.values) s += x * x;
  return s;
}

template <typename Fn>
inline void for_each_gate_block(LstmParams& p, LstmGrads& g, LstmParams& acc, Fn&& fn) {
  fn(p.w_i, g.w_i, acc.w_i); fn(p.w_f, g.w_f, acc.w_f);
  fn(p.w_g, g.w_g, acc.w_g); fn(p.w_o, g.w_o, acc.w_o);
  fn(p.u_i, g.u_i, acc.u_i); fn(p.u_f, g.u_f, acc.u_f);
  fn(p.u_g, g.u_g, acc.u_g); fn(p.u_o, g.u_o, acc.u_o);
  fn(p.b_i, g.b_i, acc.b_i); fn(p.b_f, g.b_f, acc.b_f);
  fn(p.b_g, g.b_g, acc.b_g); fn(p.b_o, g.b_o, acc.b_o);
}

}  // namespace detail

// Dev-set F1 of the current parameters, Event as the positive class.
inline double joint_dev_f1(const std::vector<BiLstmEncoder>& encoders, const LogRegModel& head,
                           std::span<const JointExample> dev, double threshold) {
  static const TokenSeq unk{kUnkToken};
  std::int64_t tp = 0, fp = 0, fn = 0;
  for (const auto& ex : dev) {
    double z = head.bias;
    std::size_t offset = 0;
    for (std::size_t e = 0; e < encoders.size(); ++e) {
      const DenseVec v = encode(encoders[e], detail::view_or_unk(ex.views[e], unk));
      for (std::size_t r = 0; r < v.size(); ++r) z += head.weights[offset + r] * v[r];
      offset += v.size();
    }
    const bool predicted_event = detail::sigmoid(z) > threshold;
    const bool is_event = ex.label == Label::Event;
    if (predicted_event && is_event) ++tp;
    else if (predicted_event && !is_event) ++fp;
    else if (!predicted_event && is_event) ++fn;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

// Mini-batch adagrad descent of the L2-regularized logistic loss, gradients
// flowing through Eq.-7 pooling into both directions of every encoder.
// Early-stops on dev F1 and returns the best-dev snapshot.
inline JointModel train_joint(std::shared_ptr<const EmbeddingTable> embeddings,
                              const std::vector<JointExample>& train,
                              const std::vector<JointExample>& dev, std::size_t num_views,
                              const JointTrainConfig& config, Rng& rng) {
  if (train.empty()) throw DataError("train_joint: empty training set");
  if (num_views < 1 || num_views > 2) throw DataError("train_joint: one or two views required");
  for (const auto& ex : train)
    if (ex.views.size() != num_views) throw DataError("train_joint: view count mismatch");

  JointModel model;
  std::shared_ptr<EmbeddingTable> tuned;
  std::shared_ptr<const EmbeddingTable> emb_in_use = embeddings;
  if (config.finetune_embeddings) {
    tuned = std::make_shared<EmbeddingTable>(*embeddings);
    emb_in_use = tuned;
    model.tuned_embeddings = tuned;
  }
  for (std::size_t e = 0; e < num_views; ++e)
    model.encoders.push_back(make_encoder(config.hidden_size, emb_in_use, rng));

  const std::size_t head_dim = num_views * 4 * config.hidden_size;
  model.head.weights.assign(head_dim, 0.0);
  model.head.bias = 0.0;
  model.head.lambda = config.lambda;
  model.head.threshold = config.threshold;

  model.initial_train_loss =
      joint_batch_loss(model.encoders, model.head, train, config.lambda);

  // adagrad accumulators shaped like the parameters
  std::vector<LstmParams> accum_fwd, accum_bwd;
  for (const auto& enc : model.encoders) {
    LstmParams a;
    a.hidden = enc.forward_params.hidden;
    a.input = enc.forward_params.input;
    for (auto* m : {&a.w_i, &a.w_f, &a.w_g, &a.w_o}) *m = DenseMat(a.hidden, a.input);
    for (auto* m : {&a.u_i, &a.u_f, &a.u_g, &a.u_o}) *m = DenseMat(a.hidden, a.hidden);
    for (auto* b : {&a.b_i, &a.b_f, &a.b_g, &a.b_o}) b->assign(a.hidden, 0.0);
    accum_fwd.push_back(a);
    accum_bwd.push_back(a);
  }
  DenseVec accum_head_w(head_dim, 0.0);
  double accum_head_b = 0.0;
  DenseMat accum_emb;
  if (config.finetune_embeddings)
    accum_emb = DenseMat(tuned->words.size(), tuned->dim);

  const detail::Adagrad opt{config.learning_rate};

  std::vector<BiLstmEncoder> best_encoders = model.encoders;
  LogRegModel best_head = model.head;
  std::shared_ptr<EmbeddingTable> best_tuned =
      tuned ? std::make_shared<EmbeddingTable>(*tuned) : nullptr;
  double best_f1 = -1.0;
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const std::vector<std::size_t> order = rng.permutation(train.size());
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      std::vector<JointExample> batch;
      batch.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) batch.push_back(train[order[k]]);

      // per-example, per-view inverted dropout masks over embedded inputs
      std::vector<std::vector<std::vector<double>>> masks;
      const bool use_dropout = config.input_dropout > 0.0;
      if (use_dropout) {
        const double keep = 1.0 - config.input_dropout;
        masks.resize(batch.size());
        static const TokenSeq unk{kUnkToken};
        for (std::size_t bi = 0; bi < batch.size(); ++bi) {
          masks[bi].resize(num_views);
          for (std::size_t e = 0; e < num_views; ++e) {
            const TokenSeq& toks = detail::view_or_unk(batch[bi].views[e], unk);
            auto& mask = masks[bi][e];
            mask.resize(toks.size() * emb_in_use->dim);
            for (double& m : mask) m = rng.next_double() < keep ? 1.0 / keep : 0.0;
          }
        }
      }

      detail::JointGrads grads(model.encoders, head_dim);
      std::vector<DenseVec> emb_grads;
      if (config.finetune_embeddings)
        emb_grads.assign(tuned->words.size(), DenseVec(tuned->dim, 0.0));
      const double loss = detail::joint_batch_grads(
          model.encoders, model.head, batch, config.lambda, grads,
          config.finetune_embeddings ? &emb_grads : nullptr,
          use_dropout ? &masks : nullptr);
      if (!std::isfinite(loss))
        throw NumericError("train_joint: non-finite loss at epoch " +
                           std::to_string(epoch + 1) + ", batch " +
                           std::to_string(batches + 1));
      epoch_loss += loss;
      ++batches;

      // global norm clip across every parameter gradient
      double sq = detail::squared_sum(grads.head_w) + grads.head_b * grads.head_b;
      for (const auto& eg : grads.encoders) {
        for (const auto* lg : {&eg.forward, &eg.backward}) {
          sq += detail::squared_sum(lg->w_i) + detail::squared_sum(lg->w_f) +
                detail::squared_sum(lg->w_g) + detail::squared_sum(lg->w_o) +
                detail::squared_sum(lg->u_i) + detail::squared_sum(lg->u_f) +
                detail::squared_sum(lg->u_g) + detail::squared_sum(lg->u_o) +
                detail::squared_sum(lg->b_i) + detail::squared_sum(lg->b_f) +
                detail::squared_sum(lg->b_g) + detail::squared_sum(lg->b_o);
        }
      }
      if (config.finetune_embeddings)
        for (const auto& g : emb_grads) sq += detail::squared_sum(g);
      const double norm = std::sqrt(sq);
      const double scale = norm > config.clip_norm ? config.clip_norm / norm : 1.0;

      for (std::size_t e = 0; e < model.encoders.size(); ++e) {
        detail::for_each_gate_block(
            model.encoders[e].forward_params, grads.encoders[e].forward, accum_fwd[e],
            [&](auto& p, const auto& g, auto& a) { opt.step(p, g, a, scale); });
        detail::for_each_gate_block(
            model.encoders[e].backward_params, grads.encoders[e].backward, accum_bwd[e],
            [&](auto& p, const auto& g, auto& a) { opt.step(p, g, a, scale); });
      }
      opt.step(model.head.weights, grads.head_w, accum_head_w, scale);
      {
        const double g = grads.head_b * scale;
        accum_head_b += g * g;
        model.head.bias -= config.learning_rate * g / (std::sqrt(accum_head_b) + opt.eps);
      }
      if (config.finetune_embeddings) {
        for (std::size_t r = 0; r < emb_grads.size(); ++r) {
          for (std::size_t c = 0; c < tuned->dim; ++c) {
            const double g = emb_grads[r][c] * scale;
            if (g == 0.0) continue;
            accum_emb.at(r, c) += g * g;
            tuned->vectors.at(r, c) -=
                config.learning_rate * g / (std::sqrt(accum_emb.at(r, c)) + opt.eps);
          }
        }
        tuned->recompute_unk();
      }
    }
    model.train_loss_trace.push_back(epoch_loss / static_cast<double>(batches));

    const double f1 = dev.empty()
                          ? 0.0
                          : joint_dev_f1(model.encoders, model.head, dev, config.threshold);
    model.dev_f1_trace.push_back(f1);
    if (dev.empty() || f1 > best_f1) {
      best_f1 = f1;
      best_encoders = model.encoders;
      best_head = model.head;
      if (tuned) best_tuned = std::make_shared<EmbeddingTable>(*tuned);
      model.best_epoch = epoch;
      epochs_since_best = 0;
    } else if (++epochs_since_best >= config.patience) {
      break;
    }
  }

  model.encoders = std::move(best_encoders);
  model.head = std::move(best_head);
  if (tuned) {
    model.tuned_embeddings = best_tuned;
    for (auto& enc : model.encoders) enc.embeddings = best_tuned;
  }
  return model;
}

// ---------------------------------------------------------------------------
// Flatten/unflatten for finite-difference checks over the full joint model.

inline void flatten_lstm(const LstmParams& p, DenseVec& out) {
  for (const auto* m : {&p.w_i, &p.w_f, &p.w_g, &p.w_o, &p.u_i, &p.u_f, &p.u_g, &p.u_o})
    out.insert(out.end(), m->values.begin(), m->values.end());
  for (const auto* b : {&p.b_i, &p.b_f, &p.b_g, &p.b_o})
    out.insert(out.end(), b->begin(), b->end());
}

inline void unflatten_lstm(LstmParams& p, const DenseVec& flat, std::size_t& pos) {
  for (auto* m : {&p.w_i, &p.w_f, &p.w_g, &p.w_o, &p.u_i, &p.u_f, &p.u_g, &p.u_o}) {
    std::copy(flat.begin() + pos, flat.begin() + pos + m->values.size(), m->values.begin());
    pos += m->values.size();
  }
  for (auto* b : {&p.b_i, &p.b_f, &p.b_g, &p.b_o}) {
    std::copy(flat.begin() + pos, flat.begin() + pos + b->size(), b->begin());
    pos += b->size();
  }
}

inline DenseVec flatten_joint(const std::vector<BiLstmEncoder>& encoders,
                              const LogRegModel& head) {
  DenseVec flat;
  for (const auto& enc : encoders) {
    flatten_lstm(enc.forward_params, flat);
    flatten_lstm(enc.backward_params, flat);
  }
  flat.insert(flat.end(), head.weights.begin(), head.weights.end());
  flat.push_back(head.bias);
  return flat;
}

inline void unflatten_joint(std::vector<BiLstmEncoder>& encoders, LogRegModel& head,
                            const DenseVec& flat) {
  std::size_t pos = 0;
  for (auto& enc : encoders) {
    unflatten_lstm(enc.forward_params, flat, pos);
    unflatten_lstm(enc.backward_params, flat, pos);
  }
  std::copy(flat.begin() + pos, flat.begin() + pos + head.weights.size(),
            head.weights.begin());
  pos += head.weights.size();
  head.bias = flat[pos++];
  if (pos != flat.size()) throw DataError("unflatten_joint: size mismatch");
}

// Analytic gradient of joint_batch_loss in the same flat layout.
inline DenseVec joint_batch_grad_flat(const std::vector<BiLstmEncoder>& encoders,
                                      const LogRegModel& head,
                                      std::span<const JointExample> batch, double lambda) {
  detail::JointGrads grads(encoders, head.weights.size());
  detail::joint_batch_grads(encoders, head, batch, lambda, grads, nullptr, nullptr);
  DenseVec flat;
  for (const auto& eg : grads.encoders) {
    for (const auto* lg : {&eg.forward, &eg.backward}) {
      for (const auto* m : {&lg->w_i, &lg->w_f, &lg->w_g, &lg->w_o, &lg->u_i, &lg->u_f,
                            &lg->u_g, &lg->u_o})
        flat.insert(flat.end(), m->values.begin(), m->values.end());
      for (const auto* b : {&lg->b_i, &lg->b_f, &lg->b_g, &lg->b_o})
        flat.insert(flat.end(), b->begin(), b->end());
    }
  }
  flat.insert(flat.end(), grads.head_w.begin(), grads.head_w.end());
  flat.push_back(grads.head_b);
  return flat;
}

}  // namespace bioalert
