#include "taas/topic_attention.hpp"

#include <algorithm>
#include <stdexcept>

namespace taas {

namespace {

constexpr double kMaskBias = -1e30;

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += b.data[j];
  }
  return out;
}

}  // namespace

TopicProjection::TopicProjection(std::size_t topic_vocab_size, std::size_t hidden,
                                 ProjectionVariant variant, ParameterSet& params,
                                 std::mt19937_64& rng)
    : input_width_(topic_vocab_size), hidden_(hidden), variant_(variant) {
  if (topic_vocab_size == 0 || hidden == 0) {
    throw std::invalid_argument("topic projection needs positive widths");
  }
  w1_ = &params.create("proj.ffn1.w", xavier_uniform(topic_vocab_size, hidden, rng));
  b1_ = &params.create("proj.ffn1.b", Matrix(1, hidden));
  w2_ = &params.create("proj.ffn2.w", xavier_uniform(hidden, hidden, rng));
  b2_ = &params.create("proj.ffn2.b", Matrix(1, hidden));
  ln_gain_ = &params.create("proj.ln.gain", Matrix(1, hidden, 1.0));
  ln_bias_ = &params.create("proj.ln.bias", Matrix(1, hidden));
}

NodeRef TopicProjection::project_nodes(Graph& g, NodeRef beta) {
  if (g.value(beta).cols != input_width_) {
    throw std::invalid_argument("topic rows have width " +
                                std::to_string(g.value(beta).cols) + ", expected " +
                                std::to_string(input_width_));
  }
  NodeRef inner = g.relu(g.add_row(g.matmul(beta, g.param(*w1_)), g.param(*b1_)));
  NodeRef ffn = g.add_row(g.matmul(inner, g.param(*w2_)), g.param(*b2_));
  NodeRef soft = g.softmax_rows(ffn);
  if (variant_ == ProjectionVariant::additive) {
    return g.add(ffn, g.layer_norm(soft, g.param(*ln_gain_), g.param(*ln_bias_)));
  }
  return g.layer_norm(g.add(ffn, soft), g.param(*ln_gain_), g.param(*ln_bias_));
}

Matrix TopicProjection::project(const Matrix& beta) const {
  if (beta.cols != input_width_) {
    throw std::invalid_argument("topic rows have width " + std::to_string(beta.cols) +
                                ", expected " + std::to_string(input_width_));
  }
  Matrix inner = affine(beta, w1_->value, b1_->value);
  for (double& v : inner.data) v = v > 0.0 ? v : 0.0;
  Matrix ffn = affine(inner, w2_->value, b2_->value);
  Matrix soft = softmax_rows(ffn);
  std::span<const double> gain(ln_gain_->value.data);
  std::span<const double> bias(ln_bias_->value.data);
  if (variant_ == ProjectionVariant::additive) {
    return add(ffn, layer_norm(soft, gain, bias));
  }
  return layer_norm(add(ffn, soft), gain, bias);
}

Matrix score_topics(const Matrix& h, const Matrix& P) {
  if (h.cols != P.cols) {
    throw std::invalid_argument("hidden width " + std::to_string(h.cols) +
                                " does not match topic embedding width " +
                                std::to_string(P.cols));
  }
  return matmul_nt(P, h);
}

NodeRef score_topics_node(Graph& g, NodeRef h, NodeRef P) {
  if (g.value(h).cols != g.value(P).cols) {
    throw std::invalid_argument("hidden width " + std::to_string(g.value(h).cols) +
                                " does not match topic embedding width " +
                                std::to_string(g.value(P).cols));
  }
  return g.matmul(P, g.transpose(h));
}

TopicAttentionWeights pool_and_normalize(const Matrix& raw,
                                         const std::vector<double>& mask) {
  if (mask.size() != raw.cols) {
    throw std::invalid_argument("mask length " + std::to_string(mask.size()) +
                                " does not match token count " + std::to_string(raw.cols));
  }
  if (std::all_of(mask.begin(), mask.end(), [](double m) { return m == 0.0; })) {
    throw std::invalid_argument("every position is PAD; nothing to attend to");
  }
  TopicAttentionWeights out;
  out.raw = raw;
  out.alpha.assign(raw.cols, 0.0);
  for (std::size_t t = 0; t < raw.rows; ++t) {
    for (std::size_t i = 0; i < raw.cols; ++i) out.alpha[i] += raw(t, i);
  }
  // Multiply by the reciprocal, exactly as the graph's rows_mean does, so
  // the two paths stay bit-identical.
  const double invk = 1.0 / static_cast<double>(raw.rows);
  for (double& a : out.alpha) a *= invk;

  Matrix logits(1, raw.cols);
  for (std::size_t i = 0; i < raw.cols; ++i) {
    logits(0, i) = out.alpha[i] + (mask[i] != 0.0 ? 0.0 : kMaskBias);
  }
  Matrix normed = softmax_rows(logits);
  out.alpha_hat.assign(normed.data.begin(), normed.data.end());
  return out;
}

TopicAttentionNodes pool_and_normalize_nodes(Graph& g, NodeRef raw,
                                             const std::vector<double>& mask) {
  // Copy, not a reference: growing the graph reallocates node storage.
  const std::size_t token_count = g.value(raw).cols;
  if (mask.size() != token_count) {
    throw std::invalid_argument("mask length " + std::to_string(mask.size()) +
                                " does not match token count " +
                                std::to_string(token_count));
  }
  if (std::all_of(mask.begin(), mask.end(), [](double m) { return m == 0.0; })) {
    throw std::invalid_argument("every position is PAD; nothing to attend to");
  }
  TopicAttentionNodes out;
  out.raw = raw;
  out.alpha = g.rows_mean(raw);
  Matrix bias(1, token_count);
  for (std::size_t i = 0; i < token_count; ++i) bias(0, i) = mask[i] != 0.0 ? 0.0 : kMaskBias;
  out.alpha_hat = g.softmax_rows(g.add(out.alpha, g.constant(std::move(bias))));
  return out;
}

Matrix pool_sequence(const std::vector<double>& alpha_hat, const Matrix& h) {
  if (alpha_hat.size() != h.rows) {
    throw std::invalid_argument("attention length " + std::to_string(alpha_hat.size()) +
                                " does not match hidden rows " + std::to_string(h.rows));
  }
  Matrix weights(1, h.rows);
  std::copy(alpha_hat.begin(), alpha_hat.end(), weights.data.begin());
  return matmul(weights, h);
}

NodeRef pool_sequence_node(Graph& g, NodeRef alpha_hat, NodeRef h) {
  return g.matmul(alpha_hat, h);
}

}  // namespace taas
