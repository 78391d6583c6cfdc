#pragma once

#include <random>
#include <vector>

#include "taas/autodiff.hpp"
#include "taas/matrix.hpp"
#include "taas/optim.hpp"

namespace taas {

/// How the projected topic rows combine with their normalized form:
/// additive keeps the pre-norm term outside the normalization
/// (P = FFN(b) + LayerNorm(softmax(FFN(b)))), post_ln wraps the residual
/// sum in the normalization instead.
enum class ProjectionVariant { additive, post_ln };

/// Per-token topic attention over one input sequence.
struct TopicAttentionWeights {
  Matrix raw;                     // topics x tokens, raw(t, i) = <P_t, h_i>
  std::vector<double> alpha;      // per-token mean of raw over topics
  std::vector<double> alpha_hat;  // softmax of alpha over non-PAD tokens, 0 on PAD
};

/// Two affine layers with a ReLU between them mapping topic-word rows
/// (width = topic vocabulary) into the encoder hidden space, combined with
/// a layer-normalized softmax term per the variant above.
class TopicProjection {
 public:
  TopicProjection(std::size_t topic_vocab_size, std::size_t hidden,
                  ProjectionVariant variant, ParameterSet& params,
                  std::mt19937_64& rng);

  /// beta is topics x topic_vocab; result is topics x hidden.
  NodeRef project_nodes(Graph& g, NodeRef beta);
  Matrix project(const Matrix& beta) const;

  ProjectionVariant variant() const { return variant_; }

 private:
  std::size_t input_width_;
  std::size_t hidden_;
  ProjectionVariant variant_;
  Parameter* w1_;
  Parameter* b1_;
  Parameter* w2_;
  Parameter* b2_;
  Parameter* ln_gain_;
  Parameter* ln_bias_;
};

/// Raw topic-token scores: out(t, i) = <P_t, h_i>, shape topics x tokens.
Matrix score_topics(const Matrix& h, const Matrix& P);
NodeRef score_topics_node(Graph& g, NodeRef h, NodeRef P);

/// Averages raw scores over topics, pushes PAD positions to -1e30, and
/// softmax-normalizes over the rest. mask is 1.0 per real token, 0.0 per
/// PAD; an all-PAD mask is an error.
TopicAttentionWeights pool_and_normalize(const Matrix& raw,
                                         const std::vector<double>& mask);

struct TopicAttentionNodes {
  NodeRef raw;        // topics x tokens
  NodeRef alpha;      // 1 x tokens
  NodeRef alpha_hat;  // 1 x tokens
};
TopicAttentionNodes pool_and_normalize_nodes(Graph& g, NodeRef raw,
                                             const std::vector<double>& mask);

/// Attention-weighted mixture of hidden states: alpha_hat^T h, shape 1 x H.
Matrix pool_sequence(const std::vector<double>& alpha_hat, const Matrix& h);
NodeRef pool_sequence_node(Graph& g, NodeRef alpha_hat, NodeRef h);

}  // namespace taas
