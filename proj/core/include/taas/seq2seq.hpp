#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "taas/autodiff.hpp"
#include "taas/corpus.hpp"
#include "taas/matrix.hpp"
#include "taas/ntm.hpp"
#include "taas/optim.hpp"
#include "taas/topic_attention.hpp"

namespace taas {

/// How the pooled sequence vector s is computed from encoder states.
enum class PoolingMode { topic, cls, sum };

/// How s reaches the decoder: as one extra always-visible cross-attention
/// memory row, or added to every decoder input embedding.
enum class SInjection { memory_slot, input_add };

struct ModelConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden = 128;
  std::size_t heads = 2;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t ffn_width = 256;
  std::size_t max_len = 256;
  std::size_t max_summary_len = 64;
  double dropout = 0.1;
  PoolingMode pooling_mode = PoolingMode::topic;
  ProjectionVariant projection_variant = ProjectionVariant::additive;
  SInjection s_injection = SInjection::memory_slot;
  double lambda = 0.0;  // weight on the topic-model loss in the joint objective
  bool freeze_encoder = false;
  std::size_t topics = 10;
  std::size_t topic_vocab_size = 0;
  std::size_t latent_dim = 0;  // 0 means same as topics
  std::size_t ntm_hidden = 64;
  std::uint64_t seed = 42;
  // Test knob: pure self-attention is permutation-equivariant only without
  // position information.
  bool position_encoding = true;

  void validate() const;
};

struct LossBreakdown {
  double l_ntm = 0.0;
  double l_sum = 0.0;
  double combined = 0.0;
  double lambda = 0.0;
};

/// Joint summarization model: topic model and projection feeding topic
/// attention over a pre-norm transformer encoder, whose pooled vector s
/// conditions a causal transformer decoder. All parameters are created in
/// the constructor in a fixed order regardless of pooling mode, so mode
/// only changes which forward path runs.
class TaasModel {
 public:
  explicit TaasModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  NeuralTopicModel& ntm() { return *ntm_; }
  TopicProjection& projection() { return *projection_; }

  /// True for parameters excluded from updates under freeze_encoder
  /// (token embedding and the whole encoder stack).
  bool is_frozen(const Parameter& p) const;

  struct ForwardOptions {
    bool train = false;           // dropout on, one reparameterized topic draw
    std::uint64_t noise_seed = 0;  // all stochastic draws for this step
  };

  struct BatchLossNodes {
    NodeRef l_ntm;
    NodeRef l_sum;
    NodeRef combined;
    LossBreakdown values;
  };

  /// Builds the full joint loss for one batch in g. Every pair in the batch
  /// must carry a summary. combined = lambda*l_ntm + (1-lambda)*l_sum with
  /// l_sum averaged over all non-PAD target tokens in the batch.
  BatchLossNodes build_loss(Graph& g, const Batch& batch, const ForwardOptions& opt);

  /// Frozen per-document encode state for generation: encoder output, the
  /// pooled vector s, and (in topic mode) the per-token topic attention.
  struct DocState {
    std::vector<int> input_ids;
    Matrix h;                       // tokens x hidden
    Matrix s;                       // 1 x hidden
    std::vector<double> alpha_hat;  // empty unless topic pooling
  };

  /// Evaluation-mode encode of one document (no dropout, mean topic path).
  DocState encode_document_state(const std::vector<int>& input_ids,
                                 const std::vector<double>& bow);

  /// Teacher-forced decoder logits for a BOS-prefixed prefix against a
  /// frozen DocState; row t scores the token following prefix position t.
  Matrix decode_logits(const DocState& state, const std::vector<int>& prefix);

 private:
  struct LayerNormParams {
    Parameter* gain;
    Parameter* bias;
  };
  struct AttentionParams {
    std::vector<Parameter*> wq, wk, wv;  // one hidden x head_dim matrix per head
    Parameter* out_w;
    Parameter* out_b;
  };
  struct FfnParams {
    Parameter* w1;
    Parameter* b1;
    Parameter* w2;
    Parameter* b2;
  };
  struct EncoderLayer {
    LayerNormParams ln1, ln2;
    AttentionParams attn;
    FfnParams ffn;
  };
  struct DecoderLayer {
    LayerNormParams ln1, ln2, ln3;
    AttentionParams self_attn, cross_attn;
    FfnParams ffn;
  };

  LayerNormParams make_ln(const std::string& prefix);
  AttentionParams make_attention(const std::string& prefix);
  FfnParams make_ffn(const std::string& prefix);

  NodeRef embed(Graph& g, const std::vector<int>& ids, bool train,
                std::mt19937_64& noise_rng);
  NodeRef maybe_dropout(Graph& g, NodeRef x, bool train, std::mt19937_64& noise_rng);
  /// queries: rows x hidden (already normalized); memory: rows x hidden.
  /// mask, when non-null, is added to every head's scores before softmax.
  NodeRef attention(Graph& g, const AttentionParams& p, NodeRef queries,
                    NodeRef memory, const Matrix* mask);
  NodeRef encoder_forward(Graph& g, NodeRef x, bool train, std::mt19937_64& noise_rng);
  NodeRef decoder_forward(Graph& g, NodeRef y, NodeRef memory, bool train,
                          std::mt19937_64& noise_rng);
  NodeRef layer_norm_of(Graph& g, const LayerNormParams& ln, NodeRef x);

  /// Shared by training and inference: encoder output and pooled s for one
  /// document, as graph nodes. P must be valid in topic mode, ignored else.
  struct EncodedDoc {
    NodeRef h;
    NodeRef s;
    NodeRef alpha_hat = 0;
    bool has_alpha = false;
  };
  EncodedDoc encode_and_pool(Graph& g, const std::vector<int>& ids, NodeRef P,
                             bool train, std::mt19937_64& noise_rng);
  /// Decoder logits node for teacher-forced input ids against (h, s).
  NodeRef decode_logits_node(Graph& g, const std::vector<int>& prefix, NodeRef h,
                             NodeRef s, bool train, std::mt19937_64& noise_rng);

  ModelConfig cfg_;
  ParameterSet params_;
  std::mt19937_64 init_rng_;
  std::unique_ptr<NeuralTopicModel> ntm_;
  std::unique_ptr<TopicProjection> projection_;
  Parameter* embed_token_;
  std::vector<EncoderLayer> enc_layers_;
  LayerNormParams enc_final_ln_;
  std::vector<DecoderLayer> dec_layers_;
  LayerNormParams dec_final_ln_;
  Parameter* out_w_;
  Parameter* out_b_;
};

}  // namespace taas
