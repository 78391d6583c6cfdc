#include "taas/seq2seq.hpp"

#include <cmath>
#include <stdexcept>

#include "taas/error.hpp"

namespace taas {

namespace {

constexpr double kMaskBias = -1e30;

Matrix sinusoidal_positions(std::size_t length, std::size_t width) {
  Matrix pe(length, width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t j = 0; j < width; j += 2) {
      const double rate = std::pow(10000.0, static_cast<double>(j) /
                                                static_cast<double>(width));
      const double angle = static_cast<double>(pos) / rate;
      pe(pos, j) = std::sin(angle);
      if (j + 1 < width) pe(pos, j + 1) = std::cos(angle);
    }
  }
  return pe;
}

Matrix causal_mask(std::size_t length) {
  Matrix m(length, length);
  for (std::size_t i = 0; i < length; ++i) {
    for (std::size_t j = i + 1; j < length; ++j) m(i, j) = kMaskBias;
  }
  return m;
}

std::vector<int> unpadded_row(const std::vector<int>& row, const Matrix& mask,
                              std::size_t doc) {
  std::vector<int> ids;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (mask(doc, j) != 0.0) ids.push_back(row[j]);
  }
  return ids;
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size <= Vocabulary::kNumSpecials) {
    throw config_error("vocab_size must exceed the special tokens, got " +
                       std::to_string(vocab_size));
  }
  if (hidden == 0 || heads == 0 || encoder_layers == 0 || decoder_layers == 0 ||
      ffn_width == 0 || max_summary_len == 0) {
    throw config_error("model dimensions and layer counts must all be positive");
  }
  if (hidden % heads != 0) {
    throw config_error("hidden size " + std::to_string(hidden) +
                       " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (max_len < 2) throw config_error("max_len must be at least 2");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw config_error("dropout must lie in [0, 1), got " + std::to_string(dropout));
  }
  if (lambda < 0.0 || lambda > 1.0) {
    throw config_error("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  if (topic_vocab_size == 0) throw config_error("topic_vocab_size must be positive");
  if (topics < 2) throw config_error("topics must be at least 2");
  if (ntm_hidden == 0) throw config_error("ntm_hidden must be positive");
}

TaasModel::TaasModel(const ModelConfig& cfg) : cfg_(cfg), init_rng_(cfg.seed) {
  cfg_.validate();
  NtmConfig ntm_cfg;
  ntm_cfg.topic_vocab_size = cfg_.topic_vocab_size;
  ntm_cfg.topics = cfg_.topics;
  ntm_cfg.latent_dim = cfg_.latent_dim;
  ntm_cfg.hidden = cfg_.ntm_hidden;
  ntm_ = std::make_unique<NeuralTopicModel>(ntm_cfg, params_, init_rng_);
  projection_ = std::make_unique<TopicProjection>(cfg_.topic_vocab_size, cfg_.hidden,
                                                  cfg_.projection_variant, params_,
                                                  init_rng_);
  embed_token_ =
      &params_.create("embed.token", xavier_uniform(cfg_.vocab_size, cfg_.hidden, init_rng_));
  for (std::size_t l = 0; l < cfg_.encoder_layers; ++l) {
    const std::string prefix = "enc." + std::to_string(l);
    EncoderLayer layer;
    layer.ln1 = make_ln(prefix + ".ln1");
    layer.attn = make_attention(prefix + ".attn");
    layer.ln2 = make_ln(prefix + ".ln2");
    layer.ffn = make_ffn(prefix + ".ffn");
    enc_layers_.push_back(layer);
  }
  enc_final_ln_ = make_ln("enc.final_ln");
  for (std::size_t l = 0; l < cfg_.decoder_layers; ++l) {
    const std::string prefix = "dec." + std::to_string(l);
    DecoderLayer layer;
    layer.ln1 = make_ln(prefix + ".ln1");
    layer.self_attn = make_attention(prefix + ".self");
    layer.ln2 = make_ln(prefix + ".ln2");
    layer.cross_attn = make_attention(prefix + ".cross");
    layer.ln3 = make_ln(prefix + ".ln3");
    layer.ffn = make_ffn(prefix + ".ffn");
    dec_layers_.push_back(layer);
  }
  dec_final_ln_ = make_ln("dec.final_ln");
  out_w_ = &params_.create("out.w", xavier_uniform(cfg_.hidden, cfg_.vocab_size, init_rng_));
  out_b_ = &params_.create("out.b", Matrix(1, cfg_.vocab_size));
}

TaasModel::LayerNormParams TaasModel::make_ln(const std::string& prefix) {
  LayerNormParams ln;
  ln.gain = &params_.create(prefix + ".gain", Matrix(1, cfg_.hidden, 1.0));
  ln.bias = &params_.create(prefix + ".bias", Matrix(1, cfg_.hidden));
  return ln;
}

TaasModel::AttentionParams TaasModel::make_attention(const std::string& prefix) {
  AttentionParams p;
  const std::size_t head_dim = cfg_.hidden / cfg_.heads;
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    const std::string tag = std::to_string(h);
    p.wq.push_back(&params_.create(prefix + ".q" + tag,
                                   xavier_uniform(cfg_.hidden, head_dim, init_rng_)));
    p.wk.push_back(&params_.create(prefix + ".k" + tag,
                                   xavier_uniform(cfg_.hidden, head_dim, init_rng_)));
    p.wv.push_back(&params_.create(prefix + ".v" + tag,
                                   xavier_uniform(cfg_.hidden, head_dim, init_rng_)));
  }
  p.out_w = &params_.create(prefix + ".out.w",
                            xavier_uniform(cfg_.hidden, cfg_.hidden, init_rng_));
  p.out_b = &params_.create(prefix + ".out.b", Matrix(1, cfg_.hidden));
  return p;
}

TaasModel::FfnParams TaasModel::make_ffn(const std::string& prefix) {
  FfnParams f;
  f.w1 = &params_.create(prefix + ".w1", xavier_uniform(cfg_.hidden, cfg_.ffn_width, init_rng_));
  f.b1 = &params_.create(prefix + ".b1", Matrix(1, cfg_.ffn_width));
  f.w2 = &params_.create(prefix + ".w2", xavier_uniform(cfg_.ffn_width, cfg_.hidden, init_rng_));
  f.b2 = &params_.create(prefix + ".b2", Matrix(1, cfg_.hidden));
  return f;
}

bool TaasModel::is_frozen(const Parameter& p) const {
  if (!cfg_.freeze_encoder) return false;
  return p.name == "embed.token" || p.name.rfind("enc.", 0) == 0;
}

NodeRef TaasModel::maybe_dropout(Graph& g, NodeRef x, bool train,
                                 std::mt19937_64& noise_rng) {
  if (!train || cfg_.dropout == 0.0) return x;
  const std::size_t rows = g.value(x).rows, cols = g.value(x).cols;
  return g.hadamard(x, g.constant(dropout_mask(rows, cols, cfg_.dropout, noise_rng)));
}

NodeRef TaasModel::embed(Graph& g, const std::vector<int>& ids, bool train,
                         std::mt19937_64& noise_rng) {
  NodeRef e = g.gather_rows(g.param(*embed_token_), ids);
  e = g.scale(e, std::sqrt(static_cast<double>(cfg_.hidden)));
  if (cfg_.position_encoding) {
    e = g.add(e, g.constant(sinusoidal_positions(ids.size(), cfg_.hidden)));
  }
  return maybe_dropout(g, e, train, noise_rng);
}

NodeRef TaasModel::layer_norm_of(Graph& g, const LayerNormParams& ln, NodeRef x) {
  return g.layer_norm(x, g.param(*ln.gain), g.param(*ln.bias));
}

NodeRef TaasModel::attention(Graph& g, const AttentionParams& p, NodeRef queries,
                             NodeRef memory, const Matrix* mask) {
  const std::size_t head_dim = cfg_.hidden / cfg_.heads;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(head_dim));
  NodeRef merged = 0;
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    NodeRef q = g.matmul(queries, g.param(*p.wq[h]));
    NodeRef k = g.matmul(memory, g.param(*p.wk[h]));
    NodeRef v = g.matmul(memory, g.param(*p.wv[h]));
    NodeRef scores = g.scale(g.matmul(q, g.transpose(k)), inv_sqrt_d);
    if (mask) scores = g.add(scores, g.constant(*mask));
    NodeRef ctx = g.matmul(g.softmax_rows(scores), v);
    merged = h == 0 ? ctx : g.concat_cols(merged, ctx);
  }
  return g.add_row(g.matmul(merged, g.param(*p.out_w)), g.param(*p.out_b));
}

NodeRef TaasModel::encoder_forward(Graph& g, NodeRef x, bool train,
                                   std::mt19937_64& noise_rng) {
  for (const EncoderLayer& layer : enc_layers_) {
    NodeRef u = layer_norm_of(g, layer.ln1, x);
    NodeRef a = attention(g, layer.attn, u, u, nullptr);
    x = g.add(x, maybe_dropout(g, a, train, noise_rng));
    NodeRef v = layer_norm_of(g, layer.ln2, x);
    NodeRef inner = g.relu(g.add_row(g.matmul(v, g.param(*layer.ffn.w1)),
                                     g.param(*layer.ffn.b1)));
    NodeRef f = g.add_row(g.matmul(inner, g.param(*layer.ffn.w2)), g.param(*layer.ffn.b2));
    x = g.add(x, maybe_dropout(g, f, train, noise_rng));
  }
  return layer_norm_of(g, enc_final_ln_, x);
}

NodeRef TaasModel::decoder_forward(Graph& g, NodeRef y, NodeRef memory, bool train,
                                   std::mt19937_64& noise_rng) {
  const Matrix causal = causal_mask(g.value(y).rows);
  for (const DecoderLayer& layer : dec_layers_) {
    NodeRef u = layer_norm_of(g, layer.ln1, y);
    NodeRef sa = attention(g, layer.self_attn, u, u, &causal);
    y = g.add(y, maybe_dropout(g, sa, train, noise_rng));
    NodeRef v = layer_norm_of(g, layer.ln2, y);
    NodeRef ca = attention(g, layer.cross_attn, v, memory, nullptr);
    y = g.add(y, maybe_dropout(g, ca, train, noise_rng));
    NodeRef w = layer_norm_of(g, layer.ln3, y);
    NodeRef inner = g.relu(g.add_row(g.matmul(w, g.param(*layer.ffn.w1)),
                                     g.param(*layer.ffn.b1)));
    NodeRef f = g.add_row(g.matmul(inner, g.param(*layer.ffn.w2)), g.param(*layer.ffn.b2));
    y = g.add(y, maybe_dropout(g, f, train, noise_rng));
  }
  return layer_norm_of(g, dec_final_ln_, y);
}

TaasModel::EncodedDoc TaasModel::encode_and_pool(Graph& g, const std::vector<int>& ids,
                                                 NodeRef P, bool train,
                                                 std::mt19937_64& noise_rng) {
  if (ids.empty()) throw std::invalid_argument("cannot encode an empty token sequence");
  if (ids.size() > cfg_.max_len) {
    throw std::invalid_argument("input length " + std::to_string(ids.size()) +
                                " exceeds max_len " + std::to_string(cfg_.max_len));
  }
  EncodedDoc doc;
  NodeRef x = embed(g, ids, train, noise_rng);
  doc.h = encoder_forward(g, x, train, noise_rng);
  switch (cfg_.pooling_mode) {
    case PoolingMode::topic: {
      NodeRef raw = score_topics_node(g, doc.h, P);
      std::vector<double> mask(ids.size(), 1.0);
      TopicAttentionNodes attn = pool_and_normalize_nodes(g, raw, mask);
      doc.s = pool_sequence_node(g, attn.alpha_hat, doc.h);
      doc.alpha_hat = attn.alpha_hat;
      doc.has_alpha = true;
      break;
    }
    case PoolingMode::cls: {
      Matrix pick(1, ids.size());
      pick(0, 0) = 1.0;
      doc.s = g.matmul(g.constant(std::move(pick)), doc.h);
      break;
    }
    case PoolingMode::sum: {
      doc.s = g.matmul(g.constant(Matrix(1, ids.size(), 1.0)), doc.h);
      break;
    }
  }
  return doc;
}

NodeRef TaasModel::decode_logits_node(Graph& g, const std::vector<int>& prefix,
                                      NodeRef h, NodeRef s, bool train,
                                      std::mt19937_64& noise_rng) {
  if (prefix.empty()) throw std::invalid_argument("decoder prefix is empty");
  if (prefix.front() != Vocabulary::kBos) {
    throw std::invalid_argument("decoder prefix must start with BOS");
  }
  NodeRef y = embed(g, prefix, train, noise_rng);
  NodeRef memory = h;
  if (cfg_.s_injection == SInjection::memory_slot) {
    memory = g.concat_rows(h, s);
  } else {
    y = g.add_row(y, s);
  }
  NodeRef dec = decoder_forward(g, y, memory, train, noise_rng);
  return g.add_row(g.matmul(dec, g.param(*out_w_)), g.param(*out_b_));
}

TaasModel::BatchLossNodes TaasModel::build_loss(Graph& g, const Batch& batch,
                                                const ForwardOptions& opt) {
  if (batch.size() == 0) throw std::invalid_argument("cannot score an empty batch");
  if (batch.target_ids.size() != batch.size() || batch.bow.rows != batch.size()) {
    throw std::invalid_argument("batch views disagree on document count");
  }
  std::mt19937_64 noise_rng(opt.noise_seed);

  NodeRef bow = g.constant(batch.bow);
  const Matrix* noise_ptr = nullptr;
  Matrix noise;
  if (opt.train) {
    noise = Matrix(batch.size(), ntm_->config().effective_latent_dim());
    std::normal_distribution<double> normal(0.0, 1.0);
    for (double& v : noise.data) v = normal(noise_rng);
    noise_ptr = &noise;
  }
  NodeRef l_ntm = ntm_->loss_node(g, bow, noise_ptr);

  NodeRef P = 0;
  if (cfg_.pooling_mode == PoolingMode::topic) {
    P = projection_->project_nodes(g, ntm_->beta_node(g));
  }

  NodeRef ce_total = 0;
  bool have_ce = false;
  std::size_t token_count = 0;
  for (std::size_t d = 0; d < batch.size(); ++d) {
    const std::vector<int> in_ids = unpadded_row(batch.input_ids[d], batch.input_mask, d);
    const std::vector<int> tg_ids = unpadded_row(batch.target_ids[d], batch.target_mask, d);
    if (tg_ids.empty()) {
      throw std::invalid_argument("batch document " + batch.ids[d] + " has no target tokens");
    }
    EncodedDoc enc = encode_and_pool(g, in_ids, P, opt.train, noise_rng);
    std::vector<int> dec_in(tg_ids.size());
    dec_in[0] = Vocabulary::kBos;
    std::copy(tg_ids.begin(), tg_ids.end() - 1, dec_in.begin() + 1);
    NodeRef logits = decode_logits_node(g, dec_in, enc.h, enc.s, opt.train, noise_rng);
    NodeRef ce = g.cross_entropy_sum(logits, tg_ids,
                                     std::vector<double>(tg_ids.size(), 1.0));
    ce_total = have_ce ? g.add(ce_total, ce) : ce;
    have_ce = true;
    token_count += tg_ids.size();
  }

  BatchLossNodes out;
  out.l_ntm = l_ntm;
  out.l_sum = g.scale(ce_total, 1.0 / static_cast<double>(token_count));
  out.combined = g.add(g.scale(out.l_ntm, cfg_.lambda),
                       g.scale(out.l_sum, 1.0 - cfg_.lambda));
  out.values.l_ntm = g.value(out.l_ntm).data[0];
  out.values.l_sum = g.value(out.l_sum).data[0];
  out.values.combined = g.value(out.combined).data[0];
  out.values.lambda = cfg_.lambda;
  return out;
}

TaasModel::DocState TaasModel::encode_document_state(const std::vector<int>& input_ids,
                                                     const std::vector<double>& bow) {
  if (bow.size() != cfg_.topic_vocab_size) {
    throw std::invalid_argument("bag-of-words width " + std::to_string(bow.size()) +
                                " does not match topic vocabulary size " +
                                std::to_string(cfg_.topic_vocab_size));
  }
  Graph g;
  std::mt19937_64 unused(0);
  NodeRef P = 0;
  if (cfg_.pooling_mode == PoolingMode::topic) {
    P = projection_->project_nodes(g, ntm_->beta_node(g));
  }
  EncodedDoc enc = encode_and_pool(g, input_ids, P, false, unused);
  DocState state;
  state.input_ids = input_ids;
  state.h = g.value(enc.h);
  state.s = g.value(enc.s);
  if (enc.has_alpha) {
    const Matrix& a = g.value(enc.alpha_hat);
    state.alpha_hat.assign(a.data.begin(), a.data.end());
  }
  return state;
}

Matrix TaasModel::decode_logits(const DocState& state, const std::vector<int>& prefix) {
  Graph g;
  std::mt19937_64 unused(0);
  NodeRef logits = decode_logits_node(g, prefix, g.constant(state.h),
                                      g.constant(state.s), false, unused);
  return g.value(logits);
}

}  // namespace taas
