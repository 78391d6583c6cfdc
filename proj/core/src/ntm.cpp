#include "taas/ntm.hpp"

#include <cmath>
#include <stdexcept>

#include "taas/error.hpp"

namespace taas {

namespace {

constexpr double kLogFloor = 1e-10;

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out = matmul(x, w);
  for (std::size_t i = 0; i < out.rows; ++i) {
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += b.data[j];
  }
  return out;
}

Matrix softplus_m(Matrix m) {
  for (double& v : m.data) v = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  return m;
}

}  // namespace

void NtmConfig::validate() const {
  if (topic_vocab_size == 0) throw config_error("topic vocabulary size must be positive");
  if (topics < 2) throw config_error("topic count must be at least 2");
  if (hidden == 0) throw config_error("topic model hidden width must be positive");
}

double gaussian_kl_value(const Matrix& mu, const Matrix& logvar) {
  if (!mu.same_shape(logvar)) {
    throw std::invalid_argument("gaussian_kl_value: shape mismatch " + mu.shape_str() +
                                " vs " + logvar.shape_str());
  }
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    s += std::exp(logvar.data[i]) + mu.data[i] * mu.data[i] - 1.0 - logvar.data[i];
  }
  return 0.5 * s;
}

NeuralTopicModel::NeuralTopicModel(const NtmConfig& cfg, ParameterSet& params,
                                   std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.validate();
  const std::size_t V = cfg_.topic_vocab_size;
  const std::size_t K = cfg_.topics;
  const std::size_t G = cfg_.effective_latent_dim();
  const std::size_t Hn = cfg_.hidden;
  f_w_ = &params.create("ntm.f.w", xavier_uniform(V, Hn, rng));
  f_b_ = &params.create("ntm.f.b", Matrix(1, Hn));
  mu_w_ = &params.create("ntm.mu.w", xavier_uniform(Hn, G, rng));
  mu_b_ = &params.create("ntm.mu.b", Matrix(1, G));
  lv_w_ = &params.create("ntm.logvar.w", xavier_uniform(Hn, G, rng));
  lv_b_ = &params.create("ntm.logvar.b", Matrix(1, G));
  z_w_ = &params.create("ntm.z.w", xavier_uniform(G, K, rng));
  z_b_ = &params.create("ntm.z.b", Matrix(1, K));
  dec_w_ = &params.create("ntm.dec.w", xavier_uniform(K, V, rng));
}

NeuralTopicModel::InferNodes NeuralTopicModel::infer_nodes(Graph& g, NodeRef bow,
                                                           const Matrix* noise) {
  // Copies, not references: growing the graph reallocates node storage.
  const std::size_t batch_rows = g.value(bow).rows;
  const std::size_t bow_cols = g.value(bow).cols;
  if (bow_cols != cfg_.topic_vocab_size) {
    throw std::invalid_argument("bag-of-words width " + std::to_string(bow_cols) +
                                " does not match topic vocabulary size " +
                                std::to_string(cfg_.topic_vocab_size));
  }
  NodeRef hidden = g.softplus(g.add_row(g.matmul(bow, g.param(*f_w_)), g.param(*f_b_)));
  InferNodes out;
  out.mu = g.add_row(g.matmul(hidden, g.param(*mu_w_)), g.param(*mu_b_));
  out.logvar = g.add_row(g.matmul(hidden, g.param(*lv_w_)), g.param(*lv_b_));
  if (noise) {
    if (noise->rows != batch_rows || noise->cols != cfg_.effective_latent_dim()) {
      throw std::invalid_argument("noise shape " + noise->shape_str() +
                                  " does not match posterior shape");
    }
    NodeRef sigma = g.exp(g.scale(out.logvar, 0.5));
    out.omega = g.add(out.mu, g.hadamard(sigma, g.constant(*noise)));
  } else {
    out.omega = out.mu;
  }
  out.z = g.softmax_rows(g.add_row(g.matmul(out.omega, g.param(*z_w_)), g.param(*z_b_)));
  return out;
}

NodeRef NeuralTopicModel::beta_node(Graph& g) {
  return g.softmax_rows(g.param(*dec_w_));
}

NodeRef NeuralTopicModel::reconstruction_node(Graph& g, NodeRef z, NodeRef bow) {
  NodeRef mixture = g.matmul(z, beta_node(g));
  return g.sum_all(g.hadamard(g.constant(g.value(bow)), g.log_eps(mixture, kLogFloor)));
}

NodeRef NeuralTopicModel::loss_node(Graph& g, NodeRef bow, const Matrix* noise) {
  const std::size_t batch = g.value(bow).rows;
  if (batch == 0) throw std::invalid_argument("topic model loss needs a non-empty batch");
  InferNodes inferred = infer_nodes(g, bow, noise);
  NodeRef kl = g.gaussian_kl(inferred.mu, inferred.logvar);
  NodeRef recon = reconstruction_node(g, inferred.z, bow);
  return g.scale(g.sub(kl, recon), 1.0 / static_cast<double>(batch));
}

DocTopicSample NeuralTopicModel::infer(const Matrix& bow, bool sample,
                                       std::mt19937_64& rng) const {
  DocTopicSample out;
  Matrix hidden = softplus_m(affine(bow, f_w_->value, f_b_->value));
  out.mu = affine(hidden, mu_w_->value, mu_b_->value);
  out.logvar = affine(hidden, lv_w_->value, lv_b_->value);
  if (sample) {
    std::normal_distribution<double> normal(0.0, 1.0);
    out.omega = out.mu;
    for (std::size_t i = 0; i < out.omega.size(); ++i) {
      out.omega.data[i] += std::exp(0.5 * out.logvar.data[i]) * normal(rng);
    }
  } else {
    out.omega = out.mu;
  }
  out.z = softmax_rows(affine(out.omega, z_w_->value, z_b_->value));
  return out;
}

Matrix NeuralTopicModel::beta() const { return softmax_rows(dec_w_->value); }

double NeuralTopicModel::reconstruct_log_likelihood(const Matrix& z,
                                                    const Matrix& bow) const {
  Matrix mixture = matmul(z, beta());
  if (!mixture.same_shape(bow)) {
    throw std::invalid_argument("bag-of-words shape " + bow.shape_str() +
                                " does not match mixture " + mixture.shape_str());
  }
  double total = 0.0;
  for (std::size_t i = 0; i < bow.size(); ++i) {
    if (bow.data[i] != 0.0) total += bow.data[i] * std::log(mixture.data[i] + kLogFloor);
  }
  return total;
}

double NeuralTopicModel::loss(const Matrix& bow, const Matrix* noise) const {
  if (bow.rows == 0) throw std::invalid_argument("topic model loss needs a non-empty batch");
  std::mt19937_64 unused(0);
  DocTopicSample s = infer(bow, false, unused);
  if (noise) {
    if (noise->rows != bow.rows || noise->cols != cfg_.effective_latent_dim()) {
      throw std::invalid_argument("noise shape " + noise->shape_str() +
                                  " does not match posterior shape");
    }
    for (std::size_t i = 0; i < s.omega.size(); ++i) {
      s.omega.data[i] = s.mu.data[i] + std::exp(0.5 * s.logvar.data[i]) * noise->data[i];
    }
    s.z = softmax_rows(affine(s.omega, z_w_->value, z_b_->value));
  }
  const double kl = gaussian_kl_value(s.mu, s.logvar);
  const double recon = reconstruct_log_likelihood(s.z, bow);
  // Reciprocal multiply mirrors the graph's scale node bit for bit.
  return (kl - recon) * (1.0 / static_cast<double>(bow.rows));
}

}  // namespace taas
