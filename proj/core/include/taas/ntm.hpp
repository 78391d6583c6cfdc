#pragma once

#include <cstdint>
#include <random>

#include "taas/autodiff.hpp"
#include "taas/matrix.hpp"
#include "taas/optim.hpp"

namespace taas {

struct NtmConfig {
  std::size_t topic_vocab_size = 0;  // bag-of-words width
  std::size_t topics = 10;           // K, rows of the topic-word matrix
  std::size_t latent_dim = 0;        // Gaussian dimension, 0 means same as topics
  std::size_t hidden = 64;           // width of the shared inference layer

  std::size_t effective_latent_dim() const { return latent_dim ? latent_dim : topics; }
  void validate() const;
};

/// Per-document inference result: Gaussian posterior parameters, the latent
/// draw, and the softmax topic proportions derived from it.
struct DocTopicSample {
  Matrix mu;
  Matrix logvar;
  Matrix omega;
  Matrix z;  // rows are valid distributions over topics
};

/// 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar): divergence of a diagonal
/// Gaussian from the standard normal. Non-negative, zero iff mu=0, logvar=0.
double gaussian_kl_value(const Matrix& mu, const Matrix& logvar);

/// Variational topic model over bag-of-words vectors. A shared softplus
/// layer feeds two affine heads (posterior mean and log-variance); the
/// reparameterized draw maps through an affine layer and softmax to topic
/// proportions z; a weight matrix row per topic yields the topic-word
/// distribution beta via row softmax. The training loss is the mean over
/// documents of KL minus reconstruction log-likelihood.
class NeuralTopicModel {
 public:
  /// Registers parameters (xavier weights, zero biases) into params.
  NeuralTopicModel(const NtmConfig& cfg, ParameterSet& params, std::mt19937_64& rng);

  struct InferNodes {
    NodeRef mu, logvar, omega, z;
  };

  /// bow is a B x V node. noise, when present, must be B x G standard-normal
  /// draws for the reparameterized path; null noise takes omega = mu.
  InferNodes infer_nodes(Graph& g, NodeRef bow, const Matrix* noise);

  /// K x V row-stochastic topic-word distribution, differentiable.
  NodeRef beta_node(Graph& g);

  /// Sum over all documents of count-weighted log mixture probabilities,
  /// log floor 1e-10. bow must be the same node passed to infer_nodes.
  NodeRef reconstruction_node(Graph& g, NodeRef z, NodeRef bow);

  /// 1x1 loss node: mean over the batch of (KL - reconstruction).
  NodeRef loss_node(Graph& g, NodeRef bow, const Matrix* noise);

  /// Value-only paths (no gradients), built on parameter snapshots.
  DocTopicSample infer(const Matrix& bow, bool sample, std::mt19937_64& rng) const;
  Matrix beta() const;
  double reconstruct_log_likelihood(const Matrix& z, const Matrix& bow) const;
  double loss(const Matrix& bow, const Matrix* noise) const;

  const NtmConfig& config() const { return cfg_; }

 private:
  NtmConfig cfg_;
  Parameter* f_w_;
  Parameter* f_b_;
  Parameter* mu_w_;
  Parameter* mu_b_;
  Parameter* lv_w_;
  Parameter* lv_b_;
  Parameter* z_w_;
  Parameter* z_b_;
  Parameter* dec_w_;
};

}  // namespace taas
