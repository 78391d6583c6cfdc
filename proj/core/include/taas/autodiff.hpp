#pragma once

#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

#include "taas/matrix.hpp"
#include "taas/optim.hpp"

namespace taas {

using NodeRef = std::uint32_t;

/// Tape-based reverse-mode autodiff over Matrix values.
///
/// A Graph is built once per training step, forward values are computed
/// eagerly as ops are recorded, and backward(loss) replays the tape in
/// reverse. Nodes are addressed by index so the tape can grow without
/// invalidating references. Parameter leaves flush their accumulated
/// gradients into Parameter::gradient, which is what the optimizer reads.
class Graph {
 public:
  NodeRef constant(Matrix m);
  /// One node per Parameter per graph; repeated calls return the cached ref
  /// so gradients from every use accumulate in a single place.
  NodeRef param(Parameter& p);

  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef hadamard(NodeRef a, NodeRef b);
  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef transpose(NodeRef a);
  NodeRef scale(NodeRef a, double c);
  NodeRef add_scalar(NodeRef a, double c);

  NodeRef relu(NodeRef a);
  NodeRef softplus(NodeRef a);
  NodeRef exp(NodeRef a);
  /// log(x + eps), the guard keeping zero reconstruction probabilities finite.
  NodeRef log_eps(NodeRef a, double eps);

  NodeRef softmax_rows(NodeRef a);
  NodeRef layer_norm(NodeRef x, NodeRef gain, NodeRef bias, double eps = 1e-5);

  /// Adds a 1xC row to every row of a (bias terms, broadcast conditioning).
  NodeRef add_row(NodeRef a, NodeRef row);

  NodeRef concat_rows(NodeRef a, NodeRef b);
  NodeRef concat_cols(NodeRef a, NodeRef b);

  /// Column-wise mean over rows, result 1xC.
  NodeRef rows_mean(NodeRef a);
  /// Sum of every entry, result 1x1.
  NodeRef sum_all(NodeRef a);

  /// Embedding lookup: out row t = table row ids[t]. Backward scatter-adds.
  NodeRef gather_rows(NodeRef table, std::vector<int> ids);

  /// 0.5 * sum(exp(logvar) + mu^2 - 1 - logvar) over all entries, result 1x1.
  /// Summing over rows makes a per-document KL when each row is one document.
  NodeRef gaussian_kl(NodeRef mu, NodeRef logvar);

  /// Sum over rows t with row_mask[t] != 0 of -log softmax(logits_t)[targets[t]],
  /// result 1x1. Masked rows contribute nothing to value or gradient.
  NodeRef cross_entropy_sum(NodeRef logits, std::vector<int> targets,
                            std::vector<double> row_mask);

  const Matrix& value(NodeRef ref) const { return nodes_[ref].value; }
  const Matrix& grad(NodeRef ref) const { return nodes_[ref].grad; }

  /// Reverse pass from a 1x1 loss node. Allocates zero gradients, seeds the
  /// loss with 1, runs the tape backwards, then adds each parameter leaf's
  /// gradient into its Parameter::gradient.
  void backward(NodeRef loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Parameter* leaf = nullptr;
    std::function<void(Graph&, NodeRef)> backprop;
  };

  NodeRef push(Matrix value, bool needs_grad,
               std::function<void(Graph&, NodeRef)> backprop);
  bool wants(NodeRef ref) const { return nodes_[ref].needs_grad; }
  void accumulate(NodeRef ref, const Matrix& g);
  Node& node(NodeRef ref) { return nodes_[ref]; }

  std::vector<Node> nodes_;
  // Lookup only, never iterated, so unordered is determinism-safe.
  std::unordered_map<const Parameter*, NodeRef> param_cache_;
};

}  // namespace taas
