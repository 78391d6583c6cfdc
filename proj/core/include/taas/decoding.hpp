#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "taas/seq2seq.hpp"

namespace taas {

/// Anything that can score the next token given a BOS-prefixed prefix.
/// Tests drive decoding through tiny hand-built scorers; the real model
/// plugs in via ModelStepScorer.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  /// Log-probabilities over the vocabulary for the next position.
  virtual std::vector<double> next_log_probs(const std::vector<int>& prefix) = 0;
};

struct DecodeConfig {
  std::size_t beam_size = 4;
  std::size_t max_summary_len = 64;
  double length_norm_exponent = 1.0;
  std::size_t min_len = 5;
  bool block_trigrams = false;
  // Overridable for toy scorers whose vocabulary lacks the corpus specials.
  int bos_id = Vocabulary::kBos;
  int eos_id = Vocabulary::kEos;

  void validate() const;  // beam_size >= 1; max_summary_len >= min_len >= 1
};

struct Hypothesis {
  std::vector<int> ids;    // BOS-prefixed; EOS-terminated unless length-capped
  double log_prob = 0.0;   // sum of chosen token log-probs
  bool finished = false;
  double score = 0.0;      // log_prob / generated()^exponent at ranking time

  /// Tokens after BOS, counting a terminal EOS.
  std::size_t generated() const { return ids.empty() ? 0 : ids.size() - 1; }
};

/// Standard beam search: each round expands every live hypothesis with its
/// beam_size best next tokens and keeps the global beam_size best candidates
/// by running log-probability; hypotheses reaching EOS (suppressed until
/// min_len real tokens exist) or max_summary_len retire to the finished
/// pool. The greedy rollout also joins the pool, so the top returned score
/// is never worse than greedy's. Returns up to beam_size hypotheses sorted
/// by normalized score log_prob / generated^exponent, ties broken toward
/// lexicographically smaller token ids.
std::vector<Hypothesis> beam_search(StepScorer& scorer, const DecodeConfig& cfg);

/// Argmax decoding; min_len 0 permits an immediate EOS. Matches beam_search
/// with beam_size=1 and exponent 0 given the same min_len.
Hypothesis greedy_decode(StepScorer& scorer, std::size_t max_summary_len,
                         std::size_t min_len, int bos_id = Vocabulary::kBos,
                         int eos_id = Vocabulary::kEos, bool block_trigrams = false);

/// Adapter running the transformer decoder one step at a time against a
/// frozen encode state. No incremental cache: each step rescores the whole
/// prefix, which is fine at desk scale.
class ModelStepScorer : public StepScorer {
 public:
  ModelStepScorer(TaasModel& model, TaasModel::DocState state)
      : model_(model), state_(std::move(state)) {}

  std::size_t vocab_size() const override { return model_.config().vocab_size; }
  std::vector<double> next_log_probs(const std::vector<int>& prefix) override;

 private:
  TaasModel& model_;
  TaasModel::DocState state_;
};

/// log softmax of one logits row.
std::vector<double> log_softmax(const std::vector<double>& logits);

}  // namespace taas
