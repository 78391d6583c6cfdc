#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "taas/corpus.hpp"
#include "taas/optim.hpp"
#include "taas/seq2seq.hpp"

namespace taas {

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  AdamConfig adam;

  void validate() const;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  std::string split;      // "train" or "val"
  double l_ntm = 0.0;
  double l_sum = 0.0;
  double combined = 0.0;
};

struct TrainResult {
  std::vector<EpochMetrics> metrics;
  std::size_t best_epoch = 0;
  double best_combined = 0.0;  // on the selection split (val when available)
};

/// Deterministic seed derivation so reshuffles and noise draws depend only
/// on (model seed, epoch, batch index).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

/// Epoch loop: per-epoch reshuffled batches, one joint forward/backward per
/// batch, Adam on every unfrozen parameter. Train rows log the losses
/// observed during optimization (doc-weighted batch means); val rows come
/// from a dropout-free evaluation pass. The parameter values from the best
/// epoch (lowest combined loss on the selection split) are restored into
/// the model before returning. NaN loss aborts with a diagnostic.
TrainResult train_model(TaasModel& model, const std::vector<DocumentPair>& train_pairs,
                        const std::vector<DocumentPair>& val_pairs,
                        const Vocabulary& vocab, const TopicVocabulary& topic_vocab,
                        const TrainConfig& tcfg);

}  // namespace taas
