#include "taas/trainer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "taas/autodiff.hpp"
#include "taas/error.hpp"

namespace taas {

namespace {

struct SplitTotals {
  double l_ntm = 0.0, l_sum = 0.0, combined = 0.0;
  std::size_t docs = 0;

  void absorb(const LossBreakdown& loss, std::size_t batch_docs) {
    const double w = static_cast<double>(batch_docs);
    l_ntm += loss.l_ntm * w;
    l_sum += loss.l_sum * w;
    combined += loss.combined * w;
    docs += batch_docs;
  }

  EpochMetrics to_metrics(std::size_t epoch, const std::string& split) const {
    EpochMetrics m;
    m.epoch = epoch;
    m.split = split;
    const double w = docs ? static_cast<double>(docs) : 1.0;
    m.l_ntm = l_ntm / w;
    m.l_sum = l_sum / w;
    m.combined = combined / w;
    return m;
  }
};

void check_finite(const LossBreakdown& loss, std::size_t epoch, std::size_t batch) {
  if (std::isnan(loss.combined) || std::isnan(loss.l_ntm) || std::isnan(loss.l_sum) ||
      std::isinf(loss.combined)) {
    throw std::runtime_error("training diverged: non-finite loss at epoch " +
                             std::to_string(epoch) + ", batch " + std::to_string(batch));
  }
}

std::vector<Matrix> snapshot_values(const ParameterSet& params) {
  std::vector<Matrix> values;
  values.reserve(params.size());
  for (const auto& p : params) values.push_back(p.value);
  return values;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw config_error("epochs must be at least 1");
  if (batch_size == 0) throw config_error("batch_size must be at least 1");
  adam.validate();
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer over the combined words.
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

TrainResult train_model(TaasModel& model, const std::vector<DocumentPair>& train_pairs,
                        const std::vector<DocumentPair>& val_pairs,
                        const Vocabulary& vocab, const TopicVocabulary& topic_vocab,
                        const TrainConfig& tcfg) {
  tcfg.validate();
  if (train_pairs.empty()) throw config_error("training corpus is empty");
  const ModelConfig& mcfg = model.config();
  const bool has_val = !val_pairs.empty();

  // Validation batches never change, so build them once with a fixed order.
  std::vector<Batch> val_batches;
  if (has_val) {
    val_batches = make_batches(val_pairs, vocab, topic_vocab, tcfg.batch_size,
                               mcfg.max_len, mcfg.max_summary_len, 0);
  }

  TrainResult result;
  result.best_combined = std::numeric_limits<double>::infinity();
  std::vector<Matrix> best_values = snapshot_values(model.parameters());
  std::vector<std::int64_t> best_steps(model.parameters().size(), 0);

  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    auto batches = make_batches(train_pairs, vocab, topic_vocab, tcfg.batch_size,
                                mcfg.max_len, mcfg.max_summary_len,
                                mix_seed(mcfg.seed, epoch));
    SplitTotals train_totals;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      Graph g;
      TaasModel::ForwardOptions opt;
      opt.train = true;
      opt.noise_seed = mix_seed(mix_seed(mcfg.seed, epoch), b);
      auto loss = model.build_loss(g, batches[b], opt);
      check_finite(loss.values, epoch, b);
      train_totals.absorb(loss.values, batches[b].size());
      g.backward(loss.combined);
      for (auto& p : model.parameters()) {
        if (model.is_frozen(p)) {
          p.zero_grad();
        } else {
          adam_step(p, tcfg.adam);
        }
      }
    }
    result.metrics.push_back(train_totals.to_metrics(epoch, "train"));

    double selection = train_totals.to_metrics(epoch, "train").combined;
    if (has_val) {
      SplitTotals val_totals;
      for (std::size_t b = 0; b < val_batches.size(); ++b) {
        Graph g;
        TaasModel::ForwardOptions opt;  // evaluation: no dropout, mean topic path
        auto loss = model.build_loss(g, val_batches[b], opt);
        check_finite(loss.values, epoch, b);
        val_totals.absorb(loss.values, val_batches[b].size());
      }
      result.metrics.push_back(val_totals.to_metrics(epoch, "val"));
      selection = val_totals.to_metrics(epoch, "val").combined;
    }

    if (selection < result.best_combined) {
      result.best_combined = selection;
      result.best_epoch = epoch;
      best_values = snapshot_values(model.parameters());
      for (std::size_t i = 0; i < model.parameters().size(); ++i) {
        best_steps[i] = model.parameters()[i].step_count;
      }
    }
  }

  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    model.parameters()[i].value = best_values[i];
    model.parameters()[i].step_count = best_steps[i];
  }
  return result;
}

}  // namespace taas
