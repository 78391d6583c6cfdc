#include "taas/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "taas/error.hpp"

namespace taas {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Next-token log-probs with decode constraints applied: EOS suppressed
// until min_len real tokens exist, and optionally any token completing an
// already-seen trigram.
std::vector<double> restricted_log_probs(StepScorer& scorer, const Hypothesis& hyp,
                                         std::size_t min_len, int eos_id,
                                         bool block_trigrams) {
  std::vector<double> lp = scorer.next_log_probs(hyp.ids);
  if (hyp.generated() < min_len && static_cast<std::size_t>(eos_id) < lp.size()) {
    lp[static_cast<std::size_t>(eos_id)] = kNegInf;
  }
  if (block_trigrams && hyp.generated() >= 2) {
    const auto& ids = hyp.ids;
    const int a = ids[ids.size() - 2];
    const int b = ids[ids.size() - 1];
    // Generated region starts after BOS at index 1.
    for (std::size_t i = 1; i + 2 < ids.size(); ++i) {
      if (ids[i] == a && ids[i + 1] == b) {
        const int banned = ids[i + 2];
        if (banned >= 0 && static_cast<std::size_t>(banned) < lp.size()) {
          lp[static_cast<std::size_t>(banned)] = kNegInf;
        }
      }
    }
  }
  return lp;
}

bool better_running(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.ids < b.ids;
}

bool better_scored(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.ids < b.ids;
}

void finalize_score(Hypothesis& hyp, double exponent) {
  const double len = static_cast<double>(std::max<std::size_t>(1, hyp.generated()));
  hyp.score = hyp.log_prob / std::pow(len, exponent);
}

Hypothesis greedy_core(StepScorer& scorer, std::size_t max_summary_len,
                       std::size_t min_len, int bos_id, int eos_id,
                       bool block_trigrams) {
  Hypothesis hyp;
  hyp.ids.push_back(bos_id);
  while (hyp.generated() < max_summary_len) {
    const auto lp = restricted_log_probs(scorer, hyp, min_len, eos_id, block_trigrams);
    int best = -1;
    for (std::size_t v = 0; v < lp.size(); ++v) {
      if (lp[v] == kNegInf) continue;
      if (best < 0 || lp[v] > lp[static_cast<std::size_t>(best)]) {
        best = static_cast<int>(v);
      }
    }
    if (best < 0) break;  // everything suppressed; nothing to emit
    hyp.ids.push_back(best);
    hyp.log_prob += lp[static_cast<std::size_t>(best)];
    if (best == eos_id) break;
  }
  hyp.finished = true;
  return hyp;
}

}  // namespace

void DecodeConfig::validate() const {
  if (beam_size < 1) throw config_error("beam_size must be at least 1");
  if (min_len < 1) throw config_error("min_len must be at least 1");
  if (max_summary_len < min_len) {
    throw config_error("max_summary_len " + std::to_string(max_summary_len) +
                       " is below min_len " + std::to_string(min_len));
  }
}

Hypothesis greedy_decode(StepScorer& scorer, std::size_t max_summary_len,
                         std::size_t min_len, int bos_id, int eos_id,
                         bool block_trigrams) {
  return greedy_core(scorer, max_summary_len, min_len, bos_id, eos_id, block_trigrams);
}

std::vector<Hypothesis> beam_search(StepScorer& scorer, const DecodeConfig& cfg) {
  cfg.validate();
  std::vector<Hypothesis> live;
  std::vector<Hypothesis> finished;
  {
    Hypothesis root;
    root.ids.push_back(cfg.bos_id);
    live.push_back(std::move(root));
  }

  while (!live.empty()) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& hyp : live) {
      const auto lp = restricted_log_probs(scorer, hyp, cfg.min_len, cfg.eos_id,
                                           cfg.block_trigrams);
      // The hypothesis's own top beam_size continuations.
      std::vector<int> order;
      for (std::size_t v = 0; v < lp.size(); ++v) {
        if (lp[v] != kNegInf) order.push_back(static_cast<int>(v));
      }
      const std::size_t take = std::min(cfg.beam_size, order.size());
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take),
                        order.end(), [&lp](int a, int b) {
                          const double la = lp[static_cast<std::size_t>(a)];
                          const double lb = lp[static_cast<std::size_t>(b)];
                          if (la != lb) return la > lb;
                          return a < b;
                        });
      for (std::size_t k = 0; k < take; ++k) {
        Hypothesis next = hyp;
        next.ids.push_back(order[k]);
        next.log_prob += lp[static_cast<std::size_t>(order[k])];
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), better_running);
    if (candidates.size() > cfg.beam_size) candidates.resize(cfg.beam_size);

    live.clear();
    for (Hypothesis& cand : candidates) {
      if (cand.ids.back() == cfg.eos_id || cand.generated() >= cfg.max_summary_len) {
        cand.finished = true;
        finished.push_back(std::move(cand));
      } else {
        live.push_back(std::move(cand));
      }
    }
  }

  Hypothesis greedy = greedy_core(scorer, cfg.max_summary_len, cfg.min_len, cfg.bos_id,
                                  cfg.eos_id, cfg.block_trigrams);
  const bool duplicate = std::any_of(finished.begin(), finished.end(),
                                     [&](const Hypothesis& h) { return h.ids == greedy.ids; });
  if (!duplicate && greedy.generated() > 0) finished.push_back(std::move(greedy));

  for (Hypothesis& hyp : finished) finalize_score(hyp, cfg.length_norm_exponent);
  std::sort(finished.begin(), finished.end(), better_scored);
  if (finished.size() > cfg.beam_size) finished.resize(cfg.beam_size);
  return finished;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw std::invalid_argument("log_softmax over an empty row");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

std::vector<double> ModelStepScorer::next_log_probs(const std::vector<int>& prefix) {
  const Matrix logits = model_.decode_logits(state_, prefix);
  std::vector<double> last(logits.cols);
  for (std::size_t j = 0; j < logits.cols; ++j) last[j] = logits(logits.rows - 1, j);
  return log_softmax(last);
}

}  // namespace taas
