#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace taas {

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Clipped n-gram overlap between candidate and reference, word-level over
/// the corpus tokenizer (lowercased, punctuation split). Empty inputs and
/// zero denominators score 0.
RougeScore rouge_n(const std::string& candidate, const std::string& reference,
                   std::size_t n);

/// Longest-common-subsequence score. Default is summary-level: the
/// reference is split into sentences, each sentence's LCS against the whole
/// candidate marks candidate token positions, and the union of marked
/// positions is scored (precision over candidate length, recall over total
/// reference length). whole_text treats the reference as one sequence.
RougeScore rouge_l(const std::string& candidate, const std::string& reference,
                   bool whole_text = false);

/// Splits on runs of terminal punctuation (. ! ?), keeping the punctuation
/// with its sentence. Deliberately abbreviation-blind.
std::vector<std::string> split_sentences(const std::string& text);

/// First three sentences (fewer when the document is shorter).
std::string lead3(const std::string& document);

enum class LengthBucket { kShort, kMedium, kLong };

/// Buckets by sentence count: below lo is short, lo..hi inclusive is
/// medium, above hi is long.
LengthBucket bucket_of(const std::string& document, std::size_t lo = 19,
                       std::size_t hi = 30);
const char* bucket_name(LengthBucket bucket);

struct DocScores {
  std::string id;
  RougeScore r1, r2, rl;
};

struct EvalReport {
  std::vector<DocScores> per_doc;
  RougeScore mean_r1, mean_r2, mean_rl;  // arithmetic means over per_doc
};

struct ScoredPair {
  std::string id;
  std::string candidate;
  std::string reference;
};

EvalReport evaluate_corpus(const std::vector<ScoredPair>& pairs);

}  // namespace taas
