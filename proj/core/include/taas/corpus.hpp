#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "taas/matrix.hpp"

namespace taas {

struct DocumentPair {
  std::string document;
  std::string summary;
  std::string id;

  bool inference_only() const { return summary.empty(); }
};

struct LoadResult {
  std::vector<DocumentPair> pairs;  // file order
  std::vector<std::string> diagnostics;  // rejected records, one message each
};

/// Reads JSONL records {"document": str, "summary": str, "id"?: str}.
/// Records without a usable document are dropped with a diagnostic; a line
/// that is not valid JSON at all aborts with the line number. Missing ids
/// fall back to the 1-based line number; missing summaries mark the pair
/// inference-only.
LoadResult load_jsonl(const std::string& path);

/// Lowercases, splits on whitespace (ASCII and the common Unicode spaces),
/// and breaks ASCII punctuation into single-character tokens. "The cat sat."
/// becomes ["the","cat","sat","."]. Bytes that are not valid UTF-8 are kept
/// as opaque word characters rather than rejected.
std::vector<std::string> tokenize(const std::string& text);

std::string join_tokens(const std::vector<std::string>& tokens);

/// Generation-side vocabulary. Ids 0..4 are the special tokens PAD, UNK,
/// BOS, EOS, CLS; real tokens follow ranked by corpus frequency with
/// lexicographic tie-break, truncated to the cap (cap counts specials too).
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;
  static constexpr int kCls = 4;
  static constexpr std::size_t kNumSpecials = 5;

  static Vocabulary build(const std::vector<DocumentPair>& pairs, std::size_t cap,
                          std::size_t min_count = 1);

  int id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  std::size_t size() const { return tokens_.size(); }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  /// Drops special ids; surviving ids map back to their surface tokens.
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  Vocabulary();
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

/// Embedded English stopword list used by the topic vocabulary by default.
const std::set<std::string>& default_stopwords();
/// Plain text, one word per line.
std::set<std::string> load_stopwords(const std::string& path);

/// Bag-of-words vocabulary for the topic model: document tokens only,
/// stopwords and tokens with no alphabetic character excluded, no special
/// ids, frequency-ranked and capped separately from the generation vocab.
class TopicVocabulary {
 public:
  static TopicVocabulary build(const std::vector<DocumentPair>& pairs, std::size_t cap,
                               std::size_t min_count = 1,
                               const std::set<std::string>& stopwords = default_stopwords());

  int id_of(const std::string& token) const;  // -1 when absent
  const std::string& token_of(std::size_t id) const { return tokens_[id]; }
  std::size_t size() const { return tokens_.size(); }

  void save(const std::string& path) const;
  static TopicVocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

/// Counts of the document's tokens that fall in the topic vocabulary,
/// length = topic vocabulary size. Out-of-vocabulary tokens drop out.
std::vector<double> to_bow(const DocumentPair& pair, const TopicVocabulary& topic_vocab);

/// One training batch. Rows are padded to the longest sequence in the batch;
/// masks are 1.0 exactly on non-PAD positions. Encoder input is CLS followed
/// by the document tokens truncated to max_len - 1; targets are the summary
/// tokens truncated to max_summary_len with EOS appended.
struct Batch {
  std::vector<std::vector<int>> input_ids;
  Matrix input_mask;
  std::vector<std::vector<int>> target_ids;
  Matrix target_mask;
  Matrix bow;  // batch x V_topics
  std::vector<std::string> ids;

  std::size_t size() const { return input_ids.size(); }
};

/// Seeded shuffle, fixed-size batches, final partial batch retained.
/// Every pair must have a summary; inference-only records are the caller's
/// problem to filter.
std::vector<Batch> make_batches(const std::vector<DocumentPair>& pairs,
                                const Vocabulary& vocab,
                                const TopicVocabulary& topic_vocab,
                                std::size_t batch_size, std::size_t max_len,
                                std::size_t max_summary_len, std::uint64_t shuffle_seed);

/// Encoder input ids for one document: CLS + tokens, truncated to max_len.
std::vector<int> encode_document(const std::string& document, const Vocabulary& vocab,
                                 std::size_t max_len);
/// Target ids for one summary: tokens truncated to max_summary_len, then EOS.
std::vector<int> encode_summary(const std::string& summary, const Vocabulary& vocab,
                                std::size_t max_summary_len);

}  // namespace taas
