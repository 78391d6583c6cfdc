#include "taas/evaluation.hpp"

#include <algorithm>
#include <map>

#include "taas/corpus.hpp"

namespace taas {

namespace {

RougeScore from_counts(double overlap, double cand_total, double ref_total) {
  RougeScore s;
  if (cand_total > 0.0) s.precision = overlap / cand_total;
  if (ref_total > 0.0) s.recall = overlap / ref_total;
  if (s.precision + s.recall > 0.0) {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

std::map<std::string, std::size_t> ngram_counts(const std::vector<std::string>& tokens,
                                                std::size_t n) {
  std::map<std::string, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) {
      if (k) key.push_back('\x1f');
      key += tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

// LCS table plus a fixed traceback: prefer shrinking the candidate side on
// ties so the marked positions are deterministic.
std::vector<std::size_t> lcs_candidate_positions(const std::vector<std::string>& cand,
                                                 const std::vector<std::string>& ref) {
  const std::size_t n = cand.size(), m = ref.size();
  std::vector<std::vector<std::size_t>> dp(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      if (cand[i - 1] == ref[j - 1]) {
        dp[i][j] = dp[i - 1][j - 1] + 1;
      } else {
        dp[i][j] = std::max(dp[i - 1][j], dp[i][j - 1]);
      }
    }
  }
  std::vector<std::size_t> positions;
  std::size_t i = n, j = m;
  while (i > 0 && j > 0) {
    if (cand[i - 1] == ref[j - 1]) {
      positions.push_back(i - 1);
      --i;
      --j;
    } else if (dp[i - 1][j] >= dp[i][j - 1]) {
      --i;
    } else {
      --j;
    }
  }
  return positions;
}

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

}  // namespace

RougeScore rouge_n(const std::string& candidate, const std::string& reference,
                   std::size_t n) {
  if (n == 0) return RougeScore{};
  const auto cand_counts = ngram_counts(tokenize(candidate), n);
  const auto ref_counts = ngram_counts(tokenize(reference), n);
  double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
  for (const auto& [gram, count] : cand_counts) {
    cand_total += static_cast<double>(count);
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) {
      overlap += static_cast<double>(std::min(count, it->second));
    }
  }
  for (const auto& [gram, count] : ref_counts) ref_total += static_cast<double>(count);
  return from_counts(overlap, cand_total, ref_total);
}

RougeScore rouge_l(const std::string& candidate, const std::string& reference,
                   bool whole_text) {
  const auto cand = tokenize(candidate);
  std::vector<std::vector<std::string>> ref_parts;
  std::size_t ref_total = 0;
  if (whole_text) {
    ref_parts.push_back(tokenize(reference));
    ref_total = ref_parts.back().size();
  } else {
    for (const auto& sentence : split_sentences(reference)) {
      auto tokens = tokenize(sentence);
      ref_total += tokens.size();
      if (!tokens.empty()) ref_parts.push_back(std::move(tokens));
    }
  }
  if (cand.empty() || ref_total == 0) return RougeScore{};

  std::vector<char> hit(cand.size(), 0);
  for (const auto& part : ref_parts) {
    for (std::size_t pos : lcs_candidate_positions(cand, part)) hit[pos] = 1;
  }
  const double uni = static_cast<double>(std::count(hit.begin(), hit.end(), 1));
  return from_counts(uni, static_cast<double>(cand.size()),
                     static_cast<double>(ref_total));
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    current.push_back(c);
    if (is_terminal(c)) {
      while (i + 1 < text.size() && is_terminal(text[i + 1])) {
        current.push_back(text[++i]);
      }
      // Trim surrounding whitespace; drop punctuation-only fragments.
      const auto begin = current.find_first_not_of(" \t\r\n");
      const auto end = current.find_last_not_of(" \t\r\n");
      if (begin != std::string::npos) {
        std::string trimmed = current.substr(begin, end - begin + 1);
        if (trimmed.find_first_not_of(".!? \t\r\n") != std::string::npos) {
          sentences.push_back(std::move(trimmed));
        }
      }
      current.clear();
    }
    ++i;
  }
  const auto begin = current.find_first_not_of(" \t\r\n");
  if (begin != std::string::npos) {
    const auto end = current.find_last_not_of(" \t\r\n");
    sentences.push_back(current.substr(begin, end - begin + 1));
  }
  return sentences;
}

std::string lead3(const std::string& document) {
  const auto sentences = split_sentences(document);
  std::string out;
  for (std::size_t i = 0; i < sentences.size() && i < 3; ++i) {
    if (i) out.push_back(' ');
    out += sentences[i];
  }
  return out;
}

LengthBucket bucket_of(const std::string& document, std::size_t lo, std::size_t hi) {
  const std::size_t count = split_sentences(document).size();
  if (count < lo) return LengthBucket::kShort;
  if (count <= hi) return LengthBucket::kMedium;
  return LengthBucket::kLong;
}

const char* bucket_name(LengthBucket bucket) {
  switch (bucket) {
    case LengthBucket::kShort: return "short";
    case LengthBucket::kMedium: return "medium";
    case LengthBucket::kLong: return "long";
  }
  return "unknown";
}

EvalReport evaluate_corpus(const std::vector<ScoredPair>& pairs) {
  EvalReport report;
  for (const auto& pair : pairs) {
    DocScores scores;
    scores.id = pair.id;
    scores.r1 = rouge_n(pair.candidate, pair.reference, 1);
    scores.r2 = rouge_n(pair.candidate, pair.reference, 2);
    scores.rl = rouge_l(pair.candidate, pair.reference);
    report.per_doc.push_back(std::move(scores));
  }
  if (!report.per_doc.empty()) {
    const double n = static_cast<double>(report.per_doc.size());
    for (const auto& d : report.per_doc) {
      report.mean_r1.precision += d.r1.precision / n;
      report.mean_r1.recall += d.r1.recall / n;
      report.mean_r1.f1 += d.r1.f1 / n;
      report.mean_r2.precision += d.r2.precision / n;
      report.mean_r2.recall += d.r2.recall / n;
      report.mean_r2.f1 += d.r2.f1 / n;
      report.mean_rl.precision += d.rl.precision / n;
      report.mean_rl.recall += d.rl.recall / n;
      report.mean_rl.f1 += d.rl.f1 / n;
    }
  }
  return report;
}

}  // namespace taas
