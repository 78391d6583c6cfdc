#include "taas/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "taas/error.hpp"

namespace taas {

namespace {

const char* kSpecialTokens[Vocabulary::kNumSpecials] = {"<pad>", "<unk>", "<bos>",
                                                        "<eos>", "<cls>"};

bool is_unicode_space(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_ascii_punct(char32_t cp) {
  return (cp >= 0x21 && cp <= 0x2F) || (cp >= 0x3A && cp <= 0x40) ||
         (cp >= 0x5B && cp <= 0x60) || (cp >= 0x7B && cp <= 0x7E);
}

// Decodes the next code point starting at i, advancing i. Malformed bytes
// come back as themselves so garbage input still tokenizes deterministically.
char32_t next_codepoint(const std::string& s, std::size_t& i) {
  const auto byte = [&](std::size_t k) {
    return static_cast<unsigned char>(s[k]);
  };
  const unsigned char b0 = byte(i);
  std::size_t len = 1;
  char32_t cp = b0;
  if (b0 >= 0xF0) len = 4;
  else if (b0 >= 0xE0) len = 3;
  else if (b0 >= 0xC0) len = 2;
  if (len > 1) {
    if (i + len > s.size()) {
      ++i;
      return b0;
    }
    static const char32_t kFirstMask[5] = {0, 0x7F, 0x1F, 0x0F, 0x07};
    cp = b0 & kFirstMask[len];
    for (std::size_t k = 1; k < len; ++k) {
      const unsigned char bk = byte(i + k);
      if ((bk & 0xC0) != 0x80) {
        ++i;
        return b0;
      }
      cp = (cp << 6) | (bk & 0x3F);
    }
  }
  i += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

bool has_alpha(const std::string& token) {
  return std::any_of(token.begin(), token.end(), [](char c) {
    const unsigned char u = static_cast<unsigned char>(c);
    return (u >= 'a' && u <= 'z') || (u >= 'A' && u <= 'Z') || u >= 0x80;
  });
}

// Frequency-descending, then lexicographic. Shared by both vocabularies.
std::vector<std::string> rank_tokens(const std::map<std::string, std::size_t>& counts,
                                     std::size_t limit, std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [tok, cnt] : counts) {
    if (cnt >= min_count) ranked.emplace_back(tok, cnt);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > limit) ranked.resize(limit);
  std::vector<std::string> out;
  out.reserve(ranked.size());
  for (auto& [tok, cnt] : ranked) out.push_back(std::move(tok));
  return out;
}

}  // namespace

LoadResult load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open corpus file: " + path);
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw config_error(path + ":" + std::to_string(line_no) +
                         ": malformed JSON record: " + e.what());
    }
    if (!record.is_object()) {
      throw config_error(path + ":" + std::to_string(line_no) +
                         ": expected a JSON object per line");
    }
    DocumentPair pair;
    if (!record.contains("document") || !record["document"].is_string() ||
        record["document"].get<std::string>().empty()) {
      result.diagnostics.push_back(path + ":" + std::to_string(line_no) +
                                   ": record rejected, missing or empty \"document\"");
      continue;
    }
    pair.document = record["document"].get<std::string>();
    if (record.contains("summary") && record["summary"].is_string()) {
      pair.summary = record["summary"].get<std::string>();
    }
    if (record.contains("id")) {
      const auto& id = record["id"];
      pair.id = id.is_string() ? id.get<std::string>() : id.dump();
    } else {
      pair.id = std::to_string(line_no);
    }
    result.pairs.push_back(std::move(pair));
  }
  return result;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < text.size()) {
    const char32_t cp = next_codepoint(text, i);
    if (is_unicode_space(cp)) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
    } else if (is_ascii_punct(cp)) {
      if (!current.empty()) {
        tokens.push_back(std::move(current));
        current.clear();
      }
      tokens.push_back(std::string(1, static_cast<char>(cp)));
    } else {
      const char32_t lower = (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
      append_utf8(current, lower);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

Vocabulary::Vocabulary() {
  for (std::size_t i = 0; i < kNumSpecials; ++i) {
    tokens_.emplace_back(kSpecialTokens[i]);
    ids_[kSpecialTokens[i]] = static_cast<int>(i);
  }
}

Vocabulary Vocabulary::build(const std::vector<DocumentPair>& pairs, std::size_t cap,
                             std::size_t min_count) {
  if (pairs.empty()) throw config_error("cannot build a vocabulary from an empty corpus");
  if (cap <= kNumSpecials) {
    throw config_error("vocabulary cap must exceed the " +
                       std::to_string(kNumSpecials) + " special tokens");
  }
  std::map<std::string, std::size_t> counts;
  for (const auto& pair : pairs) {
    for (const auto& tok : tokenize(pair.document)) ++counts[tok];
    for (const auto& tok : tokenize(pair.summary)) ++counts[tok];
  }
  Vocabulary vocab;
  for (auto& tok : rank_tokens(counts, cap - kNumSpecials, min_count)) {
    vocab.ids_[tok] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(std::move(tok));
  }
  return vocab;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::invalid_argument("token id " + std::to_string(id) +
                                " outside vocabulary of size " +
                                std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& tok : tokens) ids.push_back(id_of(tok));
  return ids;
}

std::vector<std::string> Vocabulary::decode(const std::vector<int>& ids) const {
  std::vector<std::string> tokens;
  for (int id : ids) {
    if (id >= 0 && id < static_cast<int>(kNumSpecials)) continue;
    tokens.push_back(token_of(id));
  }
  return tokens;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write vocabulary file: " + path);
  for (const auto& tok : tokens_) out << tok << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no <= kNumSpecials) {
      if (line != kSpecialTokens[line_no - 1]) {
        throw config_error(path + ": line " + std::to_string(line_no) +
                           " should be the special token " +
                           kSpecialTokens[line_no - 1]);
      }
      continue;
    }
    if (line.empty()) continue;
    if (vocab.ids_.count(line)) {
      throw config_error(path + ": duplicate token '" + line + "'");
    }
    vocab.ids_[line] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(line);
  }
  if (line_no < kNumSpecials) {
    throw config_error(path + ": missing the special-token header");
  }
  return vocab;
}

const std::set<std::string>& default_stopwords() {
  static const std::set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "am", "an", "and",
      "any", "are", "aren", "as", "at", "be", "because", "been", "before", "being",
      "below", "between", "both", "but", "by", "can", "cannot", "could", "couldn",
      "did", "didn", "do", "does", "doesn", "doing", "don", "down", "during", "each",
      "few", "for", "from", "further", "had", "hadn", "has", "hasn", "have", "haven",
      "having", "he", "her", "here", "hers", "herself", "him", "himself", "his",
      "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself", "just",
      "ll", "me", "more", "most", "mustn", "my", "myself", "no", "nor", "not", "now",
      "of", "off", "on", "once", "only", "or", "other", "ought", "our", "ours",
      "ourselves", "out", "over", "own", "re", "s", "said", "same", "shan", "she",
      "should", "shouldn", "so", "some", "such", "t", "than", "that", "the", "their",
      "theirs", "them", "themselves", "then", "there", "these", "they", "this",
      "those", "through", "to", "too", "under", "until", "up", "ve", "very", "was",
      "wasn", "we", "were", "weren", "what", "when", "where", "which", "while",
      "who", "whom", "why", "will", "with", "won", "would", "wouldn", "you", "your",
      "yours", "yourself", "yourselves"};
  return words;
}

std::set<std::string> load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open stopword file: " + path);
  std::set<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (!line.empty()) words.insert(line);
  }
  return words;
}

TopicVocabulary TopicVocabulary::build(const std::vector<DocumentPair>& pairs,
                                       std::size_t cap, std::size_t min_count,
                                       const std::set<std::string>& stopwords) {
  if (pairs.empty()) throw config_error("cannot build a topic vocabulary from an empty corpus");
  std::map<std::string, std::size_t> counts;
  for (const auto& pair : pairs) {
    for (const auto& tok : tokenize(pair.document)) {
      if (stopwords.count(tok) || !has_alpha(tok)) continue;
      ++counts[tok];
    }
  }
  TopicVocabulary vocab;
  for (auto& tok : rank_tokens(counts, cap, min_count)) {
    vocab.ids_[tok] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(std::move(tok));
  }
  if (vocab.tokens_.empty()) {
    throw config_error("topic vocabulary is empty; corpus has no content words");
  }
  return vocab;
}

int TopicVocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? -1 : it->second;
}

void TopicVocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw config_error("cannot write topic vocabulary file: " + path);
  for (const auto& tok : tokens_) out << tok << "\n";
}

TopicVocabulary TopicVocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open topic vocabulary file: " + path);
  TopicVocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (vocab.ids_.count(line)) {
      throw config_error(path + ": duplicate token '" + line + "'");
    }
    vocab.ids_[line] = static_cast<int>(vocab.tokens_.size());
    vocab.tokens_.push_back(line);
  }
  if (vocab.tokens_.empty()) throw config_error(path + ": topic vocabulary file is empty");
  return vocab;
}

std::vector<double> to_bow(const DocumentPair& pair, const TopicVocabulary& topic_vocab) {
  std::vector<double> counts(topic_vocab.size(), 0.0);
  for (const auto& tok : tokenize(pair.document)) {
    const int id = topic_vocab.id_of(tok);
    if (id >= 0) counts[static_cast<std::size_t>(id)] += 1.0;
  }
  return counts;
}

std::vector<int> encode_document(const std::string& document, const Vocabulary& vocab,
                                 std::size_t max_len) {
  auto tokens = tokenize(document);
  if (max_len < 2) throw std::invalid_argument("max_len must be at least 2");
  if (tokens.size() > max_len - 1) tokens.resize(max_len - 1);
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  ids.push_back(Vocabulary::kCls);
  for (const auto& tok : tokens) ids.push_back(vocab.id_of(tok));
  return ids;
}

std::vector<int> encode_summary(const std::string& summary, const Vocabulary& vocab,
                                std::size_t max_summary_len) {
  auto tokens = tokenize(summary);
  if (tokens.size() > max_summary_len) tokens.resize(max_summary_len);
  std::vector<int> ids;
  ids.reserve(tokens.size() + 1);
  for (const auto& tok : tokens) ids.push_back(vocab.id_of(tok));
  ids.push_back(Vocabulary::kEos);
  return ids;
}

std::vector<Batch> make_batches(const std::vector<DocumentPair>& pairs,
                                const Vocabulary& vocab,
                                const TopicVocabulary& topic_vocab,
                                std::size_t batch_size, std::size_t max_len,
                                std::size_t max_summary_len, std::uint64_t shuffle_seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  for (const auto& pair : pairs) {
    if (pair.inference_only()) {
      throw std::invalid_argument("cannot batch inference-only record id=" + pair.id);
    }
  }
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Hand-rolled Fisher-Yates: the standard library shuffle is free to vary
  // across implementations and batch order must be reproducible from seed.
  std::mt19937_64 rng(shuffle_seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    Batch batch;
    std::size_t max_in = 0, max_tg = 0;
    std::vector<std::vector<int>> inputs, targets;
    for (std::size_t k = 0; k < count; ++k) {
      const DocumentPair& pair = pairs[order[start + k]];
      inputs.push_back(encode_document(pair.document, vocab, max_len));
      targets.push_back(encode_summary(pair.summary, vocab, max_summary_len));
      max_in = std::max(max_in, inputs.back().size());
      max_tg = std::max(max_tg, targets.back().size());
      batch.ids.push_back(pair.id);
    }
    batch.input_mask = Matrix(count, max_in);
    batch.target_mask = Matrix(count, max_tg);
    batch.bow = Matrix(count, topic_vocab.size());
    for (std::size_t k = 0; k < count; ++k) {
      const DocumentPair& pair = pairs[order[start + k]];
      for (std::size_t j = 0; j < inputs[k].size(); ++j) batch.input_mask(k, j) = 1.0;
      for (std::size_t j = 0; j < targets[k].size(); ++j) batch.target_mask(k, j) = 1.0;
      inputs[k].resize(max_in, Vocabulary::kPad);
      targets[k].resize(max_tg, Vocabulary::kPad);
      const auto counts = to_bow(pair, topic_vocab);
      for (std::size_t j = 0; j < counts.size(); ++j) batch.bow(k, j) = counts[j];
    }
    batch.input_ids = std::move(inputs);
    batch.target_ids = std::move(targets);
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace taas
