#include "taas/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "taas/checkpoint.hpp"
#include "taas/corpus.hpp"
#include "taas/decoding.hpp"
#include "taas/error.hpp"
#include "taas/evaluation.hpp"
#include "taas/ntm.hpp"
#include "taas/seq2seq.hpp"
#include "taas/trainer.hpp"

namespace taas {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// RunConfig <-> JSON

template <typename T>
struct Field {
  const char* key;
  T RunConfig::*member;
};

constexpr Field<std::string> kStringFields[] = {
    {"train_path", &RunConfig::train_path},
    {"val_path", &RunConfig::val_path},
    {"output_dir", &RunConfig::output_dir},
    {"stopword_path", &RunConfig::stopword_path},
    {"pooling_mode", &RunConfig::pooling_mode},
    {"projection_variant", &RunConfig::projection_variant},
    {"s_injection", &RunConfig::s_injection},
};

constexpr Field<std::size_t> kSizeFields[] = {
    {"epochs", &RunConfig::epochs},
    {"batch_size", &RunConfig::batch_size},
    {"vocab_cap", &RunConfig::vocab_cap},
    {"topic_vocab_cap", &RunConfig::topic_vocab_cap},
    {"min_count", &RunConfig::min_count},
    {"hidden", &RunConfig::hidden},
    {"heads", &RunConfig::heads},
    {"encoder_layers", &RunConfig::encoder_layers},
    {"decoder_layers", &RunConfig::decoder_layers},
    {"ffn_width", &RunConfig::ffn_width},
    {"max_len", &RunConfig::max_len},
    {"max_summary_len", &RunConfig::max_summary_len},
    {"topics", &RunConfig::topics},
    {"latent_dim", &RunConfig::latent_dim},
    {"ntm_hidden", &RunConfig::ntm_hidden},
    {"beam_size", &RunConfig::beam_size},
    {"min_len", &RunConfig::min_len},
};

constexpr Field<double> kDoubleFields[] = {
    {"learning_rate", &RunConfig::learning_rate},
    {"beta1", &RunConfig::beta1},
    {"beta2", &RunConfig::beta2},
    {"epsilon", &RunConfig::epsilon},
    {"dropout", &RunConfig::dropout},
    {"lambda", &RunConfig::lambda},
    {"length_norm", &RunConfig::length_norm},
};

constexpr Field<bool> kBoolFields[] = {
    {"freeze_encoder", &RunConfig::freeze_encoder},
    {"position_encoding", &RunConfig::position_encoding},
    {"block_trigrams", &RunConfig::block_trigrams},
};

void apply_json_value(RunConfig& rc, const std::string& key, const json& v) {
  for (const auto& f : kStringFields) {
    if (key == f.key) {
      if (!v.is_string()) throw config_error("config key '" + key + "' expects a string");
      rc.*f.member = v.get<std::string>();
      return;
    }
  }
  for (const auto& f : kSizeFields) {
    if (key == f.key) {
      if (!v.is_number_integer() || v.is_number_float() || v.get<long long>() < 0)
        throw config_error("config key '" + key + "' expects a non-negative integer");
      rc.*f.member = v.get<std::size_t>();
      return;
    }
  }
  for (const auto& f : kDoubleFields) {
    if (key == f.key) {
      if (!v.is_number()) throw config_error("config key '" + key + "' expects a number");
      rc.*f.member = v.get<double>();
      return;
    }
  }
  for (const auto& f : kBoolFields) {
    if (key == f.key) {
      if (!v.is_boolean()) throw config_error("config key '" + key + "' expects a boolean");
      rc.*f.member = v.get<bool>();
      return;
    }
  }
  if (key == "seed") {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      throw config_error("config key 'seed' expects a non-negative integer");
    rc.seed = v.get<std::uint64_t>();
    return;
  }
  throw config_error("unknown config key: " + key);
}

json to_json(const RunConfig& rc) {
  json j = json::object();
  for (const auto& f : kStringFields) j[f.key] = rc.*f.member;
  for (const auto& f : kSizeFields) j[f.key] = rc.*f.member;
  for (const auto& f : kDoubleFields) j[f.key] = rc.*f.member;
  for (const auto& f : kBoolFields) j[f.key] = rc.*f.member;
  j["seed"] = rc.seed;
  return j;
}

std::string fmt_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_weight(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

// ---------------------------------------------------------------------------
// Config -> module configs

PoolingMode parse_pooling(const std::string& s) {
  if (s == "topic") return PoolingMode::topic;
  if (s == "cls") return PoolingMode::cls;
  if (s == "sum") return PoolingMode::sum;
  throw config_error("pooling_mode must be topic, cls, or sum (got '" + s + "')");
}

ProjectionVariant parse_projection(const std::string& s) {
  if (s == "additive") return ProjectionVariant::additive;
  if (s == "post_ln") return ProjectionVariant::post_ln;
  throw config_error("projection_variant must be additive or post_ln (got '" + s + "')");
}

SInjection parse_injection(const std::string& s) {
  if (s == "memory_slot") return SInjection::memory_slot;
  if (s == "input_add") return SInjection::input_add;
  throw config_error("s_injection must be memory_slot or input_add (got '" + s + "')");
}

ModelConfig make_model_config(const RunConfig& rc, std::size_t vocab_size,
                              std::size_t topic_vocab_size) {
  ModelConfig mc;
  mc.vocab_size = vocab_size;
  mc.hidden = rc.hidden;
  mc.heads = rc.heads;
  mc.encoder_layers = rc.encoder_layers;
  mc.decoder_layers = rc.decoder_layers;
  mc.ffn_width = rc.ffn_width;
  mc.max_len = rc.max_len;
  mc.max_summary_len = rc.max_summary_len;
  mc.dropout = rc.dropout;
  mc.pooling_mode = parse_pooling(rc.pooling_mode);
  mc.projection_variant = parse_projection(rc.projection_variant);
  mc.s_injection = parse_injection(rc.s_injection);
  mc.lambda = rc.lambda;
  mc.freeze_encoder = rc.freeze_encoder;
  mc.topics = rc.topics;
  mc.topic_vocab_size = topic_vocab_size;
  mc.latent_dim = rc.latent_dim;
  mc.ntm_hidden = rc.ntm_hidden;
  mc.seed = rc.seed;
  mc.position_encoding = rc.position_encoding;
  return mc;
}

TrainConfig make_train_config(const RunConfig& rc) {
  TrainConfig tc;
  tc.epochs = rc.epochs;
  tc.batch_size = rc.batch_size;
  tc.adam.learning_rate = rc.learning_rate;
  tc.adam.beta1 = rc.beta1;
  tc.adam.beta2 = rc.beta2;
  tc.adam.epsilon = rc.epsilon;
  return tc;
}

DecodeConfig make_decode_config(const RunConfig& rc) {
  DecodeConfig dc;
  dc.beam_size = rc.beam_size;
  dc.max_summary_len = rc.max_summary_len;
  dc.length_norm_exponent = rc.length_norm;
  dc.min_len = rc.min_len;
  dc.block_trigrams = rc.block_trigrams;
  return dc;
}

// ---------------------------------------------------------------------------
// Shared helpers

std::vector<DocumentPair> load_training_pairs(const std::string& path,
                                              const char* what) {
  LoadResult res = load_jsonl(path);
  for (const auto& d : res.diagnostics) std::cerr << d << "\n";
  std::vector<DocumentPair> out;
  std::size_t dropped = 0;
  for (auto& p : res.pairs) {
    if (p.inference_only())
      ++dropped;
    else
      out.push_back(std::move(p));
  }
  if (dropped > 0)
    std::cerr << "dropped " << dropped << " record(s) without summaries from the "
              << what << " set\n";
  return out;
}

/// Seeded 10% holdout when no validation file is configured. Both splits
/// keep their original file order.
void split_holdout(std::vector<DocumentPair>& pairs, std::vector<DocumentPair>& val,
                   std::uint64_t seed) {
  const std::size_t n = pairs.size();
  const std::size_t k = n / 10;
  if (k == 0) return;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(mix_seed(seed, 0x484f4c44ull));
  for (std::size_t i = n - 1; i > 0; --i) {
    std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  std::vector<std::size_t> val_idx(idx.begin(), idx.begin() + k);
  std::sort(val_idx.begin(), val_idx.end());
  std::vector<DocumentPair> train_out, val_out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (next < val_idx.size() && val_idx[next] == i) {
      val_out.push_back(std::move(pairs[i]));
      ++next;
    } else {
      train_out.push_back(std::move(pairs[i]));
    }
  }
  pairs = std::move(train_out);
  val = std::move(val_out);
}

struct TrainedRun {
  Vocabulary vocab;
  TopicVocabulary topic_vocab;
  std::unique_ptr<TaasModel> model;
  TrainResult result;
  std::vector<DocumentPair> train_pairs;
  std::vector<DocumentPair> val_pairs;

  TrainedRun(Vocabulary v, TopicVocabulary t)
      : vocab(std::move(v)), topic_vocab(std::move(t)) {}
};

TrainedRun run_training(const RunConfig& rc, bool log_epochs) {
  if (rc.train_path.empty()) throw config_error("train_path is required");
  std::vector<DocumentPair> train_pairs = load_training_pairs(rc.train_path, "training");
  std::vector<DocumentPair> val_pairs;
  if (!rc.val_path.empty())
    val_pairs = load_training_pairs(rc.val_path, "validation");
  else
    split_holdout(train_pairs, val_pairs, rc.seed);
  if (train_pairs.empty()) throw config_error("training corpus is empty");

  Vocabulary vocab = Vocabulary::build(train_pairs, rc.vocab_cap, rc.min_count);
  std::set<std::string> stopwords =
      rc.stopword_path.empty() ? default_stopwords() : load_stopwords(rc.stopword_path);
  TopicVocabulary topic_vocab =
      TopicVocabulary::build(train_pairs, rc.topic_vocab_cap, rc.min_count, stopwords);

  TrainedRun out(std::move(vocab), std::move(topic_vocab));
  ModelConfig mc = make_model_config(rc, out.vocab.size(), out.topic_vocab.size());
  out.model = std::make_unique<TaasModel>(mc);
  TrainConfig tc = make_train_config(rc);
  out.result = train_model(*out.model, train_pairs, val_pairs, out.vocab,
                           out.topic_vocab, tc);
  out.train_pairs = std::move(train_pairs);
  out.val_pairs = std::move(val_pairs);
  if (log_epochs) {
    for (const auto& m : out.result.metrics)
      std::cout << "epoch " << m.epoch << " " << m.split << " l_ntm=" << fmt_weight(m.l_ntm)
                << " l_sum=" << fmt_weight(m.l_sum)
                << " combined=" << fmt_weight(m.combined) << "\n";
    std::cout << "best epoch " << out.result.best_epoch
              << " combined=" << fmt_weight(out.result.best_combined) << "\n";
  }
  return out;
}

struct ModelBundle {
  RunConfig run;
  Vocabulary vocab;
  TopicVocabulary topic_vocab;
  std::unique_ptr<TaasModel> model;
  std::uint64_t seed = 0;

  ModelBundle(RunConfig r, Vocabulary v, TopicVocabulary t)
      : run(std::move(r)), vocab(std::move(v)), topic_vocab(std::move(t)) {}
};

fs::path require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p))
    throw config_error(std::string(what) + " not found: " + p.string());
  return p;
}

/// Accepts either a run directory or a direct path to model.ckpt; the
/// config and vocabulary sidecars must sit next to the checkpoint.
ModelBundle load_bundle(const std::string& model_path) {
  if (model_path.empty()) throw config_error("--model is required");
  fs::path p(model_path);
  if (!fs::exists(p)) throw config_error("model path not found: " + model_path);
  fs::path dir = fs::is_directory(p) ? p : p.parent_path();
  fs::path ckpt = fs::is_directory(p) ? p / "model.ckpt" : p;
  require_file(ckpt, "checkpoint");
  fs::path config_path = require_file(dir / "config.json", "config sidecar");
  fs::path vocab_path = require_file(dir / "vocab.txt", "vocabulary sidecar");
  fs::path tv_path = require_file(dir / "topic_vocab.txt", "topic vocabulary sidecar");

  RunConfig rc = RunConfig::from_file(config_path.string());
  ModelBundle bundle(rc, Vocabulary::load(vocab_path.string()),
                     TopicVocabulary::load(tv_path.string()));
  ModelConfig mc =
      make_model_config(rc, bundle.vocab.size(), bundle.topic_vocab.size());
  bundle.model = std::make_unique<TaasModel>(mc);
  bundle.seed = load_checkpoint(ckpt.string(), bundle.model->parameters());
  return bundle;
}

struct GeneratedSummary {
  std::string text;
  double score = 0.0;
  TaasModel::DocState state;
};

GeneratedSummary summarize_document(TaasModel& model, const Vocabulary& vocab,
                                    const TopicVocabulary& topic_vocab,
                                    const DocumentPair& pair, const DecodeConfig& dc) {
  GeneratedSummary out;
  std::vector<int> ids =
      encode_document(pair.document, vocab, model.config().max_len);
  std::vector<double> bow = to_bow(pair, topic_vocab);
  out.state = model.encode_document_state(ids, bow);
  ModelStepScorer scorer(model, out.state);
  std::vector<Hypothesis> hyps = beam_search(scorer, dc);
  const Hypothesis& best = hyps.front();
  out.text = join_tokens(vocab.decode(best.ids));
  out.score = best.score;
  return out;
}

void write_metrics_csv(const fs::path& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "epoch,split,l_ntm,l_sum,combined\n";
  for (const auto& m : result.metrics)
    out << m.epoch << "," << m.split << "," << fmt_full(m.l_ntm) << ","
        << fmt_full(m.l_sum) << "," << fmt_full(m.combined) << "\n";
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const RunConfig& rc) {
  TrainedRun tr = run_training(rc, /*log_epochs=*/true);
  fs::path dir(rc.output_dir);
  fs::create_directories(dir);
  save_checkpoint((dir / "model.ckpt").string(), tr.model->parameters(), rc.seed);
  rc.save((dir / "config.json").string());
  tr.vocab.save((dir / "vocab.txt").string());
  tr.topic_vocab.save((dir / "topic_vocab.txt").string());
  write_metrics_csv(dir / "metrics.csv", tr.result);
  std::cout << "wrote " << dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// summarize

struct SummarizeArgs {
  std::string model_path;
  std::string input_path;
  std::string output_path;
  std::string attention_path;
  std::optional<std::size_t> beam, max_len, min_len;
  std::optional<double> length_norm;
  bool block_trigrams = false;
};

/// Positions of the largest weights, highest first, earlier position on ties.
std::vector<std::size_t> top_positions(const std::vector<double>& w, std::size_t k) {
  std::vector<std::size_t> idx(w.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

int cmd_summarize(const SummarizeArgs& args) {
  ModelBundle bundle = load_bundle(args.model_path);
  DecodeConfig dc = make_decode_config(bundle.run);
  if (args.beam) dc.beam_size = *args.beam;
  if (args.max_len) dc.max_summary_len = *args.max_len;
  if (args.min_len) dc.min_len = *args.min_len;
  if (args.length_norm) dc.length_norm_exponent = *args.length_norm;
  if (args.block_trigrams) dc.block_trigrams = true;
  dc.validate();

  const bool dump = !args.attention_path.empty();
  if (dump && bundle.model->config().pooling_mode != PoolingMode::topic)
    throw config_error("--dump-attention requires a model trained with topic pooling");

  if (args.input_path.empty()) throw config_error("--input is required");
  if (args.output_path.empty()) throw config_error("--output is required");
  LoadResult res = load_jsonl(args.input_path);
  for (const auto& d : res.diagnostics) std::cerr << d << "\n";

  std::ofstream out(args.output_path);
  if (!out) throw std::runtime_error("cannot write " + args.output_path);
  std::ofstream att;
  if (dump) {
    att.open(args.attention_path);
    if (!att) throw std::runtime_error("cannot write " + args.attention_path);
  }

  for (const auto& pair : res.pairs) {
    GeneratedSummary gen =
        summarize_document(*bundle.model, bundle.vocab, bundle.topic_vocab, pair, dc);
    json record = json::object();
    record["id"] = pair.id;
    record["summary"] = gen.text;
    record["score"] = gen.score;
    out << record.dump() << "\n";

    if (dump) {
      att << "# doc " << pair.id << "\n";
      const auto& ids = gen.state.input_ids;
      const auto& w = gen.state.alpha_hat;
      for (std::size_t i = 0; i < ids.size(); ++i)
        att << bundle.vocab.token_of(ids[i]) << "\t" << fmt_weight(w[i]) << "\n";
      att << "# top-5:";
      for (std::size_t pos : top_positions(w, 5))
        att << " " << bundle.vocab.token_of(ids[pos]);
      att << "\n";
    }
  }
  std::cout << "wrote " << res.pairs.size() << " summaries to " << args.output_path
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  std::string candidates_path;
  std::string references_path;
  std::string buckets;  // "lo,hi" when present
  std::string output_path;
  bool lead3 = false;
};

struct CandidateRecord {
  std::string id;
  std::string text;
};

std::vector<CandidateRecord> load_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open candidates file: " + path);
  std::vector<CandidateRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw config_error(path + ":" + std::to_string(line_no) +
                         ": malformed JSON record");
    if (!j.contains("summary") || !j["summary"].is_string())
      throw config_error(path + ":" + std::to_string(line_no) +
                         ": record lacks a string \"summary\"");
    CandidateRecord rec;
    rec.text = j["summary"].get<std::string>();
    if (j.contains("id"))
      rec.id = j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump();
    else
      rec.id = std::to_string(line_no);
    out.push_back(std::move(rec));
  }
  return out;
}

std::pair<std::size_t, std::size_t> parse_buckets(const std::string& s) {
  std::size_t comma = s.find(',');
  if (comma == std::string::npos)
    throw config_error("--buckets expects two comma-separated bounds, e.g. 19,30");
  try {
    std::size_t lo = std::stoul(s.substr(0, comma));
    std::size_t hi = std::stoul(s.substr(comma + 1));
    if (lo > hi) throw config_error("--buckets bounds must satisfy lo <= hi");
    return {lo, hi};
  } catch (const config_error&) {
    throw;
  } catch (const std::exception&) {
    throw config_error("--buckets expects two comma-separated bounds, e.g. 19,30");
  }
}

int cmd_evaluate(const EvaluateArgs& args) {
  if (args.references_path.empty()) throw config_error("--references is required");
  if (!args.lead3 && args.candidates_path.empty())
    throw config_error("either --candidates or --lead3 is required");

  LoadResult refs = load_jsonl(args.references_path);
  for (const auto& d : refs.diagnostics) std::cerr << d << "\n";
  std::map<std::string, const DocumentPair*> by_id;
  for (const auto& p : refs.pairs) {
    if (p.inference_only())
      throw config_error("reference record '" + p.id + "' has no summary");
    if (!by_id.emplace(p.id, &p).second)
      throw config_error("duplicate id in references: " + p.id);
  }

  std::vector<ScoredPair> pairs;
  std::vector<const DocumentPair*> matched_refs;
  if (args.lead3) {
    for (const auto& p : refs.pairs) {
      pairs.push_back({p.id, lead3(p.document), p.summary});
      matched_refs.push_back(&p);
    }
  } else {
    std::vector<CandidateRecord> cands = load_candidates(args.candidates_path);
    std::set<std::string> seen, cand_ids;
    std::vector<std::string> unmatched;
    for (const auto& c : cands) {
      if (!seen.insert(c.id).second)
        throw config_error("duplicate id in candidates: " + c.id);
      cand_ids.insert(c.id);
      auto it = by_id.find(c.id);
      if (it == by_id.end()) {
        unmatched.push_back("candidate '" + c.id + "' has no reference");
        continue;
      }
      pairs.push_back({c.id, c.text, it->second->summary});
      matched_refs.push_back(it->second);
    }
    for (const auto& p : refs.pairs)
      if (!cand_ids.count(p.id))
        unmatched.push_back("reference '" + p.id + "' has no candidate");
    if (!unmatched.empty()) {
      std::string msg = "unmatched ids:";
      for (const auto& u : unmatched) msg += "\n  " + u;
      throw config_error(msg);
    }
  }
  if (pairs.empty()) throw config_error("nothing to evaluate");

  EvalReport report = evaluate_corpus(pairs);

  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s %10s\n", "metric", "precision",
                "recall", "f1");
  std::cout << buf;
  const std::pair<const char*, const RougeScore*> rows[] = {
      {"rouge-1", &report.mean_r1}, {"rouge-2", &report.mean_r2},
      {"rouge-l", &report.mean_rl}};
  for (const auto& [name, score] : rows) {
    std::snprintf(buf, sizeof buf, "%-8s %10.6f %10.6f %10.6f\n", name,
                  score->precision, score->recall, score->f1);
    std::cout << buf;
  }

  if (!args.buckets.empty()) {
    auto [lo, hi] = parse_buckets(args.buckets);
    struct BucketStat {
      std::size_t count = 0;
      double r1 = 0.0, r2 = 0.0, rl = 0.0;
    };
    BucketStat stats[3];
    for (std::size_t i = 0; i < report.per_doc.size(); ++i) {
      LengthBucket b = bucket_of(matched_refs[i]->document, lo, hi);
      BucketStat& s = stats[static_cast<int>(b)];
      ++s.count;
      s.r1 += report.per_doc[i].r1.f1;
      s.r2 += report.per_doc[i].r2.f1;
      s.rl += report.per_doc[i].rl.f1;
    }
    std::snprintf(buf, sizeof buf, "%-8s %6s %12s %12s %12s\n", "bucket", "docs",
                  "rouge-1 f1", "rouge-2 f1", "rouge-l f1");
    std::cout << buf;
    const LengthBucket order[] = {LengthBucket::kShort, LengthBucket::kMedium,
                                  LengthBucket::kLong};
    for (LengthBucket b : order) {
      const BucketStat& s = stats[static_cast<int>(b)];
      double denom = s.count ? static_cast<double>(s.count) : 1.0;
      std::snprintf(buf, sizeof buf, "%-8s %6zu %12.6f %12.6f %12.6f\n",
                    bucket_name(b), s.count, s.r1 / denom, s.r2 / denom,
                    s.rl / denom);
      std::cout << buf;
    }
  }

  if (!args.output_path.empty()) {
    std::ofstream out(args.output_path);
    if (!out) throw std::runtime_error("cannot write " + args.output_path);
    out << "id,rouge1_precision,rouge1_recall,rouge1_f1,"
           "rouge2_precision,rouge2_recall,rouge2_f1,"
           "rougel_precision,rougel_recall,rougel_f1\n";
    for (const auto& d : report.per_doc) {
      out << d.id;
      for (const RougeScore* s : {&d.r1, &d.r2, &d.rl})
        out << "," << fmt_full(s->precision) << "," << fmt_full(s->recall) << ","
            << fmt_full(s->f1);
      out << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// topics

struct TopicsArgs {
  std::string model_path;
  std::string sweep;  // comma-separated K list
  std::string config_path;
  std::string output_path;
  std::size_t top_n = 10;
};

std::vector<std::size_t> parse_size_list(const std::string& s, const char* flag) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoul(item));
    } catch (const std::exception&) {
      throw config_error(std::string(flag) + ": '" + item + "' is not a number");
    }
    if (out.back() == 0) throw config_error(std::string(flag) + ": values must be >= 1");
  }
  if (out.empty()) throw config_error(std::string(flag) + ": empty list");
  return out;
}

void print_topic_words(std::ostream& os, const NeuralTopicModel& ntm,
                       const TopicVocabulary& tv, std::size_t top_n) {
  Matrix beta = ntm.beta();
  for (std::size_t k = 0; k < beta.rows; ++k) {
    std::vector<std::size_t> idx(beta.cols);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return beta(k, a) > beta(k, b);
    });
    std::size_t n = std::min(top_n, idx.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (i) os << "\t";
      os << tv.token_of(idx[i]);
    }
    os << "\n";
  }
}

int cmd_topics(const TopicsArgs& args) {
  if (args.sweep.empty()) {
    ModelBundle bundle = load_bundle(args.model_path);
    if (args.output_path.empty()) {
      print_topic_words(std::cout, bundle.model->ntm(), bundle.topic_vocab, args.top_n);
    } else {
      std::ofstream out(args.output_path);
      if (!out) throw std::runtime_error("cannot write " + args.output_path);
      print_topic_words(out, bundle.model->ntm(), bundle.topic_vocab, args.top_n);
    }
    return 0;
  }

  if (args.config_path.empty())
    throw config_error("--sweep requires --config with a train_path");
  std::vector<std::size_t> ks = parse_size_list(args.sweep, "--sweep");
  RunConfig base = RunConfig::from_file(args.config_path);

  std::string csv = "topics,rouge_l_f1\n";
  for (std::size_t k : ks) {
    RunConfig rc = base;
    rc.topics = k;
    TrainedRun tr = run_training(rc, /*log_epochs=*/false);
    const std::vector<DocumentPair>& eval_pairs =
        tr.val_pairs.empty() ? tr.train_pairs : tr.val_pairs;
    DecodeConfig dc = make_decode_config(rc);
    std::vector<ScoredPair> scored;
    for (const auto& pair : eval_pairs) {
      GeneratedSummary gen =
          summarize_document(*tr.model, tr.vocab, tr.topic_vocab, pair, dc);
      scored.push_back({pair.id, gen.text, pair.summary});
    }
    EvalReport report = evaluate_corpus(scored);
    csv += std::to_string(k) + "," + fmt_full(report.mean_rl.f1) + "\n";
    std::cerr << "sweep topics=" << k << " rouge_l_f1=" << fmt_weight(report.mean_rl.f1)
              << "\n";
  }
  if (args.output_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(args.output_path);
    if (!out) throw std::runtime_error("cannot write " + args.output_path);
    out << csv;
    std::cout << "wrote " << args.output_path << "\n";
  }
  return 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig public surface

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw config_error(path + ": malformed JSON");
  if (!j.is_object()) throw config_error(path + ": config must be a JSON object");
  RunConfig rc;
  for (const auto& [key, value] : j.items()) apply_json_value(rc, key, value);
  return rc;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  json v = json::parse(value, nullptr, false);
  if (v.is_discarded()) v = value;  // bare words are strings
  apply_json_value(*this, key, v);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json(*this).dump(2) << "\n";
}

// ---------------------------------------------------------------------------
// CLI wiring

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"topic-aware abstractive summarizer"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "train a model and write run artifacts");
  std::string t_config, t_train, t_val, t_output;
  std::vector<std::string> t_sets;
  std::uint64_t t_seed = 0;
  std::size_t t_epochs = 0, t_batch = 0;
  auto* t_config_opt = train->add_option("--config", t_config, "JSON run config file");
  auto* t_train_opt = train->add_option("--train", t_train, "training JSONL");
  auto* t_val_opt = train->add_option("--val", t_val, "validation JSONL");
  auto* t_output_opt = train->add_option("--output", t_output, "artifact directory");
  auto* t_seed_opt = train->add_option("--seed", t_seed, "master seed");
  auto* t_epochs_opt = train->add_option("--epochs", t_epochs, "training epochs");
  auto* t_batch_opt = train->add_option("--batch-size", t_batch, "batch size");
  train->add_option("--set", t_sets, "key=value config override (repeatable)");

  // summarize
  auto* summarize =
      app.add_subcommand("summarize", "generate summaries with a trained model");
  SummarizeArgs s;
  std::size_t s_beam = 0, s_max = 0, s_min = 0;
  double s_norm = 0.0;
  summarize->add_option("--model", s.model_path, "run directory or checkpoint path");
  summarize->add_option("--input", s.input_path, "input JSONL");
  summarize->add_option("--output", s.output_path, "output JSONL");
  auto* s_beam_opt = summarize->add_option("--beam", s_beam, "beam size");
  auto* s_max_opt = summarize->add_option("--max-len", s_max, "summary length cap");
  auto* s_min_opt =
      summarize->add_option("--min-len", s_min, "tokens required before EOS");
  auto* s_norm_opt =
      summarize->add_option("--length-norm", s_norm, "length normalization exponent");
  summarize->add_option("--dump-attention", s.attention_path,
                        "write per-token topic attention weights here");
  summarize->add_flag("--block-trigrams", s.block_trigrams,
                      "forbid repeated trigrams during decoding");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score candidates against references");
  EvaluateArgs e;
  evaluate->add_option("--candidates", e.candidates_path, "candidate summaries JSONL");
  evaluate->add_option("--references", e.references_path, "reference JSONL");
  evaluate->add_flag("--lead3", e.lead3,
                     "score the first three document sentences instead of candidates");
  evaluate->add_option("--buckets", e.buckets,
                       "document-length bucket bounds lo,hi (sentence counts)");
  evaluate->add_option("--output", e.output_path, "per-document scores CSV");

  // topics
  auto* topics = app.add_subcommand("topics", "inspect learned topics");
  TopicsArgs p;
  topics->add_option("--model", p.model_path, "run directory or checkpoint path");
  topics->add_option("--top", p.top_n, "words per topic");
  topics->add_option("--sweep", p.sweep, "retrain for each topic count in the list");
  topics->add_option("--config", p.config_path, "run config for sweep retraining");
  topics->add_option("--output", p.output_path, "output file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ex) {
    return app.exit(ex);  // help and friends
  } catch (const CLI::ParseError& ex) {
    app.exit(ex);
    return 1;  // usage problems are validation errors
  }

  try {
    if (train->parsed()) {
      RunConfig rc;
      if (t_config_opt->count()) rc = RunConfig::from_file(t_config);
      for (const auto& kv : t_sets) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
          throw config_error("--set expects key=value (got '" + kv + "')");
        rc.set(kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (t_train_opt->count()) rc.train_path = t_train;
      if (t_val_opt->count()) rc.val_path = t_val;
      if (t_output_opt->count()) rc.output_dir = t_output;
      if (t_seed_opt->count()) rc.seed = t_seed;
      if (t_epochs_opt->count()) rc.epochs = t_epochs;
      if (t_batch_opt->count()) rc.batch_size = t_batch;
      return cmd_train(rc);
    }
    if (summarize->parsed()) {
      if (s_beam_opt->count()) s.beam = s_beam;
      if (s_max_opt->count()) s.max_len = s_max;
      if (s_min_opt->count()) s.min_len = s_min;
      if (s_norm_opt->count()) s.length_norm = s_norm;
      return cmd_summarize(s);
    }
    if (evaluate->parsed()) return cmd_evaluate(e);
    if (topics->parsed()) return cmd_topics(p);
    return 1;
  } catch (const config_error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}

}  // namespace taas
