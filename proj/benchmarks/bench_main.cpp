#include <benchmark/benchmark.h>

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "taas/autodiff.hpp"
#include "taas/evaluation.hpp"
#include "taas/matrix.hpp"
#include "taas/seq2seq.hpp"

namespace {

taas::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  taas::Matrix m(rows, cols);
  for (double& v : m.data) v = dist(rng);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  taas::Matrix a = random_matrix(n, n, 1);
  taas::Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) {
    taas::Matrix c = taas::matmul(a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(128)->Arg(256);

void BM_SoftmaxRows(benchmark::State& state) {
  taas::Matrix m = random_matrix(256, 512, 3);
  for (auto _ : state) {
    taas::Matrix y = taas::softmax_rows(m);
    benchmark::DoNotOptimize(y.data.data());
  }
}
BENCHMARK(BM_SoftmaxRows);

std::string synthetic_text(std::size_t sentences, std::uint64_t seed) {
  static const char* kWords[] = {"market", "report", "chief",  "growth", "city",
                                 "study",  "found",  "плам",   "season", "group",
                                 "early",  "plan",   "change", "record", "local"};
  std::mt19937_64 rng(seed);
  std::ostringstream os;
  for (std::size_t s = 0; s < sentences; ++s) {
    for (int w = 0; w < 12; ++w) os << kWords[rng() % 15] << " ";
    os << ". ";
  }
  return os.str();
}

void BM_RougeL(benchmark::State& state) {
  std::string cand = synthetic_text(4, 7);
  std::string ref = synthetic_text(20, 8);
  for (auto _ : state) {
    taas::RougeScore s = taas::rouge_l(cand, ref);
    benchmark::DoNotOptimize(s.f1);
  }
}
BENCHMARK(BM_RougeL);

taas::ModelConfig tiny_config() {
  taas::ModelConfig cfg;
  cfg.vocab_size = 64;
  cfg.hidden = 32;
  cfg.heads = 2;
  cfg.encoder_layers = 1;
  cfg.decoder_layers = 1;
  cfg.ffn_width = 64;
  cfg.max_len = 48;
  cfg.max_summary_len = 16;
  cfg.dropout = 0.0;
  cfg.topics = 4;
  cfg.topic_vocab_size = 32;
  return cfg;
}

void BM_JointForwardBackward(benchmark::State& state) {
  taas::TaasModel model(tiny_config());
  taas::Batch batch;
  std::mt19937_64 rng(11);
  for (int d = 0; d < 4; ++d) {
    std::vector<int> input{taas::Vocabulary::kCls};
    for (int i = 0; i < 32; ++i)
      input.push_back(5 + static_cast<int>(rng() % 59));
    std::vector<int> target;
    for (int i = 0; i < 10; ++i)
      target.push_back(5 + static_cast<int>(rng() % 59));
    target.push_back(taas::Vocabulary::kEos);
    batch.input_ids.push_back(input);
    batch.target_ids.push_back(target);
    batch.ids.push_back("d" + std::to_string(d));
  }
  batch.input_mask = taas::Matrix(4, 33, 1.0);
  batch.target_mask = taas::Matrix(4, 11, 1.0);
  batch.bow = taas::Matrix(4, 32);
  for (double& v : batch.bow.data) v = static_cast<double>(rng() % 3);

  for (auto _ : state) {
    taas::Graph g;
    taas::TaasModel::ForwardOptions opt;
    opt.train = true;
    opt.noise_seed = 17;
    auto nodes = model.build_loss(g, batch, opt);
    g.backward(nodes.combined);
    for (auto& p : model.parameters()) p.zero_grad();
    benchmark::DoNotOptimize(nodes.values.combined);
  }
}
BENCHMARK(BM_JointForwardBackward);

}  // namespace

BENCHMARK_MAIN();
