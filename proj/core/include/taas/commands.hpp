#pragma once

#include <cstdint>
#include <string>

namespace taas {

/// Flat run configuration: one JSON object per run, every key optional,
/// unknown keys rejected by name. CLI flags override file values.
struct RunConfig {
  // Corpus and run layout.
  std::string train_path;
  std::string val_path;
  std::string output_dir = "run";
  std::string stopword_path;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  std::size_t vocab_cap = 10000;
  std::size_t topic_vocab_cap = 2000;
  std::size_t min_count = 1;

  // Optimizer.
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Model.
  std::size_t hidden = 128;
  std::size_t heads = 2;
  std::size_t encoder_layers = 2;
  std::size_t decoder_layers = 2;
  std::size_t ffn_width = 256;
  std::size_t max_len = 256;
  std::size_t max_summary_len = 64;
  double dropout = 0.1;
  std::string pooling_mode = "topic";          // topic | cls | sum
  std::string projection_variant = "additive";  // additive | post_ln
  std::string s_injection = "memory_slot";      // memory_slot | input_add
  double lambda = 0.0;
  bool freeze_encoder = false;
  std::size_t topics = 10;
  std::size_t latent_dim = 0;  // 0 means same as topics
  std::size_t ntm_hidden = 64;
  std::uint64_t seed = 42;
  bool position_encoding = true;

  // Decoding.
  std::size_t beam_size = 4;
  std::size_t min_len = 5;
  double length_norm = 1.0;
  bool block_trigrams = false;

  static RunConfig from_file(const std::string& path);
  /// Applies one key=value override using the JSON key names; throws
  /// config_error on unknown keys or unparseable values.
  void set(const std::string& key, const std::string& value);
  void save(const std::string& path) const;
};

/// Full command-line entry point: train / summarize / evaluate / topics.
/// Returns the process exit code: 0 ok, 1 configuration or usage error,
/// 2 runtime failure.
int run_cli(int argc, const char* const* argv);

}  // namespace taas
