#pragma once

// Shared helpers for the unit and acceptance suites: finite-difference
// gradient checking, toy decoding scorers with an exhaustive-search oracle,
// and filesystem scratch space.

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "taas/decoding.hpp"
#include "taas/matrix.hpp"
#include "taas/optim.hpp"

namespace testutil {

/// Runs f, expecting it to throw E; returns the exception message so tests
/// can assert on fragments without depending on exact wording elsewhere.
template <typename E, typename F>
std::string message_of(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  } catch (...) {
    return "<wrong exception type>";
  }
  return "<no exception>";
}

// ---------------------------------------------------------------------------
// Scratch directories

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("taas_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline std::string data_file(const std::string& name) {
  return std::string(TAAS_TEST_DATA_DIR) + "/" + name;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

/// Copies every parameter's accumulated gradient and zeroes the originals.
inline std::map<std::string, taas::Matrix> grab_gradients(taas::ParameterSet& params) {
  std::map<std::string, taas::Matrix> out;
  for (auto& p : params) {
    out.emplace(p.name, p.gradient);
    p.zero_grad();
  }
  return out;
}

struct FdReport {
  double max_rel_err = 0.0;
  std::string worst;  // "name[i]" of the worst coordinate
  std::size_t coords_checked = 0;
};

/// Central differences against the analytic gradients. forward() must
/// recompute the scalar loss from the parameters' current values. Checks up
/// to max_coords seeded-random coordinates per parameter (all of them for
/// small parameters). Relative error uses a floored denominator so near-zero
/// gradients do not explode the ratio.
inline FdReport fd_check(taas::ParameterSet& params,
                         const std::function<double()>& forward,
                         const std::map<std::string, taas::Matrix>& analytic,
                         std::size_t max_coords = 50, double step = 1e-4,
                         std::uint64_t seed = 1234) {
  FdReport report;
  std::mt19937_64 rng(seed);
  for (auto& p : params) {
    const taas::Matrix& grad = analytic.at(p.name);
    std::vector<std::size_t> coords(p.value.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > max_coords) {
      for (std::size_t i = 0; i < max_coords; ++i) {
        std::size_t j = i + rng() % (coords.size() - i);
        std::swap(coords[i], coords[j]);
      }
      coords.resize(max_coords);
    }
    for (std::size_t idx : coords) {
      const double saved = p.value.data[idx];
      p.value.data[idx] = saved + step;
      const double up = forward();
      p.value.data[idx] = saved - step;
      const double down = forward();
      p.value.data[idx] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double an = grad.data[idx];
      const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-4});
      const double rel = std::fabs(fd - an) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_err) {
        report.max_rel_err = rel;
        report.worst = p.name + "[" + std::to_string(idx) + "]";
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Toy scorers for decoding tests

/// Deterministic pseudo-random log-scores: a pure function of (seed, prefix),
/// so beam search, greedy, and the exhaustive oracle all see the same table.
class RandomScorer : public taas::StepScorer {
 public:
  RandomScorer(std::size_t vocab, std::uint64_t seed) : vocab_(vocab), seed_(seed) {}

  std::size_t vocab_size() const override { return vocab_; }

  std::vector<double> next_log_probs(const std::vector<int>& prefix) override {
    std::uint64_t h = seed_;
    for (int id : prefix) {
      h ^= static_cast<std::uint64_t>(id) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    std::mt19937_64 rng(h);
    std::uniform_real_distribution<double> dist(-3.0, 0.0);
    std::vector<double> out(vocab_);
    for (double& v : out) v = dist(rng);
    return out;
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
};

/// Explicit lookup table; prefixes without an entry fall back to a constant
/// row. Handy for hand-built decoding fixtures.
class TableScorer : public taas::StepScorer {
 public:
  TableScorer(std::size_t vocab, double fallback = -1e9)
      : vocab_(vocab), fallback_(fallback) {}

  void set(const std::vector<int>& prefix, std::vector<double> row) {
    table_[prefix] = std::move(row);
  }

  std::size_t vocab_size() const override { return vocab_; }

  std::vector<double> next_log_probs(const std::vector<int>& prefix) override {
    auto it = table_.find(prefix);
    if (it != table_.end()) return it->second;
    return std::vector<double>(vocab_, fallback_);
  }

 private:
  std::size_t vocab_;
  double fallback_;
  std::map<std::vector<int>, std::vector<double>> table_;
};

/// Exhaustive search over every decodable sequence: depth-first expansion of
/// all tokens, honoring the same EOS/min-length rules as the decoder. The
/// returned hypothesis maximizes log_prob / max(1, generated)^exponent with
/// ties broken toward lexicographically smaller ids. Feasible only for tiny
/// vocabularies and lengths.
inline taas::Hypothesis exhaustive_best(taas::StepScorer& scorer,
                                        const taas::DecodeConfig& cfg) {
  taas::Hypothesis best;
  bool have_best = false;
  auto consider = [&](const std::vector<int>& ids, double lp, std::size_t generated) {
    taas::Hypothesis h;
    h.ids = ids;
    h.log_prob = lp;
    h.finished = true;
    const double len = static_cast<double>(std::max<std::size_t>(1, generated));
    h.score = lp / std::pow(len, cfg.length_norm_exponent);
    if (!have_best || h.score > best.score ||
        (h.score == best.score && h.ids < best.ids)) {
      best = h;
      have_best = true;
    }
  };
  std::function<void(std::vector<int>&, double, std::size_t)> walk =
      [&](std::vector<int>& ids, double lp, std::size_t generated) {
        if (generated == cfg.max_summary_len) {
          consider(ids, lp, generated);
          return;
        }
        std::vector<double> row = scorer.next_log_probs(ids);
        for (int t = 0; t < static_cast<int>(row.size()); ++t) {
          if (t == cfg.eos_id && generated < cfg.min_len) continue;
          if (!std::isfinite(row[t])) continue;
          ids.push_back(t);
          if (t == cfg.eos_id)
            consider(ids, lp + row[t], generated + 1);
          else
            walk(ids, lp + row[t], generated + 1);
          ids.pop_back();
        }
      };
  std::vector<int> ids{cfg.bos_id};
  walk(ids, 0.0, 0);
  return best;
}

}  // namespace testutil
