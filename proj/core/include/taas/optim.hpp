#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>

#include "taas/matrix.hpp"

namespace taas {

/// A trainable matrix with its gradient accumulator and Adam state.
/// step_count is per-parameter so a freshly unfrozen parameter still gets
/// correct bias correction.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix gradient;
  Matrix adam_m;
  Matrix adam_v;
  std::int64_t step_count = 0;

  Parameter() = default;
  Parameter(std::string n, Matrix init)
      : name(std::move(n)),
        value(std::move(init)),
        gradient(value.rows, value.cols),
        adam_m(value.rows, value.cols),
        adam_v(value.rows, value.cols) {}

  void zero_grad() { std::fill(gradient.data.begin(), gradient.data.end(), 0.0); }
};

struct AdamConfig {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws config_error on out-of-range values.
  void validate() const;
};

/// One bias-corrected Adam update from the parameter's accumulated gradient.
/// Increments step_count and zeroes the gradient afterwards.
void adam_step(Parameter& p, const AdamConfig& cfg);

/// Owns a model's parameters in registration order. Storage is a deque so
/// Parameter pointers stay valid as more parameters are created; registration
/// order is what the checkpoint format and the optimizer loop iterate in.
class ParameterSet {
 public:
  Parameter& create(const std::string& name, Matrix init);

  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Total scalar count across all parameters.
  std::size_t scalar_count() const;

 private:
  std::deque<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace taas
