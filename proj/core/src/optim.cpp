#include "taas/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "taas/error.hpp"

namespace taas {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) {
    throw config_error("learning_rate must be positive, got " + std::to_string(learning_rate));
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0)) {
    throw config_error("beta1 must be in [0, 1), got " + std::to_string(beta1));
  }
  if (!(beta2 >= 0.0 && beta2 < 1.0)) {
    throw config_error("beta2 must be in [0, 1), got " + std::to_string(beta2));
  }
  if (!(epsilon > 0.0)) {
    throw config_error("epsilon must be positive, got " + std::to_string(epsilon));
  }
}

void adam_step(Parameter& p, const AdamConfig& cfg) {
  p.step_count += 1;
  const double t = static_cast<double>(p.step_count);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.gradient.data[i];
    double& m = p.adam_m.data[i];
    double& v = p.adam_v.data[i];
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
    const double mhat = m / bc1;
    const double vhat = v / bc2;
    p.value.data[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
  p.zero_grad();
}

Parameter& ParameterSet::create(const std::string& name, Matrix init) {
  if (index_.count(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  index_[name] = params_.size();
  params_.emplace_back(name, std::move(init));
  return params_.back();
}

Parameter& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return params_[it->second];
}

const Parameter& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::invalid_argument("unknown parameter: " + name);
  return params_[it->second];
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

}  // namespace taas
