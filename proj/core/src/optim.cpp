#include "semi2i/optim.hpp"

#include <cmath>
#include <unordered_map>

#include "semi2i/errors.hpp"

namespace semi2i {

Adam::Adam(const ParameterList& params, AdamOptions options) : options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step(const ParameterList& params, double lr) {
  if (params.size() != m_.size()) throw InvalidInput("Adam::step: parameter list changed");
  ++steps_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto w = p.mutable_values();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * g[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + options_.eps);
    }
  }
}

ParameterList Adam::state(const ParameterList& params, const std::string& prefix) const {
  ParameterList out;
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.push_back({prefix + "m/" + params[i].name, Tensor(params[i].tensor.shape(), m_[i])});
    out.push_back({prefix + "v/" + params[i].name, Tensor(params[i].tensor.shape(), v_[i])});
  }
  return out;
}

void Adam::load_state(const ParameterList& params, const ParameterList& state,
                      const std::string& prefix, std::int64_t steps) {
  std::unordered_map<std::string, const Tensor*> by_name;
  for (const auto& s : state) by_name[s.name] = &s.tensor;
  *this = Adam(params, options_);
  steps_ = steps;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (auto [key, buf] : {std::pair{"m/", &m_[i]}, std::pair{"v/", &v_[i]}}) {
      auto it = by_name.find(prefix + key + params[i].name);
      if (it == by_name.end() || it->second->numel() != buf->size()) {
        throw InvalidCheckpoint("missing optimizer state for " + params[i].name);
      }
      buf->assign(it->second->values().begin(), it->second->values().end());
    }
  }
}

}  // namespace semi2i
