#include "eegdt/params.hpp"

#include <cmath>

#include "eegdt/errors.hpp"

namespace eegdt {

size_t ParameterSet::add(std::string name, Tensor init) {
  if (find(name)) throw InvalidArgument("parameter '" + name + "' registered twice");
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(init));
  return tensors_.size() - 1;
}

std::optional<size_t> ParameterSet::find(std::string_view name) const {
  for (size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

size_t ParameterSet::total_elements() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += t.size();
  return n;
}

void ParameterSet::quantize_f32() {
  for (auto& t : tensors_)
    for (double& x : t.data) x = static_cast<double>(static_cast<float>(x));
}

std::vector<Tensor> ParameterSet::zeros_like() const {
  std::vector<Tensor> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.emplace_back(t.shape, 0.0);
  return out;
}

void AdamW::step(ParameterSet& params, const std::vector<Tensor>& grads) {
  if (grads.size() != params.size()) throw InvalidArgument("adamw: gradient count mismatch");
  if (m_.empty()) {
    for (size_t p = 0; p < params.size(); ++p) {
      m_.emplace_back(params.tensor(p).size(), 0.0);
      v_.emplace_back(params.tensor(p).size(), 0.0);
    }
  }
  ++step_;
  const auto& s = settings_;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(step_));
  for (size_t p = 0; p < params.size(); ++p) {
    auto& w = params.tensor(p).data;
    const auto& g = grads[p].data;
    auto& m = m_[p];
    auto& v = v_[p];
    for (size_t i = 0; i < w.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= s.lr * (mhat / (std::sqrt(vhat) + s.eps) + s.weight_decay * w[i]);
    }
  }
  params.quantize_f32();
}

void add_into(std::vector<Tensor>& acc, const std::vector<Tensor>& other) {
  if (acc.size() != other.size()) throw InvalidArgument("add_into: size mismatch");
  for (size_t p = 0; p < acc.size(); ++p)
    for (size_t i = 0; i < acc[p].size(); ++i) acc[p][i] += other[p][i];
}

bool all_finite(const std::vector<Tensor>& grads) {
  for (const auto& t : grads)
    for (double x : t.data)
      if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace eegdt
