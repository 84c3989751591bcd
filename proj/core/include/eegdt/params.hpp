#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eegdt/autodiff.hpp"

namespace eegdt {

// Ordered collection of named trainable tensors.
class ParameterSet {
 public:
  size_t add(std::string name, Tensor init);

  size_t size() const { return tensors_.size(); }
  const std::string& name(size_t i) const { return names_.at(i); }
  Tensor& tensor(size_t i) { return tensors_.at(i); }
  const Tensor& tensor(size_t i) const { return tensors_.at(i); }
  std::optional<size_t> find(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }

  size_t total_elements() const;

  // Rounds every value to the nearest float. Parameters are kept
  // float-representable so the f32 checkpoint payload is lossless.
  void quantize_f32();

  // Gradient buffers shaped like the parameters, zero filled.
  std::vector<Tensor> zeros_like() const;

  bool operator==(const ParameterSet&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

struct AdamWSettings {
  double lr = 2e-4;
  double weight_decay = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(AdamWSettings settings) : settings_(settings) {}

  void step(ParameterSet& params, const std::vector<Tensor>& grads);
  uint64_t steps_taken() const { return step_; }

 private:
  AdamWSettings settings_;
  uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

void add_into(std::vector<Tensor>& acc, const std::vector<Tensor>& other);
bool all_finite(const std::vector<Tensor>& grads);

}  // namespace eegdt
