#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hypomimia/tape.hpp"
#include "hypomimia/tensor.hpp"

namespace hypomimia {

struct ParamId {
  std::size_t index = static_cast<std::size_t>(-1);
};

/// Named, ordered collection of trainable tensors. Registration order is
/// stable and doubles as the serialization order, so two models built the
/// same way always line up parameter-for-parameter.
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor init);

  std::size_t count() const { return entries_.size(); }
  const std::string& name(ParamId id) const;
  Tensor& value(ParamId id);
  const Tensor& value(ParamId id) const;
  Tensor& grad(ParamId id);
  const Tensor& grad(ParamId id) const;

  std::vector<ParamId> all() const;
  std::optional<ParamId> find(std::string_view name) const;
  void zero_grads();
  std::size_t total_elements() const;

 private:
  struct Entry {
    std::string name;
    Tensor value;
    Tensor grad;
  };
  std::vector<Entry> entries_;
};

/// Lazily exposes store parameters as tape leaves for one recording, then
/// copies whatever gradients the tape produced back into the store. A
/// binding over a const store is frozen: parameters enter the tape as
/// constants and record no gradients (inference mode).
class TapeBinding {
 public:
  TapeBinding(Tape& tape, ParameterStore& store);
  TapeBinding(Tape& tape, const ParameterStore& store);  // frozen

  Var operator[](ParamId id);
  void accumulate_grads();  // no-op when frozen

 private:
  Tape* tape_;
  const ParameterStore* store_;
  ParameterStore* mutable_store_;  // null when frozen
  std::vector<Var> bound_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with optional per-parameter learning rates (set via name prefix).
class Adam {
 public:
  Adam(ParameterStore& store, AdamConfig config);

  // Every parameter whose name starts with `prefix` steps at `lr` instead
  // of the default.
  void set_prefix_lr(std::string_view prefix, double lr);
  void step();
  std::size_t steps_taken() const { return t_; }

 private:
  ParameterStore* store_;
  AdamConfig config_;
  std::vector<double> lr_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  std::size_t t_ = 0;
};

}  // namespace hypomimia
