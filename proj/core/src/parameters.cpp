#include "hypomimia/parameters.hpp"

#include <cmath>

#include "hypomimia/errors.hpp"

namespace hypomimia {

ParamId ParameterStore::add(std::string name, Tensor init) {
  if (find(name)) throw ConfigError("duplicate parameter name: " + name);
  Entry e;
  e.name = std::move(name);
  e.grad = Tensor(init.shape(), 0.0);
  e.value = std::move(init);
  entries_.push_back(std::move(e));
  return ParamId{entries_.size() - 1};
}

const std::string& ParameterStore::name(ParamId id) const {
  return entries_.at(id.index).name;
}

Tensor& ParameterStore::value(ParamId id) { return entries_.at(id.index).value; }
const Tensor& ParameterStore::value(ParamId id) const {
  return entries_.at(id.index).value;
}
Tensor& ParameterStore::grad(ParamId id) { return entries_.at(id.index).grad; }
const Tensor& ParameterStore::grad(ParamId id) const {
  return entries_.at(id.index).grad;
}

std::vector<ParamId> ParameterStore::all() const {
  std::vector<ParamId> ids(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) ids[i] = ParamId{i};
  return ids;
}

std::optional<ParamId> ParameterStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return ParamId{i};
  }
  return std::nullopt;
}

void ParameterStore::zero_grads() {
  for (Entry& e : entries_) {
    for (double& g : e.grad.data()) g = 0.0;
  }
}

std::size_t ParameterStore::total_elements() const {
  std::size_t n = 0;
  for (const Entry& e : entries_) n += e.value.numel();
  return n;
}

TapeBinding::TapeBinding(Tape& tape, ParameterStore& store)
    : tape_(&tape), store_(&store), mutable_store_(&store), bound_(store.count()) {}

TapeBinding::TapeBinding(Tape& tape, const ParameterStore& store)
    : tape_(&tape), store_(&store), mutable_store_(nullptr), bound_(store.count()) {}

Var TapeBinding::operator[](ParamId id) {
  if (id.index >= bound_.size()) {
    throw ConfigError("tape binding: unknown parameter");
  }
  if (!bound_[id.index].valid()) {
    bound_[id.index] = mutable_store_ ? tape_->leaf(store_->value(id))
                                      : tape_->constant(store_->value(id));
  }
  return bound_[id.index];
}

void TapeBinding::accumulate_grads() {
  if (!mutable_store_) return;
  for (std::size_t i = 0; i < bound_.size(); ++i) {
    if (!bound_[i].valid()) continue;
    const Tensor* g = tape_->grad_if_any(bound_[i]);
    if (!g) continue;
    Tensor& dst = mutable_store_->grad(ParamId{i});
    for (std::size_t k = 0; k < dst.numel(); ++k) dst[k] += (*g)[k];
  }
}

Adam::Adam(ParameterStore& store, AdamConfig config)
    : store_(&store), config_(config) {
  for (ParamId id : store.all()) {
    lr_.push_back(config_.lr);
    m_.emplace_back(store.value(id).shape(), 0.0);
    v_.emplace_back(store.value(id).shape(), 0.0);
  }
}

void Adam::set_prefix_lr(std::string_view prefix, double lr) {
  for (ParamId id : store_->all()) {
    if (store_->name(id).starts_with(prefix)) lr_[id.index] = lr;
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (ParamId id : store_->all()) {
    Tensor& val = store_->value(id);
    const Tensor& g = store_->grad(id);
    Tensor& m = m_[id.index];
    Tensor& v = v_[id.index];
    double lr = lr_[id.index];
    for (std::size_t i = 0; i < val.numel(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

}  // namespace hypomimia
