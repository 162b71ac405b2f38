#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "hypomimia/tensor.hpp"

namespace hypomimia {

class Tape;

/// Handle into a Tape. Cheap to copy; only meaningful together with the
/// tape that produced it.
struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

/// Records every operation applied to its variables so gradients can be
/// replayed in reverse. A tape is built fresh per training step and
/// discarded afterwards. Nodes created without any differentiable ancestor
/// carry no backward closure, so constants cost nothing at backward time.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);      // differentiable input
  Var constant(Tensor value);  // data; never receives a gradient

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  Tensor grad(Var v) const;                // zeros when never reached
  const Tensor* grad_if_any(Var v) const;  // nullptr when never reached
  std::size_t size() const { return nodes_.size(); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var mul_scalar(Var x, Var s);  // s holds a single element
  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var transpose(Var a);
  Var add_row_broadcast(Var m, Var row);

  Var sigmoid(Var x);
  Var tanh(Var x);
  Var gelu(Var x);
  Var exp(Var x);

  Var softmax_rows(Var x);
  Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var mean_rows(Var x);
  Var concat_rows(std::span<const Var> parts);
  Var concat_cols(std::span<const Var> parts);
  Var slice_rows(Var x, std::size_t r0, std::size_t r1);
  Var slice_cols(Var x, std::size_t c0, std::size_t c1);
  Var row(Var x, std::size_t r);  // 1-D view of one row
  Var gather_rows(Var table, std::vector<std::size_t> ids);
  Var stack_scalars(std::span<const Var> scalars);  // n singletons -> [n]

  Var cosine(Var u, Var v);  // singleton output
  Var mean_all(Var x);
  Var cross_entropy_logits(Var logits, std::size_t target);

  // Seeds d(root)/d(root) = 1 and walks the recording backwards. The root
  // must hold a single element.
  void backward(Var root);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool grad_alloc = false;
    std::function<void(Tape&)> backward_fn;
  };

  Var emit(Tensor value, bool requires_grad);
  void set_backward(Var v, std::function<void(Tape&)> fn);
  void accum(std::size_t id, const Tensor& g);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace hypomimia
