#include "hypomimia/tape.hpp"

#include <cmath>

#include "hypomimia/errors.hpp"

namespace hypomimia {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) {
    throw ShapeError("tape: variable does not belong to this tape");
  }
  return nodes_[v.id];
}

Var Tape::emit(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

void Tape::set_backward(Var v, std::function<void(Tape&)> fn) {
  if (nodes_[v.id].requires_grad) nodes_[v.id].backward_fn = std::move(fn);
}

void Tape::accum(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (!n.grad_alloc) {
    n.grad = Tensor(n.value.shape(), 0.0);
    n.grad_alloc = true;
  }
  if (!n.grad.same_shape(g)) {
    throw ShapeError("tape: gradient shape " + g.shape_str() +
                     " does not match value " + n.value.shape_str());
  }
  for (std::size_t i = 0; i < g.numel(); ++i) n.grad[i] += g[i];
}

Var Tape::leaf(Tensor value) { return emit(std::move(value), true); }
Var Tape::constant(Tensor value) { return emit(std::move(value), false); }

const Tensor& Tape::value(Var v) const { return node(v).value; }
bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Tensor Tape::grad(Var v) const {
  const Node& n = node(v);
  return n.grad_alloc ? n.grad : Tensor(n.value.shape(), 0.0);
}

const Tensor* Tape::grad_if_any(Var v) const {
  const Node& n = node(v);
  return n.grad_alloc ? &n.grad : nullptr;
}

void Tape::backward(Var root) {
  Node& r = nodes_[root.id];
  if (r.value.numel() != 1) {
    throw ShapeError("backward: root must hold one element, got " +
                     r.value.shape_str());
  }
  if (!r.requires_grad) return;
  r.grad = Tensor(r.value.shape(), 1.0);
  r.grad_alloc = true;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad_alloc && n.backward_fn) n.backward_fn(*this);
  }
}

Var Tape::add(Var a, Var b) {
  Var out = emit(hypomimia::add(value(a), value(b)),
                 requires_grad(a) || requires_grad(b));
  set_backward(out, [ai = a.id, bi = b.id, oi = out.id](Tape& t) {
    t.accum(ai, t.nodes_[oi].grad);
    t.accum(bi, t.nodes_[oi].grad);
  });
  return out;
}

Var Tape::sub(Var a, Var b) {
  Var out = emit(hypomimia::sub(value(a), value(b)),
                 requires_grad(a) || requires_grad(b));
  set_backward(out, [ai = a.id, bi = b.id, oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    t.accum(ai, up);
    t.accum(bi, hypomimia::scale(up, -1.0));
  });
  return out;
}

Var Tape::mul(Var a, Var b) {
  Var out = emit(hypomimia::mul(value(a), value(b)),
                 requires_grad(a) || requires_grad(b));
  set_backward(out, [ai = a.id, bi = b.id, oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    t.accum(ai, hypomimia::mul(up, t.nodes_[bi].value));
    t.accum(bi, hypomimia::mul(up, t.nodes_[ai].value));
  });
  return out;
}

Var Tape::scale(Var a, double s) {
  Var out = emit(hypomimia::scale(value(a), s), requires_grad(a));
  set_backward(out, [ai = a.id, oi = out.id, s](Tape& t) {
    t.accum(ai, hypomimia::scale(t.nodes_[oi].grad, s));
  });
  return out;
}

Var Tape::mul_scalar(Var x, Var s) {
  if (value(s).numel() != 1) {
    throw ShapeError("mul_scalar: scale must hold one element");
  }
  Var out = emit(hypomimia::scale(value(x), value(s)[0]),
                 requires_grad(x) || requires_grad(s));
  set_backward(out, [xi = x.id, si = s.id, oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    t.accum(xi, hypomimia::scale(up, t.nodes_[si].value[0]));
    const Tensor& xv = t.nodes_[xi].value;
    double acc = 0.0;
    for (std::size_t i = 0; i < up.numel(); ++i) acc += up[i] * xv[i];
    Tensor gs(t.nodes_[si].value.shape(), 0.0);
    gs[0] = acc;
    t.accum(si, gs);
  });
  return out;
}

Var Tape::matmul(Var a, Var b) {
  Var out = emit(hypomimia::matmul(value(a), value(b)),
                 requires_grad(a) || requires_grad(b));
  set_backward(out, [ai = a.id, bi = b.id, oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    t.accum(ai, hypomimia::matmul_nt(up, t.nodes_[bi].value));
    t.accum(bi, hypomimia::matmul_tn(t.nodes_[ai].value, up));
  });
  return out;
}

Var Tape::matmul_nt(Var a, Var b) {
  Var out = emit(hypomimia::matmul_nt(value(a), value(b)),
                 requires_grad(a) || requires_grad(b));
  set_backward(out, [ai = a.id, bi = b.id, oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    t.accum(ai, hypomimia::matmul(up, t.nodes_[bi].value));
    t.accum(bi, hypomimia::matmul_tn(up, t.nodes_[ai].value));
  });
  return out;
}

Var Tape::transpose(Var a) {
  Var out = emit(hypomimia::transpose(value(a)), requires_grad(a));
  set_backward(out, [ai = a.id, oi = out.id](Tape& t) {
    t.accum(ai, hypomimia::transpose(t.nodes_[oi].grad));
  });
  return out;
}

Var Tape::add_row_broadcast(Var m, Var row) {
  Var out = emit(hypomimia::add_row_broadcast(value(m), value(row)),
                 requires_grad(m) || requires_grad(row));
  set_backward(out, [mi = m.id, ri = row.id, oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    t.accum(mi, up);
    std::size_t c = t.nodes_[ri].value.numel();
    std::size_t r = up.numel() / c;
    Tensor gr(t.nodes_[ri].value.shape(), 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gr[j] += up[i * c + j];
    t.accum(ri, gr);
  });
  return out;
}

Var Tape::sigmoid(Var x) {
  Var out = emit(hypomimia::sigmoid(value(x)), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id](Tape& t) {
    const Tensor& y = t.nodes_[oi].value;
    Tensor g = t.nodes_[oi].grad;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= y[i] * (1.0 - y[i]);
    t.accum(xi, g);
  });
  return out;
}

Var Tape::tanh(Var x) {
  Var out = emit(hypomimia::tanh(value(x)), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id](Tape& t) {
    const Tensor& y = t.nodes_[oi].value;
    Tensor g = t.nodes_[oi].grad;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= 1.0 - y[i] * y[i];
    t.accum(xi, g);
  });
  return out;
}

Var Tape::gelu(Var x) {
  Var out = emit(hypomimia::gelu(value(x)), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id](Tape& t) {
    const Tensor& xv = t.nodes_[xi].value;
    Tensor g = t.nodes_[oi].grad;
    for (std::size_t i = 0; i < g.numel(); ++i) {
      double v = xv[i];
      double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      g[i] *= cdf + v * pdf;
    }
    t.accum(xi, g);
  });
  return out;
}

Var Tape::exp(Var x) {
  Var out = emit(hypomimia::exp(value(x)), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id](Tape& t) {
    t.accum(xi, hypomimia::mul(t.nodes_[oi].grad, t.nodes_[oi].value));
  });
  return out;
}

Var Tape::softmax_rows(Var x) {
  // as_matrix views 1-D as a single row, so axis 1 is row-wise either way.
  Var out = emit(hypomimia::softmax(value(x), 1), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id](Tape& t) {
    const Tensor& y = t.nodes_[oi].value;
    const Tensor& up = t.nodes_[oi].grad;
    std::size_t r = y.ndim() == 1 ? 1 : y.shape()[0];
    std::size_t c = y.numel() / r;
    Tensor g(y.shape(), 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += up[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j)
        g[i * c + j] = y[i * c + j] * (up[i * c + j] - dot);
    }
    t.accum(xi, g);
  });
  return out;
}

Var Tape::layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  Var out = emit(hypomimia::layer_norm_rows(value(x), value(gamma), value(beta), eps),
                 requires_grad(x) || requires_grad(gamma) || requires_grad(beta));
  set_backward(out, [xi = x.id, gi = gamma.id, bi = beta.id, oi = out.id,
                     eps](Tape& t) {
    const Tensor& xv = t.nodes_[xi].value;
    const Tensor& gv = t.nodes_[gi].value;
    const Tensor& up = t.nodes_[oi].grad;
    std::size_t r = xv.ndim() == 1 ? 1 : xv.shape()[0];
    std::size_t c = xv.numel() / r;
    Tensor gx(xv.shape(), 0.0);
    Tensor gg(t.nodes_[gi].value.shape(), 0.0);
    Tensor gb(t.nodes_[bi].value.shape(), 0.0);
    for (std::size_t i = 0; i < r; ++i) {
      double m = 0.0;
      for (std::size_t j = 0; j < c; ++j) m += xv[i * c + j];
      m /= static_cast<double>(c);
      double var = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        double d = xv[i * c + j] - m;
        var += d * d;
      }
      var /= static_cast<double>(c);
      double inv = 1.0 / std::sqrt(var + eps);
      // dy through the affine pair, then the two mean couplings of the
      // normalization itself.
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        double xhat = (xv[i * c + j] - m) * inv;
        double dyg = up[i * c + j] * gv[j];
        s1 += dyg;
        s2 += dyg * xhat;
        gg[j] += up[i * c + j] * xhat;
        gb[j] += up[i * c + j];
      }
      s1 /= static_cast<double>(c);
      s2 /= static_cast<double>(c);
      for (std::size_t j = 0; j < c; ++j) {
        double xhat = (xv[i * c + j] - m) * inv;
        gx[i * c + j] = (up[i * c + j] * gv[j] - s1 - xhat * s2) * inv;
      }
    }
    t.accum(xi, gx);
    t.accum(gi, gg);
    t.accum(bi, gb);
  });
  return out;
}

Var Tape::mean_rows(Var x) {
  Var out = emit(hypomimia::mean_rows(value(x)), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id](Tape& t) {
    const Tensor& xv = t.nodes_[xi].value;
    const Tensor& up = t.nodes_[oi].grad;
    std::size_t c = up.numel();
    std::size_t r = xv.numel() / c;
    Tensor g(xv.shape(), 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        g[i * c + j] = up[j] / static_cast<double>(r);
    t.accum(xi, g);
  });
  return out;
}

Var Tape::concat_rows(std::span<const Var> parts) {
  std::vector<Tensor> vals;
  vals.reserve(parts.size());
  bool rg = false;
  for (Var p : parts) {
    vals.push_back(value(p));
    rg = rg || requires_grad(p);
  }
  Var out = emit(hypomimia::concat_rows(vals), rg);
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  for (Var p : parts) ids.push_back(p.id);
  set_backward(out, [ids = std::move(ids), oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    std::size_t pos = 0;
    for (std::size_t pid : ids) {
      const Tensor& pv = t.nodes_[pid].value;
      Tensor g(pv.shape(), 0.0);
      for (std::size_t i = 0; i < pv.numel(); ++i) g[i] = up[pos + i];
      pos += pv.numel();
      t.accum(pid, g);
    }
  });
  return out;
}

Var Tape::concat_cols(std::span<const Var> parts) {
  std::vector<Tensor> vals;
  vals.reserve(parts.size());
  bool rg = false;
  for (Var p : parts) {
    vals.push_back(value(p));
    rg = rg || requires_grad(p);
  }
  Var out = emit(hypomimia::concat_cols(vals), rg);
  std::vector<std::size_t> ids;
  ids.reserve(parts.size());
  for (Var p : parts) ids.push_back(p.id);
  set_backward(out, [ids = std::move(ids), oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    std::size_t total = up.shape().back();
    std::size_t r = up.numel() / total;
    std::size_t offset = 0;
    for (std::size_t pid : ids) {
      const Tensor& pv = t.nodes_[pid].value;
      std::size_t c = pv.shape().back();
      Tensor g(pv.shape(), 0.0);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j)
          g[i * c + j] = up[i * total + offset + j];
      offset += c;
      t.accum(pid, g);
    }
  });
  return out;
}

Var Tape::slice_cols(Var x, std::size_t c0, std::size_t c1) {
  Var out = emit(hypomimia::slice_cols(value(x), c0, c1), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id, c0, c1](Tape& t) {
    const Tensor& xv = t.nodes_[xi].value;
    const Tensor& up = t.nodes_[oi].grad;
    std::size_t c = xv.shape().back();
    std::size_t w = c1 - c0;
    std::size_t r = xv.numel() / c;
    Tensor g(xv.shape(), 0.0);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) g[i * c + c0 + j] = up[i * w + j];
    t.accum(xi, g);
  });
  return out;
}

Var Tape::slice_rows(Var x, std::size_t r0, std::size_t r1) {
  Var out = emit(hypomimia::slice_rows(value(x), r0, r1), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id, r0](Tape& t) {
    const Tensor& xv = t.nodes_[xi].value;
    const Tensor& up = t.nodes_[oi].grad;
    Tensor g(xv.shape(), 0.0);
    std::size_t c = xv.shape().back();
    for (std::size_t i = 0; i < up.numel(); ++i) g[r0 * c + i] = up[i];
    t.accum(xi, g);
  });
  return out;
}

Var Tape::row(Var x, std::size_t r) {
  const Tensor& xv = value(x);
  std::size_t c = xv.cols();
  if (r >= xv.rows()) throw ShapeError("row: index out of range");
  Tensor v({c});
  for (std::size_t j = 0; j < c; ++j) v[j] = xv[r * c + j];
  Var out = emit(std::move(v), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id, r, c](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    Tensor g(t.nodes_[xi].value.shape(), 0.0);
    for (std::size_t j = 0; j < c; ++j) g[r * c + j] = up[j];
    t.accum(xi, g);
  });
  return out;
}

Var Tape::gather_rows(Var table, std::vector<std::size_t> ids) {
  const Tensor& tv = value(table);
  std::size_t c = tv.cols();
  Tensor v({ids.size(), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= tv.rows()) throw ShapeError("gather_rows: index out of range");
    for (std::size_t j = 0; j < c; ++j) v[i * c + j] = tv[ids[i] * c + j];
  }
  Var out = emit(std::move(v), requires_grad(table));
  set_backward(out, [ti = table.id, oi = out.id, ids = std::move(ids), c](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    Tensor g(t.nodes_[ti].value.shape(), 0.0);
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) g[ids[i] * c + j] += up[i * c + j];
    t.accum(ti, g);
  });
  return out;
}

Var Tape::stack_scalars(std::span<const Var> scalars) {
  Tensor v({scalars.size()});
  bool rg = false;
  std::vector<std::size_t> ids;
  ids.reserve(scalars.size());
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (value(scalars[i]).numel() != 1) {
      throw ShapeError("stack_scalars: inputs must hold one element each");
    }
    v[i] = value(scalars[i])[0];
    rg = rg || requires_grad(scalars[i]);
    ids.push_back(scalars[i].id);
  }
  Var out = emit(std::move(v), rg);
  set_backward(out, [ids = std::move(ids), oi = out.id](Tape& t) {
    const Tensor& up = t.nodes_[oi].grad;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      Tensor g(t.nodes_[ids[i]].value.shape(), up[i]);
      t.accum(ids[i], g);
    }
  });
  return out;
}

Var Tape::cosine(Var u, Var v) {
  double c = cosine_similarity(value(u), value(v));
  Var out = emit(Tensor({1}, c), requires_grad(u) || requires_grad(v));
  set_backward(out, [ui = u.id, vi = v.id, oi = out.id, c](Tape& t) {
    const Tensor& uv = t.nodes_[ui].value;
    const Tensor& vv = t.nodes_[vi].value;
    double up = t.nodes_[oi].grad[0];
    double nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < uv.numel(); ++i) {
      nu += uv[i] * uv[i];
      nv += vv[i] * vv[i];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);
    Tensor gu(uv.shape(), 0.0), gv(vv.shape(), 0.0);
    for (std::size_t i = 0; i < uv.numel(); ++i) {
      gu[i] = up * (vv[i] / (nu * nv) - c * uv[i] / (nu * nu));
      gv[i] = up * (uv[i] / (nu * nv) - c * vv[i] / (nv * nv));
    }
    t.accum(ui, gu);
    t.accum(vi, gv);
  });
  return out;
}

Var Tape::mean_all(Var x) {
  Var out = emit(Tensor({1}, mean(value(x))), requires_grad(x));
  set_backward(out, [xi = x.id, oi = out.id](Tape& t) {
    const Tensor& xv = t.nodes_[xi].value;
    double g = t.nodes_[oi].grad[0] / static_cast<double>(xv.numel());
    t.accum(xi, Tensor(xv.shape(), g));
  });
  return out;
}

Var Tape::cross_entropy_logits(Var logits, std::size_t target) {
  const Tensor& lv = value(logits);
  if (lv.ndim() != 1) throw ShapeError("cross_entropy_logits: expected 1-D logits");
  if (target >= lv.numel()) throw ShapeError("cross_entropy_logits: target out of range");
  // loss = logsumexp(logits) - logits[target], with the max subtracted
  // inside the logsumexp for stability.
  double mx = lv[0];
  for (std::size_t i = 1; i < lv.numel(); ++i) mx = std::max(mx, lv[i]);
  double denom = 0.0;
  for (std::size_t i = 0; i < lv.numel(); ++i) denom += std::exp(lv[i] - mx);
  double loss = std::log(denom) + mx - lv[target];
  Tensor probs(lv.shape(), 0.0);
  for (std::size_t i = 0; i < lv.numel(); ++i)
    probs[i] = std::exp(lv[i] - mx) / denom;
  Var out = emit(Tensor({1}, loss), requires_grad(logits));
  set_backward(out, [li = logits.id, oi = out.id, probs = std::move(probs),
                     target](Tape& t) {
    double up = t.nodes_[oi].grad[0];
    Tensor g = probs;
    g[target] -= 1.0;
    for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= up;
    t.accum(li, g);
  });
  return out;
}

}  // namespace hypomimia
