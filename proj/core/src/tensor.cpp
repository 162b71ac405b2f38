#include "hypomimia/tensor.hpp"

#include <cmath>
#include <sstream>

#include "hypomimia/errors.hpp"

namespace hypomimia {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

// Views any 1-D or 2-D tensor as rows x cols; 1-D is a single row.
void as_matrix(const Tensor& t, std::size_t& r, std::size_t& c) {
  if (t.ndim() == 1) {
    r = 1;
    c = t.shape()[0];
  } else if (t.ndim() == 2) {
    r = t.shape()[0];
    c = t.shape()[1];
  } else {
    throw ShapeError("expected 1-D or 2-D tensor, got " + t.shape_str());
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() +
                     " vs " + b.shape_str());
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
  if (shape_numel(shape) != data.size()) {
    throw ShapeError("from_data: " + std::to_string(data.size()) +
                     " values do not fill shape " + hypomimia::shape_str(shape));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(data);
  return t;
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

std::size_t Tensor::rows() const {
  std::size_t r, c;
  as_matrix(*this, r, c);
  return r;
}

std::size_t Tensor::cols() const {
  std::size_t r, c;
  as_matrix(*this, r, c);
  return c;
}

double& Tensor::at(std::size_t r, std::size_t c) {
  return data_[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return data_[r * cols() + c];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  return hypomimia::shape_str(shape_);
}

std::string shape_str(std::span<const std::size_t> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor reshaped(const Tensor& t, std::vector<std::size_t> shape) {
  if (shape_numel(shape) != t.numel()) {
    throw ShapeError("reshape: cannot view " + t.shape_str() + " as " +
                     shape_str(shape));
  }
  return Tensor::from_data(std::move(shape),
                           std::vector<double>(t.data().begin(), t.data().end()));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  std::size_t ar, ac, br, bc;
  as_matrix(a, ar, ac);
  as_matrix(b, br, bc);
  if (ac != br) {
    throw ShapeError("matmul: inner dims differ, " + a.shape_str() + " * " +
                     b.shape_str());
  }
  Tensor out(a.ndim() == 1 ? std::vector<std::size_t>{bc}
                           : std::vector<std::size_t>{ar, bc});
  // i-k-j order: each output element accumulates with k ascending, which
  // pins the floating-point reduction order.
  for (std::size_t i = 0; i < ar; ++i) {
    for (std::size_t k = 0; k < ac; ++k) {
      double aik = a[i * ac + k];
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < bc; ++j) {
        out[i * bc + j] += aik * b[k * bc + j];
      }
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  std::size_t ar, ac, br, bc;
  as_matrix(a, ar, ac);
  as_matrix(b, br, bc);
  if (ac != bc) {
    throw ShapeError("matmul_nt: inner dims differ, " + a.shape_str() +
                     " * T" + b.shape_str());
  }
  Tensor out(a.ndim() == 1 ? std::vector<std::size_t>{br}
                           : std::vector<std::size_t>{ar, br});
  for (std::size_t i = 0; i < ar; ++i) {
    for (std::size_t j = 0; j < br; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < ac; ++k) {
        acc += a[i * ac + k] * b[j * bc + k];
      }
      out[i * br + j] = acc;
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  std::size_t ar, ac, br, bc;
  as_matrix(a, ar, ac);
  as_matrix(b, br, bc);
  if (ar != br) {
    throw ShapeError("matmul_tn: inner dims differ, T" + a.shape_str() + " * " +
                     b.shape_str());
  }
  Tensor out({ac, bc});
  for (std::size_t k = 0; k < ar; ++k) {
    for (std::size_t i = 0; i < ac; ++i) {
      double aki = a[k * ac + i];
      if (aki == 0.0) continue;
      for (std::size_t j = 0; j < bc; ++j) {
        out[i * bc + j] += aki * b[k * bc + j];
      }
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  std::size_t r, c;
  as_matrix(a, r, c);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] -= b[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b[i];
  return out;
}

Tensor scale(const Tensor& a, double s) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= s;
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i)
    out[i] = 1.0 / (1.0 + std::exp(-out[i]));
  return out;
}

Tensor tanh(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    double v = out[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v / std::sqrt(2.0)));
  }
  return out;
}

Tensor exp(const Tensor& x) {
  Tensor out = x;
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::exp(out[i]);
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  std::size_t r, c;
  as_matrix(x, r, c);
  if (axis >= 2) throw ShapeError("softmax: axis out of range");
  Tensor out = x;
  // Normalize along rows (axis 1) or columns (axis 0); the running max is
  // subtracted before exponentiation so large logits cannot overflow.
  std::size_t outer = (axis == 1) ? r : c;
  std::size_t inner = (axis == 1) ? c : r;
  auto idx = [&](std::size_t o, std::size_t i) {
    return (axis == 1) ? o * c + i : i * c + o;
  };
  for (std::size_t o = 0; o < outer; ++o) {
    double mx = out[idx(o, 0)];
    for (std::size_t i = 1; i < inner; ++i) mx = std::max(mx, out[idx(o, i)]);
    double denom = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      double e = std::exp(out[idx(o, i)] - mx);
      out[idx(o, i)] = e;
      denom += e;
    }
    for (std::size_t i = 0; i < inner; ++i) out[idx(o, i)] /= denom;
  }
  return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps) {
  std::size_t r, c;
  as_matrix(x, r, c);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ShapeError("layer_norm_rows: affine params do not match width " +
                     std::to_string(c));
  }
  Tensor out = x;
  for (std::size_t i = 0; i < r; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < c; ++j) m += out[i * c + j];
    m /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double d = out[i * c + j] - m;
      var += d * d;
    }
    var /= static_cast<double>(c);
    double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = (out[i * c + j] - m) * inv * gamma[j] + beta[j];
    }
  }
  return out;
}

double sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return acc;
}

double mean(const Tensor& x) {
  if (x.numel() == 0) throw ShapeError("mean of empty tensor");
  return sum(x) / static_cast<double>(x.numel());
}

Tensor mean_rows(const Tensor& x) {
  std::size_t r, c;
  as_matrix(x, r, c);
  Tensor out({c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x[i * c + j];
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
  return out;
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  std::size_t total = 0, width = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    std::size_t r, c;
    as_matrix(parts[p], r, c);
    if (p == 0) {
      width = c;
    } else if (c != width) {
      throw ShapeError("concat_rows: width mismatch " + parts[p].shape_str());
    }
    total += r;
  }
  Tensor out({total, width});
  std::size_t pos = 0;
  for (const Tensor& p : parts) {
    for (double v : p.data()) out[pos++] = v;
  }
  return out;
}

Tensor slice_rows(const Tensor& x, std::size_t r0, std::size_t r1) {
  std::size_t r, c;
  as_matrix(x, r, c);
  if (r0 > r1 || r1 > r) throw ShapeError("slice_rows: bad range");
  Tensor out({r1 - r0, c});
  for (std::size_t i = r0; i < r1; ++i)
    for (std::size_t j = 0; j < c; ++j) out[(i - r0) * c + j] = x[i * c + j];
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
  std::size_t r, c;
  as_matrix(x, r, c);
  if (c0 > c1 || c1 > c) throw ShapeError("slice_cols: bad range");
  Tensor out(x.ndim() == 1 ? std::vector<std::size_t>{c1 - c0}
                           : std::vector<std::size_t>{r, c1 - c0});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = c0; j < c1; ++j) out[i * (c1 - c0) + (j - c0)] = x[i * c + j];
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  std::size_t rows0 = 0, total = 0;
  bool all_1d = true;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    std::size_t r, c;
    as_matrix(parts[p], r, c);
    if (p == 0) {
      rows0 = r;
    } else if (r != rows0) {
      throw ShapeError("concat_cols: row-count mismatch " + parts[p].shape_str());
    }
    all_1d = all_1d && parts[p].ndim() == 1;
    total += c;
  }
  Tensor out(all_1d ? std::vector<std::size_t>{total}
                    : std::vector<std::size_t>{rows0, total});
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    std::size_t r, c;
    as_matrix(p, r, c);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) out[i * total + offset + j] = p[i * c + j];
    offset += c;
  }
  return out;
}

Tensor add_row_broadcast(const Tensor& m, const Tensor& row) {
  std::size_t r, c;
  as_matrix(m, r, c);
  if (row.numel() != c) {
    throw ShapeError("add_row_broadcast: row width " + row.shape_str() +
                     " vs matrix " + m.shape_str());
  }
  Tensor out = m;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] += row[j];
  return out;
}

double cosine_similarity(const Tensor& u, const Tensor& v) {
  if (u.numel() != v.numel()) {
    throw ShapeError("cosine_similarity: " + u.shape_str() + " vs " +
                     v.shape_str());
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.numel(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    throw DataError("cosine_similarity: zero-norm vector");
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

}  // namespace hypomimia
