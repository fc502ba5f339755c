#include "aph/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "aph/rng.hpp"

namespace aph {

using detail::TensorNode;

namespace {

std::string shape_of(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw TensorError(std::string(op) + ": incompatible shapes " + shape_of(a) +
                    " and " + shape_of(b));
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

TensorNode* Tape::make(int rows, int cols, const char* op, bool requires_grad) {
  auto n = std::make_unique<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->value.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  n->requires_grad = grad_enabled_ && requires_grad;
  n->op = op;
  nodes_.push_back(std::move(n));
  return nodes_.back().get();
}

void Tape::check_finite(const TensorNode* n) const {
  for (double v : n->value) {
    if (!std::isfinite(v))
      throw TensorError(std::string(n->op) + ": produced non-finite value");
  }
}

Tensor Tape::leaf(int rows, int cols, std::vector<double> values, bool requires_grad) {
  if (rows <= 0 || cols <= 0)
    throw TensorError("leaf: dimensions must be positive");
  if (values.size() != static_cast<std::size_t>(rows) * cols)
    throw TensorError("leaf: " + std::to_string(values.size()) +
                      " values for shape " + std::to_string(rows) + "x" +
                      std::to_string(cols));
  TensorNode* n = make(rows, cols, "leaf", requires_grad);
  n->requires_grad = requires_grad;  // leaves keep grad even on no-grad tapes
  n->value = std::move(values);
  check_finite(n);
  return Tensor(n);
}

Tensor Tape::constant(int rows, int cols, std::vector<double> values) {
  return leaf(rows, cols, std::move(values), false);
}

Tensor Tape::scalar_const(double v) { return constant(1, 1, {v}); }

Tensor Tape::zeros(int rows, int cols) {
  return constant(rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, 0.0));
}

Tensor Tape::matmul(Tensor a, Tensor b) {
  if (a.cols() != b.rows()) shape_error("matmul", a, b);
  const int r = a.rows(), k = a.cols(), c = b.cols();
  TensorNode* out = make(r, c, "matmul", a.requires_grad() || b.requires_grad());
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out->value.data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < k; ++j) {
      const double aij = av[i * k + j];
      if (aij == 0.0) continue;
      for (int l = 0; l < c; ++l) ov[i * c + l] += aij * bv[j * c + l];
    }
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    out->backward = [an, bn, out, r, k, c]() {
      const double* g = out->grad.data();
      if (an->requires_grad) {
        an->ensure_grad();
        // dA = dC . B^T
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < k; ++j) {
            double acc = 0.0;
            for (int l = 0; l < c; ++l) acc += g[i * c + l] * bn->value[j * c + l];
            an->grad[i * k + j] += acc;
          }
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        // dB = A^T . dC
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < k; ++j) {
            const double aij = an->value[i * k + j];
            if (aij == 0.0) continue;
            for (int l = 0; l < c; ++l) bn->grad[j * c + l] += aij * g[i * c + l];
          }
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::add(Tensor a, Tensor b) {
  require_same_shape("add", a, b);
  TensorNode* out = make(a.rows(), a.cols(), "add", a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a.values()[i] + b.values()[i];
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    out->backward = [an, bn, out]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) an->grad[i] += out->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) bn->grad[i] += out->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::sub(Tensor a, Tensor b) {
  require_same_shape("sub", a, b);
  TensorNode* out = make(a.rows(), a.cols(), "sub", a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a.values()[i] - b.values()[i];
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    out->backward = [an, bn, out]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) an->grad[i] += out->grad[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i) bn->grad[i] -= out->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::mul(Tensor a, Tensor b) {
  require_same_shape("mul", a, b);
  TensorNode* out = make(a.rows(), a.cols(), "mul", a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a.values()[i] * b.values()[i];
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    out->backward = [an, bn, out]() {
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i)
          an->grad[i] += out->grad[i] * bn->value[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < out->size(); ++i)
          bn->grad[i] += out->grad[i] * an->value[i];
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::scale(Tensor a, double c) {
  if (!std::isfinite(c)) throw TensorError("scale: non-finite constant");
  TensorNode* out = make(a.rows(), a.cols(), "scale", a.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i) out->value[i] = a.values()[i] * c;
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    out->backward = [an, out, c]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) an->grad[i] += c * out->grad[i];
    };
  }
  return Tensor(out);
}

Tensor Tape::concat(Tensor a, Tensor b, int axis) {
  if (axis != 0 && axis != 1) throw TensorError("concat: axis must be 0 or 1");
  if (axis == 1 ? (a.rows() != b.rows()) : (a.cols() != b.cols()))
    shape_error("concat", a, b);
  const int r = axis == 0 ? a.rows() + b.rows() : a.rows();
  const int c = axis == 1 ? a.cols() + b.cols() : a.cols();
  TensorNode* out = make(r, c, "concat", a.requires_grad() || b.requires_grad());
  if (axis == 0) {
    std::copy(a.values().begin(), a.values().end(), out->value.begin());
    std::copy(b.values().begin(), b.values().end(), out->value.begin() + a.size());
  } else {
    for (int i = 0; i < r; ++i) {
      std::copy(a.values().begin() + static_cast<std::size_t>(i) * a.cols(),
                a.values().begin() + static_cast<std::size_t>(i + 1) * a.cols(),
                out->value.begin() + static_cast<std::size_t>(i) * c);
      std::copy(b.values().begin() + static_cast<std::size_t>(i) * b.cols(),
                b.values().begin() + static_cast<std::size_t>(i + 1) * b.cols(),
                out->value.begin() + static_cast<std::size_t>(i) * c + a.cols());
    }
  }
  if (out->requires_grad) {
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    const int ac = a.cols();
    out->backward = [an, bn, out, axis, ac, c]() {
      if (axis == 0) {
        if (an->requires_grad) {
          an->ensure_grad();
          for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += out->grad[i];
        }
        if (bn->requires_grad) {
          bn->ensure_grad();
          for (std::size_t i = 0; i < bn->size(); ++i)
            bn->grad[i] += out->grad[an->size() + i];
        }
      } else {
        const int rr = out->rows;
        for (int i = 0; i < rr; ++i) {
          if (an->requires_grad) {
            an->ensure_grad();
            for (int j = 0; j < ac; ++j)
              an->grad[static_cast<std::size_t>(i) * ac + j] +=
                  out->grad[static_cast<std::size_t>(i) * c + j];
          }
          if (bn->requires_grad) {
            bn->ensure_grad();
            const int bc = c - ac;
            for (int j = 0; j < bc; ++j)
              bn->grad[static_cast<std::size_t>(i) * bc + j] +=
                  out->grad[static_cast<std::size_t>(i) * c + ac + j];
          }
        }
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::relu(Tensor a) {
  TensorNode* out = make(a.rows(), a.cols(), "relu", a.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = a.values()[i] > 0.0 ? a.values()[i] : 0.0;
  check_finite(out);
  if (record_branches_) {
    out->branch.reserve(out->size());
    for (std::size_t i = 0; i < out->size(); ++i)
      out->branch.push_back(a.values()[i] > 0.0 ? 1u : 0u);
  }
  if (out->requires_grad) {
    TensorNode* an = a.node();
    out->backward = [an, out]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i)
        if (an->value[i] > 0.0) an->grad[i] += out->grad[i];
    };
  }
  return Tensor(out);
}

Tensor Tape::leaky_relu(Tensor a, double slope) {
  TensorNode* out = make(a.rows(), a.cols(), "leaky_relu", a.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i) {
    const double v = a.values()[i];
    out->value[i] = v > 0.0 ? v : slope * v;
  }
  check_finite(out);
  if (record_branches_) {
    out->branch.reserve(out->size());
    for (std::size_t i = 0; i < out->size(); ++i)
      out->branch.push_back(a.values()[i] > 0.0 ? 1u : 0u);
  }
  if (out->requires_grad) {
    TensorNode* an = a.node();
    out->backward = [an, out, slope]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i)
        an->grad[i] += (an->value[i] > 0.0 ? 1.0 : slope) * out->grad[i];
    };
  }
  return Tensor(out);
}

Tensor Tape::sigmoid(Tensor a) {
  TensorNode* out = make(a.rows(), a.cols(), "sigmoid", a.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i) {
    const double v = a.values()[i];
    out->value[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                             : std::exp(v) / (1.0 + std::exp(v));
  }
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    out->backward = [an, out]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) {
        const double s = out->value[i];
        an->grad[i] += out->grad[i] * s * (1.0 - s);
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::softplus(Tensor a) {
  TensorNode* out = make(a.rows(), a.cols(), "softplus", a.requires_grad());
  for (std::size_t i = 0; i < out->size(); ++i)
    out->value[i] = stable_softplus(a.values()[i]);
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    out->backward = [an, out]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < out->size(); ++i) {
        const double v = an->value[i];
        const double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                  : std::exp(v) / (1.0 + std::exp(v));
        an->grad[i] += out->grad[i] * s;
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::sum(Tensor a) {
  TensorNode* out = make(1, 1, "sum", a.requires_grad());
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  out->value[0] = acc;
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    out->backward = [an, out]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += out->grad[0];
    };
  }
  return Tensor(out);
}

Tensor Tape::sum_squares(Tensor a) {
  TensorNode* out = make(1, 1, "sum_squares", a.requires_grad());
  double acc = 0.0;
  for (double v : a.values()) acc += v * v;
  out->value[0] = acc;
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    out->backward = [an, out]() {
      an->ensure_grad();
      for (std::size_t i = 0; i < an->size(); ++i)
        an->grad[i] += 2.0 * an->value[i] * out->grad[0];
    };
  }
  return Tensor(out);
}

Tensor Tape::dot(Tensor a, Tensor b) {
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols())
    shape_error("dot", a, b);
  TensorNode* out = make(1, 1, "dot", a.requires_grad() || b.requires_grad());
  double acc = 0.0;
  for (int i = 0; i < a.cols(); ++i) acc += a.values()[i] * b.values()[i];
  out->value[0] = acc;
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* an = a.node();
    TensorNode* bn = b.node();
    out->backward = [an, bn, out]() {
      const double g = out->grad[0];
      if (an->requires_grad) {
        an->ensure_grad();
        for (std::size_t i = 0; i < an->size(); ++i) an->grad[i] += g * bn->value[i];
      }
      if (bn->requires_grad) {
        bn->ensure_grad();
        for (std::size_t i = 0; i < bn->size(); ++i) bn->grad[i] += g * an->value[i];
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::row(Tensor table, int r) {
  if (r < 0 || r >= table.rows())
    throw TensorError("row: index " + std::to_string(r) + " out of range for " +
                      table.shape_str());
  const int c = table.cols();
  TensorNode* out = make(1, c, "row", table.requires_grad());
  std::copy(table.values().begin() + static_cast<std::size_t>(r) * c,
            table.values().begin() + static_cast<std::size_t>(r + 1) * c,
            out->value.begin());
  if (out->requires_grad) {
    TensorNode* tn = table.node();
    out->backward = [tn, out, r, c]() {
      tn->ensure_grad();
      for (int j = 0; j < c; ++j)
        tn->grad[static_cast<std::size_t>(r) * c + j] += out->grad[j];
    };
  }
  return Tensor(out);
}

Tensor Tape::stack_scalars(std::span<const Tensor> xs) {
  if (xs.empty()) throw TensorError("stack_scalars: empty input");
  bool rg = false;
  for (const Tensor& x : xs) {
    if (x.rows() != 1 || x.cols() != 1)
      throw TensorError("stack_scalars: element is " + x.shape_str() + ", expected 1x1");
    rg = rg || x.requires_grad();
  }
  TensorNode* out = make(1, static_cast<int>(xs.size()), "stack_scalars", rg);
  for (std::size_t i = 0; i < xs.size(); ++i) out->value[i] = xs[i].values()[0];
  if (out->requires_grad) {
    std::vector<TensorNode*> parents;
    parents.reserve(xs.size());
    for (const Tensor& x : xs) parents.push_back(x.node());
    out->backward = [parents = std::move(parents), out]() {
      for (std::size_t i = 0; i < parents.size(); ++i) {
        if (!parents[i]->requires_grad) continue;
        parents[i]->ensure_grad();
        parents[i]->grad[0] += out->grad[i];
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::stack_rows(std::span<const Tensor> rows) {
  if (rows.empty()) throw TensorError("stack_rows: empty input");
  const int c = rows.front().cols();
  bool rg = false;
  for (const Tensor& x : rows) {
    if (x.rows() != 1 || x.cols() != c)
      throw TensorError("stack_rows: element is " + x.shape_str() + ", expected 1x" +
                        std::to_string(c));
    rg = rg || x.requires_grad();
  }
  TensorNode* out = make(static_cast<int>(rows.size()), c, "stack_rows", rg);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].values().begin(), rows[i].values().end(),
              out->value.begin() + i * static_cast<std::size_t>(c));
  if (out->requires_grad) {
    std::vector<TensorNode*> parents;
    parents.reserve(rows.size());
    for (const Tensor& x : rows) parents.push_back(x.node());
    out->backward = [parents = std::move(parents), out, c]() {
      for (std::size_t i = 0; i < parents.size(); ++i) {
        if (!parents[i]->requires_grad) continue;
        parents[i]->ensure_grad();
        for (int j = 0; j < c; ++j)
          parents[i]->grad[j] += out->grad[i * static_cast<std::size_t>(c) + j];
      }
    };
  }
  return Tensor(out);
}

namespace {

void validate_partition(const char* op, int n, std::span<const IndexRange> groups,
                        bool must_cover) {
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  for (const auto& [b, e] : groups) {
    if (b < 0 || e > n || b >= e)
      throw TensorError(std::string(op) + ": invalid group [" + std::to_string(b) +
                        "," + std::to_string(e) + ") for size " + std::to_string(n));
    for (int i = b; i < e; ++i) {
      if (seen[static_cast<std::size_t>(i)])
        throw TensorError(std::string(op) + ": overlapping groups at index " +
                          std::to_string(i));
      seen[static_cast<std::size_t>(i)] = 1;
    }
  }
  if (must_cover) {
    for (int i = 0; i < n; ++i)
      if (!seen[static_cast<std::size_t>(i)])
        throw TensorError(std::string(op) + ": index " + std::to_string(i) +
                          " not covered by any group");
  }
}

}  // namespace

Tensor Tape::softmax_grouped(Tensor scores, std::span<const IndexRange> groups) {
  if (scores.rows() != 1)
    throw TensorError("softmax_grouped: scores must be 1xN, got " + scores.shape_str());
  validate_partition("softmax_grouped", scores.cols(), groups, true);
  TensorNode* out = make(1, scores.cols(), "softmax_grouped", scores.requires_grad());
  const auto& s = scores.values();
  for (const auto& [b, e] : groups) {
    double mx = s[static_cast<std::size_t>(b)];
    for (int i = b + 1; i < e; ++i) mx = std::max(mx, s[static_cast<std::size_t>(i)]);
    double z = 0.0;
    for (int i = b; i < e; ++i) {
      const double w = std::exp(s[static_cast<std::size_t>(i)] - mx);
      out->value[static_cast<std::size_t>(i)] = w;
      z += w;
    }
    for (int i = b; i < e; ++i) out->value[static_cast<std::size_t>(i)] /= z;
  }
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* sn = scores.node();
    std::vector<IndexRange> gs(groups.begin(), groups.end());
    out->backward = [sn, out, gs = std::move(gs)]() {
      sn->ensure_grad();
      for (const auto& [b, e] : gs) {
        double inner = 0.0;
        for (int i = b; i < e; ++i)
          inner += out->grad[static_cast<std::size_t>(i)] * out->value[static_cast<std::size_t>(i)];
        for (int i = b; i < e; ++i) {
          const std::size_t k = static_cast<std::size_t>(i);
          sn->grad[k] += out->value[k] * (out->grad[k] - inner);
        }
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::segment_sum(Tensor x, std::span<const IndexRange> segments) {
  if (x.rows() != 1)
    throw TensorError("segment_sum: input must be 1xN, got " + x.shape_str());
  validate_partition("segment_sum", x.cols(), segments, false);
  TensorNode* out = make(1, static_cast<int>(segments.size()), "segment_sum",
                         x.requires_grad());
  for (std::size_t j = 0; j < segments.size(); ++j) {
    double acc = 0.0;
    for (int i = segments[j].first; i < segments[j].second; ++i)
      acc += x.values()[static_cast<std::size_t>(i)];
    out->value[j] = acc;
  }
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* xn = x.node();
    std::vector<IndexRange> segs(segments.begin(), segments.end());
    out->backward = [xn, out, segs = std::move(segs)]() {
      xn->ensure_grad();
      for (std::size_t j = 0; j < segs.size(); ++j)
        for (int i = segs[j].first; i < segs[j].second; ++i)
          xn->grad[static_cast<std::size_t>(i)] += out->grad[j];
    };
  }
  return Tensor(out);
}

Tensor Tape::scale_rows(Tensor m, Tensor s) {
  if (s.rows() != 1 || s.cols() != m.rows()) shape_error("scale_rows", m, s);
  const int r = m.rows(), c = m.cols();
  TensorNode* out = make(r, c, "scale_rows", m.requires_grad() || s.requires_grad());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out->value[static_cast<std::size_t>(i) * c + j] =
          s.values()[static_cast<std::size_t>(i)] * m.values()[static_cast<std::size_t>(i) * c + j];
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* mn = m.node();
    TensorNode* sn = s.node();
    out->backward = [mn, sn, out, r, c]() {
      for (int i = 0; i < r; ++i) {
        if (mn->requires_grad) {
          mn->ensure_grad();
          for (int j = 0; j < c; ++j)
            mn->grad[static_cast<std::size_t>(i) * c + j] +=
                sn->value[static_cast<std::size_t>(i)] *
                out->grad[static_cast<std::size_t>(i) * c + j];
        }
        if (sn->requires_grad) {
          sn->ensure_grad();
          double acc = 0.0;
          for (int j = 0; j < c; ++j)
            acc += out->grad[static_cast<std::size_t>(i) * c + j] *
                   mn->value[static_cast<std::size_t>(i) * c + j];
          sn->grad[static_cast<std::size_t>(i)] += acc;
        }
      }
    };
  }
  return Tensor(out);
}

Tensor Tape::sum_rows(Tensor m) {
  const int r = m.rows(), c = m.cols();
  TensorNode* out = make(1, c, "sum_rows", m.requires_grad());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out->value[static_cast<std::size_t>(j)] += m.values()[static_cast<std::size_t>(i) * c + j];
  check_finite(out);
  if (out->requires_grad) {
    TensorNode* mn = m.node();
    out->backward = [mn, out, r, c]() {
      mn->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          mn->grad[static_cast<std::size_t>(i) * c + j] += out->grad[static_cast<std::size_t>(j)];
    };
  }
  return Tensor(out);
}

Tensor Tape::max_pool_columns(Tensor m, int top_t) {
  if (m.rows() < 1) throw TensorError("max_pool_columns: empty matrix");
  if (top_t < 1) throw TensorError("max_pool_columns: top_t must be >= 1");
  const int r = std::min(top_t, m.rows());
  const int c = m.cols();
  TensorNode* out = make(1, c, "max_pool_columns", m.requires_grad());
  std::vector<int> argmax(static_cast<std::size_t>(c), 0);
  for (int j = 0; j < c; ++j) {
    double best = m.values()[static_cast<std::size_t>(j)];
    int besti = 0;
    for (int i = 1; i < r; ++i) {
      const double v = m.values()[static_cast<std::size_t>(i) * c + j];
      if (v > best) {  // ties keep the first row
        best = v;
        besti = i;
      }
    }
    out->value[static_cast<std::size_t>(j)] = best;
    argmax[static_cast<std::size_t>(j)] = besti;
  }
  check_finite(out);
  if (record_branches_) {
    out->branch.reserve(argmax.size());
    for (int a : argmax) out->branch.push_back(static_cast<std::uint32_t>(a));
  }
  if (out->requires_grad) {
    TensorNode* mn = m.node();
    out->backward = [mn, out, argmax = std::move(argmax), c]() {
      mn->ensure_grad();
      for (int j = 0; j < c; ++j)
        mn->grad[static_cast<std::size_t>(argmax[static_cast<std::size_t>(j)]) * c + j] +=
            out->grad[static_cast<std::size_t>(j)];
    };
  }
  return Tensor(out);
}

void Tape::note_branch(std::span<const std::uint32_t> decisions) {
  if (!record_branches_) return;
  TensorNode* n = make(1, 1, "branch_note", false);
  n->branch.assign(decisions.begin(), decisions.end());
}

void Tape::backward(Tensor loss) {
  if (!loss.defined() || loss.rows() != 1 || loss.cols() != 1)
    throw TensorError("backward: loss must be a 1x1 tensor");
  if (!grad_enabled_)
    throw TensorError("backward: tape was created with gradients disabled");
  loss.node()->ensure_grad();
  loss.node()->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    TensorNode* n = it->get();
    if (n->backward && !n->grad.empty()) n->backward();
  }
}

std::vector<std::uint32_t> Tape::branch_signature() const {
  std::vector<std::uint32_t> sig;
  for (const auto& n : nodes_)
    sig.insert(sig.end(), n->branch.begin(), n->branch.end());
  return sig;
}

GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f,
                           std::span<const Tensor> params, double eps,
                           std::size_t max_coords, std::uint64_t sample_seed) {
  if (eps <= 0.0) throw TensorError("grad_check: eps must be positive");
  for (const Tensor& p : params) Tensor(p).zero_grad();

  // Analytic pass.
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tensor out = f(tape);
    if (out.rows() != 1 || out.cols() != 1)
      throw TensorError("grad_check: f must return a scalar");
    if (!std::isfinite(out.scalar()))
      throw TensorError("grad_check: f returned non-finite value");
    tape.backward(out);
    analytic.reserve(params.size());
    for (const Tensor& p : params) analytic.push_back(p.grad());
    for (const Tensor& p : params) Tensor(p).zero_grad();
  }

  struct Probe {
    double value = 0.0;
    std::vector<std::uint32_t> sig;
  };
  auto probe = [&](void) -> Probe {
    Tape tape(/*grad_enabled=*/false);
    tape.set_record_branches(true);
    Tensor out = f(tape);
    if (!std::isfinite(out.scalar()))
      throw TensorError("grad_check: f returned non-finite value");
    return Probe{out.scalar(), tape.branch_signature()};
  };

  GradCheckResult result;
  Rng rng(sample_seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    std::vector<std::size_t> coords(p.values().size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (coords.size() > max_coords) {
      rng.shuffle(coords);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    std::vector<double>& vals = p.mutable_values();
    for (std::size_t ci : coords) {
      const double original = vals[ci];
      vals[ci] = original + eps;
      Probe hi = probe();
      vals[ci] = original - eps;
      Probe lo = probe();
      vals[ci] = original;
      if (hi.sig != lo.sig) {
        // The perturbation crossed a ReLU kink or pooling tie; central
        // differences do not estimate the subgradient there.
        ++result.skipped;
        continue;
      }
      const double numeric = (hi.value - lo.value) / (2.0 * eps);
      const double a = analytic[pi][ci];
      const double rel = std::abs(a - numeric) / (std::abs(a) + eps);
      result.max_rel_err = std::max(result.max_rel_err, rel);
      ++result.evaluated;
    }
  }
  return result;
}

}  // namespace aph
