#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace aph {

class Tape;

/// Thrown by tensor operations on shape mismatches, non-finite values and
/// other contract violations. The message always names the operation.
class TensorError : public std::runtime_error {
 public:
  explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

struct TensorNode {
  int rows = 0;
  int cols = 0;
  std::vector<double> value;
  std::vector<double> grad;  // empty until the backward pass first touches it
  bool requires_grad = false;
  const char* op = "leaf";
  std::function<void()> backward;
  // Forward branch decisions (ReLU signs, pooling argmaxes). Only recorded
  // when the owning tape has branch recording enabled; consumed by the
  // finite-difference checker to detect kink crossings.
  std::vector<std::uint32_t> branch;

  std::size_t size() const { return value.size(); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

/// Lightweight non-owning handle to a node in some Tape. Values are stored
/// row-major; a vector is a 1xN matrix, a scalar is 1x1.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(detail::TensorNode* n) : node_(n) {}

  bool defined() const { return node_ != nullptr; }
  int rows() const { return node_->rows; }
  int cols() const { return node_->cols; }
  int size() const { return static_cast<int>(node_->value.size()); }

  double at(int r, int c) const { return node_->value[static_cast<std::size_t>(r) * node_->cols + c]; }
  double operator[](int i) const { return node_->value[static_cast<std::size_t>(i)]; }

  /// Value of a 1x1 tensor.
  double scalar() const {
    if (rows() != 1 || cols() != 1)
      throw TensorError("scalar(): tensor is " + shape_str() + ", expected 1x1");
    return node_->value[0];
  }

  const std::vector<double>& values() const { return node_->value; }
  std::vector<double>& mutable_values() { return node_->value; }

  bool requires_grad() const { return node_->requires_grad; }

  /// Accumulated gradient; zeros if the tensor never participated in a
  /// backward pass.
  std::vector<double> grad() const {
    if (node_->grad.empty()) return std::vector<double>(node_->value.size(), 0.0);
    return node_->grad;
  }
  double grad_at(std::size_t i) const {
    return node_->grad.empty() ? 0.0 : node_->grad[i];
  }
  void zero_grad() { node_->grad.clear(); }

  std::string shape_str() const {
    return std::to_string(rows()) + "x" + std::to_string(cols());
  }

  detail::TensorNode* node() const { return node_; }

 private:
  detail::TensorNode* node_ = nullptr;
};

/// Index range [begin, end) into a flat score vector; used by the grouped
/// softmax and segment-sum operations.
using IndexRange = std::pair<int, int>;

/// Arena of tensor nodes plus the recorded-operation tape.
///
/// Nodes are created in topological order by construction, so the backward
/// pass is a reverse sweep over the creation sequence. A tensor created on
/// one tape may be consumed by operations on another (this is how persistent
/// parameters feed per-step tapes); the producing tape must outlive the
/// consuming one.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  // Nodes live behind stable pointers, so moving a tape keeps every Tensor
  // handle into it valid.
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  bool grad_enabled() const { return grad_enabled_; }
  void set_record_branches(bool on) { record_branches_ = on; }
  std::size_t node_count() const { return nodes_.size(); }

  // ---- leaf construction -------------------------------------------------

  Tensor leaf(int rows, int cols, std::vector<double> values, bool requires_grad);
  Tensor constant(int rows, int cols, std::vector<double> values);
  Tensor scalar_const(double v);
  Tensor zeros(int rows, int cols);

  // ---- primitives ---------------------------------------------------------

  Tensor matmul(Tensor a, Tensor b);
  Tensor add(Tensor a, Tensor b);
  Tensor sub(Tensor a, Tensor b);
  Tensor mul(Tensor a, Tensor b);       // elementwise
  Tensor scale(Tensor a, double c);     // by compile-time constant
  Tensor concat(Tensor a, Tensor b, int axis);
  Tensor relu(Tensor a);
  Tensor leaky_relu(Tensor a, double slope);
  Tensor sigmoid(Tensor a);
  Tensor softplus(Tensor a);
  Tensor sum(Tensor a);                 // -> 1x1
  Tensor sum_squares(Tensor a);         // -> 1x1
  Tensor dot(Tensor a, Tensor b);       // 1xN . 1xN -> 1x1

  /// Row r of a 2-D tensor as a 1xC tensor (embedding-table gather).
  Tensor row(Tensor table, int r);

  /// 1x1 scalars stacked into a 1xN vector.
  Tensor stack_scalars(std::span<const Tensor> xs);

  /// N tensors of shape 1xC stacked into an NxC matrix.
  Tensor stack_rows(std::span<const Tensor> rows);

  /// Softmax computed independently within each group of score indices.
  /// Groups must partition [0, scores.size()) and be non-empty. Stabilized
  /// by per-group max subtraction.
  Tensor softmax_grouped(Tensor scores, std::span<const IndexRange> groups);

  /// Per-segment sums of a 1xN vector -> 1xM (one column per segment).
  Tensor segment_sum(Tensor x, std::span<const IndexRange> segments);

  /// Row j of the result is s[j] * m.row(j); s is 1xR.
  Tensor scale_rows(Tensor m, Tensor s);

  /// Column-wise sum over rows: RxC -> 1xC.
  Tensor sum_rows(Tensor m);

  /// Restrict to the first min(top_t, rows) rows, then take the per-column
  /// maximum. Gradient routes to the first argmax row of each column.
  Tensor max_pool_columns(Tensor m, int top_t);

  /// Records a discrete decision made outside any single op (e.g. a ranking
  /// permutation) so finite differencing can detect that two evaluations
  /// diverged. No-op unless branch recording is on.
  void note_branch(std::span<const std::uint32_t> decisions);

  // ---- reverse pass --------------------------------------------------------

  /// Reverse sweep from a scalar loss on this tape. Gradients accumulate
  /// additively into every reachable tensor that requires grad, including
  /// leaves living on other tapes.
  void backward(Tensor loss);

  /// Concatenation of all branch records in creation order. Two evaluations
  /// of the same deterministic function with equal signatures took identical
  /// paths through every kinked operation.
  std::vector<std::uint32_t> branch_signature() const;

 private:
  detail::TensorNode* make(int rows, int cols, const char* op, bool requires_grad);
  void check_finite(const detail::TensorNode* n) const;

  std::vector<std::unique_ptr<detail::TensorNode>> nodes_;
  bool grad_enabled_ = true;
  bool record_branches_ = false;
};

/// Result of a finite-difference gradient check.
struct GradCheckResult {
  double max_rel_err = 0.0;
  int evaluated = 0;  // coordinates compared
  int skipped = 0;    // coordinates skipped for kink crossings
};

/// Central-difference check of analytic gradients.
///
/// `f` rebuilds the computation on the tape it is handed and returns the
/// scalar output; `params` are persistent leaf tensors read by f. For every
/// sampled coordinate the relative error is
///   |analytic - (f(t+eps) - f(t-eps)) / (2 eps)| / (|analytic| + eps).
/// Coordinates whose perturbed evaluations take different branches through
/// a kinked op (ReLU at zero, pooling ties) are skipped: central differences
/// are meaningless across a kink. At most `max_coords` coordinates per
/// parameter are checked, chosen deterministically from `sample_seed`.
GradCheckResult grad_check(const std::function<Tensor(Tape&)>& f,
                           std::span<const Tensor> params, double eps,
                           std::size_t max_coords = SIZE_MAX,
                           std::uint64_t sample_seed = 0);

}  // namespace aph
