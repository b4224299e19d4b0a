#pragma once

#include <Eigen/Core>

#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "adain/errors.hpp"

namespace adain {

using Index = Eigen::Index;

/// Extents of a rank-4 (N, C, H, W) tensor.
struct Shape {
  Index n = 0;
  Index c = 0;
  Index h = 0;
  Index w = 0;

  constexpr Index size() const { return n * c * h * w; }
  constexpr Index plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

/// Dense NCHW array. Plain value type; gradient bookkeeping lives in Variable.
template <class Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;
  using ArrayMap = Eigen::Map<Array>;
  using ConstArrayMap = Eigen::Map<const Array>;

  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(shape), data_(Array::Zero(shape.size())) {}
  Tensor(Shape shape, Array data) : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.size()) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match shape " + shape_.str());
    }
  }

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  static Tensor constant(Shape shape, Scalar value) {
    return Tensor(shape, Array::Constant(shape.size(), value));
  }
  static Tensor from_values(Shape shape, std::initializer_list<Scalar> values) {
    Array a(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) a[i++] = v;
    return Tensor(shape, std::move(a));
  }

  const Shape& shape() const { return shape_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Array& array() { return data_; }
  const Array& array() const { return data_; }
  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }

  Index offset(Index n, Index c, Index h, Index w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  Scalar& operator()(Index n, Index c, Index h, Index w) { return data_[offset(n, c, h, w)]; }
  Scalar operator()(Index n, Index c, Index h, Index w) const { return data_[offset(n, c, h, w)]; }

  /// Sample `n` viewed as a (C, H*W) row-major matrix.
  MatrixMap sample_matrix(Index n) {
    return MatrixMap(data() + n * shape_.c * shape_.plane(), shape_.c, shape_.plane());
  }
  ConstMatrixMap sample_matrix(Index n) const {
    return ConstMatrixMap(data() + n * shape_.c * shape_.plane(), shape_.c, shape_.plane());
  }
  /// The H*W values of channel c in sample n.
  ArrayMap plane(Index n, Index c) {
    return ArrayMap(data() + (n * shape_.c + c) * shape_.plane(), shape_.plane());
  }
  ConstArrayMap plane(Index n, Index c) const {
    return ConstArrayMap(data() + (n * shape_.c + c) * shape_.plane(), shape_.plane());
  }

  template <class Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool all_finite() const { return data_.allFinite(); }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && (a.data_ == b.data_).all();
  }

 private:
  Shape shape_{};
  Array data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

namespace detail {

template <class Scalar>
struct Node {
  Tensor<Scalar> value;
  Tensor<Scalar> grad;  // allocated on first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad and accumulates into the inputs that require it.
  std::function<void(const Tensor<Scalar>&)> backward;

  bool is_leaf() const { return !backward; }

  template <class Derived>
  void accumulate(const Eigen::ArrayBase<Derived>& g) {
    if (grad.empty()) grad = Tensor<Scalar>(value.shape());
    grad.array() += g;
  }
  Tensor<Scalar>& grad_buffer() {
    if (grad.empty()) grad = Tensor<Scalar>(value.shape());
    return grad;
  }
};

}  // namespace detail

/// Handle to a tensor that may participate in reverse-mode differentiation.
/// Copies share the underlying node.
template <class Scalar_>
class Variable {
 public:
  using Scalar = Scalar_;
  using NodeType = detail::Node<Scalar>;
  using BackwardFn = std::function<void(const Tensor<Scalar>&)>;

  Variable() = default;
  explicit Variable(Tensor<Scalar> value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<Scalar>& value() const { return node_->value; }
  /// Mutable access for optimizers and parameter loading; leaves only.
  Tensor<Scalar>& mutable_value();
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf(); }
  const char* op() const { return node_->op; }

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; zeros if nothing has been accumulated yet.
  const Tensor<Scalar>& grad() const;
  void zero_grad() { node_->grad = Tensor<Scalar>(); }

  /// Reverse-mode sweep from this scalar. Leaf gradients accumulate across calls.
  void backward() const;

  NodeType* node() const { return node_.get(); }
  const std::shared_ptr<NodeType>& node_ptr() const { return node_; }

  /// Wraps an op result. The graph edge is recorded only when grad mode is on
  /// and some input requires grad; otherwise the result is a constant leaf.
  static Variable make_result(Tensor<Scalar> value, const char* op,
                              std::initializer_list<Variable> inputs, BackwardFn backward);

 private:
  std::shared_ptr<NodeType> node_;
};

using Variablef = Variable<float>;
using Variabled = Variable<double>;

}  // namespace adain
