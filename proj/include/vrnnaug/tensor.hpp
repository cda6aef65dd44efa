#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "vrnnaug/errors.hpp"

namespace vrnnaug {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

namespace detail {

/// Heap buffer of doubles that skips value-initialization; op outputs are
/// always fully overwritten, so zeroing them first would only cost memory
/// bandwidth.
class Buffer {
 public:
  Buffer() = default;
  explicit Buffer(size_t n, bool zeroed = false)
      : p_(n == 0 ? nullptr : (zeroed ? new double[n]() : new double[n])),
        n_(n) {}
  Buffer(const std::vector<double>& v) : Buffer(v.size()) {
    std::copy(v.begin(), v.end(), p_.get());
  }
  Buffer(const Buffer& o) : Buffer(o.n_) {
    std::copy_n(o.p_.get(), n_, p_.get());
  }
  Buffer& operator=(const Buffer& o) {
    if (this != &o) {
      if (n_ != o.n_) {
        p_.reset(o.n_ ? new double[o.n_] : nullptr);
        n_ = o.n_;
      }
      std::copy_n(o.p_.get(), n_, p_.get());
    }
    return *this;
  }
  Buffer(Buffer&&) = default;
  Buffer& operator=(Buffer&&) = default;

  double* data() { return p_.get(); }
  const double* data() const { return p_.get(); }
  size_t size() const { return n_; }
  double& operator[](size_t i) { return p_[i]; }
  const double& operator[](size_t i) const { return p_[i]; }
  double* begin() { return p_.get(); }
  double* end() { return p_.get() + n_; }
  const double* begin() const { return p_.get(); }
  const double* end() const { return p_.get() + n_; }

 private:
  std::unique_ptr<double[]> p_;
  size_t n_ = 0;
};

struct TensorData {
  Shape shape;
  Buffer values;
  bool requires_grad = false;
  Buffer grad;  // zero-sized until the first accumulation

  int64_t size() const {
    int64_t n = 1;
    for (int e : shape) n *= e;
    return n;
  }
  void ensure_grad() {
    if (grad.size() == 0) grad = Buffer(values.size(), /*zeroed=*/true);
  }
  bool grad_empty() const { return grad.size() == 0; }
};

}  // namespace detail

enum class Op {
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kConcat,
  kSlice,
  kSigmoid,
  kTanh,
  kRelu,
  kExp,
  kLog,
  kSum,
  kMean,
  kSquare,
  kScale,
  kClamp,
  kReshape,
};

const char* op_name(Op kind);

/// Dense row-major tensor of 64-bit floats. Copies are shallow handles onto
/// shared storage; forward operations allocate fresh outputs and, while
/// gradients are enabled, record a node on the thread-local tape.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return data_ != nullptr; }
  const Shape& shape() const { return data_->shape; }
  int rank() const { return static_cast<int>(data_->shape.size()); }
  int64_t size() const { return data_->size(); }
  int dim(int i) const { return data_->shape[static_cast<size_t>(i)]; }
  /// Rank-2 accessors.
  int rows() const;
  int cols() const;

  std::span<const double> values() const {
    return {data_->values.data(), data_->values.size()};
  }
  /// In-place access for optimizer updates. Callers must not mutate values
  /// that a live tape still references.
  std::span<double> mutable_values() {
    return {data_->values.data(), data_->values.size()};
  }
  /// Value of a single-element tensor.
  double value() const;
  double value_at(int64_t i) const { return data_->values[static_cast<size_t>(i)]; }
  double value_at(int i, int j) const;

  bool requires_grad() const { return data_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    data_->requires_grad = v;
    return *this;
  }
  bool has_grad() const { return !data_->grad_empty(); }
  std::span<const double> grad() const;
  std::span<double> mutable_grad() {
    data_->ensure_grad();
    return {data_->grad.data(), data_->grad.size()};
  }
  void zero_grad() { data_->grad = detail::Buffer(); }

  /// A constant tensor sharing this tensor's storage; never recorded on the
  /// tape and never receiving gradient.
  Tensor detach() const;
  /// A deep copy (fresh storage, no tape record).
  Tensor clone() const;

  const std::shared_ptr<detail::TensorData>& data() const { return data_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : data_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> data_;

  friend struct TapeAccess;
};

struct OpAttrs {
  double scale = 1.0;        // kScale
  double lo = 0.0;           // kClamp
  double hi = 0.0;           // kClamp
  int start = 0;             // kSlice
  int length = 0;            // kSlice
  Shape shape;               // kReshape
};

/// Uniform dispatch over the supported operation kinds; the named functions
/// below are thin wrappers around the same kernels.
Tensor forward_op(Op kind, std::span<const Tensor> inputs,
                  const OpAttrs& attrs = {});

/// (m,k) x (k,n) -> (m,n).
Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise with equal shapes, or (n,d) + (d,) bias-row addition.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Elementwise product, equal shapes.
Tensor mul(const Tensor& a, const Tensor& b);
/// Concatenation along the last axis.
Tensor concat(std::span<const Tensor> parts);
Tensor concat(std::initializer_list<Tensor> parts);
/// Contiguous [start, start+length) range of the last axis.
Tensor slice(const Tensor& t, int start, int length);
Tensor sigmoid(const Tensor& t);
Tensor tanh(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);
/// Sum of all elements (scalar output).
Tensor sum(const Tensor& t);
/// Mean of all elements (scalar output).
Tensor mean(const Tensor& t);
Tensor square(const Tensor& t);
Tensor scale(const Tensor& t, double factor);
Tensor clamp(const Tensor& t, double lo, double hi);
Tensor reshape(const Tensor& t, Shape shape);

/// Reverse-mode sweep from a scalar loss. Accumulates d(loss)/d(leaf) into
/// every requires-grad leaf reached by the tape, then resets the tape.
/// Repeated calls on independently built graphs accumulate additively.
void backward(const Tensor& loss);

/// Disables tape recording for the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

struct TapeNode {
  Op kind;
  std::vector<std::shared_ptr<TensorData>> inputs;
  std::shared_ptr<TensorData> out;
  std::function<void()> backprop;  // reads out->grad, accumulates into inputs
};

/// Thread-local record of forward operations in execution order.
class Tape {
 public:
  static Tape& active();
  void record(TapeNode node) { nodes_.push_back(std::move(node)); }
  bool empty() const { return nodes_.empty(); }
  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }
  const std::vector<TapeNode>& nodes() const { return nodes_; }
  std::vector<TapeNode>& nodes() { return nodes_; }

 private:
  std::vector<TapeNode> nodes_;
};

}  // namespace detail

}  // namespace vrnnaug
