#include "vrnnaug/tensor.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <sstream>
#include <utility>

namespace vrnnaug {

namespace {

thread_local bool t_grad_enabled = true;

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<EigenRowMajor>;
using ConstMatMap = Eigen::Map<const EigenRowMajor>;

// Output storage is left uninitialized: every kernel writes it in full.
std::shared_ptr<detail::TensorData> make_data(Shape shape, bool zeroed = false) {
  auto d = std::make_shared<detail::TensorData>();
  int64_t n = 1;
  for (int e : shape) {
    if (e < 0) throw DimensionError("negative extent in shape " + shape_str(shape));
    n *= e;
  }
  d->shape = std::move(shape);
  d->values = detail::Buffer(static_cast<size_t>(n), zeroed);
  return d;
}

void check_finite(const detail::TensorData& d, Op kind) {
  for (double v : d.values) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string(op_name(kind)) +
                         " produced a non-finite value");
    }
  }
}

// dst.grad[i] (+)= f(i); the first touch assigns into fresh storage instead
// of zero-filling and then adding.
template <class F>
void apply_grad(detail::TensorData& dst, size_t n, F f) {
  if (dst.grad_empty()) {
    dst.grad = detail::Buffer(n);
    for (size_t i = 0; i < n; ++i) dst.grad[i] = f(i);
  } else {
    for (size_t i = 0; i < n; ++i) dst.grad[i] += f(i);
  }
}

void accumulate(detail::TensorData& dst, const detail::Buffer& g) {
  apply_grad(dst, g.size(), [&](size_t i) { return g[i]; });
}

}  // namespace

struct TapeAccess {
  static Tensor wrap(std::shared_ptr<detail::TensorData> d) {
    return Tensor(std::move(d));
  }

  /// Finishes a forward op: validates output, records the tape node when
  /// gradients are live, and hands the tensor back.
  static Tensor finish(Op kind, std::span<const Tensor> inputs,
                       std::shared_ptr<detail::TensorData> out,
                       std::function<void()> backprop) {
    check_finite(*out, kind);
    bool needs_grad = false;
    if (t_grad_enabled) {
      for (const Tensor& in : inputs) {
        if (in.requires_grad()) {
          needs_grad = true;
          break;
        }
      }
    }
    if (needs_grad) {
      out->requires_grad = true;
      detail::TapeNode node;
      node.kind = kind;
      node.inputs.reserve(inputs.size());
      for (const Tensor& in : inputs) node.inputs.push_back(in.data());
      node.out = out;
      node.backprop = std::move(backprop);
      detail::Tape::active().record(std::move(node));
    }
    return Tensor(std::move(out));
  }
};

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ')';
  return os.str();
}

const char* op_name(Op kind) {
  switch (kind) {
    case Op::kMatmul: return "matmul";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kConcat: return "concat";
    case Op::kSlice: return "slice";
    case Op::kSigmoid: return "sigmoid";
    case Op::kTanh: return "tanh";
    case Op::kRelu: return "relu";
    case Op::kExp: return "exp";
    case Op::kLog: return "log";
    case Op::kSum: return "sum";
    case Op::kMean: return "mean";
    case Op::kSquare: return "square";
    case Op::kScale: return "scale";
    case Op::kClamp: return "clamp";
    case Op::kReshape: return "reshape";
  }
  return "?";
}

detail::Tape& detail::Tape::active() {
  thread_local Tape tape;
  return tape;
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto d = make_data(std::move(shape), /*zeroed=*/true);
  d->requires_grad = requires_grad;
  return TapeAccess::wrap(std::move(d));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto d = make_data(std::move(shape));
  for (auto& v : d->values) v = value;
  d->requires_grad = requires_grad;
  return TapeAccess::wrap(std::move(d));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  auto d = make_data(std::move(shape));
  if (static_cast<int64_t>(values.size()) != d->size()) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + shape_str(d->shape));
  }
  d->values = detail::Buffer(values);
  d->requires_grad = requires_grad;
  return TapeAccess::wrap(std::move(d));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from({}, {value}, requires_grad);
}

int Tensor::rows() const {
  if (rank() != 2) throw DimensionError("rows(): tensor is not rank-2, shape " + shape_str(shape()));
  return dim(0);
}

int Tensor::cols() const {
  if (rank() != 2) throw DimensionError("cols(): tensor is not rank-2, shape " + shape_str(shape()));
  return dim(1);
}

double Tensor::value() const {
  if (size() != 1) {
    throw DimensionError("value(): tensor has " + std::to_string(size()) +
                         " elements");
  }
  return data_->values[0];
}

double Tensor::value_at(int i, int j) const {
  return data_->values[static_cast<size_t>(i) * static_cast<size_t>(cols()) +
                       static_cast<size_t>(j)];
}

std::span<const double> Tensor::grad() const {
  if (data_->grad_empty()) {
    throw Error("grad(): no gradient has been accumulated");
  }
  return {data_->grad.data(), data_->grad.size()};
}

Tensor Tensor::detach() const {
  auto d = std::make_shared<detail::TensorData>();
  d->shape = data_->shape;
  d->values = data_->values;  // copy keeps the constant stable if the source
                              // is later mutated in place
  d->requires_grad = false;
  return TapeAccess::wrap(std::move(d));
}

Tensor Tensor::clone() const {
  auto d = std::make_shared<detail::TensorData>();
  d->shape = data_->shape;
  d->values = data_->values;
  d->requires_grad = data_->requires_grad;
  return TapeAccess::wrap(std::move(d));
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()) + " differ");
  }
}

// f: value map; df: local derivative as a function of (input, output).
template <class F, class DF>
Tensor elementwise_unary(Op kind, const Tensor& x, F f, DF df) {
  auto out = make_data(x.shape());
  const auto& xv = x.data()->values;
  for (size_t i = 0; i < xv.size(); ++i) out->values[i] = f(xv[i]);
  auto xd = x.data();
  auto od = out;
  const Tensor ins[] = {x};
  return TapeAccess::finish(kind, ins, out, [xd, od, df]() {
    apply_grad(*xd, xd->values.size(), [&](size_t i) {
      return df(xd->values[i], od->values[i]) * od->grad[i];
    });
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto out = make_data({m, n});
  {
    ConstMatMap am(a.values().data(), m, k);
    ConstMatMap bm(b.values().data(), k, n);
    MatMap om(out->values.data(), m, n);
    // Row-by-row products keep each output row bit-identical no matter how
    // many rows share the batch, so a lockstep rollout of K trajectories
    // reproduces K independent single-trajectory rollouts exactly.
    for (int r = 0; r < m; ++r) {
      om.row(r).noalias() = am.row(r) * bm;
    }
  }
  auto ad = a.data();
  auto bd = b.data();
  auto od = out;
  const Tensor ins[] = {a, b};
  return TapeAccess::finish(Op::kMatmul, ins, out, [ad, bd, od, m, k, n]() {
    ConstMatMap go(od->grad.data(), m, n);
    if (ad->requires_grad) {
      const bool fresh = ad->grad_empty();
      if (fresh) ad->grad = detail::Buffer(ad->values.size());
      MatMap ga(ad->grad.data(), m, k);
      ConstMatMap bm(bd->values.data(), k, n);
      if (fresh) {
        ga.noalias() = go * bm.transpose();
      } else {
        ga.noalias() += go * bm.transpose();
      }
    }
    if (bd->requires_grad) {
      const bool fresh = bd->grad_empty();
      if (fresh) bd->grad = detail::Buffer(bd->values.size());
      MatMap gb(bd->grad.data(), k, n);
      ConstMatMap am(ad->values.data(), m, k);
      if (fresh) {
        gb.noalias() = am.transpose() * go;
      } else {
        gb.noalias() += am.transpose() * go;
      }
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  const bool bias_row = a.rank() == 2 && b.rank() == 1 && a.cols() == b.dim(0);
  if (!bias_row) require_same_shape(a, b, "add");
  auto out = make_data(a.shape());
  const auto& av = a.data()->values;
  const auto& bv = b.data()->values;
  if (bias_row) {
    const size_t n = static_cast<size_t>(a.rows());
    const size_t d = static_cast<size_t>(a.cols());
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < d; ++j)
        out->values[i * d + j] = av[i * d + j] + bv[j];
  } else {
    for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] + bv[i];
  }
  auto ad = a.data();
  auto bd = b.data();
  auto od = out;
  const Tensor ins[] = {a, b};
  return TapeAccess::finish(Op::kAdd, ins, out, [ad, bd, od, bias_row]() {
    if (ad->requires_grad) accumulate(*ad, od->grad);
    if (bd->requires_grad) {
      bd->ensure_grad();
      if (bias_row) {
        const size_t d = bd->values.size();
        const size_t n = od->values.size() / d;
        for (size_t i = 0; i < n; ++i)
          for (size_t j = 0; j < d; ++j) bd->grad[j] += od->grad[i * d + j];
      } else {
        accumulate(*bd, od->grad);
      }
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto out = make_data(a.shape());
  const auto& av = a.data()->values;
  const auto& bv = b.data()->values;
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] - bv[i];
  auto ad = a.data();
  auto bd = b.data();
  auto od = out;
  const Tensor ins[] = {a, b};
  return TapeAccess::finish(Op::kSub, ins, out, [ad, bd, od]() {
    if (ad->requires_grad) accumulate(*ad, od->grad);
    if (bd->requires_grad) {
      apply_grad(*bd, bd->values.size(), [&](size_t i) { return -od->grad[i]; });
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto out = make_data(a.shape());
  const auto& av = a.data()->values;
  const auto& bv = b.data()->values;
  for (size_t i = 0; i < av.size(); ++i) out->values[i] = av[i] * bv[i];
  auto ad = a.data();
  auto bd = b.data();
  auto od = out;
  const Tensor ins[] = {a, b};
  return TapeAccess::finish(Op::kMul, ins, out, [ad, bd, od]() {
    if (ad->requires_grad) {
      apply_grad(*ad, ad->values.size(),
                 [&](size_t i) { return bd->values[i] * od->grad[i]; });
    }
    if (bd->requires_grad) {
      apply_grad(*bd, bd->values.size(),
                 [&](size_t i) { return ad->values[i] * od->grad[i]; });
    }
  });
}

Tensor concat(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const int rank = parts[0].rank();
  if (rank != 1 && rank != 2) {
    throw DimensionError("concat: rank must be 1 or 2, got " +
                         shape_str(parts[0].shape()));
  }
  int total_last = 0;
  const int lead = rank == 2 ? parts[0].dim(0) : 1;
  for (const Tensor& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.dim(0) != lead)) {
      throw DimensionError("concat: mismatched shapes " +
                           shape_str(parts[0].shape()) + " and " +
                           shape_str(p.shape()));
    }
    total_last += p.shape().back();
  }
  Shape out_shape = rank == 2 ? Shape{lead, total_last} : Shape{total_last};
  auto out = make_data(out_shape);
  for (int r = 0; r < lead; ++r) {
    int col = 0;
    for (const Tensor& p : parts) {
      const int w = p.shape().back();
      const double* src = p.values().data() + static_cast<size_t>(r) * w;
      double* dst =
          out->values.data() + static_cast<size_t>(r) * total_last + col;
      std::copy(src, src + w, dst);
      col += w;
    }
  }
  std::vector<std::shared_ptr<detail::TensorData>> ins_data;
  ins_data.reserve(parts.size());
  for (const Tensor& p : parts) ins_data.push_back(p.data());
  auto od = out;
  const int total = total_last;
  return TapeAccess::finish(Op::kConcat, parts, out, [ins_data, od, lead, total]() {
    for (int r = 0; r < lead; ++r) {
      int col = 0;
      for (auto& in : ins_data) {
        const int w = in->shape.back();
        if (in->requires_grad) {
          in->ensure_grad();
          const double* g =
              od->grad.data() + static_cast<size_t>(r) * total + col;
          double* dst = in->grad.data() + static_cast<size_t>(r) * w;
          for (int j = 0; j < w; ++j) dst[j] += g[j];
        }
        col += w;
      }
    }
  });
}

Tensor concat(std::initializer_list<Tensor> parts) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()));
}

Tensor slice(const Tensor& t, int start, int length) {
  const int rank = t.rank();
  if (rank != 1 && rank != 2) {
    throw DimensionError("slice: rank must be 1 or 2, got " +
                         shape_str(t.shape()));
  }
  const int last = t.shape().back();
  if (start < 0 || length < 0 || start + length > last) {
    throw DimensionError("slice: range [" + std::to_string(start) + ", " +
                         std::to_string(start + length) + ") exceeds width " +
                         std::to_string(last));
  }
  const int lead = rank == 2 ? t.dim(0) : 1;
  Shape out_shape = rank == 2 ? Shape{lead, length} : Shape{length};
  auto out = make_data(out_shape);
  for (int r = 0; r < lead; ++r) {
    const double* src =
        t.values().data() + static_cast<size_t>(r) * last + start;
    std::copy(src, src + length,
              out->values.data() + static_cast<size_t>(r) * length);
  }
  auto td = t.data();
  auto od = out;
  const Tensor ins[] = {t};
  return TapeAccess::finish(Op::kSlice, ins, out, [td, od, lead, last, start, length]() {
    td->ensure_grad();
    for (int r = 0; r < lead; ++r) {
      const double* g = od->grad.data() + static_cast<size_t>(r) * length;
      double* dst = td->grad.data() + static_cast<size_t>(r) * last + start;
      for (int j = 0; j < length; ++j) dst[j] += g[j];
    }
  });
}

Tensor sigmoid(const Tensor& t) {
  return elementwise_unary(
      Op::kSigmoid, t,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& t) {
  return elementwise_unary(Op::kTanh, t, [](double x) { return std::tanh(x); },
                           [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& t) {
  return elementwise_unary(Op::kRelu, t,
                           [](double x) { return x > 0.0 ? x : 0.0; },
                           [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& t) {
  return elementwise_unary(Op::kExp, t, [](double x) { return std::exp(x); },
                           [](double, double y) { return y; });
}

Tensor log(const Tensor& t) {
  return elementwise_unary(Op::kLog, t, [](double x) { return std::log(x); },
                           [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& t) {
  return elementwise_unary(Op::kSquare, t, [](double x) { return x * x; },
                           [](double x, double) { return 2.0 * x; });
}

Tensor scale(const Tensor& t, double factor) {
  OpAttrs attrs;
  attrs.scale = factor;
  const Tensor ins[] = {t};
  return forward_op(Op::kScale, ins, attrs);
}

Tensor clamp(const Tensor& t, double lo, double hi) {
  OpAttrs attrs;
  attrs.lo = lo;
  attrs.hi = hi;
  const Tensor ins[] = {t};
  return forward_op(Op::kClamp, ins, attrs);
}

Tensor sum(const Tensor& t) {
  auto out = make_data({});
  double acc = 0.0;
  for (double v : t.values()) acc += v;
  out->values[0] = acc;
  auto td = t.data();
  auto od = out;
  const Tensor ins[] = {t};
  return TapeAccess::finish(Op::kSum, ins, out, [td, od]() {
    const double g = od->grad[0];
    apply_grad(*td, td->values.size(), [&](size_t) { return g; });
  });
}

Tensor mean(const Tensor& t) {
  if (t.size() == 0) throw DimensionError("mean: empty tensor");
  auto out = make_data({});
  double acc = 0.0;
  for (double v : t.values()) acc += v;
  const double inv_n = 1.0 / static_cast<double>(t.size());
  out->values[0] = acc * inv_n;
  auto td = t.data();
  auto od = out;
  const Tensor ins[] = {t};
  return TapeAccess::finish(Op::kMean, ins, out, [td, od, inv_n]() {
    const double g = od->grad[0] * inv_n;
    apply_grad(*td, td->values.size(), [&](size_t) { return g; });
  });
}

Tensor reshape(const Tensor& t, Shape shape) {
  auto out = make_data(shape);
  if (out->size() != t.size()) {
    throw DimensionError("reshape: size of " + shape_str(t.shape()) +
                         " does not match " + shape_str(shape));
  }
  out->values = t.data()->values;
  auto td = t.data();
  auto od = out;
  const Tensor ins[] = {t};
  return TapeAccess::finish(Op::kReshape, ins, out, [td, od]() {
    accumulate(*td, od->grad);
  });
}

Tensor forward_op(Op kind, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  auto unary = [&]() -> const Tensor& {
    if (inputs.size() != 1) {
      throw DimensionError(std::string(op_name(kind)) + ": expected 1 input");
    }
    return inputs[0];
  };
  auto binary = [&](int i) -> const Tensor& {
    if (inputs.size() != 2) {
      throw DimensionError(std::string(op_name(kind)) + ": expected 2 inputs");
    }
    return inputs[static_cast<size_t>(i)];
  };
  switch (kind) {
    case Op::kMatmul: return matmul(binary(0), binary(1));
    case Op::kAdd: return add(binary(0), binary(1));
    case Op::kSub: return sub(binary(0), binary(1));
    case Op::kMul: return mul(binary(0), binary(1));
    case Op::kConcat: return concat(inputs);
    case Op::kSlice: return slice(unary(), attrs.start, attrs.length);
    case Op::kSigmoid: return sigmoid(unary());
    case Op::kTanh: return tanh(unary());
    case Op::kRelu: return relu(unary());
    case Op::kExp: return exp(unary());
    case Op::kLog: return log(unary());
    case Op::kSum: return sum(unary());
    case Op::kMean: return mean(unary());
    case Op::kSquare: return square(unary());
    case Op::kReshape: return reshape(unary(), attrs.shape);
    case Op::kScale: {
      const Tensor& x = unary();
      auto out = make_data(x.shape());
      const double c = attrs.scale;
      const auto& xv = x.data()->values;
      for (size_t i = 0; i < xv.size(); ++i) out->values[i] = c * xv[i];
      auto xd = x.data();
      auto od = out;
      return TapeAccess::finish(Op::kScale, inputs, out, [xd, od, c]() {
        apply_grad(*xd, xd->values.size(),
                   [&](size_t i) { return c * od->grad[i]; });
      });
    }
    case Op::kClamp: {
      const Tensor& x = unary();
      if (attrs.lo > attrs.hi) {
        throw DimensionError("clamp: lo > hi");
      }
      auto out = make_data(x.shape());
      const double lo = attrs.lo, hi = attrs.hi;
      const auto& xv = x.data()->values;
      for (size_t i = 0; i < xv.size(); ++i)
        out->values[i] = std::min(std::max(xv[i], lo), hi);
      auto xd = x.data();
      auto od = out;
      return TapeAccess::finish(Op::kClamp, inputs, out, [xd, od, lo, hi]() {
        xd->ensure_grad();
        for (size_t i = 0; i < xd->grad.size(); ++i) {
          const double v = xd->values[i];
          if (v >= lo && v <= hi) xd->grad[i] += od->grad[i];
        }
      });
    }
  }
  throw DimensionError("unknown op kind");
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw DimensionError("backward: loss must be a scalar");
  }
  auto& tape = detail::Tape::active();
  if (tape.empty()) {
    throw Error("backward: tape is empty (no recorded operations)");
  }
  loss.data()->ensure_grad();
  loss.data()->grad[0] = 1.0;
  auto& nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    if (it->out->grad_empty()) continue;  // not reachable from the loss
    it->backprop();
  }
  // Intermediate gradients die with the tape; leaf gradients persist so that
  // separate graphs accumulate additively until zero_grad.
  tape.clear();
}

}  // namespace vrnnaug
