#include "vrnnaug/nn.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace vrnnaug {

Tensor orthogonal_init(int rows, int cols, RngStream& rng) {
  if (rows < 1 || cols < 1) {
    throw DimensionError("orthogonal_init: extents must be positive");
  }
  // QR of a tall standard-normal matrix; transpose afterwards if wide.
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  Eigen::MatrixXd a(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  std::vector<double> values(static_cast<size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      values[static_cast<size_t>(i) * cols + j] = rows >= cols ? q(i, j) : q(j, i);
  return Tensor::from({rows, cols}, std::move(values));
}

Tensor glorot_uniform_init(int rows, int cols, RngStream& rng) {
  if (rows < 1 || cols < 1) {
    throw DimensionError("glorot_uniform_init: extents must be positive");
  }
  const double a = std::sqrt(6.0 / (rows + cols));
  std::vector<double> values(static_cast<size_t>(rows) * cols);
  rng.fill_uniform(values, -a, a);
  return Tensor::from({rows, cols}, std::move(values));
}

GruParams make_gru(int input_size, int hidden_size, RngStream& rng) {
  GruParams p;
  p.input_size = input_size;
  p.hidden_size = hidden_size;
  p.w_reset = orthogonal_init(input_size, hidden_size, rng);
  p.w_update = orthogonal_init(input_size, hidden_size, rng);
  p.w_cand = orthogonal_init(input_size, hidden_size, rng);
  p.u_reset = orthogonal_init(hidden_size, hidden_size, rng);
  p.u_update = orthogonal_init(hidden_size, hidden_size, rng);
  p.u_cand = orthogonal_init(hidden_size, hidden_size, rng);
  p.b_reset = Tensor::zeros({hidden_size});
  p.b_update = Tensor::zeros({hidden_size});
  p.b_cand = Tensor::zeros({hidden_size});
  return p;
}

namespace {

// Vectors are run through the rank-2 path as a single-row batch.
Tensor as_row(const Tensor& t) {
  return t.rank() == 1 ? reshape(t, {1, t.dim(0)}) : t;
}

}  // namespace

Tensor gru_step(const GruParams& p, const Tensor& h_prev, const Tensor& x) {
  const bool vector_in = h_prev.rank() == 1;
  if (x.rank() != h_prev.rank()) {
    throw DimensionError("gru_step: state " + shape_str(h_prev.shape()) +
                         " and input " + shape_str(x.shape()) +
                         " have different ranks");
  }
  Tensor h = as_row(h_prev);
  Tensor xr = as_row(x);
  if (xr.cols() != p.input_size || h.cols() != p.hidden_size) {
    throw DimensionError("gru_step: input " + shape_str(x.shape()) +
                         ", state " + shape_str(h_prev.shape()) +
                         " incompatible with cell (" +
                         std::to_string(p.input_size) + " -> " +
                         std::to_string(p.hidden_size) + ")");
  }
  Tensor r = sigmoid(add(add(matmul(xr, p.w_reset), matmul(h, p.u_reset)), p.b_reset));
  Tensor g = sigmoid(add(add(matmul(xr, p.w_update), matmul(h, p.u_update)), p.b_update));
  Tensor c = tanh(add(add(matmul(xr, p.w_cand), matmul(mul(r, h), p.u_cand)), p.b_cand));
  Tensor ones = Tensor::full(g.shape(), 1.0);
  Tensor out = add(mul(sub(ones, g), h), mul(g, c));
  return vector_in ? reshape(out, {p.hidden_size}) : out;
}

MlpParams make_mlp(int input_size, int output_size, RngStream& rng,
                   int hidden_layers, int min_hidden_width) {
  if (input_size < 1 || output_size < 1 || hidden_layers < 0) {
    throw DimensionError("make_mlp: invalid sizes");
  }
  const int width = std::max(input_size, min_hidden_width);
  MlpParams p;
  int in = input_size;
  for (int l = 0; l < hidden_layers; ++l) {
    p.weights.push_back(glorot_uniform_init(in, width, rng));
    p.biases.push_back(Tensor::zeros({width}));
    p.skip.push_back(in == width);
    in = width;
  }
  p.weights.push_back(glorot_uniform_init(in, output_size, rng));
  p.biases.push_back(Tensor::zeros({output_size}));
  p.skip.push_back(false);  // output layer is a plain affine map
  return p;
}

Tensor mlp_forward(const MlpParams& p, const Tensor& x) {
  if (p.weights.empty() || p.weights.size() != p.biases.size() ||
      p.weights.size() != p.skip.size()) {
    throw DimensionError("mlp_forward: inconsistent parameter lists");
  }
  const bool vector_in = x.rank() == 1;
  Tensor h = as_row(x);
  const size_t last = p.weights.size() - 1;
  for (size_t l = 0; l < p.weights.size(); ++l) {
    Tensor a = add(matmul(h, p.weights[l]), p.biases[l]);
    if (l == last) {
      h = a;
    } else {
      Tensor r = relu(a);
      h = p.skip[l] ? add(r, h) : r;
    }
  }
  return vector_in ? reshape(h, {h.cols()}) : h;
}

Tensor& ParamStore::add(std::string name, Tensor t) {
  if (find(name) != nullptr) {
    throw Error("ParamStore: duplicate parameter name '" + name + "'");
  }
  t.set_requires_grad(true);
  entries_.emplace_back(std::move(name), std::move(t));
  return entries_.back().second;
}

Tensor* ParamStore::find(std::string_view name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

const Tensor* ParamStore::find(std::string_view name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return &t;
  }
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& [n, t] : entries_) t.zero_grad();
}

int64_t ParamStore::total_size() const {
  int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void register_gru(ParamStore& store, const std::string& prefix, GruParams& p) {
  p.w_reset = store.add(prefix + ".w_reset", p.w_reset);
  p.w_update = store.add(prefix + ".w_update", p.w_update);
  p.w_cand = store.add(prefix + ".w_cand", p.w_cand);
  p.u_reset = store.add(prefix + ".u_reset", p.u_reset);
  p.u_update = store.add(prefix + ".u_update", p.u_update);
  p.u_cand = store.add(prefix + ".u_cand", p.u_cand);
  p.b_reset = store.add(prefix + ".b_reset", p.b_reset);
  p.b_update = store.add(prefix + ".b_update", p.b_update);
  p.b_cand = store.add(prefix + ".b_cand", p.b_cand);
}

void register_mlp(ParamStore& store, const std::string& prefix, MlpParams& p) {
  for (size_t l = 0; l < p.weights.size(); ++l) {
    const std::string layer = prefix + ".l" + std::to_string(l);
    p.weights[l] = store.add(layer + ".w", p.weights[l]);
    p.biases[l] = store.add(layer + ".b", p.biases[l]);
  }
}

}  // namespace vrnnaug
