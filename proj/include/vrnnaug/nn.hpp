#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vrnnaug/rng.hpp"
#include "vrnnaug/tensor.hpp"

namespace vrnnaug {

/// Orthogonal matrix via QR decomposition of a standard-normal draw with the
/// R diagonal sign-corrected. For rows >= cols the columns are orthonormal;
/// otherwise the rows are. Deterministic given the stream state.
Tensor orthogonal_init(int rows, int cols, RngStream& rng);

/// Glorot uniform: U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform_init(int rows, int cols, RngStream& rng);

/// Single GRU cell. Row-vector convention: an input batch (B, input) is
/// multiplied by (input, hidden) matrices from the left, so each gate holds
/// hidden x input and hidden x hidden weights.
struct GruParams {
  int input_size = 0;
  int hidden_size = 0;
  Tensor w_reset, w_update, w_cand;  // (input, hidden)
  Tensor u_reset, u_update, u_cand;  // (hidden, hidden)
  Tensor b_reset, b_update, b_cand;  // (hidden,)
};

/// Orthogonal weights, zero biases.
GruParams make_gru(int input_size, int hidden_size, RngStream& rng);

/// r = sigmoid(xW_r + hU_r + b_r), g = sigmoid(xW_g + hU_g + b_g),
/// c = tanh(xW_c + (r*h)U_c + b_c), h' = (1-g)*h + g*c.
/// Accepts (B, d) batches or plain (d,) vectors.
Tensor gru_step(const GruParams& p, const Tensor& h_prev, const Tensor& x);

/// Fully connected network: ReLU hidden layers with an identity shortcut
/// wherever a layer's input and output widths match, linear output layer.
struct MlpParams {
  std::vector<Tensor> weights;  // (in_l, out_l)
  std::vector<Tensor> biases;   // (out_l,)
  std::vector<bool> skip;       // shortcut active on hidden layer l
};

/// `hidden_layers` hidden layers of width max(input_size, min_hidden_width),
/// Glorot-uniform weights, zero biases.
MlpParams make_mlp(int input_size, int output_size, RngStream& rng,
                   int hidden_layers = 3, int min_hidden_width = 50);

Tensor mlp_forward(const MlpParams& p, const Tensor& x);

/// Named trainable tensors in registration order.
class ParamStore {
 public:
  Tensor& add(std::string name, Tensor t);
  Tensor* find(std::string_view name);
  const Tensor* find(std::string_view name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const {
    return entries_;
  }
  std::vector<std::pair<std::string, Tensor>>& mutable_entries() {
    return entries_;
  }
  void zero_grad();
  int64_t total_size() const;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

void register_gru(ParamStore& store, const std::string& prefix, GruParams& p);
void register_mlp(ParamStore& store, const std::string& prefix, MlpParams& p);

}  // namespace vrnnaug
