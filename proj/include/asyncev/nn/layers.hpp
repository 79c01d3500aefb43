#pragma once

#include <string>

#include "asyncev/nn/conv.hpp"
#include "asyncev/nn/ops.hpp"
#include "asyncev/nn/param_set.hpp"

namespace asyncev::nn {

// Helpers that register a layer's parameters under a name prefix and apply the
// layer from a Binding. Weights are Glorot-uniform, biases zero.

inline void add_linear_params(ParamSet& ps, Rng& rng, const std::string& prefix, std::size_t d_in, std::size_t d_out,
                              bool with_bias = true) {
  ps.add(prefix + ".weight", {d_in, d_out}, glorot_uniform(rng, d_in * d_out, d_in, d_out));
  if (with_bias) ps.add(prefix + ".bias", {d_out}, std::vector<double>(d_out, 0.0));
}

/// Row vector x [d_in] or [n x d_in] through a registered linear layer.
inline Tensor apply_linear(const Binding& b, const std::string& prefix, const Tensor& x) {
  const Tensor x2 = x.rank() == 1 ? reshape(x, {1, x.size()}) : x;
  const std::string bias = prefix + ".bias";
  std::optional<Tensor> bt;
  if (b.contains(bias)) bt = b[bias];
  return linear(x2, b[prefix + ".weight"], bt);
}

inline void add_conv_params(ParamSet& ps, Rng& rng, const std::string& prefix, std::size_t c_in, std::size_t c_out,
                            std::size_t k) {
  const std::size_t fan_in = c_in * k * k, fan_out = c_out * k * k;
  ps.add(prefix + ".weight", {c_out, c_in, k, k}, glorot_uniform(rng, c_out * c_in * k * k, fan_in, fan_out));
  ps.add(prefix + ".bias", {c_out}, std::vector<double>(c_out, 0.0));
}

inline Tensor apply_conv(const Binding& b, const std::string& prefix, const Tensor& x, Conv2dSpec spec) {
  return conv2d(x, b[prefix + ".weight"], b[prefix + ".bias"], spec);
}

// GRU cell (update gate z, reset gate r, candidate n):
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   n = tanh(x W_n + (r * h) U_n + b_n)
//   h' = z * h + (1 - z) * n
// z -> 1 keeps the previous state.

inline void add_gru_params(ParamSet& ps, Rng& rng, const std::string& prefix, std::size_t d_in, std::size_t d_h) {
  for (const char* gate : {"z", "r", "n"}) {
    const std::string g = prefix + "." + gate;
    ps.add(g + ".W", {d_in, d_h}, glorot_uniform(rng, d_in * d_h, d_in, d_h));
    ps.add(g + ".U", {d_h, d_h}, glorot_uniform(rng, d_h * d_h, d_h, d_h));
    ps.add(g + ".b", {d_h}, std::vector<double>(d_h, 0.0));
  }
}

inline Tensor gru_cell(const Binding& b, const std::string& prefix, const Tensor& x, const Tensor& h_prev) {
  const std::size_t d_in = b[prefix + ".z.W"].dim(0);
  const std::size_t d_h = b[prefix + ".z.U"].dim(0);
  if (x.size() != d_in) throw ShapeError("gru_cell: input size " + std::to_string(x.size()) + " != " + std::to_string(d_in));
  if (h_prev.size() != d_h) throw ShapeError("gru_cell: hidden size " + std::to_string(h_prev.size()) + " != " + std::to_string(d_h));
  const Tensor xr = reshape(x, {1, d_in});
  const Tensor hr = reshape(h_prev, {1, d_h});
  auto gate = [&](const char* name, const Tensor& hin) {
    const std::string g = prefix + "." + name;
    return add_row_vector(add(matmul(xr, b[g + ".W"]), matmul(hin, b[g + ".U"])), b[g + ".b"]);
  };
  const Tensor z = sigmoid(gate("z", hr));
  const Tensor r = sigmoid(gate("r", hr));
  const Tensor n = tanh(gate("n", mul(r, hr)));
  const Tensor h_new = add(mul(z, hr), mul(one_minus(z), n));
  return reshape(h_new, {d_h});
}

}  // namespace asyncev::nn
