#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ecgaug/tensor.hpp"

namespace ecgaug::ops {

// ---- elementwise ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor add_scalar(const Tensor& x, double c);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.2);
Tensor tanh(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sqrt(const Tensor& x);

// ---- reductions / broadcast ----
Tensor sum_all(const Tensor& x);                       // -> shape [1]
Tensor mean_all(const Tensor& x);                      // -> shape [1]
// keepdims semantics: reduced axes become extent 1.
Tensor sum_axes(const Tensor& x, std::vector<int64_t> axes);
Tensor mean_axes(const Tensor& x, std::vector<int64_t> axes);
// Same rank; each source extent must be 1 or equal to the target.
Tensor broadcast_to(const Tensor& x, Shape target);
Tensor expand_scalar(const Tensor& scalar, Shape target);

// ---- shape ----
Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose2d(const Tensor& x);
Tensor concat(const Tensor& a, const Tensor& b, int64_t axis);
Tensor narrow(const Tensor& x, int64_t axis, int64_t start, int64_t length);
Tensor pad_axis(const Tensor& x, int64_t axis, int64_t before, int64_t after);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b); // [m,k] x [k,n]
// x [..., In], weight [Out, In], optional bias [Out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias = Tensor());

// ---- convolution family ----
// x [B,Cin,L], weight [Cout,Cin,K], optional bias [Cout]; cross-correlation.
Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
              int64_t stride, int64_t padding);
// x [B,Cin,L], weight [Cin,Cout,K]; exact adjoint of conv1d with the same
// geometry; output length (L-1)*stride - 2*padding + K.
Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        int64_t stride, int64_t padding);
int64_t conv1d_out_len(int64_t L, int64_t K, int64_t stride, int64_t padding);
int64_t conv_transpose1d_out_len(int64_t L, int64_t K, int64_t stride, int64_t padding);

// ---- lookup ----
// table [Rows, Dim], labels in [0, Rows). Gradient scatters into looked-up rows.
Tensor embedding(const Tensor& table, const std::vector<int64_t>& labels);

// ---- normalization ----
// Per-channel normalization over batch and length, then affine. Train mode
// uses batch statistics and updates the running buffers in place; eval mode
// normalizes with the running statistics.
Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool train,
                    double eps = 1e-5, double momentum = 0.1);
// Per-(item, channel) normalization over length; population variance, no affine.
Tensor instance_norm1d(const Tensor& x);

// ---- classification heads ----
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
// logits [B, C]; mean negative log-likelihood of the labelled classes.
Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels);

// ---- convenience ----
Tensor dot(const Tensor& a, const Tensor& b); // sum(a*b), flattened
// L2 norm over all non-batch axes, one value per item: [B, ...] -> [B].
// norm_eps stabilizes the sqrt gradient at exactly-zero gradients.
Tensor l2_norm_per_item(const Tensor& x, double norm_eps = 1e-24);

} // namespace ecgaug::ops
