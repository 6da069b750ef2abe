#include "ecgaug/ops.hpp"

#include <algorithm>
#include <cmath>

namespace ecgaug::ops {

namespace {

// Instance norm epsilon: small enough that the normalization is population
// variance for all practical rows, while keeping constant rows at exactly 0
// (their centered numerator is exactly 0).
constexpr double kInstanceNormEps = 1e-12;

} // namespace

Tensor batch_norm1d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor& running_mean, Tensor& running_var, bool train, double eps,
                    double momentum) {
    if (x.dim() != 3) throw ShapeError("batch_norm1d: need [B,C,L], got " + shape_str(x.shape()));
    int64_t B = x.extent(0), C = x.extent(1), L = x.extent(2);
    if (B * L < 1) throw ShapeError("batch_norm1d: empty channel");
    if (gamma.numel() != C || beta.numel() != C)
        throw ShapeError("batch_norm1d: affine parameters must have " + std::to_string(C) +
                         " entries");

    Shape full = {B, C, L};
    Tensor xhat;
    if (train) {
        Tensor mu = mean_axes(x, {0, 2});                       // [1,C,1]
        Tensor xc = sub(x, broadcast_to(mu, full));
        Tensor var = mean_axes(mul(xc, xc), {0, 2});            // biased
        xhat = div(xc, broadcast_to(sqrt(add_scalar(var, eps)), full));

        // Running statistics track the unbiased variance, as is conventional.
        double n = static_cast<double>(B * L);
        double unbias = n > 1.0 ? n / (n - 1.0) : 1.0;
        auto rm = running_mean.raw_data();
        auto rv = running_var.raw_data();
        auto pm = mu.data();
        auto pv = var.data();
        for (int64_t c = 0; c < C; ++c) {
            rm[c] = (1.0 - momentum) * rm[c] + momentum * pm[c];
            rv[c] = (1.0 - momentum) * rv[c] + momentum * pv[c] * unbias;
        }
    } else {
        Tensor rm = reshape(running_mean.detach(), {1, C, 1});
        Tensor rv = reshape(running_var.detach(), {1, C, 1});
        Tensor xc = sub(x, broadcast_to(rm, full));
        xhat = div(xc, broadcast_to(sqrt(add_scalar(rv, eps)), full));
    }
    Tensor g3 = reshape(gamma, {1, C, 1});
    Tensor b3 = reshape(beta, {1, C, 1});
    return add(mul(xhat, broadcast_to(g3, full)), broadcast_to(b3, full));
}

Tensor instance_norm1d(const Tensor& x) {
    if (x.dim() != 3)
        throw ShapeError("instance_norm1d: need [B,C,L], got " + shape_str(x.shape()));
    int64_t L = x.extent(2);
    if (L < 1) throw ShapeError("instance_norm1d: empty rows");
    Shape full = x.shape();
    Tensor mu = mean_axes(x, {2});                              // [B,C,1]
    Tensor xc = sub(x, broadcast_to(mu, full));
    Tensor var = mean_axes(mul(xc, xc), {2});
    return div(xc, broadcast_to(sqrt(add_scalar(var, kInstanceNormEps)), full));
}

namespace {

// Shift by the detached row max: exact for softmax/log-softmax (both are
// invariant to a constant shift), and keeps exp() in range.
Tensor shifted_by_rowmax(const Tensor& x) {
    const Shape& s = x.shape();
    int64_t cols = s.back();
    int64_t rows = x.numel() / cols;
    auto px = x.data();
    std::vector<double> mx(static_cast<size_t>(x.numel()));
    for (int64_t r = 0; r < rows; ++r) {
        double m = px[static_cast<size_t>(r * cols)];
        for (int64_t c = 1; c < cols; ++c) m = std::max(m, px[static_cast<size_t>(r * cols + c)]);
        for (int64_t c = 0; c < cols; ++c) mx[static_cast<size_t>(r * cols + c)] = m;
    }
    Tensor shift = Tensor::from(s, std::move(mx));
    return sub(x, shift);
}

} // namespace

Tensor softmax_lastdim(const Tensor& x) {
    Tensor z = shifted_by_rowmax(x);
    Tensor e = exp(z);
    Tensor denom = sum_axes(e, {x.dim() - 1});
    return div(e, broadcast_to(denom, x.shape()));
}

Tensor log_softmax_lastdim(const Tensor& x) {
    Tensor z = shifted_by_rowmax(x);
    Tensor lse = log(sum_axes(exp(z), {x.dim() - 1}));
    return sub(z, broadcast_to(lse, x.shape()));
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int64_t>& labels) {
    if (logits.dim() != 2) throw ShapeError("cross_entropy: logits must be [B,C]");
    int64_t B = logits.extent(0), C = logits.extent(1);
    if (static_cast<int64_t>(labels.size()) != B)
        throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for batch " +
                         std::to_string(B));
    std::vector<double> onehot(static_cast<size_t>(B * C), 0.0);
    for (int64_t b = 0; b < B; ++b) {
        int64_t lb = labels[static_cast<size_t>(b)];
        if (lb < 0 || lb >= C)
            throw ShapeError("cross_entropy: label " + std::to_string(lb) + " outside [0," +
                             std::to_string(C) + ")");
        onehot[static_cast<size_t>(b * C + lb)] = 1.0;
    }
    Tensor mask = Tensor::from({B, C}, std::move(onehot));
    Tensor picked = sum_all(mul(log_softmax_lastdim(logits), mask));
    return scale(picked, -1.0 / static_cast<double>(B));
}

} // namespace ecgaug::ops
