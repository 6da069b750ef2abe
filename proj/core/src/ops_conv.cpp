#include "ecgaug/ops.hpp"

#include <algorithm>
#include <cmath>

// conv1d and its two gradient kernels form a closed set: each one's vjp is
// expressed with the other two, so any order of differentiation stays on the
// tape. Index identity throughout: out[l] touches in[l*stride + k - padding].

namespace ecgaug::ops {

namespace {

Tensor conv_core(const Tensor& x, const Tensor& w, int64_t stride, int64_t padding);
Tensor conv_input_grad(const Tensor& gy, const Tensor& w, int64_t stride, int64_t padding,
                       int64_t in_len);
Tensor conv_weight_grad(const Tensor& x, const Tensor& gy, int64_t stride, int64_t padding,
                        int64_t kernel);

void check_conv_geometry(const char* op, int64_t stride, int64_t padding) {
    if (stride < 1) throw ShapeError(std::string(op) + ": stride must be >= 1");
    if (padding < 0) throw ShapeError(std::string(op) + ": negative padding");
}

// x [B,Ci,L] * w [Co,Ci,K] -> [B,Co,Lo]
Tensor conv_core(const Tensor& x, const Tensor& w, int64_t stride, int64_t padding) {
    check_conv_geometry("conv1d", stride, padding);
    if (x.dim() != 3 || w.dim() != 3)
        throw ShapeError("conv1d: need [B,Cin,L] and [Cout,Cin,K], got " + shape_str(x.shape()) +
                         " and " + shape_str(w.shape()));
    int64_t B = x.extent(0), Ci = x.extent(1), L = x.extent(2);
    int64_t Co = w.extent(0), K = w.extent(2);
    if (w.extent(1) != Ci)
        throw ShapeError("conv1d: input channels " + std::to_string(Ci) +
                         " vs weight channels " + std::to_string(w.extent(1)));
    if (K > L + 2 * padding)
        throw ShapeError("conv1d: kernel " + std::to_string(K) + " exceeds padded length " +
                         std::to_string(L + 2 * padding));
    int64_t Lo = conv1d_out_len(L, K, stride, padding);
    if (Lo < 1) throw ShapeError("conv1d: empty output for L=" + std::to_string(L));

    std::vector<double> out(static_cast<size_t>(B * Co * Lo), 0.0);
    const double* px = x.data().data();
    const double* pw = w.data().data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Co; ++co) {
            double* orow = out.data() + (b * Co + co) * Lo;
            for (int64_t ci = 0; ci < Ci; ++ci) {
                const double* xrow = px + (b * Ci + ci) * L;
                const double* wrow = pw + (co * Ci + ci) * K;
                for (int64_t k = 0; k < K; ++k) {
                    double wk = wrow[k];
                    if (wk == 0.0) continue;
                    // l*stride + k - padding in [0, L)
                    if (L - 1 + padding - k < 0) continue;
                    int64_t lo = 0;
                    if (padding - k > 0) lo = (padding - k + stride - 1) / stride;
                    int64_t hi = (L - 1 + padding - k) / stride; // inclusive
                    if (hi > Lo - 1) hi = Lo - 1;
                    const double* xi = xrow + lo * stride + k - padding;
                    for (int64_t l = lo; l <= hi; ++l, xi += stride) orow[l] += wk * *xi;
                }
            }
        }
    }
    return make_node({B, Co, Lo}, std::move(out), {x, w},
                     [x, w, stride, padding, L, K](const Tensor& g) -> std::vector<Tensor> {
                         return {conv_input_grad(g, w, stride, padding, L),
                                 conv_weight_grad(x, g, stride, padding, K)};
                     },
                     "conv1d");
}

// gy [B,Co,Lg] scattered through w [Co,Ci,K] -> [B,Ci,in_len]
Tensor conv_input_grad(const Tensor& gy, const Tensor& w, int64_t stride, int64_t padding,
                       int64_t in_len) {
    check_conv_geometry("conv1d_xgrad", stride, padding);
    if (gy.dim() != 3 || w.dim() != 3) throw ShapeError("conv1d_xgrad: rank mismatch");
    int64_t B = gy.extent(0), Co = gy.extent(1), Lg = gy.extent(2);
    int64_t Ci = w.extent(1), K = w.extent(2);
    if (w.extent(0) != Co)
        throw ShapeError("conv1d_xgrad: channels " + std::to_string(Co) + " vs weight " +
                         std::to_string(w.extent(0)));
    if (in_len < 1) throw ShapeError("conv1d_xgrad: non-positive output length");

    std::vector<double> out(static_cast<size_t>(B * Ci * in_len), 0.0);
    const double* pg = gy.data().data();
    const double* pw = w.data().data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Co; ++co) {
            const double* grow = pg + (b * Co + co) * Lg;
            for (int64_t ci = 0; ci < Ci; ++ci) {
                double* orow = out.data() + (b * Ci + ci) * in_len;
                const double* wrow = pw + (co * Ci + ci) * K;
                for (int64_t k = 0; k < K; ++k) {
                    double wk = wrow[k];
                    if (wk == 0.0) continue;
                    if (in_len - 1 + padding - k < 0) continue;
                    int64_t lo = 0;
                    if (padding - k > 0) lo = (padding - k + stride - 1) / stride;
                    int64_t hi = (in_len - 1 + padding - k) / stride;
                    if (hi > Lg - 1) hi = Lg - 1;
                    double* oi = orow + lo * stride + k - padding;
                    for (int64_t l = lo; l <= hi; ++l, oi += stride) *oi += wk * grow[l];
                }
            }
        }
    }
    return make_node({B, Ci, in_len}, std::move(out), {gy, w},
                     [gy, w, stride, padding, K](const Tensor& v) -> std::vector<Tensor> {
                         return {conv_core(v, w, stride, padding),
                                 conv_weight_grad(v, gy, stride, padding, K)};
                     },
                     "conv1d_xgrad");
}

// x [B,Ci,L] correlated with gy [B,Co,Lg] -> [Co,Ci,K]
Tensor conv_weight_grad(const Tensor& x, const Tensor& gy, int64_t stride, int64_t padding,
                        int64_t kernel) {
    check_conv_geometry("conv1d_wgrad", stride, padding);
    if (x.dim() != 3 || gy.dim() != 3) throw ShapeError("conv1d_wgrad: rank mismatch");
    int64_t B = x.extent(0), Ci = x.extent(1), L = x.extent(2);
    int64_t Co = gy.extent(1), Lg = gy.extent(2);
    if (gy.extent(0) != B) throw ShapeError("conv1d_wgrad: batch mismatch");

    std::vector<double> out(static_cast<size_t>(Co * Ci * kernel), 0.0);
    const double* px = x.data().data();
    const double* pg = gy.data().data();
    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Co; ++co) {
            const double* grow = pg + (b * Co + co) * Lg;
            for (int64_t ci = 0; ci < Ci; ++ci) {
                const double* xrow = px + (b * Ci + ci) * L;
                double* wrow = out.data() + (co * Ci + ci) * kernel;
                for (int64_t k = 0; k < kernel; ++k) {
                    if (L - 1 + padding - k < 0) continue;
                    int64_t lo = 0;
                    if (padding - k > 0) lo = (padding - k + stride - 1) / stride;
                    int64_t hi = (L - 1 + padding - k) / stride;
                    if (hi > Lg - 1) hi = Lg - 1;
                    double acc = 0.0;
                    const double* xi = xrow + lo * stride + k - padding;
                    for (int64_t l = lo; l <= hi; ++l, xi += stride) acc += *xi * grow[l];
                    wrow[k] += acc;
                }
            }
        }
    }
    int64_t in_len = L;
    return make_node({Co, Ci, kernel}, std::move(out), {x, gy},
                     [x, gy, stride, padding, in_len](const Tensor& dw) -> std::vector<Tensor> {
                         return {conv_input_grad(gy, dw, stride, padding, in_len),
                                 conv_core(x, dw, stride, padding)};
                     },
                     "conv1d_wgrad");
}

Tensor add_channel_bias(const Tensor& y, const Tensor& bias) {
    int64_t B = y.extent(0), C = y.extent(1), L = y.extent(2);
    if (bias.dim() != 1 || bias.extent(0) != C)
        throw ShapeError("conv bias: shape " + shape_str(bias.shape()) + " for " +
                         std::to_string(C) + " channels");
    Tensor b3 = reshape(bias, {1, C, 1});
    return add(y, broadcast_to(b3, {B, C, L}));
}

} // namespace

int64_t conv1d_out_len(int64_t L, int64_t K, int64_t stride, int64_t padding) {
    return (L + 2 * padding - K) / stride + 1;
}

int64_t conv_transpose1d_out_len(int64_t L, int64_t K, int64_t stride, int64_t padding) {
    return (L - 1) * stride - 2 * padding + K;
}

Tensor conv1d(const Tensor& x, const Tensor& weight, const Tensor& bias, int64_t stride,
              int64_t padding) {
    Tensor y = conv_core(x, weight, stride, padding);
    if (bias.defined()) y = add_channel_bias(y, bias);
    return y;
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& weight, const Tensor& bias,
                        int64_t stride, int64_t padding) {
    if (x.dim() != 3 || weight.dim() != 3)
        throw ShapeError("conv_transpose1d: need [B,Cin,L] and [Cin,Cout,K], got " +
                         shape_str(x.shape()) + " and " + shape_str(weight.shape()));
    if (weight.extent(0) != x.extent(1))
        throw ShapeError("conv_transpose1d: input channels " + std::to_string(x.extent(1)) +
                         " vs weight " + std::to_string(weight.extent(0)));
    int64_t K = weight.extent(2);
    int64_t Lo = conv_transpose1d_out_len(x.extent(2), K, stride, padding);
    if (Lo < 1)
        throw ShapeError("conv_transpose1d: output length " + std::to_string(Lo) + " for L=" +
                         std::to_string(x.extent(2)) + " K=" + std::to_string(K));
    // The transposed conv is exactly the conv input-gradient with the weight
    // read as [Co=Cin, Ci=Cout, K]; no data movement needed for that view.
    Tensor y = conv_input_grad(x, weight, stride, padding, Lo);
    if (bias.defined()) y = add_channel_bias(y, bias);
    return y;
}

Tensor embedding(const Tensor& table, const std::vector<int64_t>& labels) {
    if (table.dim() != 2) throw ShapeError("embedding: table must be [rows, dim]");
    int64_t rows = table.extent(0), dim = table.extent(1);
    int64_t B = static_cast<int64_t>(labels.size());
    for (int64_t lb : labels)
        if (lb < 0 || lb >= rows)
            throw ShapeError("embedding: label " + std::to_string(lb) + " outside [0," +
                             std::to_string(rows) + ")");
    std::vector<double> out(static_cast<size_t>(B * dim));
    const double* pt = table.data().data();
    for (int64_t b = 0; b < B; ++b)
        std::copy_n(pt + labels[static_cast<size_t>(b)] * dim, dim, out.data() + b * dim);

    // grad scatters into looked-up rows only; scatter's own vjp gathers back.
    struct Scatter {
        static Tensor run(const std::vector<int64_t>& labels, const Tensor& g, int64_t rows) {
            int64_t B = g.extent(0), dim = g.extent(1);
            std::vector<double> out(static_cast<size_t>(rows * dim), 0.0);
            const double* pg = g.data().data();
            for (int64_t b = 0; b < B; ++b) {
                double* row = out.data() + labels[static_cast<size_t>(b)] * dim;
                const double* grow = pg + b * dim;
                for (int64_t d = 0; d < dim; ++d) row[d] += grow[d];
            }
            return make_node({rows, dim}, std::move(out), {g},
                             [labels](const Tensor& v) -> std::vector<Tensor> {
                                 return {embedding(v, labels)};
                             },
                             "embedding_scatter");
        }
    };
    return make_node({B, dim}, std::move(out), {table},
                     [labels, rows](const Tensor& g) -> std::vector<Tensor> {
                         return {Scatter::run(labels, g, rows)};
                     },
                     "embedding");
}

} // namespace ecgaug::ops
