#include "ecgaug/ops.hpp"

#include <algorithm>
#include <cmath>

namespace ecgaug::ops {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
}

template <typename F>
Tensor unary(const Tensor& x, F f, const char* op, Vjp vjp) {
    auto px = x.data();
    std::vector<double> out(px.size());
    for (size_t i = 0; i < px.size(); ++i) out[i] = f(px[i]);
    return make_node(x.shape(), std::move(out), {x}, std::move(vjp), op);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape("add", a, b);
    auto pa = a.data();
    auto pb = b.data();
    std::vector<double> out(pa.size());
    for (size_t i = 0; i < pa.size(); ++i) out[i] = pa[i] + pb[i];
    return make_node(a.shape(), std::move(out), {a, b},
                     [](const Tensor& g) -> std::vector<Tensor> { return {g, g}; }, "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape("sub", a, b);
    auto pa = a.data();
    auto pb = b.data();
    std::vector<double> out(pa.size());
    for (size_t i = 0; i < pa.size(); ++i) out[i] = pa[i] - pb[i];
    return make_node(a.shape(), std::move(out), {a, b},
                     [](const Tensor& g) -> std::vector<Tensor> { return {g, neg(g)}; }, "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape("mul", a, b);
    auto pa = a.data();
    auto pb = b.data();
    std::vector<double> out(pa.size());
    for (size_t i = 0; i < pa.size(); ++i) out[i] = pa[i] * pb[i];
    return make_node(a.shape(), std::move(out), {a, b},
                     [a, b](const Tensor& g) -> std::vector<Tensor> {
                         return {mul(g, b), mul(g, a)};
                     },
                     "mul");
}

Tensor div(const Tensor& a, const Tensor& b) {
    check_same_shape("div", a, b);
    auto pa = a.data();
    auto pb = b.data();
    std::vector<double> out(pa.size());
    for (size_t i = 0; i < pa.size(); ++i) out[i] = pa[i] / pb[i];
    return make_node(a.shape(), std::move(out), {a, b},
                     [a, b](const Tensor& g) -> std::vector<Tensor> {
                         Tensor ga = div(g, b);
                         // d/db (a/b) = -a / b^2
                         Tensor gb = neg(div(mul(g, a), mul(b, b)));
                         return {ga, gb};
                     },
                     "div");
}

Tensor neg(const Tensor& x) {
    return unary(
        x, [](double v) { return -v; }, "neg",
        [](const Tensor& g) -> std::vector<Tensor> { return {neg(g)}; });
}

Tensor scale(const Tensor& x, double c) {
    return unary(
        x, [c](double v) { return c * v; }, "scale",
        [c](const Tensor& g) -> std::vector<Tensor> { return {scale(g, c)}; });
}

Tensor add_scalar(const Tensor& x, double c) {
    return unary(
        x, [c](double v) { return v + c; }, "add_scalar",
        [](const Tensor& g) -> std::vector<Tensor> { return {g}; });
}

Tensor relu(const Tensor& x) {
    auto px = x.data();
    std::vector<double> out(px.size());
    std::vector<double> mask(px.size());
    for (size_t i = 0; i < px.size(); ++i) {
        mask[i] = px[i] > 0.0 ? 1.0 : 0.0;
        out[i] = px[i] > 0.0 ? px[i] : 0.0;
    }
    Tensor mask_t = Tensor::from(x.shape(), std::move(mask));
    return make_node(x.shape(), std::move(out), {x},
                     [mask_t](const Tensor& g) -> std::vector<Tensor> {
                         return {mul(g, mask_t)};
                     },
                     "relu");
}

Tensor leaky_relu(const Tensor& x, double slope) {
    auto px = x.data();
    std::vector<double> out(px.size());
    std::vector<double> mask(px.size());
    for (size_t i = 0; i < px.size(); ++i) {
        mask[i] = px[i] > 0.0 ? 1.0 : slope;
        out[i] = px[i] * mask[i];
    }
    Tensor mask_t = Tensor::from(x.shape(), std::move(mask));
    return make_node(x.shape(), std::move(out), {x},
                     [mask_t](const Tensor& g) -> std::vector<Tensor> {
                         return {mul(g, mask_t)};
                     },
                     "leaky_relu");
}

Tensor tanh(const Tensor& x) {
    auto px = x.data();
    std::vector<double> out(px.size());
    for (size_t i = 0; i < px.size(); ++i) out[i] = std::tanh(px[i]);
    // d tanh = (1 - tanh(x)^2) g, recomputed through ops so the backward pass
    // itself stays differentiable (gradient penalty needs this).
    return make_node(x.shape(), std::move(out), {x},
                     [x](const Tensor& g) -> std::vector<Tensor> {
                         Tensor y = tanh(x);
                         Tensor one_minus = add_scalar(neg(mul(y, y)), 1.0);
                         return {mul(g, one_minus)};
                     },
                     "tanh");
}

Tensor exp(const Tensor& x) {
    auto px = x.data();
    std::vector<double> out(px.size());
    for (size_t i = 0; i < px.size(); ++i) out[i] = std::exp(px[i]);
    return make_node(x.shape(), std::move(out), {x},
                     [x](const Tensor& g) -> std::vector<Tensor> {
                         return {mul(g, exp(x))};
                     },
                     "exp");
}

Tensor log(const Tensor& x) {
    return unary(
        x, [](double v) { return std::log(v); }, "log",
        [x](const Tensor& g) -> std::vector<Tensor> { return {div(g, x)}; });
}

Tensor sqrt(const Tensor& x) {
    auto px = x.data();
    std::vector<double> out(px.size());
    for (size_t i = 0; i < px.size(); ++i) out[i] = std::sqrt(px[i]);
    return make_node(x.shape(), std::move(out), {x},
                     [x](const Tensor& g) -> std::vector<Tensor> {
                         // 0.5 / sqrt(x); recomputed through sqrt so a second
                         // backward can differentiate it again.
                         return {scale(div(g, sqrt(x)), 0.5)};
                     },
                     "sqrt");
}

Tensor sum_all(const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    Shape in_shape = x.shape();
    return make_node({1}, {s}, {x},
                     [in_shape](const Tensor& g) -> std::vector<Tensor> {
                         return {expand_scalar(g, in_shape)};
                     },
                     "sum_all");
}

Tensor mean_all(const Tensor& x) { return scale(sum_all(x), 1.0 / static_cast<double>(x.numel())); }

namespace {

Shape reduced_shape(const Shape& in, const std::vector<int64_t>& axes) {
    Shape out = in;
    for (int64_t a : axes) {
        if (a < 0 || a >= static_cast<int64_t>(in.size()))
            throw ShapeError("sum_axes: axis " + std::to_string(a) + " of " + shape_str(in));
        out[static_cast<size_t>(a)] = 1;
    }
    return out;
}

} // namespace

Tensor sum_axes(const Tensor& x, std::vector<int64_t> axes) {
    std::sort(axes.begin(), axes.end());
    axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
    const Shape& in = x.shape();
    Shape out_shape = reduced_shape(in, axes);
    int64_t out_n = shape_numel(out_shape);
    std::vector<double> out(static_cast<size_t>(out_n), 0.0);

    // Row-major walk, mapping each input index to its reduced output index.
    size_t rank = in.size();
    std::vector<int64_t> idx(rank, 0);
    auto px = x.data();
    for (size_t flat = 0; flat < px.size(); ++flat) {
        int64_t out_flat = 0;
        for (size_t d = 0; d < rank; ++d) {
            int64_t id = out_shape[d] == 1 ? 0 : idx[d];
            out_flat = out_flat * out_shape[d] + id;
        }
        out[static_cast<size_t>(out_flat)] += px[flat];
        for (size_t d = rank; d-- > 0;) {
            if (++idx[d] < in[d]) break;
            idx[d] = 0;
        }
    }
    Shape in_shape = in;
    return make_node(out_shape, std::move(out), {x},
                     [in_shape](const Tensor& g) -> std::vector<Tensor> {
                         return {broadcast_to(g, in_shape)};
                     },
                     "sum_axes");
}

Tensor mean_axes(const Tensor& x, std::vector<int64_t> axes) {
    Tensor s = sum_axes(x, axes);
    double denom = static_cast<double>(x.numel()) / static_cast<double>(s.numel());
    return scale(s, 1.0 / denom);
}

Tensor broadcast_to(const Tensor& x, Shape target) {
    const Shape& in = x.shape();
    if (in.size() != target.size())
        throw ShapeError("broadcast_to: rank mismatch " + shape_str(in) + " -> " + shape_str(target));
    std::vector<int64_t> bcast_axes;
    for (size_t d = 0; d < in.size(); ++d) {
        if (in[d] == target[d]) continue;
        if (in[d] != 1)
            throw ShapeError("broadcast_to: " + shape_str(in) + " -> " + shape_str(target));
        bcast_axes.push_back(static_cast<int64_t>(d));
    }
    int64_t out_n = shape_numel(target);
    std::vector<double> out(static_cast<size_t>(out_n));
    size_t rank = target.size();
    std::vector<int64_t> idx(rank, 0);
    auto px = x.data();
    for (size_t flat = 0; flat < out.size(); ++flat) {
        int64_t in_flat = 0;
        for (size_t d = 0; d < rank; ++d) {
            int64_t id = in[d] == 1 ? 0 : idx[d];
            in_flat = in_flat * in[d] + id;
        }
        out[flat] = px[static_cast<size_t>(in_flat)];
        for (size_t d = rank; d-- > 0;) {
            if (++idx[d] < target[d]) break;
            idx[d] = 0;
        }
    }
    return make_node(std::move(target), std::move(out), {x},
                     [bcast_axes](const Tensor& g) -> std::vector<Tensor> {
                         return {sum_axes(g, bcast_axes)};
                     },
                     "broadcast_to");
}

Tensor expand_scalar(const Tensor& scalar, Shape target) {
    if (scalar.numel() != 1) throw ShapeError("expand_scalar: source is not a scalar");
    double v = scalar.data()[0];
    int64_t n = shape_numel(target);
    std::vector<double> out(static_cast<size_t>(n), v);
    return make_node(std::move(target), std::move(out), {scalar},
                     [](const Tensor& g) -> std::vector<Tensor> { return {sum_all(g)}; },
                     "expand_scalar");
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel())
        throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
    Shape in_shape = x.shape();
    std::vector<double> out(x.data().begin(), x.data().end());
    return make_node(std::move(shape), std::move(out), {x},
                     [in_shape](const Tensor& g) -> std::vector<Tensor> {
                         return {reshape(g, in_shape)};
                     },
                     "reshape");
}

Tensor transpose2d(const Tensor& x) {
    if (x.dim() != 2) throw ShapeError("transpose2d: need rank 2, got " + shape_str(x.shape()));
    int64_t r = x.extent(0), c = x.extent(1);
    auto px = x.data();
    std::vector<double> out(static_cast<size_t>(r * c));
    for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j)
            out[static_cast<size_t>(j * r + i)] = px[static_cast<size_t>(i * c + j)];
    return make_node({c, r}, std::move(out), {x},
                     [](const Tensor& g) -> std::vector<Tensor> { return {transpose2d(g)}; },
                     "transpose2d");
}

Tensor concat(const Tensor& a, const Tensor& b, int64_t axis) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != sb.size())
        throw ShapeError("concat: rank mismatch " + shape_str(sa) + " vs " + shape_str(sb));
    if (axis < 0 || axis >= static_cast<int64_t>(sa.size()))
        throw ShapeError("concat: bad axis " + std::to_string(axis));
    for (size_t d = 0; d < sa.size(); ++d)
        if (static_cast<int64_t>(d) != axis && sa[d] != sb[d])
            throw ShapeError("concat: shapes " + shape_str(sa) + " vs " + shape_str(sb) +
                             " differ off axis " + std::to_string(axis));
    Shape out_shape = sa;
    out_shape[static_cast<size_t>(axis)] += sb[static_cast<size_t>(axis)];

    int64_t outer = 1, inner = 1;
    for (int64_t d = 0; d < axis; ++d) outer *= sa[static_cast<size_t>(d)];
    for (size_t d = static_cast<size_t>(axis) + 1; d < sa.size(); ++d) inner *= sa[d];
    int64_t ea = sa[static_cast<size_t>(axis)], eb = sb[static_cast<size_t>(axis)];

    std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
    auto pa = a.data();
    auto pb = b.data();
    for (int64_t o = 0; o < outer; ++o) {
        double* dst = out.data() + o * (ea + eb) * inner;
        std::copy_n(pa.data() + o * ea * inner, ea * inner, dst);
        std::copy_n(pb.data() + o * eb * inner, eb * inner, dst + ea * inner);
    }
    return make_node(std::move(out_shape), std::move(out), {a, b},
                     [axis, ea, eb](const Tensor& g) -> std::vector<Tensor> {
                         return {narrow(g, axis, 0, ea), narrow(g, axis, ea, eb)};
                     },
                     "concat");
}

Tensor narrow(const Tensor& x, int64_t axis, int64_t start, int64_t length) {
    const Shape& in = x.shape();
    if (axis < 0 || axis >= static_cast<int64_t>(in.size()))
        throw ShapeError("narrow: bad axis " + std::to_string(axis));
    int64_t e = in[static_cast<size_t>(axis)];
    if (start < 0 || length < 1 || start + length > e)
        throw ShapeError("narrow: range [" + std::to_string(start) + "," +
                         std::to_string(start + length) + ") of extent " + std::to_string(e));
    Shape out_shape = in;
    out_shape[static_cast<size_t>(axis)] = length;

    int64_t outer = 1, inner = 1;
    for (int64_t d = 0; d < axis; ++d) outer *= in[static_cast<size_t>(d)];
    for (size_t d = static_cast<size_t>(axis) + 1; d < in.size(); ++d) inner *= in[d];

    std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)));
    auto px = x.data();
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(px.data() + (o * e + start) * inner, length * inner,
                    out.data() + o * length * inner);
    int64_t after = e - start - length;
    return make_node(std::move(out_shape), std::move(out), {x},
                     [axis, start, after](const Tensor& g) -> std::vector<Tensor> {
                         return {pad_axis(g, axis, start, after)};
                     },
                     "narrow");
}

Tensor pad_axis(const Tensor& x, int64_t axis, int64_t before, int64_t after) {
    const Shape& in = x.shape();
    if (axis < 0 || axis >= static_cast<int64_t>(in.size()))
        throw ShapeError("pad_axis: bad axis " + std::to_string(axis));
    if (before < 0 || after < 0) throw ShapeError("pad_axis: negative padding");
    Shape out_shape = in;
    int64_t e = in[static_cast<size_t>(axis)];
    out_shape[static_cast<size_t>(axis)] = e + before + after;

    int64_t outer = 1, inner = 1;
    for (int64_t d = 0; d < axis; ++d) outer *= in[static_cast<size_t>(d)];
    for (size_t d = static_cast<size_t>(axis) + 1; d < in.size(); ++d) inner *= in[d];

    std::vector<double> out(static_cast<size_t>(shape_numel(out_shape)), 0.0);
    auto px = x.data();
    for (int64_t o = 0; o < outer; ++o)
        std::copy_n(px.data() + o * e * inner, e * inner,
                    out.data() + (o * (e + before + after) + before) * inner);
    return make_node(std::move(out_shape), std::move(out), {x},
                     [axis, before, e](const Tensor& g) -> std::vector<Tensor> {
                         return {narrow(g, axis, before, e)};
                     },
                     "pad_axis");
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.dim() != 2 || b.dim() != 2)
        throw ShapeError("matmul: need rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    int64_t m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
    if (k != k2)
        throw ShapeError("matmul: inner extents differ, " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    std::vector<double> out(static_cast<size_t>(m * n), 0.0);
    const double* pa = a.data().data();
    const double* pb = b.data().data();
    for (int64_t i = 0; i < m; ++i) {
        const double* arow = pa + i * k;
        double* orow = out.data() + i * n;
        for (int64_t kk = 0; kk < k; ++kk) {
            double av = arow[kk];
            if (av == 0.0) continue;
            const double* brow = pb + kk * n;
            for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
        }
    }
    return make_node({m, n}, std::move(out), {a, b},
                     [a, b](const Tensor& g) -> std::vector<Tensor> {
                         return {matmul(g, transpose2d(b)), matmul(transpose2d(a), g)};
                     },
                     "matmul");
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    if (weight.dim() != 2) throw ShapeError("linear: weight must be rank 2");
    int64_t in_f = weight.extent(1);
    int64_t out_f = weight.extent(0);
    const Shape& xs = x.shape();
    if (xs.empty() || xs.back() != in_f)
        throw ShapeError("linear: input " + shape_str(xs) + " does not end in " +
                         std::to_string(in_f));
    if (bias.defined() && (bias.dim() != 1 || bias.extent(0) != out_f))
        throw ShapeError("linear: bias shape " + shape_str(bias.shape()));

    int64_t rows = x.numel() / in_f;
    Tensor flat = reshape(x, {rows, in_f});
    Tensor y = matmul(flat, transpose2d(weight));
    if (bias.defined()) {
        Tensor brow = reshape(bias, {1, out_f});
        y = add(y, broadcast_to(brow, {rows, out_f}));
    }
    Shape out_shape = xs;
    out_shape.back() = out_f;
    return reshape(y, out_shape);
}

Tensor dot(const Tensor& a, const Tensor& b) {
    if (a.numel() != b.numel()) throw ShapeError("dot: size mismatch");
    Tensor fa = reshape(a, {a.numel()});
    Tensor fb = reshape(b, {b.numel()});
    return sum_all(mul(fa, fb));
}

Tensor l2_norm_per_item(const Tensor& x, double norm_eps) {
    if (x.dim() < 2) throw ShapeError("l2_norm_per_item: need at least rank 2");
    std::vector<int64_t> axes;
    for (int64_t d = 1; d < x.dim(); ++d) axes.push_back(d);
    Tensor sq = mul(x, x);
    Tensor s = sum_axes(sq, axes);
    Tensor n = sqrt(add_scalar(s, norm_eps));
    return reshape(n, {x.extent(0)});
}

} // namespace ecgaug::ops
