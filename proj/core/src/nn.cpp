#include "ecgaug/nn.hpp"

namespace ecgaug::nn {

std::vector<ParamRef> Module::state(const std::string& prefix) {
    std::vector<ParamRef> out;
    collect_state(prefix, out);
    return out;
}

std::vector<ParamRef> Module::parameters(const std::string& prefix) {
    std::vector<ParamRef> out;
    collect_state(prefix, out);
    std::erase_if(out, [](const ParamRef& p) { return !p.trainable; });
    return out;
}

void Module::zero_grad() {
    for (ParamRef& p : state()) p.tensor.clear_grad();
}

Conv1d::Conv1d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride_,
               int64_t padding_, bool with_bias)
    : stride(stride_), padding(padding_) {
    weight = Tensor::zeros({out_ch, in_ch, kernel});
    weight.set_requires_grad(true);
    if (with_bias) {
        bias = Tensor::zeros({out_ch});
        bias.set_requires_grad(true);
    }
}

Tensor Conv1d::forward(const Tensor& x) const {
    return ops::conv1d(x, weight, bias, stride, padding);
}

void Conv1d::collect_state(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", weight, true});
    if (bias.defined()) out.push_back({prefix + "bias", bias, true});
}

ConvTranspose1d::ConvTranspose1d(int64_t in_ch, int64_t out_ch, int64_t kernel,
                                 int64_t stride_, int64_t padding_, bool with_bias)
    : stride(stride_), padding(padding_) {
    weight = Tensor::zeros({in_ch, out_ch, kernel});
    weight.set_requires_grad(true);
    if (with_bias) {
        bias = Tensor::zeros({out_ch});
        bias.set_requires_grad(true);
    }
}

Tensor ConvTranspose1d::forward(const Tensor& x) const {
    return ops::conv_transpose1d(x, weight, bias, stride, padding);
}

void ConvTranspose1d::collect_state(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", weight, true});
    if (bias.defined()) out.push_back({prefix + "bias", bias, true});
}

Linear::Linear(int64_t in_features, int64_t out_features, bool with_bias) {
    weight = Tensor::zeros({out_features, in_features});
    weight.set_requires_grad(true);
    if (with_bias) {
        bias = Tensor::zeros({out_features});
        bias.set_requires_grad(true);
    }
}

Tensor Linear::forward(const Tensor& x) const { return ops::linear(x, weight, bias); }

void Linear::collect_state(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", weight, true});
    if (bias.defined()) out.push_back({prefix + "bias", bias, true});
}

Embedding::Embedding(int64_t rows, int64_t dim) {
    table = Tensor::zeros({rows, dim});
    table.set_requires_grad(true);
}

Tensor Embedding::forward(const std::vector<int64_t>& labels) const {
    return ops::embedding(table, labels);
}

void Embedding::collect_state(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", table, true});
}

BatchNorm1d::BatchNorm1d(int64_t channels, double eps_, double momentum_)
    : eps(eps_), momentum(momentum_) {
    gamma = Tensor::full({channels}, 1.0);
    gamma.set_requires_grad(true);
    beta = Tensor::zeros({channels});
    beta.set_requires_grad(true);
    running_mean = Tensor::zeros({channels});
    running_var = Tensor::full({channels}, 1.0);
}

Tensor BatchNorm1d::forward(const Tensor& x, bool train) {
    return ops::batch_norm1d(x, gamma, beta, running_mean, running_var, train, eps, momentum);
}

void BatchNorm1d::collect_state(const std::string& prefix, std::vector<ParamRef>& out) {
    out.push_back({prefix + "weight", gamma, true});
    out.push_back({prefix + "bias", beta, true});
    out.push_back({prefix + "running_mean", running_mean, false});
    out.push_back({prefix + "running_var", running_var, false});
}

Tensor FitLength::forward(const Tensor& x) const {
    if (x.dim() != 3) throw ShapeError("FitLength: need [B,C,L]");
    int64_t L = x.extent(2);
    if (L == target_) return x;
    if (L > target_) return ops::narrow(x, 2, 0, target_);
    return ops::pad_axis(x, 2, 0, target_ - L);
}

} // namespace ecgaug::nn
