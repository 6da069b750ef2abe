#include "ecgaug/adam.hpp"

#include <cmath>

namespace ecgaug {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg,
               const std::string& param_name) {
    if (!grad.defined()) return;
    if (grad.shape() != param.shape())
        throw ShapeError("adam_step: gradient shape " + shape_str(grad.shape()) +
                         " vs parameter " + shape_str(param.shape()));
    if (!state.m.defined()) {
        state.m = Tensor::zeros(param.shape());
        state.v = Tensor::zeros(param.shape());
    }
    auto g = grad.data();
    for (double gv : g)
        if (!std::isfinite(gv))
            throw TrainError("adam_step: non-finite gradient in parameter '" + param_name + "'");

    state.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto p = param.raw_data();
    auto m = state.m.raw_data();
    auto v = state.v.raw_data();
    for (size_t i = 0; i < p.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

Adam::Adam(std::vector<nn::ParamRef> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {}

void Adam::step() {
    for (nn::ParamRef& p : params_) {
        Tensor g = p.tensor.grad();
        if (!g.defined()) continue;
        adam_step(p.tensor, g, states_[p.name], cfg_, p.name);
    }
}

void Adam::zero_grad() {
    for (nn::ParamRef& p : params_) p.tensor.clear_grad();
}

} // namespace ecgaug
