#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ecgaug/nn.hpp"
#include "ecgaug/tensor.hpp"

namespace ecgaug {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter Adam accumulators. step counts the updates applied to this
// parameter and drives bias correction.
struct AdamState {
    Tensor m;
    Tensor v;
    int64_t step = 0;
};

// Bias-corrected Adam update of one parameter in place. Throws TrainError
// naming the parameter on non-finite gradients.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, const AdamConfig& cfg,
               const std::string& param_name = "");

class Adam {
public:
    Adam(std::vector<nn::ParamRef> params, AdamConfig cfg);

    // Applies one update from the .grad of every tracked parameter; parameters
    // with no gradient are skipped.
    void step();
    void zero_grad();
    const AdamConfig& config() const { return cfg_; }

private:
    std::vector<nn::ParamRef> params_;
    std::unordered_map<std::string, AdamState> states_;
    AdamConfig cfg_;
};

} // namespace ecgaug
