#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ecgaug/ops.hpp"
#include "ecgaug/tensor.hpp"

namespace ecgaug::nn {

struct ParamRef {
    std::string name;
    Tensor tensor;
    bool trainable = true; // false for buffers (running statistics)
};

class Module {
public:
    virtual ~Module() = default;
    virtual void collect_state(const std::string& prefix, std::vector<ParamRef>& out) = 0;

    std::vector<ParamRef> state(const std::string& prefix = "");
    std::vector<ParamRef> parameters(const std::string& prefix = "");
    void zero_grad();
};

class Conv1d : public Module {
public:
    Conv1d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride, int64_t padding,
           bool with_bias = true);
    Tensor forward(const Tensor& x) const;
    void collect_state(const std::string& prefix, std::vector<ParamRef>& out) override;

    Tensor weight; // [out, in, k]
    Tensor bias;   // [out] or undefined
    int64_t stride = 1;
    int64_t padding = 0;
};

class ConvTranspose1d : public Module {
public:
    ConvTranspose1d(int64_t in_ch, int64_t out_ch, int64_t kernel, int64_t stride,
                    int64_t padding, bool with_bias = true);
    Tensor forward(const Tensor& x) const;
    void collect_state(const std::string& prefix, std::vector<ParamRef>& out) override;

    Tensor weight; // [in, out, k]
    Tensor bias;
    int64_t stride = 1;
    int64_t padding = 0;
};

class Linear : public Module {
public:
    Linear(int64_t in_features, int64_t out_features, bool with_bias = true);
    Tensor forward(const Tensor& x) const;
    void collect_state(const std::string& prefix, std::vector<ParamRef>& out) override;

    Tensor weight; // [out, in]
    Tensor bias;
};

class Embedding : public Module {
public:
    Embedding(int64_t rows, int64_t dim);
    Tensor forward(const std::vector<int64_t>& labels) const;
    void collect_state(const std::string& prefix, std::vector<ParamRef>& out) override;

    Tensor table; // [rows, dim]
};

class BatchNorm1d : public Module {
public:
    explicit BatchNorm1d(int64_t channels, double eps = 1e-5, double momentum = 0.1);
    Tensor forward(const Tensor& x, bool train);
    void collect_state(const std::string& prefix, std::vector<ParamRef>& out) override;

    Tensor gamma, beta;
    Tensor running_mean, running_var;
    double eps;
    double momentum;
};

// Right-crops or zero-pads the time axis to a declared length. Used where the
// conditional generator's declared per-block lengths disagree with the
// k=4/s=2/p=1 transposed-conv arithmetic; the declared shape wins.
class FitLength {
public:
    explicit FitLength(int64_t target) : target_(target) {}
    Tensor forward(const Tensor& x) const;
    int64_t target() const { return target_; }

private:
    int64_t target_;
};

} // namespace ecgaug::nn
