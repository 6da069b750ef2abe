#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ecgaug/beats.hpp"
#include "ecgaug/nn.hpp"
#include "ecgaug/tensor.hpp"

namespace ecgaug::clf {

// Pre-activation residual block, 1D: two kernel-3 convolutions on the branch,
// the input carried straight to the outlet. Identity skip when the shape is
// unchanged, else a 1x1 strided projection. With the branch parameters
// zeroed an identity-skip block is the identity map exactly.
class ResBlock1d : public nn::Module {
public:
    ResBlock1d(int64_t in_ch, int64_t out_ch, int64_t stride, int64_t kernel = 3);
    Tensor forward(const Tensor& x, bool train);
    void collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) override;

    bool has_projection() const { return proj_ != nullptr; }
    nn::Conv1d& conv1() { return *conv1_; }
    nn::Conv1d& conv2() { return *conv2_; }

private:
    std::unique_ptr<nn::BatchNorm1d> bn1_, bn2_;
    std::unique_ptr<nn::Conv1d> conv1_, conv2_;
    std::unique_ptr<nn::Conv1d> proj_;
};

// Stage widths/depths for the 1D residual classifier. The desk plan keeps
// acceptance runs in minutes; full34 is the 34-learnable-layer configuration.
struct ResNetSpec {
    std::vector<int64_t> widths = {16, 32, 64};
    std::vector<int64_t> blocks = {1, 1, 1};
    int64_t kernel = 3;
    int64_t n_classes = 7;

    static ResNetSpec desk(int64_t n_classes = 7);
    static ResNetSpec full34(int64_t n_classes = 7);
};

class ResNet : public nn::Module {
public:
    ResNet(ResNetSpec spec, uint64_t init_seed, std::string name = "resnet");

    // [B, 1, kBeatLength] -> class scores [B, n_classes]
    Tensor forward(const Tensor& x, bool train);
    void collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) override;
    const ResNetSpec& spec() const { return spec_; }

private:
    ResNetSpec spec_;
    std::string name_;
    std::unique_ptr<nn::Conv1d> stem_;
    std::vector<std::unique_ptr<ResBlock1d>> blocks_;
    std::unique_ptr<nn::BatchNorm1d> head_bn_;
    std::unique_ptr<nn::Linear> head_;
};

struct ClfTrainConfig {
    int64_t epochs = 10;
    int64_t batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    uint64_t seed = 0;
    double stop_at_accuracy = 0.0; // >0: stop once train accuracy reaches it
    std::filesystem::path out_dir;
};

struct ClfEpochStats {
    int64_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

struct ClfTrainResult {
    std::vector<ClfEpochStats> history;
};

// Cross-entropy + Adam over shuffled batches; per-epoch train accuracy in the
// history; checkpoint + history CSV persisted when out_dir is set. Requires
// at least two distinct classes in the data.
ClfTrainResult train_classifier(ResNet& net, std::span<const Beat> beats,
                                const std::vector<char>& classes, const ClfTrainConfig& cfg);

// Probability rows (softmax over class scores), eval mode.
std::vector<std::vector<double>> predict(ResNet& net, std::span<const Beat> beats);

std::vector<char> predicted_labels(const std::vector<std::vector<double>>& probs,
                                   const std::vector<char>& classes);

} // namespace ecgaug::clf
