#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecgaug/beats.hpp"
#include "ecgaug/nn.hpp"
#include "ecgaug/rng.hpp"
#include "ecgaug/tensor.hpp"

namespace ecgaug::gan {

// Generator trunk block: ConvTranspose1d(k=4, s=2, p=1) + BatchNorm1d + ReLU.
// declared_len > 0 forces the declared per-block output length via a
// crop/zero-pad adapter where the transpose-conv arithmetic disagrees with
// the printed table; declared_len == 0 keeps the natural length.
struct GenBlock {
    int64_t out_channels = 0;
    int64_t declared_len = 0;
};

struct GeneratorSpec {
    int64_t latent_dim = 100;
    bool conditional = false;
    int64_t n_classes = 7;
    std::vector<GenBlock> blocks;
    // true: first block uses stride 1 / padding 0 so a length-1 latent opens
    // to length 4 (the declared FC(64,256) input size requires it)
    bool first_block_stride1 = false;
    int64_t output_length = 256;
    bool second_fc = false; // conditional head: FC -> reshape -> FC

    static GeneratorSpec unconditional_paper();
    static GeneratorSpec conditional_paper(int64_t n_classes = 7);
    // narrow-channel variants for laptop-scale runs; same layer structure
    static GeneratorSpec unconditional_desk();
    static GeneratorSpec conditional_desk(int64_t n_classes);
};

// Critic: conv stack (k=4, s=2, p=1; InstanceNorm after every conv except the
// first) + final Conv1d(k=4, s=2, p=0) to one channel + FC head.
struct CriticSpec {
    bool conditional = false;
    int64_t n_classes = 7;
    int64_t input_length = 256;
    std::vector<int64_t> channels = {64, 128, 256, 512};
    bool double_fc = false; // conditional head: FC(7,7) then FC(7,1)
    double leaky_slope = 0.2;

    static CriticSpec unconditional_paper();
    static CriticSpec conditional_paper(int64_t n_classes = 7);
    static CriticSpec unconditional_desk();
    static CriticSpec conditional_desk(int64_t n_classes);
};

// Row label + output shape, captured per table row for conformance checks.
using ShapeTrace = std::vector<std::pair<std::string, Shape>>;

class Generator : public nn::Module {
public:
    Generator(GeneratorSpec spec, uint64_t init_seed, std::string name = "generator");

    // z: [B, latent_dim, 1]; labels required iff conditional.
    Tensor forward(const Tensor& z, const std::vector<int64_t>* labels, bool train,
                   ShapeTrace* trace = nullptr);
    void collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) override;

    const GeneratorSpec& spec() const { return spec_; }
    const std::string& name() const { return name_; }

    // label attached to beats sampled from a per-class unconditional model
    char trained_label = '?';

private:
    struct Block {
        std::unique_ptr<nn::ConvTranspose1d> tconv;
        std::unique_ptr<nn::FitLength> fit;
        std::unique_ptr<nn::BatchNorm1d> bn;
    };
    GeneratorSpec spec_;
    std::string name_;
    std::unique_ptr<nn::Embedding> embed_;
    std::vector<Block> blocks_;
    std::unique_ptr<nn::ConvTranspose1d> tail_;
    std::unique_ptr<nn::Linear> fc1_;
    std::unique_ptr<nn::Linear> fc2_;
};

class Critic : public nn::Module {
public:
    Critic(CriticSpec spec, uint64_t init_seed, std::string name = "critic");

    // x: [B, 1, L]; labels required iff conditional. Output [B, 1, 1].
    Tensor forward(const Tensor& x, const std::vector<int64_t>* labels, bool train,
                   ShapeTrace* trace = nullptr);
    void collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) override;

    const CriticSpec& spec() const { return spec_; }

private:
    CriticSpec spec_;
    std::string name_;
    std::unique_ptr<nn::Embedding> embed_;
    std::vector<std::unique_ptr<nn::Conv1d>> convs_;
    std::unique_ptr<nn::Conv1d> conv_out_;
    std::unique_ptr<nn::Linear> fc1_;
    std::unique_ptr<nn::Linear> fc2_;
    int64_t fc_len_ = 0;
};

using CriticFn = std::function<Tensor(const Tensor& x, const std::vector<int64_t>* labels)>;
using GenFn = std::function<Tensor(const Tensor& z, const std::vector<int64_t>* labels)>;

// lambda * mean_b (||d critic / d x_hat||_2 - 1)^2 at x_hat = eps*real +
// (1-eps)*fake with per-item eps. Requires an active higher-order tape; the
// returned scalar participates in the parameter gradient via double backprop.
Tensor gradient_penalty(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                        const std::vector<int64_t>* labels, double lambda, Rng& rng);
// deterministic-epsilon variant for tests
Tensor gradient_penalty_with_eps(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                                 const std::vector<int64_t>* labels, double lambda,
                                 std::span<const double> eps);

struct CriticLossParts {
    Tensor loss;                  // mean D(fake) - mean D(real) + gp
    double wasserstein = 0.0;     // mean D(real) - mean D(fake)
    double gp = 0.0;
};

CriticLossParts critic_loss(const CriticFn& critic, const GenFn& gen, const Tensor& real,
                            const Tensor& z, const std::vector<int64_t>* labels, double lambda,
                            Rng& rng);
Tensor generator_loss(const CriticFn& critic, const GenFn& gen, const Tensor& z,
                      const std::vector<int64_t>* labels);

struct GanTrainConfig {
    int64_t batch_size = 16; // the tables' leading extent
    double lr = 1e-4;
    double beta1 = 0.5;
    double beta2 = 0.9;
    double lambda_gp = 10.0;
    int64_t n_critic = 5;
    int64_t epochs = 40;
    uint64_t seed = 0;
    std::filesystem::path out_dir; // empty: nothing persisted
};

struct LossHistoryRow {
    int64_t step = 0;
    double critic_loss = 0.0;
    double gen_loss = 0.0;
    double wasserstein = 0.0;
    double gp = 0.0;
};

struct GanTrainResult {
    std::vector<LossHistoryRow> history;
};

// Alternating WGAN-GP schedule: one generator step per n_critic critic steps.
// Conditional models see the full labelled dataset; unconditional models see
// one class. Deterministic per cfg.seed; per-epoch checkpoint + loss CSV when
// out_dir is set.
GanTrainResult train_gan(Generator& gen, Critic& critic, std::span<const Beat> beats,
                         const std::vector<char>& class_order, const GanTrainConfig& cfg);

// Samples n beats (provenance "generated"). Conditional models require cls;
// unconditional models reject it and label beats with gen.trained_label.
std::vector<Beat> generate(Generator& gen, int64_t n, std::optional<char> cls,
                           const std::vector<char>& class_order, uint64_t seed);

void write_loss_history_csv(const std::filesystem::path& path,
                            std::span<const LossHistoryRow> rows);

} // namespace ecgaug::gan
