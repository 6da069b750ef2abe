#include "ecgaug/gan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "ecgaug/checkpoint.hpp"
#include "ecgaug/adam.hpp"
#include "ecgaug/error.hpp"
#include "ecgaug/ops.hpp"

namespace ecgaug::gan {

namespace op = ecgaug::ops;

// ---------------------------------------------------------------------------
// specs

GeneratorSpec GeneratorSpec::unconditional_paper() {
    GeneratorSpec s;
    s.blocks = {{1024, 0}, {512, 0}, {256, 0}, {128, 0}};
    s.first_block_stride1 = true; // 1 -> 4 -> 8 -> 16 -> 32, tail conv -> 64
    return s;
}

GeneratorSpec GeneratorSpec::conditional_paper(int64_t n_classes) {
    GeneratorSpec s;
    s.conditional = true;
    s.n_classes = n_classes;
    // declared per-block output lengths follow the architecture table
    s.blocks = {{1024, 1}, {512, 8}, {256, 6}, {128, 32}};
    s.second_fc = true;
    return s;
}

GeneratorSpec GeneratorSpec::unconditional_desk() {
    GeneratorSpec s;
    s.blocks = {{128, 0}, {64, 0}, {32, 0}, {16, 0}};
    s.first_block_stride1 = true;
    return s;
}

GeneratorSpec GeneratorSpec::conditional_desk(int64_t n_classes) {
    GeneratorSpec s;
    s.conditional = true;
    s.n_classes = n_classes;
    s.blocks = {{128, 1}, {64, 8}, {32, 6}, {16, 32}};
    s.second_fc = true;
    return s;
}

CriticSpec CriticSpec::unconditional_paper() { return {}; }

CriticSpec CriticSpec::conditional_paper(int64_t n_classes) {
    CriticSpec s;
    s.conditional = true;
    s.n_classes = n_classes;
    s.double_fc = true;
    return s;
}

CriticSpec CriticSpec::unconditional_desk() {
    CriticSpec s;
    s.channels = {8, 16, 32, 64};
    return s;
}

CriticSpec CriticSpec::conditional_desk(int64_t n_classes) {
    CriticSpec s;
    s.conditional = true;
    s.n_classes = n_classes;
    s.channels = {8, 16, 32, 64};
    s.double_fc = true;
    return s;
}

// ---------------------------------------------------------------------------
// generator

namespace {

void gan_init(Tensor& t, uint64_t seed, const std::string& name, double mean = 0.0,
              double std = 0.02) {
    init_normal(t, mean, std, seed, name);
}

void validate_generator_spec(const GeneratorSpec& s) {
    if (s.latent_dim < 1) throw ConfigError("generator spec: latent_dim must be positive");
    if (s.blocks.empty()) throw ConfigError("generator spec: no trunk blocks");
    for (size_t i = 0; i < s.blocks.size(); ++i) {
        if (s.blocks[i].out_channels < 1)
            throw ConfigError("generator spec: block " + std::to_string(i + 1) +
                              " has non-positive channel count");
        if (s.blocks[i].declared_len < 0)
            throw ConfigError("generator spec: block " + std::to_string(i + 1) +
                              " has negative declared length");
    }
    if (s.conditional && s.n_classes < 2)
        throw ConfigError("generator spec: conditional model needs n_classes >= 2");
    if (s.output_length < 1) throw ConfigError("generator spec: bad output length");
}

} // namespace

Generator::Generator(GeneratorSpec spec, uint64_t init_seed, std::string name)
    : spec_(std::move(spec)), name_(std::move(name)) {
    validate_generator_spec(spec_);

    int64_t in_ch = spec_.latent_dim;
    if (spec_.conditional) {
        embed_ = std::make_unique<nn::Embedding>(spec_.n_classes, spec_.latent_dim);
        gan_init(embed_->table, init_seed, name_ + ".embed.weight");
        in_ch = 2 * spec_.latent_dim; // latent and embedded label concatenated
    }

    int64_t len = 1;
    for (size_t i = 0; i < spec_.blocks.size(); ++i) {
        const GenBlock& bs = spec_.blocks[i];
        Block b;
        bool wide = spec_.first_block_stride1 && i == 0;
        b.tconv = std::make_unique<nn::ConvTranspose1d>(in_ch, bs.out_channels, 4,
                                                        wide ? 1 : 2, wide ? 0 : 1);
        len = op::conv_transpose1d_out_len(len, 4, wide ? 1 : 2, wide ? 0 : 1);
        if (bs.declared_len > 0 && bs.declared_len != len) {
            b.fit = std::make_unique<nn::FitLength>(bs.declared_len);
            len = bs.declared_len;
        }
        b.bn = std::make_unique<nn::BatchNorm1d>(bs.out_channels);
        std::string p = name_ + ".block" + std::to_string(i + 1);
        gan_init(b.tconv->weight, init_seed, p + ".tconv.weight");
        gan_init(b.bn->gamma, init_seed, p + ".bn.weight", 1.0, 0.02);
        blocks_.push_back(std::move(b));
        in_ch = bs.out_channels;
    }

    tail_ = std::make_unique<nn::ConvTranspose1d>(in_ch, 1, 4, 2, 1);
    gan_init(tail_->weight, init_seed, name_ + ".tail.weight");
    int64_t tail_len = op::conv_transpose1d_out_len(len, 4, 2, 1);

    fc1_ = std::make_unique<nn::Linear>(tail_len, spec_.output_length);
    gan_init(fc1_->weight, init_seed, name_ + ".fc1.weight");
    if (spec_.second_fc) {
        fc2_ = std::make_unique<nn::Linear>(spec_.output_length, spec_.output_length);
        gan_init(fc2_->weight, init_seed, name_ + ".fc2.weight");
    }
}

Tensor Generator::forward(const Tensor& z, const std::vector<int64_t>* labels, bool train,
                          ShapeTrace* trace) {
    if (z.dim() != 3 || z.extent(1) != spec_.latent_dim || z.extent(2) != 1)
        throw ShapeError("generator: latent must be [B," + std::to_string(spec_.latent_dim) +
                         ",1], got " + shape_str(z.shape()));
    int64_t B = z.extent(0);
    auto tr = [&](const char* row, const Tensor& t) {
        if (trace) trace->emplace_back(row, t.shape());
    };

    Tensor x = z;
    if (spec_.conditional) {
        if (!labels) throw Error("generator: conditional model needs labels");
        if (static_cast<int64_t>(labels->size()) != B)
            throw ShapeError("generator: " + std::to_string(labels->size()) +
                             " labels for batch " + std::to_string(B));
        Tensor e = embed_->forward(*labels);
        tr("embedding", e);
        Tensor e3 = op::reshape(e, {B, spec_.latent_dim, 1});
        tr("reshape", e3);
        x = op::concat(z, e3, 1);
        tr("concat", x);
    } else {
        if (labels) throw Error("generator: labels given to an unconditional model");
        tr("input", x);
    }

    for (size_t i = 0; i < blocks_.size(); ++i) {
        Block& b = blocks_[i];
        Tensor h = b.tconv->forward(x);
        if (b.fit) h = b.fit->forward(h);
        h = b.bn->forward(h, train);
        x = op::relu(h);
        tr(("block" + std::to_string(i + 1)).c_str(), x);
    }

    x = tail_->forward(x);
    tr("conv_transpose", x);
    Tensor flat = op::reshape(x, {B, x.extent(2)});
    Tensor h1 = fc1_->forward(flat);
    tr("fc1", h1);
    Tensor out = op::reshape(h1, {B, 1, spec_.output_length});
    if (spec_.second_fc) {
        tr("reshape2", out);
        out = fc2_->forward(out);
        tr("fc2", out);
    }
    out = op::tanh(out);
    tr("output", out);
    return out;
}

void Generator::collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    if (embed_) embed_->collect_state(prefix + "embed.", out);
    for (size_t i = 0; i < blocks_.size(); ++i) {
        std::string p = prefix + "block" + std::to_string(i + 1) + ".";
        blocks_[i].tconv->collect_state(p + "tconv.", out);
        blocks_[i].bn->collect_state(p + "bn.", out);
    }
    tail_->collect_state(prefix + "tail.", out);
    fc1_->collect_state(prefix + "fc1.", out);
    if (fc2_) fc2_->collect_state(prefix + "fc2.", out);
}

// ---------------------------------------------------------------------------
// critic

Critic::Critic(CriticSpec spec, uint64_t init_seed, std::string name)
    : spec_(std::move(spec)), name_(std::move(name)) {
    if (spec_.channels.empty()) throw ConfigError("critic spec: no conv channels");
    if (spec_.conditional && spec_.n_classes < 2)
        throw ConfigError("critic spec: conditional model needs n_classes >= 2");

    int64_t in_ch = 1;
    if (spec_.conditional) {
        embed_ = std::make_unique<nn::Embedding>(spec_.n_classes, spec_.input_length);
        gan_init(embed_->table, init_seed, name_ + ".embed.weight");
        in_ch = 2; // label embedded as a second channel
    }

    int64_t len = spec_.input_length;
    for (size_t i = 0; i < spec_.channels.size(); ++i) {
        convs_.push_back(std::make_unique<nn::Conv1d>(in_ch, spec_.channels[i], 4, 2, 1));
        gan_init(convs_.back()->weight, init_seed,
                 name_ + ".conv" + std::to_string(i + 1) + ".weight");
        len = op::conv1d_out_len(len, 4, 2, 1);
        in_ch = spec_.channels[i];
    }

    conv_out_ = std::make_unique<nn::Conv1d>(in_ch, 1, 4, 2, 0);
    gan_init(conv_out_->weight, init_seed, name_ + ".conv_out.weight");
    fc_len_ = op::conv1d_out_len(len, 4, 2, 0);
    if (fc_len_ < 1) throw ConfigError("critic spec: input too short for the conv stack");

    if (spec_.double_fc) {
        fc1_ = std::make_unique<nn::Linear>(fc_len_, fc_len_);
        gan_init(fc1_->weight, init_seed, name_ + ".fc1.weight");
    }
    fc2_ = std::make_unique<nn::Linear>(fc_len_, 1);
    gan_init(fc2_->weight, init_seed, name_ + ".fc2.weight");
}

Tensor Critic::forward(const Tensor& x, const std::vector<int64_t>* labels, bool /*train*/,
                       ShapeTrace* trace) {
    if (x.dim() != 3 || x.extent(1) != 1 || x.extent(2) != spec_.input_length)
        throw ShapeError("critic: input must be [B,1," + std::to_string(spec_.input_length) +
                         "], got " + shape_str(x.shape()));
    int64_t B = x.extent(0);
    auto tr = [&](const std::string& row, const Tensor& t) {
        if (trace) trace->emplace_back(row, t.shape());
    };

    Tensor h = x;
    if (spec_.conditional) {
        if (!labels) throw Error("critic: conditional model needs labels");
        if (static_cast<int64_t>(labels->size()) != B)
            throw ShapeError("critic: label count mismatch");
        Tensor e = embed_->forward(*labels);
        tr("embedding", e);
        Tensor e3 = op::reshape(e, {B, 1, spec_.input_length});
        tr("reshape", e3);
        h = op::concat(x, e3, 1);
        tr("concat", h);
    } else {
        if (labels) throw Error("critic: labels given to an unconditional model");
        tr("input", h);
    }

    for (size_t i = 0; i < convs_.size(); ++i) {
        h = convs_[i]->forward(h);
        if (i > 0) h = op::instance_norm1d(h); // first conv layer has no norm
        h = op::leaky_relu(h, spec_.leaky_slope);
        tr(i == 0 ? "conv1_lrelu" : "block" + std::to_string(i), h);
    }

    h = conv_out_->forward(h);
    tr("conv_out", h);
    if (fc1_) {
        h = fc1_->forward(h);
        tr("fc1", h);
    }
    h = fc2_->forward(h);
    tr("fc2", h);
    tr("output", h);
    return h; // [B,1,1]
}

void Critic::collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    if (embed_) embed_->collect_state(prefix + "embed.", out);
    for (size_t i = 0; i < convs_.size(); ++i)
        convs_[i]->collect_state(prefix + "conv" + std::to_string(i + 1) + ".", out);
    conv_out_->collect_state(prefix + "conv_out.", out);
    if (fc1_) fc1_->collect_state(prefix + "fc1.", out);
    fc2_->collect_state(prefix + "fc2.", out);
}

// ---------------------------------------------------------------------------
// losses

Tensor gradient_penalty_with_eps(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                                 const std::vector<int64_t>* labels, double lambda,
                                 std::span<const double> eps) {
    Tape* tape = Tape::active();
    if (!tape || !tape->higher_order())
        throw TrainError("gradient_penalty: requires an active higher-order tape");
    if (real.shape() != fake.shape())
        throw ShapeError("gradient_penalty: real " + shape_str(real.shape()) + " vs fake " +
                         shape_str(fake.shape()));
    int64_t B = real.extent(0);
    if (static_cast<int64_t>(eps.size()) != B)
        throw ShapeError("gradient_penalty: need one epsilon per item");

    // interpolates as a fresh leaf so d critic / d x_hat is well defined
    std::vector<double> mix(static_cast<size_t>(real.numel()));
    auto pr = real.data();
    auto pf = fake.data();
    int64_t per_item = real.numel() / B;
    for (int64_t b = 0; b < B; ++b) {
        double e = eps[static_cast<size_t>(b)];
        for (int64_t i = 0; i < per_item; ++i) {
            size_t k = static_cast<size_t>(b * per_item + i);
            mix[k] = e * pr[k] + (1.0 - e) * pf[k];
        }
    }
    Tensor xhat = Tensor::from(real.shape(), std::move(mix));
    xhat.set_requires_grad(true);

    Tensor d = critic(xhat, labels);
    Tensor g = tape->grad(op::sum_all(d), {xhat}, /*create_graph=*/true)[0];
    Tensor norms = op::l2_norm_per_item(g);
    Tensor excess = op::add_scalar(norms, -1.0);
    return op::scale(op::mean_all(op::mul(excess, excess)), lambda);
}

Tensor gradient_penalty(const CriticFn& critic, const Tensor& real, const Tensor& fake,
                        const std::vector<int64_t>* labels, double lambda, Rng& rng) {
    std::vector<double> eps(static_cast<size_t>(real.extent(0)));
    for (double& e : eps) e = rng.uniform();
    return gradient_penalty_with_eps(critic, real, fake, labels, lambda, eps);
}

CriticLossParts critic_loss(const CriticFn& critic, const GenFn& gen, const Tensor& real,
                            const Tensor& z, const std::vector<int64_t>* labels, double lambda,
                            Rng& rng) {
    Tensor fake;
    {
        NoGradGuard ng; // generator parameters stay out of the critic's graph
        fake = gen(z, labels);
    }
    Tensor d_real = op::mean_all(critic(real, labels));
    Tensor d_fake = op::mean_all(critic(fake, labels));
    Tensor base = op::sub(d_fake, d_real);
    Tensor gp = gradient_penalty(critic, real, fake, labels, lambda, rng);
    CriticLossParts parts;
    parts.loss = op::add(base, gp);
    parts.wasserstein = d_real.item() - d_fake.item();
    parts.gp = gp.item();
    if (!std::isfinite(parts.loss.item()))
        throw TrainError("critic_loss: non-finite loss (wasserstein=" +
                         std::to_string(parts.wasserstein) + ", gp=" + std::to_string(parts.gp) +
                         ")");
    return parts;
}

Tensor generator_loss(const CriticFn& critic, const GenFn& gen, const Tensor& z,
                      const std::vector<int64_t>* labels) {
    Tensor fake = gen(z, labels);
    Tensor loss = op::neg(op::mean_all(critic(fake, labels)));
    if (!std::isfinite(loss.item()))
        throw TrainError("generator_loss: non-finite loss");
    return loss;
}

// ---------------------------------------------------------------------------
// training

namespace {

Tensor batch_tensor(std::span<const Beat> beats, std::span<const size_t> idx) {
    int64_t B = static_cast<int64_t>(idx.size());
    std::vector<double> data(static_cast<size_t>(B) * kBeatLength);
    for (int64_t b = 0; b < B; ++b)
        std::copy_n(beats[idx[static_cast<size_t>(b)]].samples.data(), kBeatLength,
                    data.data() + b * kBeatLength);
    return Tensor::from({B, 1, kBeatLength}, std::move(data));
}

Tensor sample_latent(int64_t B, int64_t dim, Rng& rng) {
    std::vector<double> z(static_cast<size_t>(B * dim));
    for (double& v : z) v = rng.normal();
    return Tensor::from({B, dim, 1}, std::move(z));
}

std::map<char, int64_t> label_index(const std::vector<char>& class_order) {
    std::map<char, int64_t> m;
    for (size_t i = 0; i < class_order.size(); ++i) m[class_order[i]] = static_cast<int64_t>(i);
    return m;
}

} // namespace

GanTrainResult train_gan(Generator& gen, Critic& critic, std::span<const Beat> beats,
                         const std::vector<char>& class_order, const GanTrainConfig& cfg) {
    if (beats.empty()) throw TrainError("train_gan: empty training set");
    if (cfg.batch_size < 2) throw ConfigError("train_gan: batch_size must be >= 2");
    if (cfg.lambda_gp <= 0) throw ConfigError("train_gan: lambda_gp must be positive");
    if (cfg.n_critic < 1) throw ConfigError("train_gan: n_critic must be >= 1");
    int64_t B = std::min<int64_t>(cfg.batch_size, static_cast<int64_t>(beats.size()));
    if (B < 2) throw TrainError("train_gan: need at least 2 beats (got " +
                                std::to_string(beats.size()) + ")");

    auto lbl_idx = label_index(class_order);
    std::vector<int64_t> all_labels(beats.size());
    if (gen.spec().conditional) {
        for (size_t i = 0; i < beats.size(); ++i) {
            auto it = lbl_idx.find(beats[i].label);
            if (it == lbl_idx.end())
                throw TrainError(std::string("train_gan: beat label '") + beats[i].label +
                                 "' not in the class order");
            all_labels[i] = it->second;
        }
    }

    Rng rng_data(derive_seed(cfg.seed, "gan.data"));
    Rng rng_z(derive_seed(cfg.seed, "gan.z"));
    Rng rng_gp(derive_seed(cfg.seed, "gan.gp"));

    AdamConfig ac;
    ac.lr = cfg.lr;
    ac.beta1 = cfg.beta1;
    ac.beta2 = cfg.beta2;
    Adam gen_opt(gen.parameters("g."), ac);
    Adam critic_opt(critic.parameters("c."), ac);

    CriticFn critic_fn = [&](const Tensor& x, const std::vector<int64_t>* lb) {
        return critic.forward(x, lb, true);
    };
    GenFn gen_fn = [&](const Tensor& z, const std::vector<int64_t>* lb) {
        return gen.forward(z, lb, true);
    };

    GanTrainResult result;
    std::vector<size_t> order(beats.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    int64_t step = 0;
    double last_gen_loss = 0.0;
    bool conditional = gen.spec().conditional;

    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng_data.shuffle(order);
        size_t n_batches = order.size() / static_cast<size_t>(B);
        if (n_batches == 0) n_batches = 1; // short set: one (possibly reused) batch

        for (size_t bi = 0; bi < n_batches; ++bi) {
            size_t off = bi * static_cast<size_t>(B);
            if (off + static_cast<size_t>(B) > order.size()) off = 0;
            std::span<const size_t> idx(order.data() + off, static_cast<size_t>(B));
            Tensor real = batch_tensor(beats, idx);
            std::vector<int64_t> lbls(static_cast<size_t>(B));
            for (int64_t k = 0; k < B; ++k) lbls[static_cast<size_t>(k)] = all_labels[idx[static_cast<size_t>(k)]];
            const std::vector<int64_t>* lbl_ptr = conditional ? &lbls : nullptr;

            // critic update (gradient penalty needs the higher-order tape)
            {
                Tape tape(/*higher_order=*/true);
                Tensor z = sample_latent(B, gen.spec().latent_dim, rng_z);
                CriticLossParts parts;
                try {
                    parts = critic_loss(critic_fn, gen_fn, real, z, lbl_ptr, cfg.lambda_gp, rng_gp);
                } catch (const TrainError& e) {
                    throw TrainError("train_gan: step " + std::to_string(step) + ": " + e.what());
                }
                gen_opt.zero_grad();
                critic_opt.zero_grad();
                tape.backward(parts.loss);
                critic_opt.step();
                result.history.push_back(
                    {step, parts.loss.item(), last_gen_loss, parts.wasserstein, parts.gp});
            }
            ++step;

            if (step % cfg.n_critic == 0) {
                Tape tape;
                Tensor z = sample_latent(B, gen.spec().latent_dim, rng_z);
                Tensor gl = generator_loss(critic_fn, gen_fn, z, lbl_ptr);
                gen_opt.zero_grad();
                critic_opt.zero_grad();
                tape.backward(gl);
                gen_opt.step();
                last_gen_loss = gl.item();
            }
        }

        if (!cfg.out_dir.empty()) {
            std::filesystem::create_directories(cfg.out_dir);
            save_checkpoint(cfg.out_dir / (gen.name() + ".ckpt"), gen.state("g."));
            save_checkpoint(cfg.out_dir / "critic.ckpt", critic.state("c."));
            write_loss_history_csv(cfg.out_dir / "loss_history.csv", result.history);
        }
    }
    return result;
}

std::vector<Beat> generate(Generator& gen, int64_t n, std::optional<char> cls,
                           const std::vector<char>& class_order, uint64_t seed) {
    if (n < 0) throw Error("generate: negative count");
    bool conditional = gen.spec().conditional;
    if (conditional && !cls) throw Error("generate: conditional model requires a class");
    if (!conditional && cls) throw Error("generate: class given to an unconditional model");

    int64_t cls_index = 0;
    char out_label = gen.trained_label;
    if (conditional) {
        auto idx = label_index(class_order);
        auto it = idx.find(*cls);
        if (it == idx.end())
            throw Error(std::string("generate: class '") + *cls + "' not in class order");
        cls_index = it->second;
        out_label = *cls;
    }

    NoGradGuard ng;
    Rng rng(derive_seed(seed, "generate"));
    std::vector<Beat> out;
    out.reserve(static_cast<size_t>(n));
    int64_t left = n;
    while (left > 0) {
        int64_t B = std::min<int64_t>(left, 64);
        Tensor z = sample_latent(B, gen.spec().latent_dim, rng);
        std::vector<int64_t> lbls(static_cast<size_t>(B), cls_index);
        Tensor y = gen.forward(z, conditional ? &lbls : nullptr, /*train=*/false);
        auto py = y.data();
        for (int64_t b = 0; b < B; ++b) {
            Beat beat;
            beat.label = out_label;
            beat.provenance = Provenance::Generated;
            beat.samples.assign(py.begin() + b * kBeatLength, py.begin() + (b + 1) * kBeatLength);
            out.push_back(std::move(beat));
        }
        left -= B;
    }
    return out;
}

void write_loss_history_csv(const std::filesystem::path& path,
                            std::span<const LossHistoryRow> rows) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << "step,critic_loss,gen_loss,wasserstein_estimate,gp\n";
        os.precision(12);
        for (const auto& r : rows)
            os << r.step << ',' << r.critic_loss << ',' << r.gen_loss << ',' << r.wasserstein
               << ',' << r.gp << '\n';
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ecgaug::gan
