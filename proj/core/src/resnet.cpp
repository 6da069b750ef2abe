#include "ecgaug/resnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "ecgaug/adam.hpp"
#include "ecgaug/checkpoint.hpp"
#include "ecgaug/error.hpp"
#include "ecgaug/ops.hpp"
#include "ecgaug/rng.hpp"

namespace ecgaug::clf {

namespace op = ecgaug::ops;

namespace {

void he_init(Tensor& w, uint64_t seed, const std::string& name) {
    const Shape& s = w.shape();
    int64_t fan_in = 1;
    for (size_t d = 1; d < s.size(); ++d) fan_in *= s[d];
    init_normal(w, 0.0, std::sqrt(2.0 / static_cast<double>(fan_in)), seed, name);
}

} // namespace

ResBlock1d::ResBlock1d(int64_t in_ch, int64_t out_ch, int64_t stride, int64_t kernel) {
    int64_t pad = kernel / 2;
    bn1_ = std::make_unique<nn::BatchNorm1d>(in_ch);
    conv1_ = std::make_unique<nn::Conv1d>(in_ch, out_ch, kernel, stride, pad);
    bn2_ = std::make_unique<nn::BatchNorm1d>(out_ch);
    conv2_ = std::make_unique<nn::Conv1d>(out_ch, out_ch, kernel, 1, pad);
    if (in_ch != out_ch || stride != 1)
        proj_ = std::make_unique<nn::Conv1d>(in_ch, out_ch, 1, stride, 0);
}

Tensor ResBlock1d::forward(const Tensor& x, bool train) {
    Tensor pre = op::relu(bn1_->forward(x, train));
    Tensor branch = conv1_->forward(pre);
    branch = conv2_->forward(op::relu(bn2_->forward(branch, train)));
    Tensor skip = proj_ ? proj_->forward(pre) : x;
    return op::add(skip, branch);
}

void ResBlock1d::collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    bn1_->collect_state(prefix + "bn1.", out);
    conv1_->collect_state(prefix + "conv1.", out);
    bn2_->collect_state(prefix + "bn2.", out);
    conv2_->collect_state(prefix + "conv2.", out);
    if (proj_) proj_->collect_state(prefix + "proj.", out);
}

ResNetSpec ResNetSpec::desk(int64_t n_classes) {
    ResNetSpec s;
    s.n_classes = n_classes;
    return s;
}

ResNetSpec ResNetSpec::full34(int64_t n_classes) {
    ResNetSpec s;
    s.widths = {64, 128, 256, 512};
    s.blocks = {3, 4, 6, 3};
    s.n_classes = n_classes;
    return s;
}

ResNet::ResNet(ResNetSpec spec, uint64_t init_seed, std::string name)
    : spec_(std::move(spec)), name_(std::move(name)) {
    if (spec_.n_classes < 2) throw ConfigError("resnet: need at least 2 classes");
    if (spec_.widths.empty() || spec_.widths.size() != spec_.blocks.size())
        throw ConfigError("resnet: widths and block counts must align");

    stem_ = std::make_unique<nn::Conv1d>(1, spec_.widths[0], spec_.kernel, 1, spec_.kernel / 2);
    he_init(stem_->weight, init_seed, name_ + ".stem.weight");

    int64_t in_ch = spec_.widths[0];
    int bi = 0;
    for (size_t stage = 0; stage < spec_.widths.size(); ++stage) {
        for (int64_t b = 0; b < spec_.blocks[stage]; ++b) {
            int64_t stride = (stage > 0 && b == 0) ? 2 : 1;
            auto blk = std::make_unique<ResBlock1d>(in_ch, spec_.widths[stage], stride,
                                                    spec_.kernel);
            std::string p = name_ + ".block" + std::to_string(bi);
            he_init(blk->conv1().weight, init_seed, p + ".conv1.weight");
            he_init(blk->conv2().weight, init_seed, p + ".conv2.weight");
            std::vector<nn::ParamRef> st;
            blk->collect_state("", st); // projection weight, when present
            for (auto& pr : st)
                if (pr.name == "proj.weight") he_init(pr.tensor, init_seed, p + ".proj.weight");
            blocks_.push_back(std::move(blk));
            in_ch = spec_.widths[stage];
            ++bi;
        }
    }
    head_bn_ = std::make_unique<nn::BatchNorm1d>(in_ch);
    head_ = std::make_unique<nn::Linear>(in_ch, spec_.n_classes);
    he_init(head_->weight, init_seed, name_ + ".head.weight");
}

Tensor ResNet::forward(const Tensor& x, bool train) {
    if (x.dim() != 3 || x.extent(1) != 1 || x.extent(2) != kBeatLength)
        throw ShapeError("resnet: input must be [B,1," + std::to_string(kBeatLength) + "], got " +
                         shape_str(x.shape()));
    Tensor h = stem_->forward(x);
    for (auto& blk : blocks_) h = blk->forward(h, train);
    h = op::relu(head_bn_->forward(h, train));
    Tensor pooled = op::mean_axes(h, {2});              // [B,C,1]
    Tensor flat = op::reshape(pooled, {h.extent(0), h.extent(1)});
    return head_->forward(flat);
}

void ResNet::collect_state(const std::string& prefix, std::vector<nn::ParamRef>& out) {
    stem_->collect_state(prefix + "stem.", out);
    for (size_t i = 0; i < blocks_.size(); ++i)
        blocks_[i]->collect_state(prefix + "block" + std::to_string(i) + ".", out);
    head_bn_->collect_state(prefix + "head_bn.", out);
    head_->collect_state(prefix + "head.", out);
}

namespace {

Tensor beats_tensor(std::span<const Beat> beats, std::span<const size_t> idx) {
    int64_t B = static_cast<int64_t>(idx.size());
    std::vector<double> data(static_cast<size_t>(B) * kBeatLength);
    for (int64_t b = 0; b < B; ++b) {
        const Beat& beat = beats[idx[static_cast<size_t>(b)]];
        if (static_cast<int>(beat.samples.size()) != kBeatLength)
            throw ShapeError("classifier: beat with " + std::to_string(beat.samples.size()) +
                             " samples");
        std::copy_n(beat.samples.data(), kBeatLength, data.data() + b * kBeatLength);
    }
    return Tensor::from({B, 1, kBeatLength}, std::move(data));
}

void write_history_csv(const std::filesystem::path& path,
                       std::span<const ClfEpochStats> history) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << "epoch,loss,train_accuracy\n";
        os.precision(12);
        for (const auto& h : history) os << h.epoch << ',' << h.loss << ',' << h.accuracy << '\n';
    }
    std::filesystem::rename(tmp, path);
}

} // namespace

ClfTrainResult train_classifier(ResNet& net, std::span<const Beat> beats,
                                const std::vector<char>& classes, const ClfTrainConfig& cfg) {
    if (beats.empty()) throw TrainError("train_classifier: empty training set");
    if (cfg.batch_size < 1) throw ConfigError("train_classifier: batch_size must be >= 1");

    std::map<char, int64_t> lbl;
    for (size_t i = 0; i < classes.size(); ++i) lbl[classes[i]] = static_cast<int64_t>(i);
    std::vector<int64_t> labels(beats.size());
    std::map<char, int64_t> seen;
    for (size_t i = 0; i < beats.size(); ++i) {
        auto it = lbl.find(beats[i].label);
        if (it == lbl.end())
            throw TrainError(std::string("train_classifier: beat label '") + beats[i].label +
                             "' not in the class list");
        labels[i] = it->second;
        seen[beats[i].label]++;
    }
    if (seen.size() < 2)
        throw TrainError("train_classifier: training data holds a single class");

    AdamConfig ac;
    ac.lr = cfg.lr;
    ac.beta1 = cfg.beta1;
    ac.beta2 = cfg.beta2;
    Adam opt(net.parameters("clf."), ac);
    Rng rng(derive_seed(cfg.seed, "clf.data"));

    std::vector<size_t> order(beats.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    ClfTrainResult result;
    for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        int64_t correct = 0, total = 0, batches = 0;
        for (size_t off = 0; off < order.size(); off += static_cast<size_t>(cfg.batch_size)) {
            size_t take = std::min(static_cast<size_t>(cfg.batch_size), order.size() - off);
            std::span<const size_t> idx(order.data() + off, take);
            Tensor x = beats_tensor(beats, idx);
            std::vector<int64_t> y(take);
            for (size_t k = 0; k < take; ++k) y[k] = labels[idx[k]];

            Tape tape;
            Tensor logits = net.forward(x, true);
            Tensor loss = op::cross_entropy(logits, y);
            if (!std::isfinite(loss.item()))
                throw TrainError("train_classifier: non-finite loss at epoch " +
                                 std::to_string(epoch));
            opt.zero_grad();
            tape.backward(loss);
            opt.step();

            loss_sum += loss.item();
            ++batches;
            auto pl = logits.data();
            int64_t C = logits.extent(1);
            for (size_t k = 0; k < take; ++k) {
                int64_t arg = 0;
                for (int64_t c = 1; c < C; ++c)
                    if (pl[k * static_cast<size_t>(C) + static_cast<size_t>(c)] >
                        pl[k * static_cast<size_t>(C) + static_cast<size_t>(arg)])
                        arg = c;
                if (arg == y[k]) ++correct;
                ++total;
            }
        }
        ClfEpochStats st;
        st.epoch = epoch;
        st.loss = loss_sum / static_cast<double>(std::max<int64_t>(1, batches));
        st.accuracy = static_cast<double>(correct) / static_cast<double>(total);
        result.history.push_back(st);

        if (!cfg.out_dir.empty()) {
            std::filesystem::create_directories(cfg.out_dir);
            save_checkpoint(cfg.out_dir / "classifier.ckpt", net.state("clf."));
            write_history_csv(cfg.out_dir / "clf_history.csv", result.history);
        }
        if (cfg.stop_at_accuracy > 0 && st.accuracy >= cfg.stop_at_accuracy) break;
    }
    return result;
}

std::vector<std::vector<double>> predict(ResNet& net, std::span<const Beat> beats) {
    NoGradGuard ng;
    std::vector<std::vector<double>> out;
    out.reserve(beats.size());
    size_t off = 0;
    while (off < beats.size()) {
        size_t take = std::min<size_t>(64, beats.size() - off);
        std::vector<size_t> idx(take);
        for (size_t k = 0; k < take; ++k) idx[k] = off + k;
        Tensor x = beats_tensor(beats, idx);
        Tensor probs = op::softmax_lastdim(net.forward(x, false));
        auto p = probs.data();
        int64_t C = probs.extent(1);
        for (size_t k = 0; k < take; ++k)
            out.emplace_back(p.begin() + static_cast<int64_t>(k) * C,
                             p.begin() + static_cast<int64_t>(k + 1) * C);
        off += take;
    }
    return out;
}

std::vector<char> predicted_labels(const std::vector<std::vector<double>>& probs,
                                   const std::vector<char>& classes) {
    std::vector<char> out;
    out.reserve(probs.size());
    for (const auto& row : probs) {
        size_t arg = 0;
        for (size_t c = 1; c < row.size(); ++c)
            if (row[c] > row[arg]) arg = c;
        out.push_back(classes[arg]);
    }
    return out;
}

} // namespace ecgaug::clf
