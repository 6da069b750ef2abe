#include "ecgaug/segment.hpp"

#include <algorithm>
#include <cmath>

#include "ecgaug/error.hpp"
#include "ecgaug/rng.hpp"

namespace ecgaug {

std::pair<int64_t, int64_t> beat_boundaries(std::span<const int64_t> rpeaks, size_t i,
                                            double ratio, int64_t record_len) {
    size_t n = rpeaks.size();
    if (n < 2) throw Error("beat_boundaries: need at least two R-peaks");
    if (i >= n) throw Error("beat_boundaries: index out of range");
    for (size_t k = 1; k < n; ++k)
        if (rpeaks[k] <= rpeaks[k - 1]) throw Error("beat_boundaries: R-peaks not increasing");

    int64_t peak = rpeaks[i];
    // boundary beats mirror the one RR interval they have
    int64_t rr_prev = i > 0 ? peak - rpeaks[i - 1] : rpeaks[i + 1] - peak;
    int64_t rr_next = i + 1 < n ? rpeaks[i + 1] - peak : rr_prev;

    // round half away from zero, as llround does
    int64_t start = peak - std::llround(ratio * static_cast<double>(rr_prev));
    int64_t end = peak + std::llround(ratio * static_cast<double>(rr_next));
    start = std::max<int64_t>(0, start);
    if (record_len > 0) end = std::min(end, record_len - 1);
    return {start, end};
}

std::vector<double> resample_to_256(std::span<const double> window) {
    int64_t n = static_cast<int64_t>(window.size());
    if (n < 2) throw Error("resample_to_256: window must have at least 2 samples");
    std::vector<double> out(kBeatLength);
    // integer arithmetic keeps the endpoints exact
    for (int64_t j = 0; j < kBeatLength; ++j) {
        int64_t num = j * (n - 1);
        int64_t lo = num / (kBeatLength - 1);
        int64_t rem = num % (kBeatLength - 1);
        if (rem == 0) {
            out[static_cast<size_t>(j)] = window[static_cast<size_t>(lo)];
        } else {
            double frac = static_cast<double>(rem) / (kBeatLength - 1);
            double a = window[static_cast<size_t>(lo)];
            double b = window[static_cast<size_t>(lo + 1)];
            out[static_cast<size_t>(j)] = a + (b - a) * frac;
        }
    }
    return out;
}

std::vector<double> normalize_amplitude(std::span<const double> beat) {
    double lo = beat[0], hi = beat[0];
    for (double v : beat) {
        if (!std::isfinite(v)) throw Error("normalize_amplitude: non-finite sample");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::vector<double> out(beat.size());
    if (hi == lo) return out; // constant beat -> all zeros
    double scale = 2.0 / (hi - lo);
    for (size_t i = 0; i < beat.size(); ++i) out[i] = (beat[i] - lo) * scale - 1.0;
    return out;
}

std::vector<Beat> segment_record(const wfdb::SignalRecord& rec,
                                 const wfdb::AnnotationStream& beats_in, double ratio) {
    std::vector<Beat> out;
    if (beats_in.size() < 2 || rec.channels.empty()) return out;
    int64_t len = rec.length();
    for (const auto& a : beats_in)
        if (a.sample >= len)
            throw Error("segment_record: annotation index " + std::to_string(a.sample) +
                        " beyond record length " + std::to_string(len));

    std::vector<double> mv = wfdb::to_millivolts(rec, 0);
    std::vector<int64_t> rpeaks;
    rpeaks.reserve(beats_in.size());
    for (const auto& a : beats_in) rpeaks.push_back(a.sample);

    for (size_t i = 0; i < rpeaks.size(); ++i) {
        auto [start, end] = beat_boundaries(rpeaks, i, ratio, len);
        if (end - start + 1 < 2) continue; // degenerate window, nothing to resample
        std::span<const double> window(mv.data() + start, static_cast<size_t>(end - start + 1));
        Beat b;
        b.samples = normalize_amplitude(resample_to_256(window));
        b.label = beats_in[i].symbol;
        b.provenance = Provenance::Real;
        b.source_record = rec.record_id;
        b.source_rpeak = rpeaks[i];
        out.push_back(std::move(b));
    }
    return out;
}

SplitResult split_by_class(std::span<const Beat> beats, const SplitSpec& spec) {
    if (spec.test_fraction <= 0.0 || spec.test_fraction >= 1.0 ||
        spec.train_usage <= 0.0 || spec.train_usage > 1.0)
        throw ConfigError("split: fractions must lie in (0,1)");

    SplitResult res;
    for (auto& [label, group] : group_by_class(beats)) {
        int64_t n = static_cast<int64_t>(group.size());
        if (n < 2) {
            res.warnings.push_back(std::string("class ") + label + " has " + std::to_string(n) +
                                   " beat(s); placed wholly in training");
            for (auto& b : group) res.train.push_back(std::move(b));
            continue;
        }
        std::vector<size_t> idx(group.size());
        for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(derive_seed(spec.seed, std::string("split:") + label));
        rng.shuffle(idx);

        int64_t n_test = std::llround(spec.test_fraction * static_cast<double>(n));
        n_test = std::clamp<int64_t>(n_test, 0, n);
        int64_t pool = n - n_test;
        int64_t n_train = static_cast<int64_t>(std::floor(spec.train_usage * static_cast<double>(pool)));

        for (int64_t i = 0; i < n_test; ++i) res.test.push_back(group[idx[static_cast<size_t>(i)]]);
        for (int64_t i = n_test; i < n_test + n_train; ++i)
            res.train.push_back(group[idx[static_cast<size_t>(i)]]);
    }
    return res;
}

} // namespace ecgaug
