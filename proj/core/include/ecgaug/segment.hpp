#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ecgaug/beats.hpp"
#include "ecgaug/wfdb.hpp"

namespace ecgaug {

// Adaptive beat window: 75% of the RR interval on each side of the R-peak.

struct SplitSpec {
    double test_fraction = 0.1;
    double train_usage = 0.5;
    uint64_t seed = 0;
};

// Window [start, end] (inclusive) around rpeaks[i]. Boundary beats mirror the
// single available RR interval; the window is clamped to [0, record_len-1].
// Requires at least two peaks.
std::pair<int64_t, int64_t> beat_boundaries(std::span<const int64_t> rpeaks, size_t i,
                                            double ratio, int64_t record_len);

// Linear interpolation at kBeatLength equispaced positions spanning the
// window; endpoints are preserved exactly.
std::vector<double> resample_to_256(std::span<const double> window);

// Per-beat min-max map onto [-1,1]; a constant beat maps to all zeros.
std::vector<double> normalize_amplitude(std::span<const double> beat);

// Record + beat annotations -> normalized fixed-length beats (channel 0 in
// millivolts). Fewer than two peaks yields no beats.
std::vector<Beat> segment_record(const wfdb::SignalRecord& rec,
                                 const wfdb::AnnotationStream& beats_in, double ratio = 0.75);

struct SplitResult {
    std::vector<Beat> train;
    std::vector<Beat> test;
    std::vector<std::string> warnings;
};

// Stratified split: per class, test_fraction to the test set (round
// half-away-from-zero), then train_usage of the remainder (floor) kept for
// training. Deterministic per seed. Classes with fewer than 2 beats go
// wholly to training with a warning.
SplitResult split_by_class(std::span<const Beat> beats, const SplitSpec& spec);

} // namespace ecgaug
