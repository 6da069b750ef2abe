#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ecgaug {

inline constexpr int kBeatLength = 256;

enum class Provenance { Real, Generated, Screened };

const char* provenance_name(Provenance p);

// One fixed-length heartbeat. Real beats remember where they came from so
// train/test splits stay disjoint by (record, R-peak).
struct Beat {
    std::vector<double> samples; // exactly kBeatLength entries
    char label = '?';
    Provenance provenance = Provenance::Real;
    std::string source_record;
    int64_t source_rpeak = -1;
};

// Throws if the beat violates its invariants (length, finiteness, [-1,1]
// range after normalization).
void validate_beat(const Beat& b, bool normalized = true);

// CSV row schema: '<label char>,v0,...,v255'. Loaded beats get provenance
// "real". Errors carry the 1-based row number.
std::vector<Beat> load_csv_beats(const std::filesystem::path& path);
void save_csv_beats(const std::filesystem::path& path, std::span<const Beat> beats);

// Sidecar manifest next to a beat CSV: class counts, seed, provenance counts.
void save_manifest(const std::filesystem::path& path, std::span<const Beat> beats,
                   uint64_t seed, const std::string& source);

std::map<char, std::vector<Beat>> group_by_class(std::span<const Beat> beats);
std::map<char, int64_t> class_counts(std::span<const Beat> beats);

} // namespace ecgaug
