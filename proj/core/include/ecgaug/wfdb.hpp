#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ecgaug::wfdb {

// Parsers for the PhysioNet WFDB layouts used by MIT-BIH records: text
// headers (.hea), format-212 signal files (.dat) and MIT-format binary
// annotations (.atr). Only what the segmentation pipeline needs.

struct ChannelInfo {
    std::string file;
    int format = 212;
    double gain = 200.0;  // ADC units per mV
    int baseline = 0;     // ADC value corresponding to 0 physical units
    std::string units = "mV";
    std::string description;
};

struct HeaderInfo {
    std::string record_id;
    int n_channels = 0;
    double sampling_rate = 250.0; // WFDB default when the header omits it
    int64_t n_samples = 0;        // 0 = unspecified/empty
    std::vector<ChannelInfo> channels;
};

struct SignalChannel {
    double gain = 200.0;
    int baseline = 0;
    std::string description;
    std::vector<int> samples; // raw ADC units
};

struct SignalRecord {
    std::string record_id;
    double sampling_rate = 360.0;
    std::vector<SignalChannel> channels;

    int64_t length() const { return channels.empty() ? 0 : static_cast<int64_t>(channels[0].samples.size()); }
};

struct Annotation {
    int64_t sample = 0;
    char symbol = '?';
};

using AnnotationStream = std::vector<Annotation>;

// Header text -> metadata. Throws ParseError naming the offending line for
// malformed fields, non-212 signal formats and channel-count mismatches.
HeaderInfo parse_header(const std::string& text);

// Format 212: two 12-bit two's-complement samples packed into 3 bytes.
//   s1 = b0 | (low nibble of b1) << 8      s2 = b2 | (high nibble of b1) << 8
// Returns one vector per channel (n_channels is 1 or 2; 2 interleaves the
// decoded pair). Throws ParseError with the byte offset on a trailing
// partial triplet.
std::vector<std::vector<int>> decode_212(std::span<const uint8_t> bytes, int n_channels);

// Inverse of decode_212 for one interleaved pair stream; both inputs must
// have equal length. Values must fit 12-bit two's complement.
std::vector<uint8_t> encode_212(std::span<const int> ch0, std::span<const int> ch1);

// MIT annotation format: 2-byte little-endian words, code = word >> 10,
// delta = word & 0x3FF. Handles the SKIP/NUM/SUB/CHN/AUX pseudo-codes and
// requires the terminating EOF word. Emits beat annotations only.
AnnotationStream parse_annotations(std::span<const uint8_t> bytes);

// Loads <record>.hea + .dat from disk.
SignalRecord load_record(const std::filesystem::path& header_path);
AnnotationStream load_annotations(const std::filesystem::path& atr_path);

// (sample - baseline) / gain for the chosen analysis channel.
std::vector<double> to_millivolts(const SignalRecord& rec, int channel);

// Annotation symbol for a beat type code, or 0 for non-beat codes.
char beat_symbol(int code);

// Canonical 7-class filter: maps '/' (paced) to 'P', drops everything not in
// `selected`, preserves order. `selected` must be a subset of {P,A,L,N,R,f,j}.
AnnotationStream map_symbols(const AnnotationStream& in, const std::set<char>& selected);

inline const std::set<char>& canonical_classes() {
    static const std::set<char> k{'P', 'A', 'L', 'N', 'R', 'f', 'j'};
    return k;
}

} // namespace ecgaug::wfdb
