#include "ecgaug/beats.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ecgaug/error.hpp"

namespace ecgaug {

const char* provenance_name(Provenance p) {
    switch (p) {
    case Provenance::Real: return "real";
    case Provenance::Generated: return "generated";
    case Provenance::Screened: return "screened";
    }
    return "?";
}

void validate_beat(const Beat& b, bool normalized) {
    if (static_cast<int>(b.samples.size()) != kBeatLength)
        throw Error("beat: " + std::to_string(b.samples.size()) + " samples, expected " +
                    std::to_string(kBeatLength));
    for (double v : b.samples) {
        if (!std::isfinite(v)) throw Error("beat: non-finite sample");
        if (normalized && (v < -1.0 || v > 1.0))
            throw Error("beat: sample " + std::to_string(v) + " outside [-1,1]");
    }
}

std::vector<Beat> load_csv_beats(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    std::vector<Beat> out;
    std::string line;
    int row = 0;
    while (std::getline(is, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        Beat b;
        size_t pos = line.find(',');
        if (pos != 1)
            throw ParseError("beats csv row " + std::to_string(row) +
                             ": expected single label character before first comma");
        b.label = line[0];
        b.samples.reserve(kBeatLength);
        size_t start = pos + 1;
        while (start <= line.size()) {
            size_t end = line.find(',', start);
            std::string_view cell(line.data() + start,
                                  (end == std::string::npos ? line.size() : end) - start);
            double v = 0;
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (ec != std::errc() || p != cell.data() + cell.size() || !std::isfinite(v))
                throw ParseError("beats csv row " + std::to_string(row) + ": bad value '" +
                                 std::string(cell) + "'");
            b.samples.push_back(v);
            if (end == std::string::npos) break;
            start = end + 1;
        }
        if (static_cast<int>(b.samples.size()) != kBeatLength)
            throw ParseError("beats csv row " + std::to_string(row) + ": " +
                             std::to_string(b.samples.size()) + " values, expected " +
                             std::to_string(kBeatLength));
        b.provenance = Provenance::Real;
        out.push_back(std::move(b));
    }
    return out;
}

void save_csv_beats(const std::filesystem::path& path, std::span<const Beat> beats) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os.precision(17);
        for (const Beat& b : beats) {
            os << b.label;
            for (double v : b.samples) os << ',' << v;
            os << '\n';
        }
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void save_manifest(const std::filesystem::path& path, std::span<const Beat> beats,
                   uint64_t seed, const std::string& source) {
    nlohmann::json j;
    j["source"] = source;
    j["seed"] = seed;
    j["total"] = beats.size();
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [label, n] : class_counts(beats)) counts[std::string(1, label)] = n;
    j["class_counts"] = counts;
    std::map<std::string, int64_t> prov;
    for (const Beat& b : beats) prov[provenance_name(b.provenance)]++;
    j["provenance"] = prov;

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

std::map<char, std::vector<Beat>> group_by_class(std::span<const Beat> beats) {
    std::map<char, std::vector<Beat>> out;
    for (const Beat& b : beats) out[b.label].push_back(b);
    return out;
}

std::map<char, int64_t> class_counts(std::span<const Beat> beats) {
    std::map<char, int64_t> out;
    for (const Beat& b : beats) out[b.label]++;
    return out;
}

} // namespace ecgaug
