#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecgaug/beats.hpp"

namespace ecgaug {

struct BeatTemplate {
    char label = '?';
    std::vector<double> samples;
};

// Template choice: medoid of the class by summed DTW distance (ties go to the
// lowest index), or an explicit expert-chosen index. medoid_sample_cap > 0
// bounds the medoid search to a seeded subsample for large classes.
struct TemplateSelection {
    enum class Kind { Medoid, ExpertIndex } kind = Kind::Medoid;
    size_t expert_index = 0;
    size_t medoid_sample_cap = 0;
    uint64_t seed = 0;
};

BeatTemplate select_template(std::span<const Beat> class_beats, const TemplateSelection& sel);

// Per-class DTW screening thresholds. Default 1.75 everywhere, 5.0 for class
// L (its generated beats are noisier and need a looser gate).
struct ScreenConfig {
    double default_threshold = 1.75;
    std::map<char, double> per_class = {{'L', 5.0}};

    double threshold_for(char label) const;
};

struct ScreenResult {
    std::vector<Beat> kept;      // provenance flipped to Screened
    std::vector<Beat> discarded;
    std::vector<double> distances; // one per input beat, input order
};

// kept = beats whose DTW distance to the template is <= threshold.
ScreenResult screen(std::span<const Beat> beats, const BeatTemplate& tmpl, double threshold);

// Mean DTW distance to the class template per (case, class). Row order
// follows `classes`; class N is conventionally omitted from quality tables,
// so callers exclude it from `classes` unless explicitly wanted.
struct QualityReport {
    std::vector<char> classes;
    std::vector<std::string> cases; // column names
    std::vector<std::vector<double>> mean_distance; // [class][case], NaN when empty
};

QualityReport quality_report(const std::vector<std::string>& case_names,
                             const std::map<std::string, std::map<char, std::vector<Beat>>>& sets,
                             const std::map<char, BeatTemplate>& templates,
                             const std::vector<char>& classes);

void write_quality_csv(const std::filesystem::path& path, const QualityReport& q);

// Per-beat screening report: beat id, class, distance, kept flag.
void write_screening_csv(const std::filesystem::path& path, std::span<const Beat> beats,
                         std::span<const double> distances, double threshold);

} // namespace ecgaug
