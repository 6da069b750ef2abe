#include "ecgaug/screen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "ecgaug/dtw.hpp"
#include "ecgaug/error.hpp"
#include "ecgaug/rng.hpp"

namespace ecgaug {

BeatTemplate select_template(std::span<const Beat> class_beats, const TemplateSelection& sel) {
    if (class_beats.empty()) throw Error("select_template: empty class");

    if (sel.kind == TemplateSelection::Kind::ExpertIndex) {
        if (sel.expert_index >= class_beats.size())
            throw Error("select_template: expert index " + std::to_string(sel.expert_index) +
                        " out of range (class has " + std::to_string(class_beats.size()) +
                        " beats)");
        const Beat& b = class_beats[sel.expert_index];
        return {b.label, b.samples};
    }

    // medoid: argmin of summed DTW distance to the rest of the class
    std::vector<size_t> pool(class_beats.size());
    for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    if (sel.medoid_sample_cap > 0 && pool.size() > sel.medoid_sample_cap) {
        Rng rng(derive_seed(sel.seed, "template-medoid"));
        rng.shuffle(pool);
        pool.resize(sel.medoid_sample_cap);
        std::sort(pool.begin(), pool.end()); // ties still resolve to lowest index
    }

    size_t best = pool[0];
    double best_sum = std::numeric_limits<double>::infinity();
    for (size_t ci : pool) {
        double sum = 0.0;
        for (size_t cj : pool) {
            if (ci == cj) continue;
            sum += dtw(class_beats[ci].samples, class_beats[cj].samples);
        }
        if (sum < best_sum) {
            best_sum = sum;
            best = ci;
        }
    }
    const Beat& b = class_beats[best];
    return {b.label, b.samples};
}

double ScreenConfig::threshold_for(char label) const {
    auto it = per_class.find(label);
    double t = it != per_class.end() ? it->second : default_threshold;
    if (t <= 0) throw ConfigError(std::string("screen: threshold for class ") + label +
                                  " must be positive");
    return t;
}

ScreenResult screen(std::span<const Beat> beats, const BeatTemplate& tmpl, double threshold) {
    if (threshold <= 0) throw ConfigError("screen: threshold must be positive");
    ScreenResult res;
    res.distances.reserve(beats.size());
    for (const Beat& b : beats) {
        double d = dtw(b.samples, tmpl.samples);
        res.distances.push_back(d);
        if (d <= threshold) {
            Beat kept = b;
            kept.provenance = Provenance::Screened;
            res.kept.push_back(std::move(kept));
        } else {
            res.discarded.push_back(b);
        }
    }
    return res;
}

QualityReport quality_report(const std::vector<std::string>& case_names,
                             const std::map<std::string, std::map<char, std::vector<Beat>>>& sets,
                             const std::map<char, BeatTemplate>& templates,
                             const std::vector<char>& classes) {
    QualityReport q;
    q.classes = classes;
    q.cases = case_names;
    q.mean_distance.assign(classes.size(),
                           std::vector<double>(case_names.size(),
                                               std::numeric_limits<double>::quiet_NaN()));
    for (size_t ci = 0; ci < classes.size(); ++ci) {
        char cls = classes[ci];
        auto tit = templates.find(cls);
        if (tit == templates.end()) continue;
        for (size_t k = 0; k < case_names.size(); ++k) {
            auto sit = sets.find(case_names[k]);
            if (sit == sets.end()) continue;
            auto bit = sit->second.find(cls);
            if (bit == sit->second.end() || bit->second.empty()) continue;
            double sum = 0.0;
            for (const Beat& b : bit->second) sum += dtw(b.samples, tit->second.samples);
            q.mean_distance[ci][k] = sum / static_cast<double>(bit->second.size());
        }
    }
    return q;
}

void write_screening_csv(const std::filesystem::path& path, std::span<const Beat> beats,
                         std::span<const double> distances, double threshold) {
    if (beats.size() != distances.size())
        throw Error("write_screening_csv: beats/distances size mismatch");
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << "beat_id,class,distance,kept\n";
        os.precision(9);
        for (size_t i = 0; i < beats.size(); ++i)
            os << i << ',' << beats[i].label << ',' << distances[i] << ','
               << (distances[i] <= threshold ? 1 : 0) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

void write_quality_csv(const std::filesystem::path& path, const QualityReport& q) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << "class";
        for (const auto& c : q.cases) os << ',' << c;
        os << '\n';
        os.precision(6);
        for (size_t i = 0; i < q.classes.size(); ++i) {
            os << q.classes[i];
            for (double v : q.mean_distance[i]) {
                os << ',';
                if (std::isfinite(v)) os << v;
            }
            os << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ecgaug
