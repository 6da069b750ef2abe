#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ecgaug/beats.hpp"
#include "ecgaug/gan.hpp"
#include "ecgaug/metrics.hpp"
#include "ecgaug/resnet.hpp"
#include "ecgaug/screen.hpp"
#include "ecgaug/segment.hpp"

namespace ecgaug::pipeline {

// The five experiments: the imbalanced reference plus the four augmented
// cases. I/II use the conditional model, III/IV the per-class unconditional
// models; II/IV screen the generated beats.
enum class CaseId { Reference, I, II, III, IV };

const char* case_name(CaseId id); // reference, case_i, ...
std::optional<CaseId> case_from_string(const std::string& s);
const std::vector<CaseId>& all_cases();
bool case_is_conditional(CaseId id);
bool case_is_screened(CaseId id);

struct ExperimentConfig {
    // data
    std::string data_source = "csv"; // csv | wfdb
    std::filesystem::path data_path;
    std::vector<char> classes = {'P', 'A', 'L', 'N', 'R', 'f', 'j'};

    SplitSpec split; // 0.9/0.1 split, half of the training pool used

    // gan hyperparameters (shared by the conditional and per-class models)
    gan::GanTrainConfig gan;
    // per-class models see far fewer batches per epoch than the conditional
    // model; 0 means "same as gan.epochs"
    int64_t gan_epochs_conditional = 0;
    bool gan_desk_scale = true; // narrow-channel architectures

    // screening
    ScreenConfig screen;
    TemplateSelection template_sel;

    // augmentation
    int64_t balance_target = 10000;
    double pool_factor = 3.0; // generated pool = factor x worst-case deficit

    // minor classes for the net-improvement summary
    std::vector<char> minor_classes = {'f', 'j'};

    // classifier
    clf::ClfTrainConfig clf;
    bool clf_full34 = false;

    std::filesystem::path out_dir = "out";
    uint64_t master_seed = 0;
};

// Key/value config file with [section] headers; see README for the schema.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::filesystem::path& path);

struct CaseOutcome {
    CaseId id = CaseId::Reference;
    bool ok = false;
    std::string error;
    metrics::EvalReport report;
};

struct RunResult {
    std::vector<CaseOutcome> outcomes;
    QualityReport quality;
    bool has_quality = false;
    std::map<CaseId, metrics::NetImprovement> improvements;
    // synthetic beats appended per case and class during balancing
    std::map<CaseId, std::map<char, int64_t>> appended;
    std::vector<std::string> warnings;

    bool all_ok() const;
};

// Full protocol: ingest -> segment -> split -> (train GANs) -> generate ->
// (screen) -> balance -> train classifier -> evaluate on the one shared test
// set -> emit reports. A failing case is recorded and the others continue.
RunResult run(const ExperimentConfig& cfg, const std::vector<CaseId>& cases);

// Every real training beat kept; synthetic beats appended per class in
// generation order until each class reaches the target. Classes already at
// or above the target are left untouched. Throws naming the class and the
// deficit when a pool is too small.
std::vector<Beat> balance(const std::vector<Beat>& train,
                          const std::map<char, std::vector<Beat>>& pool_by_class,
                          const std::vector<char>& classes, int64_t target);

void emit_case_reports(const std::filesystem::path& out_dir, const CaseOutcome& outcome,
                       uint64_t seed);
void emit_summary(const std::filesystem::path& out_dir, const RunResult& result);

// ---------------------------------------------------------------------------
// bundled synthetic dataset: three parameterized noisy waveform families

struct SyntheticSpec {
    std::map<char, int64_t> counts = {{'N', 900}, {'L', 300}, {'R', 80}};
    double noise = 0.12;
    uint64_t seed = 0;
};

std::vector<Beat> synth_dataset(const SyntheticSpec& spec);

// ---------------------------------------------------------------------------
// model bundles: checkpoint + spec sidecar so the CLI can reload models

void save_generator_bundle(const std::filesystem::path& dir, gan::Generator& gen,
                           const std::vector<char>& class_order);
std::unique_ptr<gan::Generator> load_generator_bundle(const std::filesystem::path& dir,
                                                      std::vector<char>& class_order_out);

void save_classifier_bundle(const std::filesystem::path& dir, clf::ResNet& net,
                            const std::vector<char>& class_order);
std::unique_ptr<clf::ResNet> load_classifier_bundle(const std::filesystem::path& dir,
                                                    std::vector<char>& class_order_out);

// WFDB corpus helpers shared by the CLI verbs
std::vector<Beat> load_beats_from_config(const ExperimentConfig& cfg,
                                         std::vector<std::string>* warnings = nullptr);
std::vector<Beat> segment_wfdb_dir(const std::filesystem::path& dir,
                                   const std::vector<char>& classes,
                                   std::vector<std::string>* warnings = nullptr);

std::string report_to_json(const metrics::EvalReport& report, const std::string& case_label,
                           uint64_t seed);

} // namespace ecgaug::pipeline
