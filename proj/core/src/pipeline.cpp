#include "ecgaug/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ecgaug/checkpoint.hpp"
#include "ecgaug/dtw.hpp"
#include "ecgaug/error.hpp"
#include "ecgaug/rng.hpp"
#include "ecgaug/wfdb.hpp"

namespace ecgaug::pipeline {

using nlohmann::json;

// ---------------------------------------------------------------------------
// cases

const char* case_name(CaseId id) {
    switch (id) {
    case CaseId::Reference: return "reference";
    case CaseId::I: return "case_i";
    case CaseId::II: return "case_ii";
    case CaseId::III: return "case_iii";
    case CaseId::IV: return "case_iv";
    }
    return "?";
}

std::optional<CaseId> case_from_string(const std::string& s) {
    std::string k = s;
    std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
    if (k == "reference" || k == "ref") return CaseId::Reference;
    if (k == "i" || k == "case_i" || k == "1") return CaseId::I;
    if (k == "ii" || k == "case_ii" || k == "2") return CaseId::II;
    if (k == "iii" || k == "case_iii" || k == "3") return CaseId::III;
    if (k == "iv" || k == "case_iv" || k == "4") return CaseId::IV;
    return std::nullopt;
}

const std::vector<CaseId>& all_cases() {
    static const std::vector<CaseId> k{CaseId::Reference, CaseId::I, CaseId::II, CaseId::III,
                                       CaseId::IV};
    return k;
}

bool case_is_conditional(CaseId id) { return id == CaseId::I || id == CaseId::II; }
bool case_is_screened(CaseId id) { return id == CaseId::II || id == CaseId::IV; }

bool RunResult::all_ok() const {
    for (const auto& o : outcomes)
        if (!o.ok) return false;
    return !outcomes.empty();
}

// ---------------------------------------------------------------------------
// config file

namespace {

struct IniData {
    std::map<std::string, std::string> values; // "section.key" -> raw string
    std::set<std::string> consumed;
};

IniData parse_ini(const std::string& text) {
    IniData ini;
    std::istringstream is(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::string t = line;
        t.erase(0, t.find_first_not_of(" \t"));
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            size_t close = t.find(']');
            if (close == std::string::npos)
                throw ConfigError("config line " + std::to_string(line_no) + ": unterminated '['");
            section = t.substr(1, close - 1);
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = t.substr(0, eq);
        std::string val = t.substr(eq + 1);
        auto trim = [](std::string& s) {
            s.erase(0, s.find_first_not_of(" \t"));
            s.erase(s.find_last_not_of(" \t") + 1);
        };
        trim(key);
        trim(val);
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
        ini.values[section.empty() ? key : section + "." + key] = val;
    }
    return ini;
}

std::optional<std::string> take(IniData& ini, const std::string& key) {
    auto it = ini.values.find(key);
    if (it == ini.values.end()) return std::nullopt;
    ini.consumed.insert(key);
    return it->second;
}

double take_double(IniData& ini, const std::string& key, double dflt) {
    auto v = take(ini, key);
    if (!v) return dflt;
    try {
        return std::stod(*v);
    } catch (...) {
        throw ConfigError("config: bad number for " + key + ": '" + *v + "'");
    }
}

int64_t take_int(IniData& ini, const std::string& key, int64_t dflt) {
    auto v = take(ini, key);
    if (!v) return dflt;
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size())
        throw ConfigError("config: bad integer for " + key + ": '" + *v + "'");
    return out;
}

bool take_bool(IniData& ini, const std::string& key, bool dflt) {
    auto v = take(ini, key);
    if (!v) return dflt;
    if (*v == "true" || *v == "1" || *v == "yes") return true;
    if (*v == "false" || *v == "0" || *v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + *v + "'");
}

std::vector<char> parse_class_list(const std::string& s) {
    std::vector<char> out;
    std::string tok;
    std::istringstream is(s);
    while (std::getline(is, tok, ',')) {
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t") + 1);
        if (tok.size() != 1)
            throw ConfigError("config: class entries are single characters, got '" + tok + "'");
        out.push_back(tok[0]);
    }
    if (out.empty()) throw ConfigError("config: empty class list");
    return out;
}

} // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    IniData ini = parse_ini(text);
    ExperimentConfig cfg;

    if (auto v = take(ini, "data.source")) {
        if (*v != "csv" && *v != "wfdb")
            throw ConfigError("config: data.source must be csv or wfdb, got '" + *v + "'");
        cfg.data_source = *v;
    }
    if (auto v = take(ini, "data.path")) cfg.data_path = *v;
    if (auto v = take(ini, "data.classes")) cfg.classes = parse_class_list(*v);

    cfg.split.test_fraction = take_double(ini, "split.test_fraction", cfg.split.test_fraction);
    cfg.split.train_usage = take_double(ini, "split.train_usage", cfg.split.train_usage);

    cfg.gan.batch_size = take_int(ini, "gan.batch_size", cfg.gan.batch_size);
    cfg.gan.lr = take_double(ini, "gan.lr", cfg.gan.lr);
    cfg.gan.beta1 = take_double(ini, "gan.beta1", cfg.gan.beta1);
    cfg.gan.beta2 = take_double(ini, "gan.beta2", cfg.gan.beta2);
    cfg.gan.lambda_gp = take_double(ini, "gan.lambda_gp", cfg.gan.lambda_gp);
    cfg.gan.n_critic = take_int(ini, "gan.n_critic", cfg.gan.n_critic);
    cfg.gan.epochs = take_int(ini, "gan.epochs", cfg.gan.epochs);
    cfg.gan_epochs_conditional =
        take_int(ini, "gan.epochs_conditional", cfg.gan_epochs_conditional);
    cfg.gan_desk_scale = take_bool(ini, "gan.desk_scale", cfg.gan_desk_scale);

    cfg.screen.default_threshold =
        take_double(ini, "screen.threshold.default", cfg.screen.default_threshold);
    // per-class overrides: screen.threshold.<class letter>
    for (auto& [key, val] : ini.values) {
        if (key.rfind("screen.threshold.", 0) != 0) continue;
        std::string suffix = key.substr(std::string("screen.threshold.").size());
        if (suffix == "default") continue;
        if (suffix.size() != 1)
            throw ConfigError("config: per-class threshold key must name one class: " + key);
        cfg.screen.per_class[suffix[0]] = std::stod(val);
        ini.consumed.insert(key);
    }
    if (auto v = take(ini, "screen.template")) {
        if (*v == "medoid") {
            cfg.template_sel.kind = TemplateSelection::Kind::Medoid;
        } else if (v->rfind("expert:", 0) == 0) {
            cfg.template_sel.kind = TemplateSelection::Kind::ExpertIndex;
            cfg.template_sel.expert_index = static_cast<size_t>(std::stoll(v->substr(7)));
        } else {
            throw ConfigError("config: screen.template must be 'medoid' or 'expert:<index>'");
        }
    }
    cfg.template_sel.medoid_sample_cap = static_cast<size_t>(
        take_int(ini, "screen.medoid_sample",
                 static_cast<int64_t>(cfg.template_sel.medoid_sample_cap)));

    cfg.balance_target = take_int(ini, "augment.target", cfg.balance_target);
    cfg.pool_factor = take_double(ini, "augment.pool_factor", cfg.pool_factor);

    if (auto v = take(ini, "eval.minor_classes")) cfg.minor_classes = parse_class_list(*v);

    cfg.clf.epochs = take_int(ini, "classifier.epochs", cfg.clf.epochs);
    cfg.clf.batch_size = take_int(ini, "classifier.batch_size", cfg.clf.batch_size);
    cfg.clf.lr = take_double(ini, "classifier.lr", cfg.clf.lr);
    cfg.clf_full34 = take_bool(ini, "classifier.full34", cfg.clf_full34);

    if (auto v = take(ini, "run.out")) cfg.out_dir = *v;
    cfg.master_seed = static_cast<uint64_t>(take_int(ini, "run.seed",
                                                     static_cast<int64_t>(cfg.master_seed)));

    for (auto& [key, val] : ini.values)
        if (!ini.consumed.count(key))
            throw ConfigError("config: unknown key '" + key + "'");
    return cfg;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    std::stringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

// ---------------------------------------------------------------------------
// balancing

std::vector<Beat> balance(const std::vector<Beat>& train,
                          const std::map<char, std::vector<Beat>>& pool_by_class,
                          const std::vector<char>& classes, int64_t target) {
    if (target < 1) throw ConfigError("balance: target must be positive");
    std::vector<Beat> out = train; // real beats are never touched
    auto counts = class_counts(train);
    for (char cls : classes) {
        int64_t have = counts.count(cls) ? counts[cls] : 0;
        if (have >= target) continue;
        int64_t deficit = target - have;
        auto pit = pool_by_class.find(cls);
        int64_t available = pit == pool_by_class.end()
                                ? 0
                                : static_cast<int64_t>(pit->second.size());
        if (available < deficit)
            throw Error(std::string("balance: class ") + cls + " needs " +
                        std::to_string(deficit) + " synthetic beats but the pool holds " +
                        std::to_string(available));
        for (int64_t i = 0; i < deficit; ++i) out.push_back(pit->second[static_cast<size_t>(i)]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// synthetic dataset

namespace {

// three waveform families: a QRS-like spike (N), a broad double hump (L) and
// a spike followed by a deep trough (R)
std::vector<double> family_waveform(char label, Rng& rng, double noise) {
    std::vector<double> w(kBeatLength);
    double center = 128.0 + rng.uniform(-8, 8);
    double width = rng.uniform(0.9, 1.15);
    double amp = rng.uniform(0.85, 1.15);
    for (int i = 0; i < kBeatLength; ++i) {
        double t = (i - center) / (14.0 * width);
        double v = 0.0;
        switch (label) {
        case 'N':
            v = amp * std::exp(-t * t) + 0.18 * std::exp(-std::pow((i - center - 58) / 22.0, 2));
            break;
        case 'L': {
            double t1 = (i - center + 17) / (26.0 * width);
            double t2 = (i - center - 24) / (30.0 * width);
            v = 0.7 * amp * std::exp(-t1 * t1) + 0.55 * amp * std::exp(-t2 * t2);
            break;
        }
        case 'R':
            // deliberately close to N: same spike, a modest trailing trough
            v = amp * std::exp(-t * t) -
                0.32 * amp * std::exp(-std::pow((i - center - 26) / (15.0 * width), 2)) +
                0.15 * std::exp(-std::pow((i - center - 58) / 22.0, 2));
            break;
        default:
            throw Error(std::string("synth_dataset: no family for class ") + label);
        }
        w[static_cast<size_t>(i)] = v + noise * rng.normal();
    }
    return w;
}

} // namespace

std::vector<Beat> synth_dataset(const SyntheticSpec& spec) {
    std::vector<Beat> out;
    int64_t idx = 0;
    for (const auto& [label, count] : spec.counts) {
        Rng rng(derive_seed(spec.seed, std::string("synth:") + label));
        for (int64_t i = 0; i < count; ++i) {
            Beat b;
            b.label = label;
            b.samples = normalize_amplitude(family_waveform(label, rng, spec.noise));
            b.provenance = Provenance::Real;
            b.source_record = "synthetic";
            b.source_rpeak = idx++;
            out.push_back(std::move(b));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// model bundles

namespace {

json generator_spec_json(const gan::GeneratorSpec& s) {
    json j;
    j["latent_dim"] = s.latent_dim;
    j["conditional"] = s.conditional;
    j["n_classes"] = s.n_classes;
    j["first_block_stride1"] = s.first_block_stride1;
    j["output_length"] = s.output_length;
    j["second_fc"] = s.second_fc;
    json blocks = json::array();
    for (const auto& b : s.blocks) blocks.push_back({{"out_channels", b.out_channels},
                                                     {"declared_len", b.declared_len}});
    j["blocks"] = blocks;
    return j;
}

gan::GeneratorSpec generator_spec_from_json(const json& j) {
    gan::GeneratorSpec s;
    s.latent_dim = j.at("latent_dim").get<int64_t>();
    s.conditional = j.at("conditional").get<bool>();
    s.n_classes = j.at("n_classes").get<int64_t>();
    s.first_block_stride1 = j.at("first_block_stride1").get<bool>();
    s.output_length = j.at("output_length").get<int64_t>();
    s.second_fc = j.at("second_fc").get<bool>();
    s.blocks.clear();
    for (const auto& b : j.at("blocks"))
        s.blocks.push_back({b.at("out_channels").get<int64_t>(),
                            b.at("declared_len").get<int64_t>()});
    return s;
}

void write_json_atomic(const std::filesystem::path& path, const json& j) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << j.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

json read_json(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path.string());
    json j;
    is >> j;
    return j;
}

std::string classes_string(const std::vector<char>& classes) {
    return std::string(classes.begin(), classes.end());
}

std::vector<char> classes_from_string(const std::string& s) {
    return std::vector<char>(s.begin(), s.end());
}

} // namespace

void save_generator_bundle(const std::filesystem::path& dir, gan::Generator& gen,
                           const std::vector<char>& class_order) {
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "generator.ckpt", gen.state("g."));
    json j;
    j["kind"] = "generator";
    j["spec"] = generator_spec_json(gen.spec());
    j["class_order"] = classes_string(class_order);
    j["trained_label"] = std::string(1, gen.trained_label);
    write_json_atomic(dir / "generator.json", j);
}

std::unique_ptr<gan::Generator> load_generator_bundle(const std::filesystem::path& dir,
                                                      std::vector<char>& class_order_out) {
    json j = read_json(dir / "generator.json");
    auto gen = std::make_unique<gan::Generator>(generator_spec_from_json(j.at("spec")), 0);
    class_order_out = classes_from_string(j.at("class_order").get<std::string>());
    std::string tl = j.at("trained_label").get<std::string>();
    gen->trained_label = tl.empty() ? '?' : tl[0];
    restore_state(gen->state("g."), dir / "generator.ckpt");
    return gen;
}

void save_classifier_bundle(const std::filesystem::path& dir, clf::ResNet& net,
                            const std::vector<char>& class_order) {
    std::filesystem::create_directories(dir);
    save_checkpoint(dir / "classifier.ckpt", net.state("clf."));
    json j;
    j["kind"] = "classifier";
    j["widths"] = net.spec().widths;
    j["blocks"] = net.spec().blocks;
    j["kernel"] = net.spec().kernel;
    j["n_classes"] = net.spec().n_classes;
    j["class_order"] = classes_string(class_order);
    write_json_atomic(dir / "classifier.json", j);
}

std::unique_ptr<clf::ResNet> load_classifier_bundle(const std::filesystem::path& dir,
                                                    std::vector<char>& class_order_out) {
    json j = read_json(dir / "classifier.json");
    clf::ResNetSpec spec;
    spec.widths = j.at("widths").get<std::vector<int64_t>>();
    spec.blocks = j.at("blocks").get<std::vector<int64_t>>();
    spec.kernel = j.at("kernel").get<int64_t>();
    spec.n_classes = j.at("n_classes").get<int64_t>();
    auto net = std::make_unique<clf::ResNet>(spec, 0);
    class_order_out = classes_from_string(j.at("class_order").get<std::string>());
    restore_state(net->state("clf."), dir / "classifier.ckpt");
    return net;
}

// ---------------------------------------------------------------------------
// data loading

std::vector<Beat> segment_wfdb_dir(const std::filesystem::path& dir,
                                   const std::vector<char>& classes,
                                   std::vector<std::string>* warnings) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("wfdb: " + dir.string() + " is not a directory");
    std::set<char> selected(classes.begin(), classes.end());
    std::vector<std::filesystem::path> headers;
    for (const auto& e : std::filesystem::directory_iterator(dir))
        if (e.path().extension() == ".hea") headers.push_back(e.path());
    std::sort(headers.begin(), headers.end());

    std::vector<Beat> out;
    for (const auto& hea : headers) {
        std::filesystem::path atr = hea;
        atr.replace_extension(".atr");
        if (!std::filesystem::exists(atr)) {
            if (warnings)
                warnings->push_back("record " + hea.stem().string() + ": no .atr file, skipped");
            continue;
        }
        auto rec = wfdb::load_record(hea);
        auto ann = wfdb::map_symbols(wfdb::load_annotations(atr), selected);
        auto beats = segment_record(rec, ann);
        out.insert(out.end(), std::make_move_iterator(beats.begin()),
                   std::make_move_iterator(beats.end()));
    }
    return out;
}

std::vector<Beat> load_beats_from_config(const ExperimentConfig& cfg,
                                         std::vector<std::string>* warnings) {
    if (cfg.data_path.empty()) throw ConfigError("config: data.path is required");
    if (cfg.data_source == "wfdb") return segment_wfdb_dir(cfg.data_path, cfg.classes, warnings);

    auto beats = load_csv_beats(cfg.data_path);
    std::set<char> selected(cfg.classes.begin(), cfg.classes.end());
    size_t before = beats.size();
    std::erase_if(beats, [&](const Beat& b) { return !selected.count(b.label); });
    if (warnings && beats.size() != before)
        warnings->push_back(std::to_string(before - beats.size()) +
                            " beats outside the class list dropped");
    return beats;
}

// ---------------------------------------------------------------------------
// reports

std::string report_to_json(const metrics::EvalReport& report, const std::string& case_label,
                           uint64_t seed) {
    json j;
    j["case"] = case_label;
    j["seed"] = seed;
    j["classes"] = classes_string(report.order);
    j["accuracy"] = report.accuracy;

    json per = json::object();
    for (const auto& [cls, s] : report.per_class) {
        per[std::string(1, cls)] = {{"precision", s.precision},
                                    {"recall", s.recall},
                                    {"f1", s.f1},
                                    {"support", s.support},
                                    {"precision_defined", s.precision_defined},
                                    {"recall_defined", s.recall_defined}};
    }
    j["per_class"] = per;
    auto agg = [](const metrics::Aggregate& a) {
        return json{{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1}};
    };
    j["macro_avg"] = agg(report.macro);
    j["micro_avg"] = agg(report.micro);
    j["weighted_avg"] = agg(report.weighted);
    j["confusion"] = {{"counts", report.cm.counts}, {"row_pct", report.cm.row_pct()}};

    json curves = json::object();
    for (const auto& [cls, c] : report.curves) {
        curves[std::string(1, cls)] = {{"defined", c.defined},
                                       {"average_precision", c.defined ? c.average_precision : 0.0},
                                       {"recall", c.recall},
                                       {"precision", c.precision}};
    }
    j["pr_curves"] = curves;
    if (report.micro_curve.defined)
        j["pr_micro"] = {{"average_precision", report.micro_curve.average_precision},
                         {"recall", report.micro_curve.recall},
                         {"precision", report.micro_curve.precision}};
    return j.dump(2) + "\n";
}

void emit_case_reports(const std::filesystem::path& out_dir, const CaseOutcome& outcome,
                       uint64_t seed) {
    std::filesystem::path dir = out_dir / case_name(outcome.id);
    std::filesystem::create_directories(dir);
    std::string payload = report_to_json(outcome.report, case_name(outcome.id), seed);
    std::filesystem::path tmp = dir / "report.json.tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << payload;
    }
    std::filesystem::rename(tmp, dir / "report.json");
    metrics::write_confusion_csv(dir / "confusion.csv", outcome.report.cm);
    metrics::write_pr_svg(dir / "pr_curves.svg", outcome.report);
}

void emit_summary(const std::filesystem::path& out_dir, const RunResult& result) {
    if (result.improvements.empty() && !result.has_quality) return;
    std::filesystem::path dir = out_dir / "summary";
    std::filesystem::create_directories(dir);

    if (!result.improvements.empty()) {
        std::filesystem::path tmp = dir / "net_improvement.csv.tmp";
        {
            std::ofstream os(tmp, std::ios::trunc);
            if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
            os << "metric,case_i,case_ii,case_iii,case_iv\n";
            os.precision(6);
            for (const char* row : {"total", "minor_classes"}) {
                os << row;
                for (CaseId id : {CaseId::I, CaseId::II, CaseId::III, CaseId::IV}) {
                    os << ',';
                    auto it = result.improvements.find(id);
                    if (it != result.improvements.end())
                        os << (std::string(row) == "total" ? it->second.total : it->second.minor);
                }
                os << '\n';
            }
        }
        std::filesystem::rename(tmp, dir / "net_improvement.csv");
    }
    if (result.has_quality) write_quality_csv(dir / "quality.csv", result.quality);
}

// ---------------------------------------------------------------------------
// the full protocol

namespace {

struct GenerationPools {
    // class -> synthetic beats, in generation order
    std::map<char, std::vector<Beat>> cond_raw, cond_screened;
    std::map<char, std::vector<Beat>> uncond_raw, uncond_screened;
    std::string cond_error, uncond_error; // model-stage failures
};

const std::map<char, std::vector<Beat>>& pool_for_case(const GenerationPools& pools, CaseId id) {
    switch (id) {
    case CaseId::I: return pools.cond_raw;
    case CaseId::II: return pools.cond_screened;
    case CaseId::III: return pools.uncond_raw;
    case CaseId::IV: return pools.uncond_screened;
    default: throw Error("pool_for_case: reference has no pool");
    }
}

} // namespace

RunResult run(const ExperimentConfig& cfg, const std::vector<CaseId>& cases) {
    if (cases.empty()) throw ConfigError("run: no cases requested");
    RunResult result;

    auto beats = load_beats_from_config(cfg, &result.warnings);
    if (beats.empty()) throw Error("run: dataset is empty");

    SplitSpec sp = cfg.split;
    sp.seed = derive_seed(cfg.master_seed, "split");
    SplitResult split = split_by_class(beats, sp);
    for (auto& w : split.warnings) result.warnings.push_back(w);

    auto train_by_class = group_by_class(split.train);
    std::map<char, int64_t> deficit;
    for (char cls : cfg.classes) {
        int64_t have = train_by_class.count(cls)
                           ? static_cast<int64_t>(train_by_class[cls].size())
                           : 0;
        if (have > cfg.balance_target)
            result.warnings.push_back(std::string("class ") + cls +
                                      " already exceeds the balance target; left as-is");
        deficit[cls] = std::max<int64_t>(0, cfg.balance_target - have);
    }

    bool need_cond = false, need_uncond = false, need_screen = false;
    for (CaseId id : cases) {
        if (case_is_conditional(id)) need_cond = true;
        if (id == CaseId::III || id == CaseId::IV) need_uncond = true;
        if (case_is_screened(id)) need_screen = true;
    }

    // templates from the real training beats
    std::map<char, BeatTemplate> templates;
    if (need_cond || need_uncond) {
        for (char cls : cfg.classes) {
            auto it = train_by_class.find(cls);
            if (it == train_by_class.end() || it->second.empty()) continue;
            TemplateSelection sel = cfg.template_sel;
            sel.seed = derive_seed(cfg.master_seed, std::string("template:") + cls);
            templates[cls] = select_template(it->second, sel);
        }
    }

    auto pool_size = [&](char cls) {
        return static_cast<int64_t>(
            std::ceil(cfg.pool_factor * static_cast<double>(deficit[cls])));
    };

    GenerationPools pools;

    if (need_cond) {
        try {
            int64_t n_cls = static_cast<int64_t>(cfg.classes.size());
            gan::GeneratorSpec gs = cfg.gan_desk_scale
                                        ? gan::GeneratorSpec::conditional_desk(n_cls)
                                        : gan::GeneratorSpec::conditional_paper(n_cls);
            gan::CriticSpec cs = cfg.gan_desk_scale ? gan::CriticSpec::conditional_desk(n_cls)
                                                    : gan::CriticSpec::conditional_paper(n_cls);
            gan::Generator gen(gs, derive_seed(cfg.master_seed, "gan.cond.gen"));
            gan::Critic critic(cs, derive_seed(cfg.master_seed, "gan.cond.critic"));
            gan::GanTrainConfig gc = cfg.gan;
            if (cfg.gan_epochs_conditional > 0) gc.epochs = cfg.gan_epochs_conditional;
            gc.seed = derive_seed(cfg.master_seed, "gan.cond.train");
            gc.out_dir = cfg.out_dir / "models" / "conditional";
            gan::train_gan(gen, critic, split.train, cfg.classes, gc);
            save_generator_bundle(cfg.out_dir / "models" / "conditional", gen, cfg.classes);

            for (char cls : cfg.classes) {
                if (deficit[cls] <= 0) continue;
                pools.cond_raw[cls] =
                    gan::generate(gen, pool_size(cls), cls, cfg.classes,
                                  derive_seed(cfg.master_seed, std::string("gen.cond:") + cls));
            }
        } catch (const std::exception& e) {
            pools.cond_error = e.what();
        }
    }

    if (need_uncond) {
        try {
            for (char cls : cfg.classes) {
                if (deficit[cls] <= 0) continue;
                auto it = train_by_class.find(cls);
                if (it == train_by_class.end() || it->second.empty())
                    throw TrainError(std::string("unconditional model: class ") + cls +
                                     " has no real training beats");
                gan::GeneratorSpec gs = cfg.gan_desk_scale
                                            ? gan::GeneratorSpec::unconditional_desk()
                                            : gan::GeneratorSpec::unconditional_paper();
                gan::CriticSpec cs = cfg.gan_desk_scale ? gan::CriticSpec::unconditional_desk()
                                                        : gan::CriticSpec::unconditional_paper();
                std::string scope = std::string("gan.uncond:") + cls;
                gan::Generator gen(gs, derive_seed(cfg.master_seed, scope + ".gen"));
                gan::Critic critic(cs, derive_seed(cfg.master_seed, scope + ".critic"));
                gen.trained_label = cls;
                gan::GanTrainConfig gc = cfg.gan;
                gc.seed = derive_seed(cfg.master_seed, scope + ".train");
                gc.out_dir = cfg.out_dir / "models" / (std::string("unconditional_") + cls);
                gan::train_gan(gen, critic, it->second, cfg.classes, gc);
                save_generator_bundle(gc.out_dir, gen, cfg.classes);
                pools.uncond_raw[cls] =
                    gan::generate(gen, pool_size(cls), std::nullopt, cfg.classes,
                                  derive_seed(cfg.master_seed, std::string("gen.uncond:") + cls));
            }
        } catch (const std::exception& e) {
            pools.uncond_error = e.what();
        }
    }

    if (need_screen) {
        auto screen_pool = [&](const std::map<char, std::vector<Beat>>& raw,
                               std::map<char, std::vector<Beat>>& out) {
            for (const auto& [cls, pool] : raw) {
                auto tit = templates.find(cls);
                if (tit == templates.end())
                    throw Error(std::string("screening: no template for class ") + cls);
                out[cls] = screen(pool, tit->second, cfg.screen.threshold_for(cls)).kept;
            }
        };
        if (pools.cond_error.empty()) screen_pool(pools.cond_raw, pools.cond_screened);
        if (pools.uncond_error.empty()) screen_pool(pools.uncond_raw, pools.uncond_screened);
    }

    // per-case classifier training against the one shared test set
    std::vector<char> y_true;
    for (const Beat& b : split.test) y_true.push_back(b.label);

    std::map<std::string, std::map<char, std::vector<Beat>>> quality_sets;
    bool any_augmented_ok = false;

    for (CaseId id : cases) {
        CaseOutcome outcome;
        outcome.id = id;
        try {
            std::vector<Beat> train_set;
            if (id == CaseId::Reference) {
                train_set = split.train;
            } else {
                if (case_is_conditional(id) && !pools.cond_error.empty())
                    throw Error("conditional model unavailable: " + pools.cond_error);
                if (!case_is_conditional(id) && !pools.uncond_error.empty())
                    throw Error("unconditional models unavailable: " + pools.uncond_error);
                const auto& pool = pool_for_case(pools, id);
                train_set = balance(split.train, pool, cfg.classes, cfg.balance_target);
                // appended synthetic sets feed the quality table
                auto& qset = quality_sets[case_name(id)];
                for (char cls : cfg.classes) {
                    int64_t d = deficit[cls];
                    if (d <= 0) continue;
                    auto pit = pool.find(cls);
                    if (pit == pool.end()) continue;
                    qset[cls].assign(pit->second.begin(),
                                     pit->second.begin() +
                                         std::min<int64_t>(d, static_cast<int64_t>(pit->second.size())));
                    result.appended[id][cls] = static_cast<int64_t>(qset[cls].size());
                }
            }

            int64_t n_cls = static_cast<int64_t>(cfg.classes.size());
            clf::ResNetSpec rs = cfg.clf_full34 ? clf::ResNetSpec::full34(n_cls)
                                                : clf::ResNetSpec::desk(n_cls);
            std::string scope = std::string("clf.") + case_name(id);
            clf::ResNet net(rs, derive_seed(cfg.master_seed, scope + ".init"));
            clf::ClfTrainConfig cc = cfg.clf;
            cc.seed = derive_seed(cfg.master_seed, scope + ".train");
            cc.out_dir = cfg.out_dir / "models" / case_name(id);
            clf::train_classifier(net, train_set, cfg.classes, cc);
            save_classifier_bundle(cc.out_dir, net, cfg.classes);

            auto probs = clf::predict(net, split.test);
            auto y_pred = clf::predicted_labels(probs, cfg.classes);
            outcome.report = metrics::prf_report(metrics::confusion(y_true, y_pred, cfg.classes));
            metrics::add_pr_curves(outcome.report, y_true, probs);
            outcome.ok = true;
            if (id != CaseId::Reference) any_augmented_ok = true;
            emit_case_reports(cfg.out_dir, outcome, cfg.master_seed);
        } catch (const std::exception& e) {
            outcome.ok = false;
            outcome.error = e.what();
        }
        result.outcomes.push_back(std::move(outcome));
    }

    // net improvement against the reference
    const CaseOutcome* ref = nullptr;
    for (const auto& o : result.outcomes)
        if (o.id == CaseId::Reference && o.ok) ref = &o;
    if (ref) {
        std::set<char> minor;
        for (char c : cfg.minor_classes)
            if (std::count(cfg.classes.begin(), cfg.classes.end(), c)) minor.insert(c);
        auto ref_pct = metrics::to_pct_matrix(ref->report.cm);
        for (const auto& o : result.outcomes) {
            if (!o.ok || o.id == CaseId::Reference) continue;
            result.improvements[o.id] =
                metrics::net_improvement(metrics::to_pct_matrix(o.report.cm), ref_pct, minor);
        }
    }

    // quality table over the appended synthetic beats plus the real data
    if (any_augmented_ok && !templates.empty()) {
        auto& real_set = quality_sets["real"];
        for (auto& [cls, group] : train_by_class) real_set[cls] = group;
        std::vector<std::string> case_cols;
        for (CaseId id : {CaseId::I, CaseId::II, CaseId::III, CaseId::IV})
            if (quality_sets.count(case_name(id))) case_cols.push_back(case_name(id));
        case_cols.push_back("real");
        std::vector<char> rows;
        for (char cls : cfg.classes)
            if (cls != 'N') rows.push_back(cls); // class N conventionally omitted
        result.quality = quality_report(case_cols, quality_sets, templates, rows);
        result.has_quality = true;
    }

    emit_summary(cfg.out_dir, result);
    return result;
}

} // namespace ecgaug::pipeline
