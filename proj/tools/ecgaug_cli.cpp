#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "ecgaug/beats.hpp"
#include "ecgaug/error.hpp"
#include "ecgaug/gan.hpp"
#include "ecgaug/metrics.hpp"
#include "ecgaug/pipeline.hpp"
#include "ecgaug/resnet.hpp"
#include "ecgaug/rng.hpp"
#include "ecgaug/screen.hpp"
#include "ecgaug/segment.hpp"
#include "ecgaug/wfdb.hpp"

namespace fs = std::filesystem;
using namespace ecgaug;
namespace pl = ecgaug::pipeline;

namespace {

pl::ExperimentConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return {};
    return pl::parse_config_file(config_path);
}

void apply_overrides(pl::ExperimentConfig& cfg, const std::string& data_dir,
                     const std::string& out, int64_t seed, bool seed_set) {
    if (!data_dir.empty()) {
        cfg.data_path = data_dir;
        if (fs::is_directory(data_dir)) cfg.data_source = "wfdb";
    }
    if (!out.empty()) cfg.out_dir = out;
    if (seed_set) cfg.master_seed = static_cast<uint64_t>(seed);
}

int cmd_ingest(const std::string& data_dir) {
    nlohmann::json summary = nlohmann::json::array();
    std::vector<fs::path> headers;
    for (const auto& e : fs::directory_iterator(data_dir))
        if (e.path().extension() == ".hea") headers.push_back(e.path());
    std::sort(headers.begin(), headers.end());
    if (headers.empty()) throw IoError("ingest: no .hea files in " + data_dir);

    for (const auto& hea : headers) {
        auto rec = wfdb::load_record(hea);
        nlohmann::json r;
        r["record"] = rec.record_id;
        r["sampling_rate"] = rec.sampling_rate;
        r["channels"] = rec.channels.size();
        r["samples"] = rec.length();
        fs::path atr = hea;
        atr.replace_extension(".atr");
        if (fs::exists(atr)) {
            auto ann = wfdb::load_annotations(atr);
            r["beat_annotations"] = ann.size();
            std::map<std::string, int64_t> by_symbol;
            for (const auto& a : ann) by_symbol[std::string(1, a.symbol)]++;
            r["by_symbol"] = by_symbol;
        } else {
            r["beat_annotations"] = nullptr;
        }
        summary.push_back(std::move(r));
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
}

int cmd_segment(const pl::ExperimentConfig& cfg, const std::string& out_csv) {
    std::vector<std::string> warnings;
    auto beats = pl::load_beats_from_config(cfg, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    fs::path out = out_csv;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_csv_beats(out, beats);
    fs::path manifest = out;
    manifest.replace_extension(".manifest.json");
    save_manifest(manifest, beats, cfg.master_seed, cfg.data_path.string());
    std::cout << "wrote " << beats.size() << " beats to " << out.string() << "\n";
    return 0;
}

int cmd_train_gan(const pl::ExperimentConfig& cfg, const std::string& beats_csv,
                  const std::string& model, const std::string& cls, const std::string& out) {
    auto beats = load_csv_beats(beats_csv);
    fs::path out_dir = out.empty() ? cfg.out_dir / "models" : fs::path(out);
    int64_t n_cls = static_cast<int64_t>(cfg.classes.size());

    if (model == "conditional") {
        gan::GeneratorSpec gs = cfg.gan_desk_scale ? gan::GeneratorSpec::conditional_desk(n_cls)
                                                   : gan::GeneratorSpec::conditional_paper(n_cls);
        gan::CriticSpec cs = cfg.gan_desk_scale ? gan::CriticSpec::conditional_desk(n_cls)
                                                : gan::CriticSpec::conditional_paper(n_cls);
        gan::Generator gen(gs, derive_seed(cfg.master_seed, "gan.cond.gen"));
        gan::Critic critic(cs, derive_seed(cfg.master_seed, "gan.cond.critic"));
        gan::GanTrainConfig gc = cfg.gan;
        gc.seed = derive_seed(cfg.master_seed, "gan.cond.train");
        gc.out_dir = out_dir;
        gan::train_gan(gen, critic, beats, cfg.classes, gc);
        pl::save_generator_bundle(out_dir, gen, cfg.classes);
    } else if (model == "unconditional") {
        if (cls.size() != 1) throw ConfigError("train-gan: unconditional model needs --class");
        char c = cls[0];
        std::vector<Beat> class_beats;
        for (auto& b : beats)
            if (b.label == c) class_beats.push_back(std::move(b));
        gan::GeneratorSpec gs = cfg.gan_desk_scale ? gan::GeneratorSpec::unconditional_desk()
                                                   : gan::GeneratorSpec::unconditional_paper();
        gan::CriticSpec cspec = cfg.gan_desk_scale ? gan::CriticSpec::unconditional_desk()
                                                   : gan::CriticSpec::unconditional_paper();
        std::string scope = std::string("gan.uncond:") + c;
        gan::Generator gen(gs, derive_seed(cfg.master_seed, scope + ".gen"));
        gan::Critic critic(cspec, derive_seed(cfg.master_seed, scope + ".critic"));
        gen.trained_label = c;
        gan::GanTrainConfig gc = cfg.gan;
        gc.seed = derive_seed(cfg.master_seed, scope + ".train");
        gc.out_dir = out_dir;
        gan::train_gan(gen, critic, class_beats, cfg.classes, gc);
        pl::save_generator_bundle(out_dir, gen, cfg.classes);
    } else {
        throw ConfigError("train-gan: --model must be conditional or unconditional");
    }
    std::cout << "model saved under " << out_dir.string() << "\n";
    return 0;
}

int cmd_generate(const std::string& model_dir, int64_t n, const std::string& cls,
                 uint64_t seed, const std::string& out_csv) {
    std::vector<char> class_order;
    auto gen = pl::load_generator_bundle(model_dir, class_order);
    std::optional<char> c;
    if (!cls.empty()) {
        if (cls.size() != 1) throw ConfigError("generate: --class is a single character");
        c = cls[0];
    }
    auto beats = gan::generate(*gen, n, c, class_order, seed);
    fs::path out = out_csv;
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    save_csv_beats(out, beats);
    fs::path manifest = out;
    manifest.replace_extension(".manifest.json");
    save_manifest(manifest, beats, seed, model_dir);
    std::cout << "wrote " << beats.size() << " generated beats to " << out.string() << "\n";
    return 0;
}

int cmd_screen(const pl::ExperimentConfig& cfg, const std::string& beats_csv,
               const std::string& real_csv, const std::string& out) {
    auto generated = load_csv_beats(beats_csv);
    auto real = load_csv_beats(real_csv);
    fs::path out_dir = out;
    fs::create_directories(out_dir);

    auto gen_by_class = group_by_class(generated);
    auto real_by_class = group_by_class(real);

    std::vector<Beat> kept_all;
    for (auto& [cls, group] : gen_by_class) {
        auto rit = real_by_class.find(cls);
        if (rit == real_by_class.end())
            throw Error(std::string("screen: no real beats for class ") + cls +
                        " to build a template");
        TemplateSelection sel = cfg.template_sel;
        sel.seed = derive_seed(cfg.master_seed, std::string("template:") + cls);
        BeatTemplate tmpl = select_template(rit->second, sel);
        double thr = cfg.screen.threshold_for(cls);
        ScreenResult res = screen(group, tmpl, thr);
        write_screening_csv(out_dir / (std::string("screening_") + cls + ".csv"), group,
                            res.distances, thr);
        for (auto& b : res.kept) kept_all.push_back(std::move(b));
        std::cout << "class " << cls << ": kept " << res.kept.size() << "/" << group.size()
                  << " at threshold " << thr << "\n";
    }
    save_csv_beats(out_dir / "screened.csv", kept_all);
    save_manifest(out_dir / "screened.manifest.json", kept_all, cfg.master_seed, beats_csv);
    return 0;
}

int cmd_train_clf(const pl::ExperimentConfig& cfg, const std::string& train_csv,
                  const std::string& out) {
    auto beats = load_csv_beats(train_csv);
    fs::path out_dir = out.empty() ? cfg.out_dir / "models" / "classifier" : fs::path(out);
    int64_t n_cls = static_cast<int64_t>(cfg.classes.size());
    clf::ResNetSpec rs = cfg.clf_full34 ? clf::ResNetSpec::full34(n_cls)
                                        : clf::ResNetSpec::desk(n_cls);
    clf::ResNet net(rs, derive_seed(cfg.master_seed, "clf.init"));
    clf::ClfTrainConfig cc = cfg.clf;
    cc.seed = derive_seed(cfg.master_seed, "clf.train");
    cc.out_dir = out_dir;
    auto res = clf::train_classifier(net, beats, cfg.classes, cc);
    pl::save_classifier_bundle(out_dir, net, cfg.classes);
    std::cout << "final train accuracy " << res.history.back().accuracy << ", model under "
              << out_dir.string() << "\n";
    return 0;
}

int cmd_eval(const std::string& model_dir, const std::string& test_csv, const std::string& out,
             uint64_t seed) {
    std::vector<char> classes;
    auto net = pl::load_classifier_bundle(model_dir, classes);
    auto beats = load_csv_beats(test_csv);

    std::vector<char> y_true;
    for (const auto& b : beats) y_true.push_back(b.label);
    auto probs = clf::predict(*net, beats);
    auto y_pred = clf::predicted_labels(probs, classes);
    auto report = metrics::prf_report(metrics::confusion(y_true, y_pred, classes));
    metrics::add_pr_curves(report, y_true, probs);

    fs::path out_dir = out;
    fs::create_directories(out_dir);
    std::string payload = pl::report_to_json(report, "eval", seed);
    fs::path tmp = out_dir / "report.json.tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        os << payload;
    }
    fs::rename(tmp, out_dir / "report.json");
    metrics::write_confusion_csv(out_dir / "confusion.csv", report.cm);
    metrics::write_pr_svg(out_dir / "pr_curves.svg", report);
    std::cout << "accuracy " << report.accuracy << ", reports under " << out_dir.string() << "\n";
    return 0;
}

int cmd_run(const pl::ExperimentConfig& cfg, const std::vector<std::string>& case_args) {
    std::vector<pl::CaseId> cases;
    if (case_args.empty()) {
        cases = pl::all_cases();
    } else {
        for (const auto& s : case_args) {
            auto id = pl::case_from_string(s);
            if (!id) throw ConfigError("run: unknown case '" + s + "'");
            cases.push_back(*id);
        }
    }
    auto result = pl::run(cfg, cases);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& o : result.outcomes) {
        if (o.ok)
            std::cout << pl::case_name(o.id) << ": accuracy " << o.report.accuracy << "\n";
        else
            std::cerr << pl::case_name(o.id) << ": FAILED: " << o.error << "\n";
    }
    for (const auto& [id, ni] : result.improvements)
        std::cout << pl::case_name(id) << ": net improvement total " << ni.total << ", minor "
                  << ni.minor << "\n";
    std::cout << "reports under " << cfg.out_dir.string() << "\n";
    return result.all_ok() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECG heartbeat augmentation experiments: WGAN-GP generation, DTW screening "
                 "and residual-network classification"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out, beats_csv, real_csv, model, model_dir, cls,
        train_csv, test_csv;
    int64_t seed = 0, n = 0;
    bool seed_set = false;
    std::vector<std::string> case_args;

    app.add_option("--config", config_path, "experiment config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "master seed override")->each([&](const std::string&) {
        seed_set = true;
    });
    app.add_option("--data-dir", data_dir, "record directory or beats CSV");
    app.add_option("--out", out, "output directory/file");
    app.add_option("--case", case_args, "cases to run (reference,i,ii,iii,iv)");

    auto* c_ingest = app.add_subcommand("ingest", "parse WFDB records and print a summary");
    auto* c_segment =
        app.add_subcommand("segment", "segment records into fixed-length labelled beats");
    auto* c_train_gan = app.add_subcommand("train-gan", "train a generator/critic pair");
    c_train_gan->add_option("--beats", beats_csv, "training beats CSV")->required();
    c_train_gan->add_option("--model", model, "conditional | unconditional")->required();
    c_train_gan->add_option("--class", cls, "class for the unconditional model");
    auto* c_generate = app.add_subcommand("generate", "sample synthetic beats from a model");
    c_generate->add_option("--model-dir", model_dir, "trained generator bundle")->required();
    c_generate->add_option("--n", n, "number of beats")->required();
    c_generate->add_option("--class", cls, "class (conditional models only)");
    auto* c_screen = app.add_subcommand("screen", "DTW-screen generated beats against templates");
    c_screen->add_option("--beats", beats_csv, "generated beats CSV")->required();
    c_screen->add_option("--real", real_csv, "real beats CSV for templates")->required();
    auto* c_train_clf = app.add_subcommand("train-clf", "train the beat classifier");
    c_train_clf->add_option("--train", train_csv, "training beats CSV")->required();
    auto* c_eval = app.add_subcommand("eval", "evaluate a classifier on a test set");
    c_eval->add_option("--model-dir", model_dir, "trained classifier bundle")->required();
    c_eval->add_option("--test", test_csv, "test beats CSV")->required();
    auto* c_run =
        app.add_subcommand("run", "run the reference and augmented cases end to end");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        pl::ExperimentConfig cfg = load_config(config_path);
        apply_overrides(cfg, data_dir, out, seed, seed_set);

        if (c_ingest->parsed()) {
            if (data_dir.empty()) throw ConfigError("ingest: --data-dir is required");
            return cmd_ingest(data_dir);
        }
        if (c_segment->parsed()) {
            if (out.empty()) throw ConfigError("segment: --out <beats.csv> is required");
            return cmd_segment(cfg, out);
        }
        if (c_train_gan->parsed()) return cmd_train_gan(cfg, beats_csv, model, cls, out);
        if (c_generate->parsed()) {
            if (out.empty()) throw ConfigError("generate: --out <beats.csv> is required");
            return cmd_generate(model_dir, n, cls, cfg.master_seed, out);
        }
        if (c_screen->parsed()) {
            if (out.empty()) throw ConfigError("screen: --out <dir> is required");
            return cmd_screen(cfg, beats_csv, real_csv, out);
        }
        if (c_train_clf->parsed()) return cmd_train_clf(cfg, train_csv, out);
        if (c_eval->parsed()) {
            if (out.empty()) throw ConfigError("eval: --out <dir> is required");
            return cmd_eval(model_dir, test_csv, out, cfg.master_seed);
        }
        if (c_run->parsed()) return cmd_run(cfg, case_args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
