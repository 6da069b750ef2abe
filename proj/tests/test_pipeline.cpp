#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ecgaug/error.hpp"
#include "ecgaug/pipeline.hpp"

using namespace ecgaug;
namespace pl = ecgaug::pipeline;
namespace fs = std::filesystem;

namespace {

Beat stub_beat(char label, double value) {
    Beat b;
    b.label = label;
    b.samples.assign(kBeatLength, value);
    b.provenance = Provenance::Generated;
    return b;
}

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE(is.good());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

pl::ExperimentConfig micro_config(const fs::path& dir, const std::string& extra = "") {
    pl::ExperimentConfig cfg = pl::parse_config_text(
        "[data]\n"
        "source = csv\n"
        "path = " + (dir / "beats.csv").string() + "\n"
        "classes = N,L,R\n"
        "[gan]\n"
        "epochs = 2\n"
        "n_critic = 2\n"
        "batch_size = 8\n"
        "[augment]\n"
        "target = 30\n"
        "pool_factor = 3\n"
        "[classifier]\n"
        "epochs = 2\n"
        "batch_size = 16\n"
        "[eval]\n"
        "minor_classes = R\n"
        "[screen]\n"
        "threshold.default = 1000\n"
        "threshold.L = 1000\n"
        "[run]\n"
        "out = " + (dir / "out").string() + "\n"
        "seed = 11\n" + extra);
    return cfg;
}

void write_micro_dataset(const fs::path& dir) {
    pl::SyntheticSpec spec;
    spec.counts = {{'N', 40}, {'L', 24}, {'R', 16}};
    spec.seed = 5;
    auto beats = pl::synth_dataset(spec);
    save_csv_beats(dir / "beats.csv", beats);
}

} // namespace

TEST_CASE("config parsing") {
    SUBCASE("defaults mirror the reference protocol") {
        pl::ExperimentConfig cfg = pl::parse_config_text("");
        CHECK(cfg.classes == std::vector<char>{'P', 'A', 'L', 'N', 'R', 'f', 'j'});
        CHECK(cfg.split.test_fraction == 0.1);
        CHECK(cfg.split.train_usage == 0.5);
        CHECK(cfg.gan.batch_size == 16);
        CHECK(cfg.gan.lr == 1e-4);
        CHECK(cfg.gan.lambda_gp == 10.0);
        CHECK(cfg.gan.n_critic == 5);
        CHECK(cfg.balance_target == 10000);
        CHECK(cfg.screen.threshold_for('P') == 1.75);
        CHECK(cfg.screen.threshold_for('L') == 5.0);
        CHECK(cfg.minor_classes == std::vector<char>{'f', 'j'});
    }
    SUBCASE("sections and overrides") {
        auto cfg = pl::parse_config_text(
            "[data]\nsource = csv\npath = x.csv\nclasses = N, L\n"
            "[split]\ntest_fraction = 0.2\n"
            "[gan]\nepochs = 7\ndesk_scale = false\n"
            "[screen]\nthreshold.default = 2.5\nthreshold.R = 9\ntemplate = expert:3\n"
            "[augment]\ntarget = 500\n"
            "[run]\nseed = 99\nout = results\n");
        CHECK(cfg.classes == std::vector<char>{'N', 'L'});
        CHECK(cfg.split.test_fraction == 0.2);
        CHECK(cfg.gan.epochs == 7);
        CHECK_FALSE(cfg.gan_desk_scale);
        CHECK(cfg.screen.threshold_for('N') == 2.5);
        CHECK(cfg.screen.threshold_for('R') == 9.0);
        CHECK(cfg.template_sel.kind == TemplateSelection::Kind::ExpertIndex);
        CHECK(cfg.template_sel.expert_index == 3);
        CHECK(cfg.balance_target == 500);
        CHECK(cfg.master_seed == 99);
        CHECK(cfg.out_dir == fs::path("results"));
    }
    SUBCASE("rejections") {
        CHECK_THROWS_AS(pl::parse_config_text("[data]\nsource = xml\n"), ConfigError);
        CHECK_THROWS_AS(pl::parse_config_text("[gan]\nepochs = many\n"), ConfigError);
        CHECK_THROWS_AS(pl::parse_config_text("[nope]\nkey = 1\n"), ConfigError);
        CHECK_THROWS_AS(pl::parse_config_text("[data]\nclasses = NL\n"), ConfigError);
        CHECK_THROWS_AS(pl::parse_config_text("broken line\n"), ConfigError);
    }
    SUBCASE("comments and blanks are ignored") {
        auto cfg = pl::parse_config_text("# comment\n\n; other comment\n[run]\nseed = 4\n");
        CHECK(cfg.master_seed == 4);
    }
}

TEST_CASE("case names") {
    CHECK(std::string(pl::case_name(pl::CaseId::Reference)) == "reference");
    CHECK(std::string(pl::case_name(pl::CaseId::III)) == "case_iii");
    CHECK(pl::case_from_string("reference") == pl::CaseId::Reference);
    CHECK(pl::case_from_string("II") == pl::CaseId::II);
    CHECK(pl::case_from_string("case_iv") == pl::CaseId::IV);
    CHECK_FALSE(pl::case_from_string("case_v").has_value());
    CHECK(pl::case_is_conditional(pl::CaseId::I));
    CHECK_FALSE(pl::case_is_conditional(pl::CaseId::IV));
    CHECK(pl::case_is_screened(pl::CaseId::II));
    CHECK(pl::case_is_screened(pl::CaseId::IV));
}

TEST_CASE("balance") {
    SUBCASE("fills the reference f-class deficit exactly") {
        std::vector<Beat> train;
        for (int i = 0; i < 441; ++i) train.push_back(stub_beat('f', 0.0));
        std::map<char, std::vector<Beat>> pool;
        pool['f'].assign(20000, stub_beat('f', 0.5));
        auto out = pl::balance(train, pool, {'f'}, 10000);
        CHECK(out.size() == 10000);
        int64_t real = 0, synth = 0;
        for (const auto& b : out) (b.samples[0] == 0.0 ? real : synth)++;
        CHECK(real == 441);
        CHECK(synth == 9559);
    }
    SUBCASE("classes at the target are unchanged") {
        std::vector<Beat> train(12, stub_beat('N', 0.1));
        std::map<char, std::vector<Beat>> pool;
        auto out = pl::balance(train, pool, {'N'}, 10);
        CHECK(out.size() == 12);
    }
    SUBCASE("synthetic beats appended in generation order") {
        std::vector<Beat> train(2, stub_beat('N', 0.0));
        std::map<char, std::vector<Beat>> pool;
        for (int i = 0; i < 5; ++i) pool['N'].push_back(stub_beat('N', 0.1 * (i + 1)));
        auto out = pl::balance(train, pool, {'N'}, 4);
        REQUIRE(out.size() == 4);
        CHECK(out[2].samples[0] == doctest::Approx(0.1));
        CHECK(out[3].samples[0] == doctest::Approx(0.2));
    }
    SUBCASE("shortfall names the class and deficit") {
        std::vector<Beat> train(3, stub_beat('j', 0.0));
        std::map<char, std::vector<Beat>> pool;
        pool['j'].assign(10, stub_beat('j', 0.5));
        try {
            pl::balance(train, pool, {'j'}, 103);
            FAIL("expected Error");
        } catch (const Error& e) {
            std::string msg = e.what();
            CHECK(msg.find('j') != std::string::npos);
            CHECK(msg.find("100") != std::string::npos);
        }
    }
    SUBCASE("real beats never mutated or removed") {
        std::vector<Beat> train(4, stub_beat('N', -0.25));
        std::map<char, std::vector<Beat>> pool;
        pool['N'].assign(8, stub_beat('N', 0.5));
        auto out = pl::balance(train, pool, {'N'}, 6);
        for (int i = 0; i < 4; ++i) CHECK(out[static_cast<size_t>(i)].samples[0] == -0.25);
    }
}

TEST_CASE("synthetic dataset") {
    pl::SyntheticSpec spec;
    spec.seed = 3;
    auto beats = pl::synth_dataset(spec);
    CHECK(beats.size() == 1280);
    CHECK(beats.size() <= 2000);
    auto counts = class_counts(beats);
    CHECK(counts['N'] == 900);
    CHECK(counts['L'] == 300);
    CHECK(counts['R'] == 80);
    for (const auto& b : beats) validate_beat(b);

    auto again = pl::synth_dataset(spec);
    for (size_t i = 0; i < 50; ++i)
        CHECK(beats[i].samples[100] == again[i].samples[100]);

    pl::SyntheticSpec other = spec;
    other.seed = 4;
    auto different = pl::synth_dataset(other);
    bool any_diff = false;
    for (size_t i = 0; i < 50 && !any_diff; ++i)
        if (beats[i].samples[100] != different[i].samples[100]) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("reference run is byte-identical across repeats") {
    fs::path dir = fs::temp_directory_path() / "ecgaug_pipe_det";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_micro_dataset(dir);
    auto cfg = micro_config(dir);

    auto r1 = pl::run(cfg, {pl::CaseId::Reference});
    REQUIRE(r1.all_ok());
    std::string first = read_file(dir / "out" / "reference" / "report.json");

    auto r2 = pl::run(cfg, {pl::CaseId::Reference});
    REQUIRE(r2.all_ok());
    std::string second = read_file(dir / "out" / "reference" / "report.json");
    CHECK(first == second);

    // layout: exactly the three report files for the case
    CHECK(fs::exists(dir / "out" / "reference" / "report.json"));
    CHECK(fs::exists(dir / "out" / "reference" / "confusion.csv"));
    CHECK(fs::exists(dir / "out" / "reference" / "pr_curves.svg"));
    CHECK_FALSE(fs::exists(dir / "out" / "summary"));
    fs::remove_all(dir);
}

TEST_CASE("full run layout, screening cannot add beats, shared test set") {
    fs::path dir = fs::temp_directory_path() / "ecgaug_pipe_full";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_micro_dataset(dir);
    auto cfg = micro_config(dir);

    auto result = pl::run(cfg, pl::all_cases());
    REQUIRE(result.outcomes.size() == 5);
    for (const auto& o : result.outcomes) {
        CAPTURE(pl::case_name(o.id));
        CAPTURE(o.error);
        CHECK(o.ok);
    }

    // Case II appended set can only be <= Case I (screening discards)
    REQUIRE(result.appended.count(pl::CaseId::I));
    REQUIRE(result.appended.count(pl::CaseId::II));
    for (auto& [cls, n] : result.appended[pl::CaseId::II])
        CHECK(n <= result.appended[pl::CaseId::I][cls]);

    // one shared test set: identical per-class supports in every report
    const auto& ref = result.outcomes[0].report;
    for (const auto& o : result.outcomes)
        for (char c : ref.order)
            CHECK(o.report.per_class.at(c).support == ref.per_class.at(c).support);

    // emitted layout
    for (const char* c : {"reference", "case_i", "case_ii", "case_iii", "case_iv"}) {
        CHECK(fs::exists(dir / "out" / c / "report.json"));
        CHECK(fs::exists(dir / "out" / c / "confusion.csv"));
        CHECK(fs::exists(dir / "out" / c / "pr_curves.svg"));
    }

    // every report validates against the documented schema
    for (const char* c : {"reference", "case_i", "case_ii", "case_iii", "case_iv"}) {
        nlohmann::json j = nlohmann::json::parse(read_file(dir / "out" / c / "report.json"));
        CHECK(j.at("case").get<std::string>() == c);
        CHECK(j.contains("seed"));
        CHECK(j.at("classes").get<std::string>() == "NLR");
        CHECK(j.at("accuracy").is_number());
        for (const char* cls : {"N", "L", "R"}) {
            const auto& pc = j.at("per_class").at(cls);
            CHECK(pc.contains("precision"));
            CHECK(pc.contains("recall"));
            CHECK(pc.contains("f1"));
            CHECK(pc.contains("support"));
        }
        for (const char* agg : {"macro_avg", "micro_avg", "weighted_avg"})
            CHECK(j.at(agg).contains("precision"));
        CHECK(j.at("confusion").at("counts").size() == 3);
        CHECK(j.at("confusion").at("row_pct").size() == 3);
        CHECK(j.at("pr_curves").size() == 3);
    }
    CHECK(fs::exists(dir / "out" / "summary" / "net_improvement.csv"));
    CHECK(fs::exists(dir / "out" / "summary" / "quality.csv"));

    // net_improvement.csv: header + 2 rows, 4 data columns
    std::string ni = read_file(dir / "out" / "summary" / "net_improvement.csv");
    CHECK(ni.find("metric,case_i,case_ii,case_iii,case_iv") == 0);
    CHECK(ni.find("total,") != std::string::npos);
    CHECK(ni.find("minor_classes,") != std::string::npos);

    // no stray temp files (writes are temp-then-rename)
    for (auto& e : fs::recursive_directory_iterator(dir / "out"))
        CHECK(e.path().extension() != ".tmp");

    // re-running overwrites in place
    auto again = pl::run(cfg, pl::all_cases());
    CHECK(again.all_ok());
    fs::remove_all(dir);
}

TEST_CASE("a failing case does not abort the others") {
    fs::path dir = fs::temp_directory_path() / "ecgaug_pipe_fail";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_micro_dataset(dir);
    // impossible screening threshold starves cases II/IV
    auto cfg = micro_config(dir);
    cfg.screen.default_threshold = 1e-6;
    cfg.screen.per_class.clear();

    auto result = pl::run(cfg, {pl::CaseId::Reference, pl::CaseId::II, pl::CaseId::III});
    REQUIRE(result.outcomes.size() == 3);
    CHECK(result.outcomes[0].ok);
    CHECK_FALSE(result.outcomes[1].ok);
    CHECK(result.outcomes[1].error.find("balance") != std::string::npos);
    CHECK(result.outcomes[2].ok);
    CHECK_FALSE(result.all_ok());
    fs::remove_all(dir);
}

TEST_CASE("generator bundles round trip") {
    fs::path dir = fs::temp_directory_path() / "ecgaug_pipe_bundle";
    fs::remove_all(dir);
    fs::create_directories(dir);

    gan::Generator gen(gan::GeneratorSpec::conditional_desk(3), 77);
    gen.trained_label = '?';
    pl::save_generator_bundle(dir, gen, {'N', 'L', 'R'});

    std::vector<char> classes;
    auto loaded = pl::load_generator_bundle(dir, classes);
    CHECK(classes == std::vector<char>{'N', 'L', 'R'});
    CHECK(loaded->spec().conditional);

    auto a = gan::generate(gen, 3, 'L', {'N', 'L', 'R'}, 9);
    auto b = gan::generate(*loaded, 3, 'L', {'N', 'L', 'R'}, 9);
    for (size_t i = 0; i < a.size(); ++i)
        for (int j = 0; j < kBeatLength; ++j)
            CHECK(a[i].samples[static_cast<size_t>(j)] == b[i].samples[static_cast<size_t>(j)]);
    fs::remove_all(dir);
}
