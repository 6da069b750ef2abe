#include <doctest.h>

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ecgaug/error.hpp"
#include "ecgaug/metrics.hpp"
#include "ecgaug/rng.hpp"

using namespace ecgaug;
namespace m = ecgaug::metrics;

namespace {

nlohmann::json load_fixture() {
    std::ifstream is(std::string(ECGAUG_FIXTURE_DIR) + "/confusion_matrices.json");
    REQUIRE(is.good());
    nlohmann::json j;
    is >> j;
    return j;
}

m::PctMatrix pct_from_fixture(const nlohmann::json& j, const std::string& key) {
    m::PctMatrix out;
    for (const auto& s : j["order"]) out.order.push_back(s.get<std::string>()[0]);
    for (const auto& row : j[key]) out.pct.push_back(row.get<std::vector<double>>());
    return out;
}

} // namespace

TEST_CASE("confusion basics") {
    SUBCASE("perfect predictions give a 100% diagonal") {
        std::vector<char> t = {'A', 'N', 'A', 'N', 'N'};
        auto cm = m::confusion(t, t, {'A', 'N'});
        auto pct = cm.row_pct();
        CHECK(pct[0][0] == 100.0);
        CHECK(pct[1][1] == 100.0);
        CHECK(pct[0][1] == 0.0);
    }
    SUBCASE("hand-counted case") {
        std::vector<char> t = {'A', 'A', 'N'};
        std::vector<char> p = {'A', 'N', 'N'};
        auto cm = m::confusion(t, p, {'A', 'N'});
        CHECK(cm.counts[0][0] == 1);
        CHECK(cm.counts[0][1] == 1);
        CHECK(cm.counts[1][1] == 1);
        auto pct = cm.row_pct();
        CHECK(pct[0][0] == doctest::Approx(50.0));
        CHECK(pct[0][1] == doctest::Approx(50.0));
        CHECK(pct[1][0] == 0.0);
        CHECK(pct[1][1] == doctest::Approx(100.0));
    }
    SUBCASE("empty input and unknown labels are rejected") {
        std::vector<char> e;
        CHECK_THROWS_AS(m::confusion(e, e, {'A'}), Error);
        std::vector<char> t = {'Z'};
        std::vector<char> p = {'A'};
        CHECK_THROWS_AS(m::confusion(t, p, {'A'}), Error);
    }
    SUBCASE("zero-support rows are flagged and all-zero") {
        std::vector<char> t = {'A', 'A'};
        std::vector<char> p = {'A', 'N'};
        auto cm = m::confusion(t, p, {'A', 'N'});
        auto flags = cm.zero_support_rows();
        CHECK_FALSE(flags[0]);
        CHECK(flags[1]);
        CHECK(cm.row_pct()[1][0] == 0.0);
        CHECK(cm.row_pct()[1][1] == 0.0);
    }
}

TEST_CASE("prf_report hand case: TP=9 FP=1 FN=3") {
    m::ConfusionMatrix cm;
    cm.order = {'+', '-'};
    cm.counts = {{9, 3}, {1, 7}};
    auto rep = m::prf_report(cm);
    CHECK(rep.per_class['+'].precision == doctest::Approx(0.9).epsilon(1e-3));
    CHECK(rep.per_class['+'].recall == doctest::Approx(0.75).epsilon(1e-3));
    CHECK(rep.per_class['+'].f1 == doctest::Approx(0.818).epsilon(1e-3));
}

TEST_CASE("prf_report properties") {
    SUBCASE("perfect matrix scores 1 everywhere") {
        m::ConfusionMatrix cm;
        cm.order = {'A', 'B', 'C'};
        cm.counts = {{5, 0, 0}, {0, 3, 0}, {0, 0, 9}};
        auto rep = m::prf_report(cm);
        CHECK(rep.accuracy == 1.0);
        for (char c : cm.order) {
            CHECK(rep.per_class[c].precision == 1.0);
            CHECK(rep.per_class[c].recall == 1.0);
            CHECK(rep.per_class[c].f1 == 1.0);
        }
        CHECK(rep.macro.f1 == 1.0);
        CHECK(rep.micro.precision == 1.0);
    }

    SUBCASE("micro precision = micro recall = accuracy on random sets") {
        Rng rng(17);
        std::vector<char> classes = {'P', 'A', 'L', 'N'};
        for (int rep_i = 0; rep_i < 500; ++rep_i) {
            size_t n = 5 + static_cast<size_t>(rng.below(60));
            std::vector<char> t(n), p(n);
            for (size_t i = 0; i < n; ++i) {
                t[i] = classes[static_cast<size_t>(rng.below(4))];
                p[i] = classes[static_cast<size_t>(rng.below(4))];
            }
            auto rep = m::prf_report(m::confusion(t, p, classes));
            CHECK(rep.micro.precision == doctest::Approx(rep.accuracy).epsilon(1e-12));
            CHECK(rep.micro.recall == doctest::Approx(rep.accuracy).epsilon(1e-12));
        }
    }

    SUBCASE("row percentages sum to 100 for supported rows") {
        Rng rng(19);
        std::vector<char> classes = {'A', 'B', 'C'};
        std::vector<char> t(40), p(40);
        for (size_t i = 0; i < t.size(); ++i) {
            t[i] = classes[static_cast<size_t>(rng.below(3))];
            p[i] = classes[static_cast<size_t>(rng.below(3))];
        }
        auto cm = m::confusion(t, p, classes);
        auto pct = cm.row_pct();
        auto zero = cm.zero_support_rows();
        for (size_t r = 0; r < pct.size(); ++r) {
            if (zero[r]) continue;
            double sum = 0;
            for (double v : pct[r]) sum += v;
            CHECK(std::fabs(sum - 100.0) < 0.2);
        }
    }

    SUBCASE("transposing the matrix swaps precision and recall") {
        m::ConfusionMatrix cm;
        cm.order = {'A', 'B'};
        cm.counts = {{8, 2}, {3, 7}};
        m::ConfusionMatrix cmt;
        cmt.order = cm.order;
        cmt.counts = {{8, 3}, {2, 7}};
        auto rep = m::prf_report(cm);
        auto rept = m::prf_report(cmt);
        for (char c : cm.order) {
            CHECK(rep.per_class[c].precision == doctest::Approx(rept.per_class[c].recall));
            CHECK(rep.per_class[c].recall == doctest::Approx(rept.per_class[c].precision));
        }
    }

    SUBCASE("zero denominators score 0 and are flagged") {
        m::ConfusionMatrix cm;
        cm.order = {'A', 'B'};
        cm.counts = {{4, 0}, {2, 0}}; // nothing ever predicted B
        auto rep = m::prf_report(cm);
        CHECK(rep.per_class['B'].precision == 0.0);
        CHECK_FALSE(rep.per_class['B'].precision_defined);
        CHECK(rep.per_class['B'].recall == 0.0);
        CHECK(rep.per_class['B'].recall_defined);
    }
}

TEST_CASE("pr curves") {
    SUBCASE("perfect separation gives AP 1") {
        std::vector<int> truth = {1, 1, 0, 0};
        std::vector<double> scores = {0.9, 0.8, 0.2, 0.1};
        auto c = m::pr_curve(truth, scores);
        REQUIRE(c.defined);
        CHECK(c.average_precision == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("constant scores: precision at full recall equals prevalence") {
        std::vector<int> truth = {1, 0, 0, 1, 0};
        std::vector<double> scores(5, 0.5);
        auto c = m::pr_curve(truth, scores);
        REQUIRE(c.defined);
        REQUIRE(c.recall.size() == 1); // one threshold
        CHECK(c.recall[0] == 1.0);
        CHECK(c.precision[0] == doctest::Approx(0.4));
        CHECK(c.average_precision == doctest::Approx(0.4));
    }
    SUBCASE("four-sample hand case") {
        std::vector<int> truth = {1, 0, 1, 0};
        std::vector<double> scores = {0.9, 0.8, 0.4, 0.1};
        auto c = m::pr_curve(truth, scores);
        // thresholds .9/.8/.4/.1 -> AP = 0.5*1 + 0.5*(2/3)
        CHECK(c.average_precision == doctest::Approx(0.5 + 0.5 * (2.0 / 3.0)).epsilon(1e-9));
        // precision at the smallest positive recall point = top-scored threshold
        CHECK(c.precision.front() == doctest::Approx(1.0));
        CHECK(c.recall.front() == doctest::Approx(0.5));
    }
    SUBCASE("class absent from the truth is flagged undefined") {
        std::vector<int> truth = {0, 0};
        std::vector<double> scores = {0.3, 0.6};
        auto c = m::pr_curve(truth, scores);
        CHECK_FALSE(c.defined);
    }
    SUBCASE("per-class curves and micro curve from probability rows") {
        std::vector<char> y = {'A', 'B', 'A'};
        std::vector<std::vector<double>> probs = {{0.9, 0.1}, {0.2, 0.8}, {0.7, 0.3}};
        m::EvalReport rep;
        rep.order = {'A', 'B'};
        m::add_pr_curves(rep, y, probs);
        REQUIRE(rep.curves.count('A'));
        CHECK(rep.curves['A'].defined);
        CHECK(rep.curves['A'].average_precision == doctest::Approx(1.0));
        CHECK(rep.micro_curve.defined);
    }
}

TEST_CASE("net improvement reproduces the fixture scores") {
    auto j = load_fixture();
    auto ref = pct_from_fixture(j, "reference");
    std::set<char> minor = {'f', 'j'};

    for (const std::string key : {"case_i", "case_ii", "case_iii", "case_iv"}) {
        auto cs = pct_from_fixture(j, key);
        auto ni = m::net_improvement(cs, ref, minor);
        double want_total = j["net_improvement"]["total"][key].get<double>();
        double want_minor = j["net_improvement"]["minor"][key].get<double>();
        CAPTURE(key);
        CHECK(std::fabs(ni.total - want_total) <= 0.15);
        CHECK(std::fabs(ni.minor - want_minor) <= 0.15);
    }
}

TEST_CASE("net improvement properties") {
    auto j = load_fixture();
    auto ref = pct_from_fixture(j, "reference");
    auto ci = pct_from_fixture(j, "case_i");

    auto zero = m::net_improvement(ref, ref, {'f', 'j'});
    CHECK(zero.total == 0.0);
    CHECK(zero.minor == 0.0);

    auto fwd = m::net_improvement(ci, ref, {'f', 'j'});
    auto bwd = m::net_improvement(ref, ci, {'f', 'j'});
    CHECK(fwd.total == doctest::Approx(-bwd.total).epsilon(1e-12));
    CHECK(fwd.minor == doctest::Approx(-bwd.minor).epsilon(1e-12));

    m::PctMatrix scrambled = ref;
    std::swap(scrambled.order[0], scrambled.order[1]);
    CHECK_THROWS_AS(m::net_improvement(ci, scrambled, {'f', 'j'}), Error);
}

TEST_CASE("fixture micro rows match weighted averages, not pooled micro") {
    // Documented discrepancy in the case_i fixture: micro precision 0.95
    // next to accuracy 0.92 violates the pooled-count identity. Counts
    // reconstructed from the matrix show the 0.95 matches the
    // support-weighted precision instead.
    auto j = load_fixture();
    auto pct = pct_from_fixture(j, "case_i");
    auto supports = j["supports"].get<std::vector<int64_t>>();

    m::ConfusionMatrix cm;
    cm.order = pct.order;
    cm.counts.assign(cm.order.size(), std::vector<int64_t>(cm.order.size(), 0));
    for (size_t r = 0; r < cm.order.size(); ++r)
        for (size_t c = 0; c < cm.order.size(); ++c)
            cm.counts[r][c] = std::llround(pct.pct[r][c] * static_cast<double>(supports[r]) / 100.0);

    auto rep = m::prf_report(cm);
    CHECK(rep.micro.precision == doctest::Approx(rep.accuracy).epsilon(1e-12));
    CHECK(std::fabs(rep.accuracy - 0.92) < 0.02);
    CHECK(std::fabs(rep.weighted.precision - 0.95) < 0.02);
}

TEST_CASE("report files are written atomically") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "ecgaug_metrics_test";
    fs::create_directories(dir);

    std::vector<char> t = {'A', 'B', 'A', 'B'};
    std::vector<char> p = {'A', 'B', 'B', 'B'};
    auto cm = m::confusion(t, p, {'A', 'B'});
    m::write_confusion_csv(dir / "confusion.csv", cm);
    CHECK(fs::exists(dir / "confusion.csv"));
    CHECK_FALSE(fs::exists(dir / "confusion.csv.tmp"));

    auto rep = m::prf_report(cm);
    std::vector<std::vector<double>> probs = {{0.8, 0.2}, {0.3, 0.7}, {0.4, 0.6}, {0.1, 0.9}};
    m::add_pr_curves(rep, t, probs);
    m::write_pr_svg(dir / "pr.svg", rep);
    CHECK(fs::exists(dir / "pr.svg"));
    std::ifstream is(dir / "pr.svg");
    std::string first;
    std::getline(is, first);
    CHECK(first.find("<svg") != std::string::npos);
    fs::remove_all(dir);
}
