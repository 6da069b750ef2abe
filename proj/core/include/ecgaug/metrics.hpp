#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace ecgaug::metrics {

struct ConfusionMatrix {
    std::vector<char> order;
    std::vector<std::vector<int64_t>> counts; // rows = true class, cols = predicted
    // Row-normalized percentages; zero-support rows come back all zero and
    // are flagged in zero_support.
    std::vector<std::vector<double>> row_pct() const;
    std::vector<bool> zero_support_rows() const;
    int64_t total() const;
    int64_t row_sum(size_t row) const;
};

ConfusionMatrix confusion(std::span<const char> y_true, std::span<const char> y_pred,
                          const std::vector<char>& order);

struct ClassScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    int64_t support = 0;
    bool precision_defined = true; // false when TP+FP == 0
    bool recall_defined = true;    // false when TP+FN == 0
};

struct Aggregate {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

struct PrCurve {
    std::vector<double> recall;
    std::vector<double> precision;
    double average_precision = 0.0;
    bool defined = false; // false when the class never appears in the truth
};

struct EvalReport {
    std::vector<char> order;
    ConfusionMatrix cm;
    std::map<char, ClassScore> per_class;
    double accuracy = 0.0;
    Aggregate macro;
    Aggregate micro;    // pooled counts; precision == recall == accuracy
    Aggregate weighted; // support-weighted per-class mean
    std::map<char, PrCurve> curves;
    PrCurve micro_curve;
};

// Scores derived from a confusion matrix. Zero denominators score 0 and are
// flagged per class.
EvalReport prf_report(const ConfusionMatrix& cm);

// One-vs-rest curve over all score thresholds (descending); average precision
// by step-wise integration sum (R_i - R_{i-1}) * P_i.
PrCurve pr_curve(std::span<const int> truth01, std::span<const double> scores);

// Per-class curves from probability rows plus the micro curve over pooled
// (sample, class) pairs. Fills report.curves / report.micro_curve.
void add_pr_curves(EvalReport& report, std::span<const char> y_true,
                   const std::vector<std::vector<double>>& prob_rows);

struct PctMatrix {
    std::vector<char> order;
    std::vector<std::vector<double>> pct;
};

PctMatrix to_pct_matrix(const ConfusionMatrix& cm);

struct NetImprovement {
    double total = 0.0;
    double minor = 0.0;
};

// Algebraic sum of diagonal differences (case - reference) over all classes,
// and restricted to the minor classes. Matrices must share the class order.
NetImprovement net_improvement(const PctMatrix& case_pct, const PctMatrix& reference_pct,
                               const std::set<char>& minor_classes);

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
void write_pr_svg(const std::filesystem::path& path, const EvalReport& report);

} // namespace ecgaug::metrics
