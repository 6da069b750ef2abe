#include "ecgaug/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ecgaug/error.hpp"

namespace ecgaug::metrics {

std::vector<std::vector<double>> ConfusionMatrix::row_pct() const {
    std::vector<std::vector<double>> out(counts.size(), std::vector<double>(order.size(), 0.0));
    for (size_t r = 0; r < counts.size(); ++r) {
        int64_t sum = row_sum(r);
        if (sum == 0) continue;
        for (size_t c = 0; c < counts[r].size(); ++c)
            out[r][c] = 100.0 * static_cast<double>(counts[r][c]) / static_cast<double>(sum);
    }
    return out;
}

std::vector<bool> ConfusionMatrix::zero_support_rows() const {
    std::vector<bool> out(counts.size());
    for (size_t r = 0; r < counts.size(); ++r) out[r] = row_sum(r) == 0;
    return out;
}

int64_t ConfusionMatrix::total() const {
    int64_t t = 0;
    for (size_t r = 0; r < counts.size(); ++r) t += row_sum(r);
    return t;
}

int64_t ConfusionMatrix::row_sum(size_t row) const {
    return std::accumulate(counts[row].begin(), counts[row].end(), int64_t{0});
}

ConfusionMatrix confusion(std::span<const char> y_true, std::span<const char> y_pred,
                          const std::vector<char>& order) {
    if (y_true.size() != y_pred.size())
        throw Error("confusion: " + std::to_string(y_true.size()) + " truths vs " +
                    std::to_string(y_pred.size()) + " predictions");
    if (y_true.empty()) throw Error("confusion: empty input");
    std::map<char, size_t> idx;
    for (size_t i = 0; i < order.size(); ++i) idx[order[i]] = i;

    ConfusionMatrix cm;
    cm.order = order;
    cm.counts.assign(order.size(), std::vector<int64_t>(order.size(), 0));
    for (size_t i = 0; i < y_true.size(); ++i) {
        auto t = idx.find(y_true[i]);
        auto p = idx.find(y_pred[i]);
        if (t == idx.end())
            throw Error(std::string("confusion: unknown true label '") + y_true[i] + "'");
        if (p == idx.end())
            throw Error(std::string("confusion: unknown predicted label '") + y_pred[i] + "'");
        cm.counts[t->second][p->second]++;
    }
    return cm;
}

EvalReport prf_report(const ConfusionMatrix& cm) {
    EvalReport rep;
    rep.order = cm.order;
    rep.cm = cm;

    size_t n = cm.order.size();
    int64_t total = cm.total();
    int64_t diag = 0;
    int64_t pooled_tp = 0, pooled_fp = 0, pooled_fn = 0;
    double weighted_p = 0, weighted_r = 0, weighted_f = 0;
    double macro_p = 0, macro_r = 0, macro_f = 0;

    for (size_t c = 0; c < n; ++c) {
        int64_t tp = cm.counts[c][c];
        int64_t fn = cm.row_sum(c) - tp;
        int64_t fp = 0;
        for (size_t r = 0; r < n; ++r)
            if (r != c) fp += cm.counts[r][c];

        ClassScore s;
        s.support = cm.row_sum(c);
        s.precision_defined = (tp + fp) > 0;
        s.recall_defined = (tp + fn) > 0;
        s.precision = s.precision_defined
                          ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                          : 0.0;
        s.recall = s.recall_defined ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
        s.f1 = (s.precision + s.recall) > 0
                   ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                   : 0.0;
        rep.per_class[cm.order[c]] = s;

        diag += tp;
        pooled_tp += tp;
        pooled_fp += fp;
        pooled_fn += fn;
        macro_p += s.precision;
        macro_r += s.recall;
        macro_f += s.f1;
        weighted_p += s.precision * static_cast<double>(s.support);
        weighted_r += s.recall * static_cast<double>(s.support);
        weighted_f += s.f1 * static_cast<double>(s.support);
    }

    rep.accuracy = total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
    rep.macro = {macro_p / static_cast<double>(n), macro_r / static_cast<double>(n),
                 macro_f / static_cast<double>(n)};
    double mp = (pooled_tp + pooled_fp) > 0
                    ? static_cast<double>(pooled_tp) / static_cast<double>(pooled_tp + pooled_fp)
                    : 0.0;
    double mr = (pooled_tp + pooled_fn) > 0
                    ? static_cast<double>(pooled_tp) / static_cast<double>(pooled_tp + pooled_fn)
                    : 0.0;
    double mf = (mp + mr) > 0 ? 2.0 * mp * mr / (mp + mr) : 0.0;
    rep.micro = {mp, mr, mf};
    if (total > 0)
        rep.weighted = {weighted_p / static_cast<double>(total),
                        weighted_r / static_cast<double>(total),
                        weighted_f / static_cast<double>(total)};
    return rep;
}

PrCurve pr_curve(std::span<const int> truth01, std::span<const double> scores) {
    if (truth01.size() != scores.size()) throw Error("pr_curve: size mismatch");
    PrCurve out;
    int64_t n_pos = std::count(truth01.begin(), truth01.end(), 1);
    if (n_pos == 0) return out; // undefined: class absent from the truth
    out.defined = true;

    std::vector<size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    int64_t tp = 0, fp = 0;
    double prev_recall = 0.0;
    double ap = 0.0;
    size_t i = 0;
    while (i < idx.size()) {
        // advance over ties so each threshold appears once
        double thr = scores[idx[i]];
        while (i < idx.size() && scores[idx[i]] == thr) {
            if (truth01[idx[i]] == 1)
                ++tp;
            else
                ++fp;
            ++i;
        }
        double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
        out.precision.push_back(precision);
        out.recall.push_back(recall);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    out.average_precision = ap;
    return out;
}

void add_pr_curves(EvalReport& report, std::span<const char> y_true,
                   const std::vector<std::vector<double>>& prob_rows) {
    if (y_true.size() != prob_rows.size()) throw Error("add_pr_curves: size mismatch");
    size_t n_cls = report.order.size();

    std::vector<int> pooled_truth;
    std::vector<double> pooled_scores;
    pooled_truth.reserve(y_true.size() * n_cls);
    pooled_scores.reserve(y_true.size() * n_cls);

    for (size_t c = 0; c < n_cls; ++c) {
        std::vector<int> truth(y_true.size());
        std::vector<double> scores(y_true.size());
        for (size_t i = 0; i < y_true.size(); ++i) {
            if (prob_rows[i].size() != n_cls) throw Error("add_pr_curves: bad probability row");
            truth[i] = y_true[i] == report.order[c] ? 1 : 0;
            scores[i] = prob_rows[i][c];
            pooled_truth.push_back(truth[i]);
            pooled_scores.push_back(scores[i]);
        }
        report.curves[report.order[c]] = pr_curve(truth, scores);
    }
    report.micro_curve = pr_curve(pooled_truth, pooled_scores);
}

PctMatrix to_pct_matrix(const ConfusionMatrix& cm) { return {cm.order, cm.row_pct()}; }

NetImprovement net_improvement(const PctMatrix& case_pct, const PctMatrix& reference_pct,
                               const std::set<char>& minor_classes) {
    if (case_pct.order != reference_pct.order)
        throw Error("net_improvement: class order mismatch");
    if (case_pct.pct.size() != case_pct.order.size() ||
        reference_pct.pct.size() != reference_pct.order.size())
        throw Error("net_improvement: malformed matrix");

    NetImprovement out;
    for (size_t c = 0; c < case_pct.order.size(); ++c) {
        double d = case_pct.pct[c][c] - reference_pct.pct[c][c];
        out.total += d;
        if (minor_classes.count(case_pct.order[c])) out.minor += d;
    }
    return out;
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << "true\\pred";
        for (char c : cm.order) os << ',' << c;
        os << ",row_pct";
        for (char c : cm.order) os << ',' << c << '%';
        os << '\n';
        auto pct = cm.row_pct();
        os.precision(4);
        for (size_t r = 0; r < cm.order.size(); ++r) {
            os << cm.order[r];
            for (size_t c = 0; c < cm.order.size(); ++c) os << ',' << cm.counts[r][c];
            os << ',';
            for (size_t c = 0; c < cm.order.size(); ++c) os << ',' << std::fixed << pct[r][c];
            os.unsetf(std::ios_base::floatfield);
            os << '\n';
        }
    }
    std::filesystem::rename(tmp, path);
}

namespace {

constexpr double kW = 720, kH = 520;
constexpr double kMarginL = 70, kMarginR = 170, kMarginT = 40, kMarginB = 60;

double sx(double recall) { return kMarginL + recall * (kW - kMarginL - kMarginR); }
double sy(double precision) { return kH - kMarginB - precision * (kH - kMarginT - kMarginB); }

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                          "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

void polyline(std::ostringstream& svg, const PrCurve& curve, const std::string& color,
              bool dashed) {
    if (!curve.defined || curve.recall.empty()) return;
    svg << "  <polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\"";
    if (dashed) svg << " stroke-dasharray=\"6,4\"";
    svg << " points=\"";
    // anchor at recall 0 with the first threshold's precision
    svg << sx(0) << ',' << sy(curve.precision.front()) << ' ';
    for (size_t i = 0; i < curve.recall.size(); ++i)
        svg << sx(curve.recall[i]) << ',' << sy(curve.precision[i]) << ' ';
    svg << "\"/>\n";
}

} // namespace

void write_pr_svg(const std::filesystem::path& path, const EvalReport& report) {
    std::ostringstream svg;
    svg.precision(5);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
        << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
    svg << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "  <text x=\"" << kW / 2 - 80 << "\" y=\"24\" font-size=\"16\">Precision-Recall curves</text>\n";

    // axes with 0.2 ticks
    for (int i = 0; i <= 5; ++i) {
        double v = i / 5.0;
        svg << "  <line x1=\"" << sx(v) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(v) << "\" y2=\""
            << sy(0) + 5 << "\" stroke=\"black\"/>\n";
        svg << "  <text x=\"" << sx(v) - 8 << "\" y=\"" << sy(0) + 20 << "\" font-size=\"11\">"
            << v << "</text>\n";
        svg << "  <line x1=\"" << sx(0) - 5 << "\" y1=\"" << sy(v) << "\" x2=\"" << sx(0)
            << "\" y2=\"" << sy(v) << "\" stroke=\"black\"/>\n";
        svg << "  <text x=\"" << sx(0) - 35 << "\" y=\"" << sy(v) + 4 << "\" font-size=\"11\">"
            << v << "</text>\n";
    }
    svg << "  <line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(1) << "\" y2=\""
        << sy(0) << "\" stroke=\"black\"/>\n";
    svg << "  <line x1=\"" << sx(0) << "\" y1=\"" << sy(0) << "\" x2=\"" << sx(0) << "\" y2=\""
        << sy(1) << "\" stroke=\"black\"/>\n";
    svg << "  <text x=\"" << sx(0.5) - 20 << "\" y=\"" << kH - 15
        << "\" font-size=\"13\">Recall</text>\n";
    svg << "  <text x=\"18\" y=\"" << sy(0.5)
        << "\" font-size=\"13\" transform=\"rotate(-90 18," << sy(0.5)
        << ")\">Precision</text>\n";

    double ly = kMarginT + 10;
    size_t color_i = 0;
    for (char cls : report.order) {
        auto it = report.curves.find(cls);
        if (it == report.curves.end()) continue;
        const std::string color = kPalette[color_i % 8];
        polyline(svg, it->second, color, false);
        svg << "  <rect x=\"" << kW - kMarginR + 14 << "\" y=\"" << ly - 9
            << "\" width=\"14\" height=\"4\" fill=\"" << color << "\"/>\n";
        svg << "  <text x=\"" << kW - kMarginR + 34 << "\" y=\"" << ly << "\" font-size=\"12\">"
            << cls;
        if (it->second.defined)
            svg << " (AP=" << it->second.average_precision << ")";
        else
            svg << " (undefined)";
        svg << "</text>\n";
        ly += 20;
        ++color_i;
    }
    if (report.micro_curve.defined) {
        polyline(svg, report.micro_curve, "#000000", true);
        svg << "  <rect x=\"" << kW - kMarginR + 14 << "\" y=\"" << ly - 9
            << "\" width=\"14\" height=\"4\" fill=\"#000000\"/>\n";
        svg << "  <text x=\"" << kW - kMarginR + 34 << "\" y=\"" << ly
            << "\" font-size=\"12\">micro (AP=" << report.micro_curve.average_precision
            << ")</text>\n";
    }
    svg << "</svg>\n";

    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os << svg.str();
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ecgaug::metrics
