#include "dbfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "dbfuse/errors.hpp"

namespace dbfuse {

long long ConfusionMatrix::total() const {
    long long t = 0;
    for (const auto& row : counts) {
        for (long long v : row) t += v;
    }
    return t;
}

long long ConfusionMatrix::row_sum(int c) const {
    long long t = 0;
    for (long long v : counts.at(c)) t += v;
    return t;
}

long long ConfusionMatrix::col_sum(int c) const {
    long long t = 0;
    for (const auto& row : counts) t += row.at(c);
    return t;
}

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                 int num_classes, std::vector<std::string> class_names) {
    if (y_true.empty() || y_true.size() != y_pred.size()) {
        throw EvalError("confusion_matrix: label lists must be non-empty and equal length");
    }
    ConfusionMatrix cm;
    cm.counts.assign(num_classes, std::vector<long long>(num_classes, 0));
    if (class_names.empty()) {
        for (int c = 0; c < num_classes; ++c) class_names.push_back("class_" + std::to_string(c));
    }
    cm.class_names = std::move(class_names);
    for (size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] < 0 || y_true[i] >= num_classes || y_pred[i] < 0 ||
            y_pred[i] >= num_classes) {
            throw EvalError("confusion_matrix: label out of range at index " + std::to_string(i));
        }
        cm.counts[y_true[i]][y_pred[i]]++;
    }
    return cm;
}

OvrCounts ovr_counts(const ConfusionMatrix& cm, int c) {
    if (c < 0 || c >= cm.num_classes()) {
        throw EvalError("ovr_counts: class index out of range: " + std::to_string(c));
    }
    OvrCounts oc;
    oc.tp = cm.counts[c][c];
    oc.fn = cm.row_sum(c) - oc.tp;
    oc.fp = cm.col_sum(c) - oc.tp;
    oc.tn = cm.total() - oc.tp - oc.fn - oc.fp;
    return oc;
}

namespace {

double safe_ratio(long long num, long long den, const char* name, ClassMetrics& m) {
    if (den == 0) {
        m.degenerate_flags.insert(name);
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics class_metrics(const OvrCounts& oc) {
    if (oc.total() <= 0) {
        throw EvalError("class_metrics: empty counts");
    }
    ClassMetrics m;
    m.accuracy = safe_ratio(oc.tp + oc.tn, oc.total(), "accuracy", m);
    m.precision = safe_ratio(oc.tp, oc.tp + oc.fp, "precision", m);
    m.recall = safe_ratio(oc.tp, oc.tp + oc.fn, "recall", m);
    m.specificity = safe_ratio(oc.tn, oc.tn + oc.fp, "specificity", m);
    if (m.precision + m.recall == 0.0) {
        m.degenerate_flags.insert("f1");
        m.f1 = 0.0;
    } else {
        m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    return m;
}

ClassMetrics macro_average(const std::vector<ClassMetrics>& rows) {
    if (rows.empty()) {
        throw EvalError("macro_average: empty row list");
    }
    ClassMetrics avg;
    for (const auto& r : rows) {
        avg.accuracy += r.accuracy;
        avg.precision += r.precision;
        avg.recall += r.recall;
        avg.specificity += r.specificity;
        avg.f1 += r.f1;
        avg.degenerate_flags.insert(r.degenerate_flags.begin(), r.degenerate_flags.end());
    }
    const double n = static_cast<double>(rows.size());
    avg.accuracy /= n;
    avg.precision /= n;
    avg.recall /= n;
    avg.specificity /= n;
    avg.f1 /= n;
    return avg;
}

RocCurve roc_curve(const std::vector<int>& y_true_binary, const std::vector<double>& scores) {
    if (y_true_binary.size() != scores.size() || scores.empty()) {
        throw EvalError("roc_curve: labels and scores must be non-empty and equal length");
    }
    long long P = 0, N = 0;
    for (int y : y_true_binary) {
        if (y == 1) ++P;
        else if (y == 0) ++N;
        else throw EvalError("roc_curve: labels must be 0 or 1");
    }
    if (P == 0 || N == 0) {
        throw EvalError("roc_curve: need at least one positive and one negative sample");
    }

    std::vector<size_t> order(scores.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.emplace_back(0.0, 0.0);
    roc.thresholds.push_back(std::numeric_limits<double>::infinity());

    // Integer accumulation keeps the trapezoid sum exactly equal to the
    // pairwise win-rate estimator: auc = sum(dFP * (TPprev + TPcur)) / (2PN).
    long long tp = 0, fp = 0;
    long long area2 = 0;
    size_t i = 0;
    while (i < order.size()) {
        const double threshold = scores[order[i]];
        long long prev_tp = tp, prev_fp = fp;
        while (i < order.size() && scores[order[i]] == threshold) {
            if (y_true_binary[order[i]] == 1) ++tp;
            else ++fp;
            ++i;
        }
        area2 += (fp - prev_fp) * (prev_tp + tp);
        roc.points.emplace_back(static_cast<double>(fp) / N, static_cast<double>(tp) / P);
        roc.thresholds.push_back(threshold);
    }
    roc.auc = static_cast<double>(area2) / (2.0 * static_cast<double>(P) * static_cast<double>(N));
    return roc;
}

MulticlassRoc multiclass_roc(const std::vector<int>& y_true, const MatD& probs) {
    if (static_cast<int>(y_true.size()) != probs.rows) {
        throw EvalError("multiclass_roc: label count does not match probability rows");
    }
    MulticlassRoc out;
    out.per_class.resize(probs.cols);
    double auc_sum = 0.0;
    int auc_count = 0;
    for (int c = 0; c < probs.cols; ++c) {
        std::vector<int> binary(y_true.size());
        long long pos = 0;
        for (size_t i = 0; i < y_true.size(); ++i) {
            binary[i] = (y_true[i] == c) ? 1 : 0;
            pos += binary[i];
        }
        if (pos == 0 || pos == static_cast<long long>(y_true.size())) {
            out.warnings.push_back("class " + std::to_string(c) +
                                   " has no one-vs-rest contrast in ground truth; curve omitted");
            continue;
        }
        std::vector<double> scores(y_true.size());
        for (size_t i = 0; i < y_true.size(); ++i) scores[i] = probs.at(static_cast<int>(i), c);
        out.per_class[c] = roc_curve(binary, scores);
        auc_sum += out.per_class[c]->auc;
        ++auc_count;
    }
    if (auc_count == 0) {
        throw EvalError("multiclass_roc: no class had both positives and negatives");
    }
    out.macro_auc = auc_sum / auc_count;
    return out;
}

MetricsReport build_report(const std::string& model_name, const std::vector<int>& y_true,
                           const std::vector<int>& y_pred, const MatD& probs,
                           const std::vector<std::string>& class_names) {
    const int C = static_cast<int>(class_names.size());
    MetricsReport rep;
    rep.model_name = model_name;
    rep.class_names = class_names;
    rep.cm = confusion_matrix(y_true, y_pred, C, class_names);
    for (int c = 0; c < C; ++c) {
        rep.per_class.push_back(class_metrics(ovr_counts(rep.cm, c)));
    }
    rep.average = macro_average(rep.per_class);
    rep.roc = multiclass_roc(y_true, probs);
    return rep;
}

double round2(double v) {
    return std::floor(v * 100.0 + 0.5) / 100.0;
}

namespace {

nlohmann::json metrics_to_json(const ClassMetrics& m) {
    return {
        {"accuracy", m.accuracy},
        {"precision", m.precision},
        {"recall", m.recall},
        {"specificity", m.specificity},
        {"f1", m.f1},
        {"degenerate_flags", std::vector<std::string>(m.degenerate_flags.begin(),
                                                      m.degenerate_flags.end())},
    };
}

}  // namespace

void write_metrics_json(const std::string& path, const std::vector<MetricsReport>& reports) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& rep : reports) {
        nlohmann::json per_class = nlohmann::json::object();
        nlohmann::json aucs = nlohmann::json::object();
        for (size_t c = 0; c < rep.per_class.size(); ++c) {
            per_class[rep.class_names[c]] = metrics_to_json(rep.per_class[c]);
            if (c < rep.roc.per_class.size() && rep.roc.per_class[c]) {
                aucs[rep.class_names[c]] = rep.roc.per_class[c]->auc;
            }
        }
        out.push_back({
            {"model", rep.model_name},
            {"class_names", rep.class_names},
            {"per_class", per_class},
            {"average", metrics_to_json(rep.average)},
            {"confusion_matrix", rep.cm.counts},
            {"auc", aucs},
            {"macro_auc", rep.roc.macro_auc},
            {"roc_warnings", rep.roc.warnings},
        });
    }
    std::ofstream f(path);
    if (!f) throw EvalError("cannot write " + path);
    f << out.dump(2) << "\n";
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsReport>& reports) {
    std::ofstream f(path);
    if (!f) throw EvalError("cannot write " + path);
    f << "Model,Type,Accuracy,Precision,Recall,F1-Score\n";
    char buf[256];
    auto row = [&](const std::string& model, const std::string& type, const ClassMetrics& m) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%.2f,%.2f,%.2f,%.2f\n", model.c_str(), type.c_str(),
                      round2(m.accuracy), round2(m.precision), round2(m.recall), round2(m.f1));
        f << buf;
    };
    for (const auto& rep : reports) {
        for (size_t c = 0; c < rep.per_class.size(); ++c) {
            row(rep.model_name, rep.class_names[c], rep.per_class[c]);
        }
        row(rep.model_name, "Average", rep.average);
    }
}

void write_confusion_matrix_json(const std::string& path, const ConfusionMatrix& cm) {
    nlohmann::json out = {
        {"class_names", cm.class_names},
        {"counts", cm.counts},
    };
    std::ofstream f(path);
    if (!f) throw EvalError("cannot write " + path);
    f << out.dump(2) << "\n";
}

}  // namespace dbfuse
