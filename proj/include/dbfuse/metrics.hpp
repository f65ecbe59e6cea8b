#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dbfuse/tensor.hpp"

namespace dbfuse {

// Rows = true class, columns = predicted class.
struct ConfusionMatrix {
    std::vector<std::vector<long long>> counts;  // C x C
    std::vector<std::string> class_names;

    int num_classes() const { return static_cast<int>(counts.size()); }
    long long total() const;
    long long row_sum(int c) const;
    long long col_sum(int c) const;
};

// One-vs-rest counts for a single positive class.
struct OvrCounts {
    long long tp = 0, fp = 0, tn = 0, fn = 0;
    long long total() const { return tp + fp + tn + fn; }
};

struct ClassMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    std::set<std::string> degenerate_flags;  // metrics whose denominator was zero
};

struct RocCurve {
    std::vector<std::pair<double, double>> points;  // (fpr, tpr), (0,0) .. (1,1)
    std::vector<double> thresholds;                 // one per point; first is a sentinel
    double auc = 0.0;
};

struct MulticlassRoc {
    std::vector<std::optional<RocCurve>> per_class;  // nullopt when class absent
    std::vector<std::string> warnings;
    double macro_auc = 0.0;  // mean over computed curves
};

struct MetricsReport {
    std::string model_name;
    std::vector<std::string> class_names;
    std::vector<ClassMetrics> per_class;
    ClassMetrics average;
    ConfusionMatrix cm;
    MulticlassRoc roc;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& y_true, const std::vector<int>& y_pred,
                                 int num_classes, std::vector<std::string> class_names = {});

OvrCounts ovr_counts(const ConfusionMatrix& cm, int c);

// accuracy = (TP+TN)/total, precision = TP/(TP+FP), recall = TP/(TP+FN),
// specificity = TN/(TN+FP), f1 = 2PR/(P+R); a zero denominator yields 0.0
// plus a degenerate flag.
ClassMetrics class_metrics(const OvrCounts& oc);

// Unweighted field-wise mean; degenerate flags unioned.
ClassMetrics macro_average(const std::vector<ClassMetrics>& rows);

// Threshold sweep over descending distinct scores (ties grouped), trapezoidal
// AUC. Requires at least one positive and one negative label.
RocCurve roc_curve(const std::vector<int>& y_true_binary, const std::vector<double>& scores);

// One one-vs-rest curve per class, scores taken from the probability column.
MulticlassRoc multiclass_roc(const std::vector<int>& y_true, const MatD& probs);

MetricsReport build_report(const std::string& model_name, const std::vector<int>& y_true,
                           const std::vector<int>& y_pred, const MatD& probs,
                           const std::vector<std::string>& class_names);

// Half-up rounding to 2 decimals (display rule for CSV reports).
double round2(double v);

// File emitters. write_metrics_csv renders one block of class rows plus an
// Average row per report, 2-decimal cells.
void write_metrics_json(const std::string& path, const std::vector<MetricsReport>& reports);
void write_metrics_csv(const std::string& path, const std::vector<MetricsReport>& reports);
void write_confusion_matrix_json(const std::string& path, const ConfusionMatrix& cm);

}  // namespace dbfuse
