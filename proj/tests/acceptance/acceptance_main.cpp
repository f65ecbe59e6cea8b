// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion is self-contained and uses independent oracles
// (brute-force pair counting, symbolic ratio recomputation, pairwise AUC)
// rather than the library's own computation paths.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <vector>

#include "dbfuse/config.hpp"
#include "dbfuse/errors.hpp"
#include "dbfuse/metrics.hpp"
#include "dbfuse/pipeline.hpp"
#include "dbfuse/rng.hpp"
#include "dbfuse/training.hpp"

namespace fs = std::filesystem;
using namespace dbfuse;

namespace {

int g_checks_failed = 0;

void expect(bool ok, const std::string& what) {
    if (!ok) {
        ++g_checks_failed;
        std::cerr << "    check failed: " << what << "\n";
    }
}

// ---------------------------------------------------------------- oracles

OvrCounts oracle_ovr(const std::vector<int>& yt, const std::vector<int>& yp, int c) {
    OvrCounts oc;
    for (size_t k = 0; k < yt.size(); ++k) {
        const bool pos = yt[k] == c, pred = yp[k] == c;
        if (pos && pred) oc.tp++;
        else if (!pos && pred) oc.fp++;
        else if (pos && !pred) oc.fn++;
        else oc.tn++;
    }
    return oc;
}

double safe_div(double a, double b) { return b == 0.0 ? 0.0 : a / b; }

double oracle_auc(const std::vector<int>& y, const std::vector<double>& s) {
    double wins = 0.0;
    long long pairs = 0;
    for (size_t i = 0; i < y.size(); ++i) {
        if (y[i] != 1) continue;
        for (size_t j = 0; j < y.size(); ++j) {
            if (y[j] != 0) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return pairs ? wins / pairs : 0.0;
}

bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

// ------------------------------------------------------------- criterion 1

bool criterion1_metric_fixtures() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(20260823);
    int fixtures = 0;

    // randomized per-class metric fixtures against the symbolic oracle
    for (int trial = 0; trial < 700; ++trial, ++fixtures) {
        const int C = 2 + static_cast<int>(rng.uniform_int(4));
        const int n = 5 + static_cast<int>(rng.uniform_int(80));
        std::vector<int> yt(n), yp(n);
        for (int i = 0; i < n; ++i) {
            yt[i] = static_cast<int>(rng.uniform_int(C));
            yp[i] = static_cast<int>(rng.uniform_int(C));
        }
        auto cm = confusion_matrix(yt, yp, C);
        expect(cm.total() == n, "confusion matrix total");
        for (int c = 0; c < C; ++c) {
            auto oc = ovr_counts(cm, c);
            auto ref = oracle_ovr(yt, yp, c);
            expect(oc.tp == ref.tp && oc.fp == ref.fp && oc.tn == ref.tn && oc.fn == ref.fn,
                   "ovr counts vs brute force");
            auto m = class_metrics(oc);
            expect(close(m.accuracy, safe_div(double(ref.tp + ref.tn), double(n)), 1e-12),
                   "accuracy vs oracle");
            expect(close(m.precision, safe_div(double(ref.tp), double(ref.tp + ref.fp)), 1e-12),
                   "precision vs oracle");
            expect(close(m.recall, safe_div(double(ref.tp), double(ref.tp + ref.fn)), 1e-12),
                   "recall vs oracle");
            expect(close(m.specificity, safe_div(double(ref.tn), double(ref.tn + ref.fp)), 1e-12),
                   "specificity vs oracle");
            expect(close(m.f1, safe_div(2.0 * m.precision * m.recall, m.precision + m.recall),
                         1e-12),
                   "f1 vs oracle");
        }
    }

    // randomized ROC/AUC fixtures against the pairwise win-rate oracle
    for (int trial = 0; trial < 400; ++trial, ++fixtures) {
        const int n = 4 + static_cast<int>(rng.uniform_int(60));
        std::vector<int> y(n);
        std::vector<double> s(n);
        bool pos = false, neg = false;
        for (int i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng.uniform_int(2));
            s[i] = (trial % 2) ? rng.uniform() : std::floor(rng.uniform() * 6) / 6.0;
            (y[i] ? pos : neg) = true;
        }
        if (!pos) y[0] = 1;
        if (!neg) y[1] = 0;
        auto roc = roc_curve(y, s);
        expect(close(roc.auc, oracle_auc(y, s), 1e-12), "auc vs pairwise oracle");
    }

    // pinned worked examples
    expect(close(roc_curve({1, 0, 1, 0}, {0.8, 0.7, 0.6, 0.2}).auc, 0.75, 1e-12),
           "mixed fixture auc 3/4");
    expect(close(roc_curve({1, 0, 1, 0}, {0.8, 0.7, 0.7, 0.2}).auc, 0.875, 1e-12),
           "tied fixture auc 3.5/4");
    expect(close(roc_curve({1, 1, 0}, {0.9, 0.8, 0.1}).auc, 1.0, 1e-12), "separable auc 1.0");
    expect(close(roc_curve({1, 0}, {0.5, 0.5}).auc, 0.5, 1e-12), "tied auc 0.5");
    fixtures += 3;

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(fixtures >= 1000, "at least 1000 fixtures");
    expect(secs < 60.0, "criterion 1 under one minute");
    return g_checks_failed == 0;
}

// ------------------------------------------------------------- criterion 2

bool criterion2_published_table_consistency() {
    struct Row {
        double acc, prec, rec, f1;
    };
    // single-backbone baseline block: Normal, Liver, Aspergillosis, Average
    std::vector<Row> baseline = {{0.87, 0.89, 0.86, 0.87},
                                 {0.89, 0.95, 0.83, 0.88},
                                 {0.86, 0.80, 0.93, 0.86}};
    Row baseline_avg = {0.87, 0.88, 0.87, 0.87};
    // concatenated-model block
    std::vector<Row> proposed = {{0.96, 0.92, 1.00, 0.96},
                                 {0.99, 1.00, 0.98, 0.99},
                                 {0.98, 1.00, 0.95, 0.98}};
    Row proposed_avg = {0.98, 0.97, 0.98, 0.98};

    auto check_block = [&](const std::vector<Row>& rows, const Row& avg, const char* name) {
        std::vector<ClassMetrics> ms;
        for (const auto& r : rows) {
            // F1 recomputed from the printed precision/recall must agree with
            // the printed F1 within the table's rounding resolution.
            double f1 = safe_div(2.0 * r.prec * r.rec, r.prec + r.rec);
            expect(close(f1, r.f1, 0.01), std::string(name) + ": f1 from printed P/R");
            ClassMetrics m;
            m.accuracy = r.acc;
            m.precision = r.prec;
            m.recall = r.rec;
            m.f1 = r.f1;
            ms.push_back(m);
        }
        auto macro = macro_average(ms);
        expect(close(round2(macro.accuracy), avg.acc, 1e-9),
               std::string(name) + ": macro accuracy");
        expect(close(round2(macro.precision), avg.prec, 1e-9),
               std::string(name) + ": macro precision");
        expect(close(round2(macro.recall), avg.rec, 1e-9), std::string(name) + ": macro recall");
        expect(close(round2(macro.f1), avg.f1, 1e-9), std::string(name) + ": macro f1");
    };
    check_block(baseline, baseline_avg, "baseline block");
    check_block(proposed, proposed_avg, "concatenated block");

    // one fully specified count fixture from the same table family:
    // tp=92, fp=8, fn=0 -> precision 0.92, recall 1.00, f1 ~ 0.9583 -> 0.96
    auto m = class_metrics(OvrCounts{92, 8, 26, 0});
    expect(close(m.precision, 0.92, 1e-12), "count fixture precision");
    expect(close(m.recall, 1.0, 1e-12), "count fixture recall");
    expect(close(round2(m.f1), 0.96, 1e-9), "count fixture rounded f1");
    return g_checks_failed == 0;
}

// ------------------------------------------------------------- criterion 3

bool criterion3_end_to_end_training() {
    const auto t0 = std::chrono::steady_clock::now();
    auto ds = generate_synthetic_dataset(150, 32, 2026, 0.1);

    // precondition gate: the synthetic classes must be separable on raw
    // pixels before the learned model is held to the accuracy bar
    {
        auto split = stratified_split(ds, 0.8, 2026);
        const size_t dim = split.train.samples[0].pixels.rgb.size();
        std::vector<std::vector<double>> centroid(3, std::vector<double>(dim, 0.0));
        std::vector<int> counts(3, 0);
        for (const auto& s : split.train.samples) {
            for (size_t i = 0; i < dim; ++i) centroid[s.label][i] += s.pixels.rgb[i];
            counts[s.label]++;
        }
        for (int c = 0; c < 3; ++c)
            for (auto& v : centroid[c]) v /= counts[c];
        int correct = 0;
        for (const auto& s : split.test.samples) {
            int best = 0;
            double best_d = 1e300;
            for (int c = 0; c < 3; ++c) {
                double d = 0;
                for (size_t i = 0; i < dim; ++i) {
                    double e = s.pixels.rgb[i] - centroid[c][i];
                    d += e * e;
                }
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            if (best == s.label) ++correct;
        }
        expect(double(correct) / split.test.samples.size() > 0.9,
               "precondition: nearest-centroid separability");
    }

    RunConfig cfg = run_config_from_json(nlohmann::json::object());
    cfg.seed = 2026;
    cfg.train.seed = 2026;
    cfg.data.side = 32;
    cfg.model.backbone_a = {BackboneFamily::tiny_test, "w8", false, 32, ""};
    cfg.model.backbone_b = {BackboneFamily::tiny_test, "w16", false, 32, ""};
    cfg.train.epochs = 20;
    cfg.train.batch_size = 5;
    cfg.train.learning_rate = 1e-2;
    cfg.output.dir = "";
    cfg.train.output_dir = "";

    TrainRun run = run_training(cfg, ds);
    const auto& hist = run.result.history.records;
    expect(hist.size() == 20, "20 recorded epochs");
    expect(hist.back().train_loss < hist.front().train_loss,
           "final train loss below first-epoch train loss");

    MetricsReport rep = evaluate_model(*run.model, run.split.test, 5, "model");
    long long diag = 0;
    for (int c = 0; c < 3; ++c) diag += rep.cm.counts[c][c];
    const double held_out_acc = double(diag) / rep.cm.total();
    std::printf("    held-out accuracy %.4f, train loss %.4f -> %.4f\n", held_out_acc,
                hist.front().train_loss, hist.back().train_loss);
    expect(held_out_acc >= 0.90, "held-out accuracy >= 0.90");

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    expect(secs < 300.0, "criterion 3 under five minutes");
    return g_checks_failed == 0;
}

// ------------------------------------------------------------- criterion 4

bool criterion4_default_protocol() {
    RunConfig cfg = default_run_config();
    auto protocol = run_summary_protocol(cfg, 3);
    expect(close(protocol.at("train_fraction").get<double>(), 0.8, 1e-12),
           "train fraction 0.8");
    expect(close(protocol.at("test_fraction").get<double>(), 0.2, 1e-12), "test fraction 0.2");
    expect(protocol.at("input_side").get<int>() == 128, "input side 128");
    expect(protocol.at("num_classes").get<int>() == 3, "3 classes");
    expect(protocol.at("epochs").get<int>() == 50, "50 epochs");
    expect(protocol.at("batch_size").get<int>() == 5, "batch size 5");
    // the protocol block is exactly what a default training run records
    expect(cfg.model.backbone_a.family == BackboneFamily::convnext &&
               cfg.model.backbone_b.family == BackboneFamily::efficientnet,
           "default backbone pairing");
    return g_checks_failed == 0;
}

// ------------------------------------------------------------- criterion 5

bool criterion5_fusion_and_shape_properties() {
    Rng rng(515151);

    // >= 200 fusion width/order cases
    for (int trial = 0; trial < 220; ++trial) {
        const int r = static_cast<int>(rng.uniform_int(7));  // includes empty batches
        const int ca = 1 + static_cast<int>(rng.uniform_int(12));
        const int cb = 1 + static_cast<int>(rng.uniform_int(12));
        MatF a(r, ca), b(r, cb);
        for (auto& v : a.v) v = static_cast<float>(rng.uniform(-3.0, 3.0));
        for (auto& v : b.v) v = static_cast<float>(rng.uniform(-3.0, 3.0));
        MatF out = fuse(a, b);
        expect(out.rows == r && out.cols == ca + cb, "fused shape additivity");
        bool ok = true;
        for (int i = 0; i < r; ++i) {
            for (int j = 0; j < ca; ++j) ok = ok && out.at(i, j) == a.at(i, j);
            for (int j = 0; j < cb; ++j) ok = ok && out.at(i, ca + j) == b.at(i, j);
        }
        expect(ok, "fused values order-preserving");
    }

    // >= 200 softmax simplex/shift-invariance cases
    for (int trial = 0; trial < 220; ++trial) {
        const int r = 1 + static_cast<int>(rng.uniform_int(4));
        const int c = 2 + static_cast<int>(rng.uniform_int(5));
        MatF logits(r, c);
        for (auto& v : logits.v) v = static_cast<float>(rng.uniform(-20.0, 20.0));
        MatF shifted = logits;
        const float shift = static_cast<float>(rng.uniform(-100.0, 100.0));
        for (auto& v : shifted.v) v += shift;
        MatD p = softmax_rows(logits), q = softmax_rows(shifted);
        for (int i = 0; i < r; ++i) {
            double sum = 0.0;
            bool ok = true;
            for (int k = 0; k < c; ++k) {
                sum += p.at(i, k);
                // float32 logits limit how exactly a large shift cancels
                ok = ok && p.at(i, k) > 0.0 && close(p.at(i, k), q.at(i, k), 1e-4);
            }
            expect(close(sum, 1.0, 1e-12), "softmax row sums to 1");
            expect(ok, "softmax positive and shift invariant");
        }
    }

    // model-level shape contracts
    BackboneSpec a{BackboneFamily::tiny_test, "w8", false, 16, ""};
    BackboneSpec b{BackboneFamily::tiny_test, "w16", false, 16, ""};
    auto model = build_concatenated_model(a, b, 3, 1, kDefaultClassNames);
    expect(model->fused_dim() == 24, "tiny pairing fuses 8+16=24");
    BackboneSpec ca{BackboneFamily::convnext, "tiny", false, 64, ""};
    BackboneSpec eb{BackboneFamily::efficientnet, "b0", false, 64, ""};
    auto full = build_concatenated_model(ca, eb, 3, 1);
    expect(full->fused_dim() == 2048, "reference pairing fuses 768+1280=2048");

    auto ds = generate_synthetic_dataset(5, 16, 3, 0.1);
    auto preds = predict(*model, ds, 4);
    expect(preds.labels.size() == ds.samples.size(), "one prediction per sample");
    expect(preds.probabilities.rows == static_cast<int>(ds.samples.size()) &&
               preds.probabilities.cols == 3,
           "probability matrix is N x C");
    return g_checks_failed == 0;
}

// ------------------------------------------------------------- criterion 6

bool criterion6_determinism_and_checkpoints() {
    auto ds = generate_synthetic_dataset(20, 16, 606, 0.1);
    RunConfig cfg = run_config_from_json(nlohmann::json::object());
    cfg.seed = 606;
    cfg.train.seed = 606;
    cfg.data.side = 16;
    cfg.model.backbone_a = {BackboneFamily::tiny_test, "w8", false, 16, ""};
    cfg.model.backbone_b = {BackboneFamily::tiny_test, "w16", false, 16, ""};
    cfg.train.epochs = 6;
    cfg.train.batch_size = 5;
    cfg.train.learning_rate = 1e-2;
    cfg.output.dir = "";
    cfg.train.output_dir = "";

    TrainRun r1 = run_training(cfg, ds);
    TrainRun r2 = run_training(cfg, ds);

    auto ids = [](const LabeledDataset& d) {
        std::set<std::string> s;
        for (const auto& x : d.samples) s.insert(x.source_id);
        return s;
    };
    expect(ids(r1.split.train) == ids(r2.split.train), "identical train membership");
    expect(ids(r1.split.test) == ids(r2.split.test), "identical test membership");

    const auto& h1 = r1.result.history.records;
    const auto& h2 = r2.result.history.records;
    expect(h1.size() == h2.size(), "history lengths match");
    for (size_t i = 0; i < h1.size() && i < h2.size(); ++i) {
        expect(close(h1[i].train_loss, h2[i].train_loss, 1e-4), "train loss reproducible");
        expect(close(h1[i].train_accuracy, h2[i].train_accuracy, 1e-4),
               "train accuracy reproducible");
        expect(close(h1[i].val_loss, h2[i].val_loss, 1e-4), "val loss reproducible");
        expect(close(h1[i].val_accuracy, h2[i].val_accuracy, 1e-4), "val accuracy reproducible");
    }

    // checkpoint round trip preserves predictions to 1e-6
    fs::path dir = fs::temp_directory_path() / "dbfuse_acceptance_ckpt";
    fs::remove_all(dir);
    TrainingConfig tcfg = cfg.train;
    tcfg.seed = cfg.seed;
    save_checkpoint(*r1.model, tcfg, r1.result.history, dir.string());
    auto loaded = load_checkpoint(dir.string());
    auto p1 = predict(*r1.model, r1.split.test, 5);
    auto p2 = predict(*loaded.model, r1.split.test, 5);
    expect(p1.labels == p2.labels, "reloaded labels identical");
    bool probs_ok = true;
    for (int i = 0; i < p1.probabilities.rows; ++i) {
        for (int c = 0; c < p1.probabilities.cols; ++c) {
            probs_ok = probs_ok && close(p1.probabilities.at(i, c), p2.probabilities.at(i, c), 1e-6);
        }
    }
    expect(probs_ok, "reloaded probabilities within 1e-6");
    fs::remove_all(dir);
    return g_checks_failed == 0;
}

// ------------------------------------------------------------- criterion 7

bool criterion7_ablation() {
    auto ds = generate_synthetic_dataset(50, 32, 707, 0.1);
    RunConfig cfg = run_config_from_json(nlohmann::json::object());
    cfg.seed = 707;
    cfg.train.seed = 707;
    cfg.data.side = 32;
    cfg.model.backbone_a = {BackboneFamily::tiny_test, "w8", false, 32, ""};
    cfg.model.backbone_b = {BackboneFamily::tiny_test, "w16", false, 32, ""};
    cfg.train.epochs = 20;
    cfg.train.batch_size = 5;
    cfg.train.learning_rate = 1e-2;
    cfg.output.dir = "";
    cfg.train.output_dir = "";

    AblationRun run = run_ablation(cfg, ds);
    expect(run.reports.size() == 3, "three report blocks");
    if (run.reports.size() != 3) return false;
    expect(run.reports[2].model_name == "Concatenated", "third block is the fused model");

    std::vector<double> acc;
    for (const auto& rep : run.reports) {
        long long diag = 0;
        for (int c = 0; c < rep.cm.num_classes(); ++c) diag += rep.cm.counts[c][c];
        acc.push_back(double(diag) / rep.cm.total());
        expect(rep.cm.total() == 30, "all blocks share the 30-sample held-out split");
    }
    std::printf("    ablation accuracies: %s %.4f, %s %.4f, %s %.4f\n",
                run.reports[0].model_name.c_str(), acc[0], run.reports[1].model_name.c_str(),
                acc[1], run.reports[2].model_name.c_str(), acc[2]);
    expect(acc[2] >= std::max(acc[0], acc[1]) - 0.02,
           "fused accuracy within 0.02 of the best single backbone");
    return g_checks_failed == 0;
}

}  // namespace

int main() {
    struct Criterion {
        const char* label;
        std::function<bool()> fn;
    };
    std::vector<Criterion> criteria = {
        {"CRITERION 1 (randomized metric fixtures vs oracles)", criterion1_metric_fixtures},
        {"CRITERION 2 (published table internal consistency)",
         criterion2_published_table_consistency},
        {"CRITERION 3 (synthetic end-to-end training)", criterion3_end_to_end_training},
        {"CRITERION 4 (default protocol in run summary)", criterion4_default_protocol},
        {"CRITERION 5 (fusion and shape property suites)", criterion5_fusion_and_shape_properties},
        {"CRITERION 6 (determinism and checkpoint round trip)",
         criterion6_determinism_and_checkpoints},
        {"CRITERION 7 (ablation comparison)", criterion7_ablation},
    };

    int failures = 0;
    for (auto& c : criteria) {
        g_checks_failed = 0;
        bool ok = false;
        try {
            ok = c.fn();
        } catch (const std::exception& e) {
            std::cerr << "    exception: " << e.what() << "\n";
            ok = false;
        }
        std::cout << c.label << ": " << (ok ? "PASS" : "FAIL") << "\n";
        if (!ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
