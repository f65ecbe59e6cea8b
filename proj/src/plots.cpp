#include "dbfuse/plots.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dbfuse/errors.hpp"

namespace fs = std::filesystem;

namespace dbfuse {

namespace {

struct Color {
    int r, g, b;
};

const Color kBlack{0, 0, 0};
const Color kGray{180, 180, 180};
const Color kSeries[4] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40}};

constexpr int kW = 800, kH = 600;
constexpr int kMarginL = 80, kMarginR = 30, kMarginT = 50, kMarginB = 60;

// Minimal drawing surface with a raster (PNG) and a vector (SVG) backend.
class Canvas {
public:
    virtual ~Canvas() = default;
    virtual void line(double x1, double y1, double x2, double y2, Color c, int thickness) = 0;
    virtual void rect_fill(double x, double y, double w, double h, Color c) = 0;
    virtual void text(double x, double y, const std::string& s, Color c, double scale) = 0;
    virtual void save(const std::string& path) = 0;
};

class PngCanvas : public Canvas {
public:
    PngCanvas() : img_(kH, kW, CV_8UC3, cv::Scalar(255, 255, 255)) {}

    void line(double x1, double y1, double x2, double y2, Color c, int t) override {
        cv::line(img_, {(int)std::lround(x1), (int)std::lround(y1)},
                 {(int)std::lround(x2), (int)std::lround(y2)}, cv::Scalar(c.b, c.g, c.r), t,
                 cv::LINE_AA);
    }
    void rect_fill(double x, double y, double w, double h, Color c) override {
        cv::rectangle(img_, cv::Rect((int)x, (int)y, (int)w, (int)h), cv::Scalar(c.b, c.g, c.r),
                      cv::FILLED);
    }
    void text(double x, double y, const std::string& s, Color c, double scale) override {
        cv::putText(img_, s, {(int)std::lround(x), (int)std::lround(y)},
                    cv::FONT_HERSHEY_SIMPLEX, 0.45 * scale, cv::Scalar(c.b, c.g, c.r), 1,
                    cv::LINE_AA);
    }
    void save(const std::string& path) override {
        if (!cv::imwrite(path, img_)) throw EvalError("cannot write plot " + path);
    }

private:
    cv::Mat img_;
};

class SvgCanvas : public Canvas {
public:
    SvgCanvas() {
        out_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
             << "\"><rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    }
    static std::string rgb(Color c) {
        std::ostringstream s;
        s << "rgb(" << c.r << "," << c.g << "," << c.b << ")";
        return s.str();
    }
    void line(double x1, double y1, double x2, double y2, Color c, int t) override {
        out_ << "<line x1=\"" << x1 << "\" y1=\"" << y1 << "\" x2=\"" << x2 << "\" y2=\"" << y2
             << "\" stroke=\"" << rgb(c) << "\" stroke-width=\"" << t << "\"/>\n";
    }
    void rect_fill(double x, double y, double w, double h, Color c) override {
        out_ << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\"" << h
             << "\" fill=\"" << rgb(c) << "\"/>\n";
    }
    void text(double x, double y, const std::string& s, Color c, double scale) override {
        out_ << "<text x=\"" << x << "\" y=\"" << y << "\" font-size=\"" << 12 * scale
             << "\" font-family=\"sans-serif\" fill=\"" << rgb(c) << "\">" << escape(s)
             << "</text>\n";
    }
    void save(const std::string& path) override {
        std::ofstream f(path);
        if (!f) throw EvalError("cannot write plot " + path);
        f << out_.str() << "</svg>\n";
    }

private:
    static std::string escape(const std::string& s) {
        std::string r;
        for (char c : s) {
            if (c == '<') r += "&lt;";
            else if (c == '>') r += "&gt;";
            else if (c == '&') r += "&amp;";
            else r += c;
        }
        return r;
    }
    std::ostringstream out_;
};

std::unique_ptr<Canvas> make_canvas(const std::string& fmt) {
    if (fmt == "png") return std::make_unique<PngCanvas>();
    if (fmt == "svg") return std::make_unique<SvgCanvas>();
    throw ConfigError("unsupported plot format: '" + fmt + "' (supported: png, svg)");
}

struct AxisMap {
    double x_min, x_max, y_min, y_max;

    double px(double x) const {
        return kMarginL + (x - x_min) / (x_max - x_min) * (kW - kMarginL - kMarginR);
    }
    double py(double y) const {
        return kH - kMarginB - (y - y_min) / (y_max - y_min) * (kH - kMarginT - kMarginB);
    }
};

void draw_axes(Canvas& cv, const AxisMap& ax, const std::string& title,
               const std::string& x_label, const std::string& y_label) {
    cv.line(kMarginL, kH - kMarginB, kW - kMarginR, kH - kMarginB, kBlack, 1);
    cv.line(kMarginL, kMarginT, kMarginL, kH - kMarginB, kBlack, 1);
    cv.text(kW / 2.0 - 4.0 * title.size(), kMarginT - 18, title, kBlack, 1.3);
    cv.text(kW / 2.0 - 4.0 * x_label.size(), kH - 15, x_label, kBlack, 1.0);
    cv.text(12, kMarginT - 10, y_label, kBlack, 1.0);
    char buf[64];
    for (int i = 0; i <= 5; ++i) {
        double fx = ax.x_min + (ax.x_max - ax.x_min) * i / 5.0;
        double fy = ax.y_min + (ax.y_max - ax.y_min) * i / 5.0;
        cv.line(ax.px(fx), kH - kMarginB, ax.px(fx), kH - kMarginB + 5, kBlack, 1);
        std::snprintf(buf, sizeof(buf), "%g", std::round(fx * 100) / 100);
        cv.text(ax.px(fx) - 8, kH - kMarginB + 20, buf, kBlack, 0.9);
        cv.line(kMarginL - 5, ax.py(fy), kMarginL, ax.py(fy), kBlack, 1);
        std::snprintf(buf, sizeof(buf), "%.2f", fy);
        cv.text(kMarginL - 48, ax.py(fy) + 4, buf, kBlack, 0.9);
    }
}

void polyline(Canvas& cv, const AxisMap& ax, const std::vector<std::pair<double, double>>& pts,
              Color c) {
    for (size_t i = 1; i < pts.size(); ++i) {
        cv.line(ax.px(pts[i - 1].first), ax.py(pts[i - 1].second), ax.px(pts[i].first),
                ax.py(pts[i].second), c, 2);
    }
}

void legend_entry(Canvas& cv, int slot, Color c, const std::string& label) {
    const double y = kMarginT + 16 + 20.0 * slot;
    cv.line(kW - kMarginR - 180, y, kW - kMarginR - 150, y, c, 2);
    cv.text(kW - kMarginR - 142, y + 4, label, kBlack, 1.0);
}

void curve_plot(const std::string& dir, const std::string& stem,
                const std::vector<std::string>& formats, const std::string& title,
                const std::string& x_label, const std::string& y_label, const AxisMap& ax,
                const std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>>&
                    series) {
    for (const auto& fmt : formats) {
        auto cv = make_canvas(fmt);
        draw_axes(*cv, ax, title, x_label, y_label);
        int slot = 0;
        for (const auto& [label, pts] : series) {
            polyline(*cv, ax, pts, kSeries[slot % 4]);
            legend_entry(*cv, slot, kSeries[slot % 4], label);
            ++slot;
        }
        cv->save((fs::path(dir) / (stem + "." + fmt)).string());
    }
}

}  // namespace

void plot_training_curves(const TrainingHistory& history, const std::string& dir,
                          const std::vector<std::string>& formats) {
    if (history.records.empty()) {
        throw EvalError("plot_training_curves: empty history");
    }
    fs::create_directories(dir);
    std::vector<std::pair<double, double>> tl, vl, ta, va;
    double loss_max = 0.0;
    for (const auto& r : history.records) {
        tl.emplace_back(r.epoch, r.train_loss);
        vl.emplace_back(r.epoch, r.val_loss);
        ta.emplace_back(r.epoch, r.train_accuracy);
        va.emplace_back(r.epoch, r.val_accuracy);
        loss_max = std::max({loss_max, r.train_loss, r.val_loss});
    }
    const double x_max = history.records.back().epoch;
    AxisMap loss_ax{1.0, std::max(2.0, x_max), 0.0, std::max(1e-6, loss_max * 1.05)};
    curve_plot(dir, "loss_vs_epoch", formats, "Training and Validation Loss", "epoch", "loss",
               loss_ax, {{"train loss", tl}, {"val loss", vl}});
    AxisMap acc_ax{1.0, std::max(2.0, x_max), 0.0, 1.0};
    curve_plot(dir, "accuracy_vs_epoch", formats, "Training and Validation Accuracy", "epoch",
               "accuracy", acc_ax, {{"train acc", ta}, {"val acc", va}});
}

void plot_confusion_matrix(const ConfusionMatrix& cm, const std::string& dir,
                           const std::string& stem, const std::vector<std::string>& formats) {
    fs::create_directories(dir);
    const int C = cm.num_classes();
    long long max_count = 1;
    for (const auto& row : cm.counts) {
        for (long long v : row) max_count = std::max(max_count, v);
    }
    const double grid_x = kMarginL + 40, grid_y = kMarginT + 10;
    const double cell = std::min((kW - grid_x - kMarginR) / C, (kH - grid_y - kMarginB) / C);
    char buf[64];
    for (const auto& fmt : formats) {
        auto cv = make_canvas(fmt);
        cv->text(kW / 2.0 - 60, kMarginT - 18, "Confusion Matrix", kBlack, 1.3);
        for (int i = 0; i < C; ++i) {
            for (int j = 0; j < C; ++j) {
                const double frac = static_cast<double>(cm.counts[i][j]) / max_count;
                // white -> blue ramp
                Color c{static_cast<int>(255 - 200 * frac), static_cast<int>(255 - 130 * frac),
                        255};
                cv->rect_fill(grid_x + j * cell, grid_y + i * cell, cell - 2, cell - 2, c);
                std::snprintf(buf, sizeof(buf), "%lld", cm.counts[i][j]);
                cv->text(grid_x + j * cell + cell / 2 - 8, grid_y + i * cell + cell / 2 + 4, buf,
                         kBlack, 1.1);
            }
        }
        for (int i = 0; i < C; ++i) {
            cv->text(8, grid_y + i * cell + cell / 2 + 4, cm.class_names[i], kBlack, 0.9);
            cv->text(grid_x + i * cell + 4, grid_y + C * cell + 18, cm.class_names[i], kBlack,
                     0.9);
        }
        cv->text(8, grid_y - 8, "true \\ predicted", kGray, 0.9);
        cv->save((fs::path(dir) / (stem + "." + fmt)).string());
    }
}

void plot_roc_curves(const MulticlassRoc& roc, const std::vector<std::string>& class_names,
                     const std::string& dir, const std::string& stem,
                     const std::vector<std::string>& formats) {
    fs::create_directories(dir);
    AxisMap ax{0.0, 1.0, 0.0, 1.0};
    char buf[128];
    for (const auto& fmt : formats) {
        auto cv = make_canvas(fmt);
        draw_axes(*cv, ax, "One-vs-Rest ROC", "false positive rate", "true positive rate");
        // chance diagonal
        cv->line(ax.px(0), ax.py(0), ax.px(1), ax.py(1), kGray, 1);
        int slot = 0;
        for (size_t c = 0; c < roc.per_class.size(); ++c) {
            if (!roc.per_class[c]) continue;
            polyline(*cv, ax, roc.per_class[c]->points, kSeries[slot % 4]);
            std::snprintf(buf, sizeof(buf), "%s (AUC %.3f)",
                          c < class_names.size() ? class_names[c].c_str() : "?",
                          roc.per_class[c]->auc);
            legend_entry(*cv, slot, kSeries[slot % 4], buf);
            ++slot;
        }
        std::snprintf(buf, sizeof(buf), "macro AUC %.3f", roc.macro_auc);
        legend_entry(*cv, slot, kGray, buf);
        cv->save((fs::path(dir) / (stem + "." + fmt)).string());
    }
}

}  // namespace dbfuse
