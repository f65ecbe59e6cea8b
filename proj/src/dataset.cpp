#include "dbfuse/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "dbfuse/errors.hpp"
#include "dbfuse/rng.hpp"

namespace fs = std::filesystem;

namespace dbfuse {

std::vector<int> LabeledDataset::class_counts() const {
    std::vector<int> counts(class_names.size(), 0);
    for (const auto& s : samples) {
        counts.at(s.label)++;
    }
    return counts;
}

namespace {

bool has_image_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

void sort_by_source_id(std::vector<ImageSample>& samples) {
    std::sort(samples.begin(), samples.end(),
              [](const ImageSample& a, const ImageSample& b) { return a.source_id < b.source_id; });
}

}  // namespace

LabeledDataset ingest_dataset(const std::string& root,
                              const std::optional<std::vector<std::string>>& class_names) {
    if (!fs::is_directory(root)) {
        throw DataError("dataset root is not a directory: " + root);
    }

    std::vector<std::string> names;
    if (class_names) {
        names = *class_names;
    } else {
        for (const auto& entry : fs::directory_iterator(root)) {
            if (entry.is_directory()) {
                names.push_back(entry.path().filename().string());
            }
        }
        std::sort(names.begin(), names.end());
    }
    if (names.size() < 2) {
        throw DataError("dataset needs at least 2 class directories under " + root);
    }

    LabeledDataset ds;
    ds.class_names = names;
    for (size_t c = 0; c < names.size(); ++c) {
        fs::path class_dir = fs::path(root) / names[c];
        if (!fs::is_directory(class_dir)) {
            throw DataError("missing class directory '" + names[c] + "' under " + root);
        }
        size_t count_before = ds.samples.size();
        for (const auto& entry : fs::directory_iterator(class_dir)) {
            if (!entry.is_regular_file() || !has_image_extension(entry.path())) {
                continue;
            }
            ImageSample s;
            s.pixels = load_image(entry.path().string());
            s.label = static_cast<int>(c);
            s.source_id = entry.path().string();
            ds.samples.push_back(std::move(s));
        }
        if (ds.samples.size() == count_before) {
            throw DataError("class directory '" + names[c] + "' contains no images");
        }
    }
    sort_by_source_id(ds.samples);
    return ds;
}

DataSplit stratified_split(const LabeledDataset& ds, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw DataError("train_fraction must be in (0,1), got " + std::to_string(train_fraction));
    }
    const int C = ds.num_classes();
    std::vector<std::vector<size_t>> by_class(C);
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        by_class.at(ds.samples[i].label).push_back(i);
    }
    for (int c = 0; c < C; ++c) {
        if (by_class[c].size() < 2) {
            throw DataError("class '" + ds.class_names[c] + "' has fewer than 2 samples");
        }
    }

    Rng rng(seed);
    DataSplit split;
    split.train_fraction = train_fraction;
    split.seed = seed;
    split.train.class_names = ds.class_names;
    split.test.class_names = ds.class_names;
    for (int c = 0; c < C; ++c) {
        auto idx = by_class[c];
        rng.shuffle(idx);
        size_t n_train = static_cast<size_t>(std::floor(train_fraction * idx.size()));
        for (size_t k = 0; k < idx.size(); ++k) {
            auto& dst = (k < n_train) ? split.train : split.test;
            dst.samples.push_back(ds.samples[idx[k]]);
        }
    }
    sort_by_source_id(split.train.samples);
    sort_by_source_id(split.test.samples);
    return split;
}

namespace {

// Texture parameters fixed per class; per-sample variation is drawn from the
// seeded generator.
constexpr double kStripeFrequency = 4.0;  // cycles across the image width
constexpr int kCheckerCells = 8;          // cells across one side

Image render_radial_blob(int side, double cx, double cy, double radius) {
    Image img(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double d = std::hypot(x - cx, y - cy);
            double v = std::max(0.0, 1.0 - d / radius);
            img.at(y, x, 0) = static_cast<float>(0.25 + 0.65 * v);
            img.at(y, x, 1) = static_cast<float>(0.15 + 0.25 * v);
            img.at(y, x, 2) = static_cast<float>(0.15 + 0.25 * v);
        }
    }
    return img;
}

Image render_stripes(int side, double phase) {
    Image img(side, side);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double v = 0.5 + 0.5 * std::sin(2.0 * M_PI * kStripeFrequency * x / side + phase);
            img.at(y, x, 0) = static_cast<float>(0.15 + 0.25 * v);
            img.at(y, x, 1) = static_cast<float>(0.25 + 0.65 * v);
            img.at(y, x, 2) = static_cast<float>(0.15 + 0.25 * v);
        }
    }
    return img;
}

Image render_checkerboard(int side, int ox, int oy) {
    Image img(side, side);
    int cell = std::max(1, side / kCheckerCells);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            int parity = ((x + ox) / cell + (y + oy) / cell) % 2;
            double v = parity ? 0.85 : 0.25;
            img.at(y, x, 0) = static_cast<float>(0.15 + 0.25 * v);
            img.at(y, x, 1) = static_cast<float>(0.15 + 0.25 * v);
            img.at(y, x, 2) = static_cast<float>(0.25 + 0.65 * v);
        }
    }
    return img;
}

}  // namespace

LabeledDataset generate_synthetic_dataset(int n_per_class, int side, uint64_t seed,
                                          double noise_level) {
    if (n_per_class < 1) {
        throw DataError("n_per_class must be >= 1");
    }
    if (side < 4) {
        throw DataError("side must be >= 4");
    }
    if (!(noise_level >= 0.0 && noise_level < 0.5)) {
        throw DataError("noise_level must be in [0, 0.5)");
    }

    Rng rng(seed);
    LabeledDataset ds;
    ds.class_names = kDefaultClassNames;
    char name[64];
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < n_per_class; ++i) {
            Image img;
            if (c == 0) {
                double cx = rng.uniform(0.40, 0.60) * side;
                double cy = rng.uniform(0.40, 0.60) * side;
                double r = rng.uniform(0.35, 0.55) * side;
                img = render_radial_blob(side, cx, cy, r);
            } else if (c == 1) {
                double phase = rng.uniform(0.0, 2.0 * M_PI);
                img = render_stripes(side, phase);
            } else {
                int cell = std::max(1, side / kCheckerCells);
                int ox = static_cast<int>(rng.uniform_int(2 * cell));
                int oy = static_cast<int>(rng.uniform_int(2 * cell));
                img = render_checkerboard(side, ox, oy);
            }
            if (noise_level > 0.0) {
                for (float& v : img.rgb) {
                    v = std::clamp(v + static_cast<float>(rng.uniform(-noise_level, noise_level)),
                                   0.0f, 1.0f);
                }
            }
            ImageSample s;
            s.pixels = std::move(img);
            s.label = c;
            std::snprintf(name, sizeof(name), "%s/img_%04d.png", ds.class_names[c].c_str(), i);
            s.source_id = name;
            ds.samples.push_back(std::move(s));
        }
    }
    std::sort(ds.samples.begin(), ds.samples.end(),
              [](const ImageSample& a, const ImageSample& b) { return a.source_id < b.source_id; });
    return ds;
}

void write_synthetic_dataset(const std::string& out_dir, int n_per_class, int side, uint64_t seed,
                             double noise_level) {
    LabeledDataset ds = generate_synthetic_dataset(n_per_class, side, seed, noise_level);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) {
        throw DataError("cannot create output directory: " + out_dir);
    }
    for (const auto& cls : ds.class_names) {
        fs::create_directories(fs::path(out_dir) / cls);
    }
    for (const auto& s : ds.samples) {
        save_image_png((fs::path(out_dir) / s.source_id).string(), s.pixels);
    }

    nlohmann::json manifest = {
        {"seed", seed},
        {"noise_level", noise_level},
        {"n_per_class", n_per_class},
        {"side", side},
        {"class_names", ds.class_names},
        {"texture",
         {{"class0", {{"kind", "radial_blob"}, {"center_range", {0.40, 0.60}}, {"radius_range", {0.35, 0.55}}}},
          {"class1", {{"kind", "stripes"}, {"frequency", kStripeFrequency}, {"phase", "per-sample"}}},
          {"class2", {{"kind", "checkerboard"}, {"cells_per_side", kCheckerCells}, {"offset", "per-sample"}}}}},
    };
    std::ofstream out(fs::path(out_dir) / "manifest.json");
    if (!out) {
        throw DataError("cannot write manifest.json under " + out_dir);
    }
    out << manifest.dump(2) << "\n";
}

}  // namespace dbfuse
