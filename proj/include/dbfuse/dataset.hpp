#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dbfuse/image.hpp"

namespace dbfuse {

struct LabeledDataset {
    std::vector<ImageSample> samples;           // sorted by source_id
    std::vector<std::string> class_names;       // ordered, length C >= 2

    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::vector<int> class_counts() const;
};

struct DataSplit {
    LabeledDataset train;
    LabeledDataset test;
    double train_fraction = 0.8;
    uint64_t seed = 0;
};

inline const std::vector<std::string> kDefaultClassNames = {"Normal", "Liver", "Aspergillosis"};

// Loads an image-folder tree: root/<ClassName>/*.{png,jpg,jpeg}. With
// class_names omitted, class directories are taken in alphabetical order.
// Errors: missing root, a declared class directory missing or empty, or any
// undecodable file.
LabeledDataset ingest_dataset(const std::string& root,
                              const std::optional<std::vector<std::string>>& class_names = {});

// Seeded per-class shuffle; first floor(train_fraction * n_c) of each class go
// to train, the rest to test. Both partitions keep the canonical source_id
// ordering. Every class needs >= 2 samples.
DataSplit stratified_split(const LabeledDataset& ds, double train_fraction, uint64_t seed);

// Three parametric texture classes (radial blobs / stripes / checkerboard),
// each with a class-specific color tint so the classes are separable on raw
// pixels. Per-pixel additive uniform noise of amplitude noise_level, clipped
// to [0,1]. Deterministic given seed.
LabeledDataset generate_synthetic_dataset(int n_per_class, int side, uint64_t seed,
                                          double noise_level);

// Writes a synthetic dataset as an image-folder tree plus manifest.json.
void write_synthetic_dataset(const std::string& out_dir, int n_per_class, int side,
                             uint64_t seed, double noise_level);

}  // namespace dbfuse
