#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dbfuse/layers.hpp"
#include "dbfuse/tensor.hpp"

namespace dbfuse {

enum class BackboneFamily { convnext, efficientnet, tiny_test };

std::string to_string(BackboneFamily f);
BackboneFamily backbone_family_from_string(const std::string& s);

struct BackboneSpec {
    BackboneFamily family = BackboneFamily::tiny_test;
    std::string variant = "w8";   // "tiny", "b0", or "w<dim>" for tiny_test
    bool pretrained = false;
    int input_side = 128;
    std::string weights_path;     // local blob file, required when pretrained

    // Derived from (family, variant).
    int embedding_dim() const;
};

// One convolutional feature extractor: stacked conv stages ending in global
// average pooling, producing an embedding_dim vector per image.
class FeatureExtractor {
public:
    FeatureExtractor(BackboneSpec spec, std::unique_ptr<Sequential> net);

    const BackboneSpec& spec() const { return spec_; }
    int embedding_dim() const { return spec_.embedding_dim(); }
    bool frozen() const { return frozen_; }
    void set_frozen(bool frozen) { frozen_ = frozen; }

    // batch must be N x 3 x input_side x input_side; returns N x embedding_dim.
    MatF extract(const Tensor& batch, bool train = false);

    // Backpropagates from the embedding gradient through pool and conv stack,
    // accumulating parameter gradients. Requires a preceding extract() call.
    void backward_from_embedding(const MatF& d_embedding);

    void collect_params(std::vector<ParamBlob*>& out);

private:
    BackboneSpec spec_;
    std::unique_ptr<Sequential> net_;
    GlobalAvgPool pool_;
    bool frozen_ = false;
};

// Builds an extractor per spec; weights are seeded-random, or loaded from
// spec.weights_path when spec.pretrained is set.
std::unique_ptr<FeatureExtractor> build_backbone(const BackboneSpec& spec, uint64_t init_seed = 0);

}  // namespace dbfuse
