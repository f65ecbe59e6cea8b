#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dbfuse/backbone.hpp"
#include "dbfuse/dataset.hpp"
#include "dbfuse/layers.hpp"
#include "dbfuse/rng.hpp"
#include "dbfuse/tensor.hpp"

namespace dbfuse {

struct PredictionBatch {
    MatF logits;                       // B x C
    MatD probabilities;                // B x C, rows sum to 1
    std::vector<int> predicted_labels; // row argmax, lowest index wins ties
};

struct HeadConfig {
    int hidden = 0;        // 0 = single affine layer
    double dropout = 0.0;  // applied before the final layer, training only
};

// Two backbone embeddings joined end-to-end, classified by a shared head.
// backbone_b may be absent (single-backbone ablation model).
class ConcatenatedModel {
public:
    ConcatenatedModel(std::unique_ptr<FeatureExtractor> a, std::unique_ptr<FeatureExtractor> b,
                      int num_classes, std::vector<std::string> class_names, HeadConfig head_cfg,
                      uint64_t seed);

    FeatureExtractor& backbone_a() { return *a_; }
    FeatureExtractor* backbone_b() { return b_.get(); }
    const FeatureExtractor& backbone_a() const { return *a_; }
    const FeatureExtractor* backbone_b() const { return b_.get(); }

    int num_classes() const { return num_classes_; }
    int input_side() const { return a_->spec().input_side; }
    int fused_dim() const;
    const std::vector<std::string>& class_names() const { return class_names_; }
    const HeadConfig& head_config() const { return head_cfg_; }
    uint64_t seed() const { return seed_; }

    // Extract both embeddings and concatenate (training caches retained).
    MatF extract_fused(const Tensor& batch, bool train);

    // Head over an already-fused embedding matrix.
    MatF head_forward(const MatF& fused, bool train);
    // Backprop through the head only; returns gradient w.r.t. fused input.
    MatF head_backward(const MatF& dlogits);

    // Backprop dlogits through head and (unless frozen) both backbones.
    void backward(const MatF& dlogits);

    void named_params(std::vector<std::pair<std::string, ParamBlob*>>& out);
    // Parameters the optimizer may update (honors freeze flags).
    void trainable_params(std::vector<ParamBlob*>& out);
    void all_params(std::vector<ParamBlob*>& out);

private:
    std::unique_ptr<FeatureExtractor> a_, b_;
    int num_classes_;
    std::vector<std::string> class_names_;
    HeadConfig head_cfg_;
    std::unique_ptr<Dense> fc1_;          // fused -> hidden, or fused -> C
    std::unique_ptr<Dense> fc2_;          // hidden -> C (when hidden > 0)
    uint64_t seed_;
    Rng dropout_rng_;
    MatF cached_hidden_pre_;              // pre-activation of hidden layer
    std::vector<float> dropout_mask_;
};

// Row-wise concatenation: out row i = a[i] ++ b[i].
MatF fuse(const MatF& a, const MatF& b);

std::unique_ptr<ConcatenatedModel> build_concatenated_model(
    const BackboneSpec& spec_a, const BackboneSpec& spec_b, int num_classes, uint64_t seed,
    std::vector<std::string> class_names = {}, HeadConfig head_cfg = {});

// Single-backbone variant used for the ablation comparison.
std::unique_ptr<ConcatenatedModel> build_single_model(const BackboneSpec& spec, int num_classes,
                                                      uint64_t seed,
                                                      std::vector<std::string> class_names = {},
                                                      HeadConfig head_cfg = {});

// logits -> softmax probabilities -> argmax labels.
PredictionBatch forward(ConcatenatedModel& model, const Tensor& batch);

// Batched prediction over a dataset (samples preprocessed to the model's
// input side); output order follows dataset order, independent of batch_size.
struct DatasetPredictions {
    std::vector<int> labels;
    MatD probabilities;  // N x C
};
DatasetPredictions predict(ConcatenatedModel& model, const LabeledDataset& ds, int batch_size);

MatD softmax_rows(const MatF& logits);
std::vector<int> argmax_rows(const MatD& probs);

}  // namespace dbfuse
