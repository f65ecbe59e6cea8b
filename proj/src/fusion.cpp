#include "dbfuse/fusion.hpp"

#include <cmath>

#include "dbfuse/errors.hpp"
#include "dbfuse/image.hpp"

namespace dbfuse {

ConcatenatedModel::ConcatenatedModel(std::unique_ptr<FeatureExtractor> a,
                                     std::unique_ptr<FeatureExtractor> b, int num_classes,
                                     std::vector<std::string> class_names, HeadConfig head_cfg,
                                     uint64_t seed)
    : a_(std::move(a)),
      b_(std::move(b)),
      num_classes_(num_classes),
      class_names_(std::move(class_names)),
      head_cfg_(head_cfg),
      seed_(seed),
      dropout_rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
    if (num_classes_ < 2) {
        throw ConfigError("num_classes must be >= 2, got " + std::to_string(num_classes_));
    }
    if (b_ && a_->spec().input_side != b_->spec().input_side) {
        throw ConfigError("backbones disagree on input side: " +
                          std::to_string(a_->spec().input_side) + " vs " +
                          std::to_string(b_->spec().input_side));
    }
    if (class_names_.empty()) {
        for (int c = 0; c < num_classes_; ++c) {
            class_names_.push_back("class_" + std::to_string(c));
        }
    }
    if (static_cast<int>(class_names_.size()) != num_classes_) {
        throw ConfigError("class_names length does not match num_classes");
    }
    Rng head_rng(seed + 2);
    if (head_cfg_.hidden > 0) {
        fc1_ = std::make_unique<Dense>("fc1", fused_dim(), head_cfg_.hidden, head_rng);
        fc2_ = std::make_unique<Dense>("fc2", head_cfg_.hidden, num_classes_, head_rng);
    } else {
        fc1_ = std::make_unique<Dense>("fc1", fused_dim(), num_classes_, head_rng);
    }
}

int ConcatenatedModel::fused_dim() const {
    return a_->embedding_dim() + (b_ ? b_->embedding_dim() : 0);
}

MatF fuse(const MatF& a, const MatF& b) {
    if (a.rows != b.rows) {
        throw EvalError("fuse: batch size mismatch, " + std::to_string(a.rows) + " vs " +
                        std::to_string(b.rows));
    }
    MatF out(a.rows, a.cols + b.cols);
    for (int r = 0; r < a.rows; ++r) {
        for (int c = 0; c < a.cols; ++c) out.at(r, c) = a.at(r, c);
        for (int c = 0; c < b.cols; ++c) out.at(r, a.cols + c) = b.at(r, c);
    }
    return out;
}

MatF ConcatenatedModel::extract_fused(const Tensor& batch, bool train) {
    MatF ea = a_->extract(batch, train);
    if (!b_) return ea;
    MatF eb = b_->extract(batch, train);
    return fuse(ea, eb);
}

MatF ConcatenatedModel::head_forward(const MatF& fused, bool train) {
    if (head_cfg_.hidden <= 0) {
        MatF x = fused;
        if (head_cfg_.dropout > 0.0 && train) {
            dropout_mask_.assign(x.v.size(), 1.0f);
            const float scale = 1.0f / static_cast<float>(1.0 - head_cfg_.dropout);
            for (size_t i = 0; i < x.v.size(); ++i) {
                if (dropout_rng_.uniform() < head_cfg_.dropout) {
                    dropout_mask_[i] = 0.0f;
                    x.v[i] = 0.0f;
                } else {
                    dropout_mask_[i] = scale;
                    x.v[i] *= scale;
                }
            }
        } else {
            dropout_mask_.clear();
        }
        return fc1_->forward(x);
    }
    MatF h = fc1_->forward(fused);
    cached_hidden_pre_ = h;
    for (float& v : h.v) {
        if (v < 0.0f) v = 0.0f;  // ReLU
    }
    if (head_cfg_.dropout > 0.0 && train) {
        dropout_mask_.assign(h.v.size(), 1.0f);
        const float scale = 1.0f / static_cast<float>(1.0 - head_cfg_.dropout);
        for (size_t i = 0; i < h.v.size(); ++i) {
            if (dropout_rng_.uniform() < head_cfg_.dropout) {
                dropout_mask_[i] = 0.0f;
                h.v[i] = 0.0f;
            } else {
                dropout_mask_[i] = scale;
                h.v[i] *= scale;
            }
        }
    } else {
        dropout_mask_.clear();
    }
    return fc2_->forward(h);
}

MatF ConcatenatedModel::head_backward(const MatF& dlogits) {
    if (head_cfg_.hidden <= 0) {
        MatF dx = fc1_->backward(dlogits);
        if (!dropout_mask_.empty()) {
            for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= dropout_mask_[i];
        }
        return dx;
    }
    MatF dh = fc2_->backward(dlogits);
    if (!dropout_mask_.empty()) {
        for (size_t i = 0; i < dh.v.size(); ++i) dh.v[i] *= dropout_mask_[i];
    }
    for (size_t i = 0; i < dh.v.size(); ++i) {
        if (cached_hidden_pre_.v[i] <= 0.0f) dh.v[i] = 0.0f;
    }
    return fc1_->backward(dh);
}

void ConcatenatedModel::backward(const MatF& dlogits) {
    MatF dfused = head_backward(dlogits);
    const int da = a_->embedding_dim();
    if (!b_) {
        if (!a_->frozen()) a_->backward_from_embedding(dfused);
        return;
    }
    MatF dea(dfused.rows, da);
    MatF deb(dfused.rows, b_->embedding_dim());
    for (int r = 0; r < dfused.rows; ++r) {
        for (int c = 0; c < da; ++c) dea.at(r, c) = dfused.at(r, c);
        for (int c = 0; c < deb.cols; ++c) deb.at(r, c) = dfused.at(r, da + c);
    }
    if (!a_->frozen()) a_->backward_from_embedding(dea);
    if (!b_->frozen()) b_->backward_from_embedding(deb);
}

void ConcatenatedModel::named_params(std::vector<std::pair<std::string, ParamBlob*>>& out) {
    std::vector<ParamBlob*> tmp;
    a_->collect_params(tmp);
    for (auto* p : tmp) out.emplace_back("a/" + p->tag, p);
    tmp.clear();
    if (b_) {
        b_->collect_params(tmp);
        for (auto* p : tmp) out.emplace_back("b/" + p->tag, p);
        tmp.clear();
    }
    fc1_->collect_params(tmp);
    if (fc2_) fc2_->collect_params(tmp);
    for (auto* p : tmp) out.emplace_back("head/" + p->tag, p);
}

void ConcatenatedModel::trainable_params(std::vector<ParamBlob*>& out) {
    if (!a_->frozen()) a_->collect_params(out);
    if (b_ && !b_->frozen()) b_->collect_params(out);
    fc1_->collect_params(out);
    if (fc2_) fc2_->collect_params(out);
}

void ConcatenatedModel::all_params(std::vector<ParamBlob*>& out) {
    a_->collect_params(out);
    if (b_) b_->collect_params(out);
    fc1_->collect_params(out);
    if (fc2_) fc2_->collect_params(out);
}

std::unique_ptr<ConcatenatedModel> build_concatenated_model(const BackboneSpec& spec_a,
                                                            const BackboneSpec& spec_b,
                                                            int num_classes, uint64_t seed,
                                                            std::vector<std::string> class_names,
                                                            HeadConfig head_cfg) {
    if (spec_a.input_side != spec_b.input_side) {
        throw ConfigError("backbone specs disagree on input side: " +
                          std::to_string(spec_a.input_side) + " vs " +
                          std::to_string(spec_b.input_side));
    }
    auto a = build_backbone(spec_a, seed);
    auto b = build_backbone(spec_b, seed + 1);
    return std::make_unique<ConcatenatedModel>(std::move(a), std::move(b), num_classes,
                                               std::move(class_names), head_cfg, seed);
}

std::unique_ptr<ConcatenatedModel> build_single_model(const BackboneSpec& spec, int num_classes,
                                                      uint64_t seed,
                                                      std::vector<std::string> class_names,
                                                      HeadConfig head_cfg) {
    auto a = build_backbone(spec, seed);
    return std::make_unique<ConcatenatedModel>(std::move(a), nullptr, num_classes,
                                               std::move(class_names), head_cfg, seed);
}

MatD softmax_rows(const MatF& logits) {
    MatD probs(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < logits.cols; ++c) mx = std::max(mx, (double)logits.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < logits.cols; ++c) {
            double e = std::exp(logits.at(r, c) - mx);
            probs.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < logits.cols; ++c) probs.at(r, c) /= sum;
    }
    return probs;
}

std::vector<int> argmax_rows(const MatD& probs) {
    std::vector<int> labels(probs.rows, 0);
    for (int r = 0; r < probs.rows; ++r) {
        int best = 0;
        for (int c = 1; c < probs.cols; ++c) {
            if (probs.at(r, c) > probs.at(r, best)) best = c;
        }
        labels[r] = best;
    }
    return labels;
}

PredictionBatch forward(ConcatenatedModel& model, const Tensor& batch) {
    PredictionBatch out;
    out.logits = model.head_forward(model.extract_fused(batch, false), false);
    out.probabilities = softmax_rows(out.logits);
    out.predicted_labels = argmax_rows(out.probabilities);
    return out;
}

DatasetPredictions predict(ConcatenatedModel& model, const LabeledDataset& ds, int batch_size) {
    if (batch_size < 1) {
        throw EvalError("batch_size must be >= 1");
    }
    if (ds.samples.empty()) {
        throw EvalError("predict: empty dataset");
    }
    const int side = model.input_side();
    const int n = static_cast<int>(ds.samples.size());
    DatasetPredictions out;
    out.probabilities = MatD(n, model.num_classes());
    out.labels.reserve(n);
    std::vector<ImageSample> prepped;
    for (int start = 0; start < n; start += batch_size) {
        const int stop = std::min(n, start + batch_size);
        prepped.clear();
        std::vector<const ImageSample*> ptrs;
        for (int i = start; i < stop; ++i) {
            prepped.push_back(preprocess(ds.samples[i], side));
        }
        for (const auto& s : prepped) ptrs.push_back(&s);
        PredictionBatch pb = forward(model, to_batch(ptrs, side));
        for (int i = start; i < stop; ++i) {
            out.labels.push_back(pb.predicted_labels[i - start]);
            for (int c = 0; c < model.num_classes(); ++c) {
                out.probabilities.at(i, c) = pb.probabilities.at(i - start, c);
            }
        }
    }
    return out;
}

}  // namespace dbfuse
