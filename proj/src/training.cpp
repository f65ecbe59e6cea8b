#include "dbfuse/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "dbfuse/errors.hpp"
#include "dbfuse/json_conv.hpp"
#include "dbfuse/rng.hpp"
#include "dbfuse/weights_io.hpp"

namespace fs = std::filesystem;

namespace dbfuse {

std::string to_string(OptimizerKind k) {
    return k == OptimizerKind::adam ? "adam" : "sgd_momentum";
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "adam") return OptimizerKind::adam;
    if (s == "sgd_momentum") return OptimizerKind::sgd_momentum;
    throw ConfigError("unknown optimizer: '" + s + "' (supported: adam, sgd_momentum)");
}

double default_learning_rate(bool freeze_backbones) {
    return freeze_backbones ? 1e-3 : 1e-4;
}

namespace {

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::vector<ParamBlob*>& params) = 0;
};

class Adam : public Optimizer {
public:
    explicit Adam(double lr) : lr_(lr) {}

    void step(std::vector<ParamBlob*>& params) override {
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, t_);
        const double bc2 = 1.0 - std::pow(kBeta2, t_);
        for (ParamBlob* p : params) {
            auto& st = state_[p];
            st.m.resize(p->w.size(), 0.0f);
            st.v.resize(p->w.size(), 0.0f);
            for (size_t i = 0; i < p->w.size(); ++i) {
                const float g = p->g[i];
                st.m[i] = static_cast<float>(kBeta1 * st.m[i] + (1.0 - kBeta1) * g);
                st.v[i] = static_cast<float>(kBeta2 * st.v[i] + (1.0 - kBeta2) * g * g);
                const double mhat = st.m[i] / bc1;
                const double vhat = st.v[i] / bc2;
                p->w[i] -= static_cast<float>(lr_ * mhat / (std::sqrt(vhat) + kEps));
            }
        }
    }

private:
    struct State {
        std::vector<float> m, v;
    };
    static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    double lr_;
    long long t_ = 0;
    std::map<ParamBlob*, State> state_;
};

class SgdMomentum : public Optimizer {
public:
    explicit SgdMomentum(double lr) : lr_(lr) {}

    void step(std::vector<ParamBlob*>& params) override {
        for (ParamBlob* p : params) {
            auto& vel = state_[p];
            vel.resize(p->w.size(), 0.0f);
            for (size_t i = 0; i < p->w.size(); ++i) {
                vel[i] = static_cast<float>(kMomentum * vel[i] + p->g[i]);
                p->w[i] -= static_cast<float>(lr_ * vel[i]);
            }
        }
    }

private:
    static constexpr double kMomentum = 0.9;
    double lr_;
    std::map<ParamBlob*, std::vector<float>> state_;
};

std::unique_ptr<Optimizer> make_optimizer(const TrainingConfig& cfg) {
    if (cfg.learning_rate < 0.0) {
        throw TrainingError("learning_rate must be >= 0");
    }
    if (cfg.optimizer == OptimizerKind::adam) return std::make_unique<Adam>(cfg.learning_rate);
    return std::make_unique<SgdMomentum>(cfg.learning_rate);
}

// Sum of per-sample cross-entropies and the mean gradient w.r.t. logits.
double cross_entropy_sum(const MatF& logits, const std::vector<int>& labels, MatF* dlogits) {
    double loss_sum = 0.0;
    if (dlogits) *dlogits = MatF(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        double mx = -1e300;
        for (int c = 0; c < logits.cols; ++c) mx = std::max(mx, (double)logits.at(r, c));
        double sum = 0.0;
        for (int c = 0; c < logits.cols; ++c) sum += std::exp(logits.at(r, c) - mx);
        const double lse = mx + std::log(sum);
        loss_sum += lse - logits.at(r, labels[r]);
        if (dlogits) {
            for (int c = 0; c < logits.cols; ++c) {
                double p = std::exp(logits.at(r, c) - lse);
                dlogits->at(r, c) =
                    static_cast<float>((p - (c == labels[r] ? 1.0 : 0.0)) / logits.rows);
            }
        }
    }
    return loss_sum;
}

Tensor make_batch(const std::vector<ImageSample>& prepped, const std::vector<size_t>& order,
                  size_t start, size_t stop, int side, const std::vector<bool>* flips) {
    std::vector<const ImageSample*> ptrs;
    std::vector<bool> flip_slice;
    for (size_t i = start; i < stop; ++i) {
        ptrs.push_back(&prepped[order[i]]);
        if (flips) flip_slice.push_back((*flips)[i - start]);
    }
    return to_batch(ptrs, side, flips ? &flip_slice : nullptr);
}

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

EvalResult eval_prepped(ConcatenatedModel& model, const std::vector<ImageSample>& prepped,
                        int batch_size) {
    const int side = model.input_side();
    double loss_sum = 0.0;
    long long correct = 0;
    std::vector<size_t> order(prepped.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t start = 0; start < prepped.size(); start += batch_size) {
        const size_t stop = std::min(prepped.size(), start + batch_size);
        Tensor batch = make_batch(prepped, order, start, stop, side, nullptr);
        MatF logits = model.head_forward(model.extract_fused(batch, false), false);
        std::vector<int> labels;
        for (size_t i = start; i < stop; ++i) labels.push_back(prepped[i].label);
        loss_sum += cross_entropy_sum(logits, labels, nullptr);
        std::vector<int> preds = argmax_rows(softmax_rows(logits));
        for (size_t i = 0; i < preds.size(); ++i) {
            if (preds[i] == labels[i]) ++correct;
        }
    }
    EvalResult r;
    r.loss = loss_sum / static_cast<double>(prepped.size());
    r.accuracy = static_cast<double>(correct) / static_cast<double>(prepped.size());
    return r;
}

// Embedding rows for every sample, extracted in inference mode.
MatF cache_embeddings(ConcatenatedModel& model, const std::vector<ImageSample>& prepped,
                      int batch_size) {
    const int side = model.input_side();
    MatF all(static_cast<int>(prepped.size()), model.fused_dim());
    std::vector<size_t> order(prepped.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (size_t start = 0; start < prepped.size(); start += batch_size) {
        const size_t stop = std::min(prepped.size(), start + batch_size);
        Tensor batch = make_batch(prepped, order, start, stop, side, nullptr);
        MatF emb = model.extract_fused(batch, false);
        for (size_t i = start; i < stop; ++i) {
            for (int c = 0; c < emb.cols; ++c) {
                all.at(static_cast<int>(i), c) = emb.at(static_cast<int>(i - start), c);
            }
        }
    }
    return all;
}

EvalResult eval_cached(ConcatenatedModel& model, const MatF& emb, const std::vector<int>& labels) {
    MatF logits = model.head_forward(emb, false);
    EvalResult r;
    r.loss = cross_entropy_sum(logits, labels, nullptr) / static_cast<double>(labels.size());
    std::vector<int> preds = argmax_rows(softmax_rows(logits));
    long long correct = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] == labels[i]) ++correct;
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    return r;
}

std::vector<std::vector<float>> snapshot_weights(ConcatenatedModel& model) {
    std::vector<ParamBlob*> params;
    model.all_params(params);
    std::vector<std::vector<float>> snap;
    snap.reserve(params.size());
    for (ParamBlob* p : params) snap.push_back(p->w);
    return snap;
}

void restore_weights(ConcatenatedModel& model, const std::vector<std::vector<float>>& snap) {
    std::vector<ParamBlob*> params;
    model.all_params(params);
    for (size_t i = 0; i < params.size(); ++i) params[i]->w = snap[i];
}

}  // namespace

TrainResult train(ConcatenatedModel& model, const DataSplit& split, const TrainingConfig& cfg) {
    if (split.train.samples.empty()) {
        throw TrainingError("training set is empty");
    }
    if (model.num_classes() != split.train.num_classes()) {
        throw TrainingError("model has " + std::to_string(model.num_classes()) +
                            " classes but dataset has " +
                            std::to_string(split.train.num_classes()));
    }
    if (cfg.epochs < 1 || cfg.batch_size < 1) {
        throw TrainingError("epochs and batch_size must be >= 1");
    }

    model.backbone_a().set_frozen(cfg.freeze_backbones);
    if (model.backbone_b()) model.backbone_b()->set_frozen(cfg.freeze_backbones);

    const int side = model.input_side();
    std::vector<ImageSample> train_set, val_set;
    for (const auto& s : split.train.samples) train_set.push_back(preprocess(s, side));
    for (const auto& s : split.test.samples) val_set.push_back(preprocess(s, side));
    std::vector<int> train_labels, val_labels;
    for (const auto& s : train_set) train_labels.push_back(s.label);
    for (const auto& s : val_set) val_labels.push_back(s.label);

    // With frozen backbones and no augmentation, embeddings are constant and
    // can be extracted once.
    const bool cache = cfg.freeze_backbones && !cfg.flip_augment;
    MatF train_emb, val_emb;
    if (cache) {
        train_emb = cache_embeddings(model, train_set, cfg.batch_size);
        if (!val_set.empty()) val_emb = cache_embeddings(model, val_set, cfg.batch_size);
    }

    std::vector<ParamBlob*> trainable;
    model.trainable_params(trainable);
    auto optimizer = make_optimizer(cfg);
    Rng shuffle_rng(cfg.seed ^ 0x51f7ab1eULL);
    Rng flip_rng(cfg.seed + 17);

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    TrainResult result;
    double best_val_acc = -1.0;
    std::vector<std::vector<float>> best_weights = snapshot_weights(model);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        int batch_index = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
            const size_t stop = std::min(order.size(), start + cfg.batch_size);
            const int bsz = static_cast<int>(stop - start);
            std::vector<int> labels(bsz);
            for (int i = 0; i < bsz; ++i) labels[i] = train_set[order[start + i]].label;

            MatF logits, dlogits;
            if (cache) {
                MatF sub(bsz, train_emb.cols);
                for (int i = 0; i < bsz; ++i) {
                    for (int c = 0; c < train_emb.cols; ++c) {
                        sub.at(i, c) = train_emb.at(static_cast<int>(order[start + i]), c);
                    }
                }
                logits = model.head_forward(sub, true);
            } else {
                std::vector<bool> flips(bsz, false);
                if (cfg.flip_augment) {
                    for (int i = 0; i < bsz; ++i) flips[i] = flip_rng.uniform() < 0.5;
                }
                Tensor batch = make_batch(train_set, order, start, stop, side,
                                          cfg.flip_augment ? &flips : nullptr);
                logits = model.head_forward(model.extract_fused(batch, true), true);
            }

            const double batch_loss = cross_entropy_sum(logits, labels, &dlogits) / bsz;
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) +
                                    ", batch " + std::to_string(batch_index));
            }
            for (ParamBlob* p : trainable) p->zero_grad();
            if (cache) {
                model.head_backward(dlogits);
            } else {
                model.backward(dlogits);
            }
            optimizer->step(trainable);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        if (cache) {
            EvalResult tr = eval_cached(model, train_emb, train_labels);
            rec.train_loss = tr.loss;
            rec.train_accuracy = tr.accuracy;
            if (!val_set.empty()) {
                EvalResult va = eval_cached(model, val_emb, val_labels);
                rec.val_loss = va.loss;
                rec.val_accuracy = va.accuracy;
            }
        } else {
            EvalResult tr = eval_prepped(model, train_set, cfg.batch_size);
            rec.train_loss = tr.loss;
            rec.train_accuracy = tr.accuracy;
            if (!val_set.empty()) {
                EvalResult va = eval_prepped(model, val_set, cfg.batch_size);
                rec.val_loss = va.loss;
                rec.val_accuracy = va.accuracy;
            }
        }
        result.history.records.push_back(rec);
        if (rec.val_accuracy > best_val_acc) {
            best_val_acc = rec.val_accuracy;
            best_weights = snapshot_weights(model);
        }
    }

    if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        write_history_csv((fs::path(cfg.output_dir) / "history.csv").string(), result.history);
        result.final_checkpoint =
            save_checkpoint(model, cfg, result.history,
                            (fs::path(cfg.output_dir) / "checkpoint_final").string());
        auto current = snapshot_weights(model);
        restore_weights(model, best_weights);
        result.best_checkpoint =
            save_checkpoint(model, cfg, result.history,
                            (fs::path(cfg.output_dir) / "checkpoint_best").string());
        restore_weights(model, current);
    }
    return result;
}

std::pair<double, double> evaluate_loss_accuracy(ConcatenatedModel& model,
                                                 const LabeledDataset& ds, int batch_size) {
    if (ds.samples.empty()) {
        throw EvalError("evaluate_loss_accuracy: empty dataset");
    }
    if (batch_size < 1) {
        throw EvalError("batch_size must be >= 1");
    }
    std::vector<ImageSample> prepped;
    for (const auto& s : ds.samples) prepped.push_back(preprocess(s, model.input_side()));
    EvalResult r = eval_prepped(model, prepped, batch_size);
    return {r.loss, r.accuracy};
}

Checkpoint save_checkpoint(ConcatenatedModel& model, const TrainingConfig& cfg,
                           const TrainingHistory& history, const std::string& dir) {
    fs::create_directories(dir);
    const std::string weights_path = (fs::path(dir) / "weights.bin").string();

    std::vector<std::pair<std::string, ParamBlob*>> named;
    model.named_params(named);
    std::vector<std::pair<std::string, const std::vector<float>*>> blobs;
    for (const auto& [tag, p] : named) blobs.emplace_back(tag, &p->w);
    write_blob_file(weights_path, blobs);

    nlohmann::json manifest = {
        {"format_version", 1},
        {"model",
         {{"backbone_a", to_json(model.backbone_a().spec())},
          {"backbone_b", model.backbone_b() ? to_json(model.backbone_b()->spec())
                                            : nlohmann::json(nullptr)},
          {"num_classes", model.num_classes()},
          {"class_names", model.class_names()},
          {"head", to_json(model.head_config())},
          {"seed", model.seed()}}},
        {"preprocess", {{"side", model.input_side()}, {"normalization", "scale01"}}},
        {"training", to_json(cfg)},
        {"final_epoch", history.records.empty()
                            ? nlohmann::json(nullptr)
                            : nlohmann::json({{"epoch", history.records.back().epoch},
                                              {"train_loss", history.records.back().train_loss},
                                              {"train_accuracy",
                                               history.records.back().train_accuracy},
                                              {"val_loss", history.records.back().val_loss},
                                              {"val_accuracy",
                                               history.records.back().val_accuracy}})},
        {"hashes", {{"weights_bin", file_content_hash(weights_path)}}},
    };
    std::ofstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw DataError("cannot write manifest under " + dir);
    mf << manifest.dump(2) << "\n";

    Checkpoint ckpt;
    ckpt.dir = dir;
    ckpt.manifest = std::move(manifest);
    return ckpt;
}

LoadedCheckpoint load_checkpoint(const std::string& dir) {
    const std::string manifest_path = (fs::path(dir) / "manifest.json").string();
    const std::string weights_path = (fs::path(dir) / "weights.bin").string();
    std::ifstream mf(manifest_path);
    if (!mf) throw DataError("cannot open checkpoint manifest: " + manifest_path);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("corrupt checkpoint manifest " + manifest_path + ": " + e.what());
    }

    const std::string expected = manifest.at("hashes").at("weights_bin").get<std::string>();
    const std::string actual = file_content_hash(weights_path);
    if (expected != actual) {
        throw DataError("checkpoint weights hash mismatch for " + weights_path + ": manifest " +
                        expected + ", file " + actual);
    }

    const auto& jm = manifest.at("model");
    BackboneSpec spec_a = backbone_spec_from_json(jm.at("backbone_a"));
    spec_a.pretrained = false;  // weights come from the checkpoint itself
    spec_a.weights_path.clear();
    std::unique_ptr<ConcatenatedModel> model;
    const int num_classes = jm.at("num_classes").get<int>();
    auto class_names = jm.at("class_names").get<std::vector<std::string>>();
    HeadConfig head = head_config_from_json(jm.at("head"));
    const uint64_t seed = jm.at("seed").get<uint64_t>();
    if (!jm.at("backbone_b").is_null()) {
        BackboneSpec spec_b = backbone_spec_from_json(jm.at("backbone_b"));
        spec_b.pretrained = false;
        spec_b.weights_path.clear();
        model = build_concatenated_model(spec_a, spec_b, num_classes, seed, class_names, head);
    } else {
        model = build_single_model(spec_a, num_classes, seed, class_names, head);
    }

    auto blob_map = read_blob_file(weights_path);
    std::vector<std::pair<std::string, ParamBlob*>> named;
    model->named_params(named);
    for (auto& [tag, p] : named) {
        auto it = blob_map.find(tag);
        if (it == blob_map.end() || it->second.size() != p->w.size()) {
            throw DataError("checkpoint " + dir + " is missing parameter '" + tag + "'");
        }
        p->w = it->second;
    }

    LoadedCheckpoint out;
    out.model = std::move(model);
    out.manifest = std::move(manifest);
    return out;
}

void write_history_csv(const std::string& path, const TrainingHistory& history) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path);
    f << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
    char buf[256];
    for (const auto& r : history.records) {
        std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f\n", r.epoch, r.train_loss,
                      r.train_accuracy, r.val_loss, r.val_accuracy);
        f << buf;
    }
}

TrainingHistory read_history_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open " + path);
    TrainingHistory h;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        EpochRecord r;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &r.epoch, &r.train_loss,
                        &r.train_accuracy, &r.val_loss, &r.val_accuracy) != 5) {
            throw DataError("malformed history row in " + path + ": " + line);
        }
        h.records.push_back(r);
    }
    return h;
}

}  // namespace dbfuse
