#include "dbfuse/backbone.hpp"

#include "dbfuse/errors.hpp"
#include "dbfuse/weights_io.hpp"

namespace dbfuse {

std::string to_string(BackboneFamily f) {
    switch (f) {
        case BackboneFamily::convnext: return "convnext";
        case BackboneFamily::efficientnet: return "efficientnet";
        case BackboneFamily::tiny_test: return "tiny_test";
    }
    return "?";
}

BackboneFamily backbone_family_from_string(const std::string& s) {
    if (s == "convnext") return BackboneFamily::convnext;
    if (s == "efficientnet") return BackboneFamily::efficientnet;
    if (s == "tiny_test") return BackboneFamily::tiny_test;
    throw ConfigError("unknown backbone family: '" + s + "'");
}

namespace {

int parse_tiny_test_width(const std::string& variant) {
    if (variant.size() < 2 || variant[0] != 'w') {
        throw ConfigError("tiny_test variant must be 'w<width>', got '" + variant + "'");
    }
    int width = 0;
    try {
        width = std::stoi(variant.substr(1));
    } catch (const std::exception&) {
        width = 0;
    }
    if (width <= 0) {
        throw ConfigError("invalid tiny_test width in variant '" + variant + "'");
    }
    return width;
}

}  // namespace

int BackboneSpec::embedding_dim() const {
    switch (family) {
        case BackboneFamily::tiny_test:
            return parse_tiny_test_width(variant);
        case BackboneFamily::convnext:
            if (variant == "tiny") return 768;
            throw ConfigError("unknown convnext variant: '" + variant + "' (supported: tiny)");
        case BackboneFamily::efficientnet:
            if (variant == "b0") return 1280;
            throw ConfigError("unknown efficientnet variant: '" + variant + "' (supported: b0)");
    }
    throw ConfigError("invalid backbone family");
}

FeatureExtractor::FeatureExtractor(BackboneSpec spec, std::unique_ptr<Sequential> net)
    : spec_(std::move(spec)), net_(std::move(net)) {}

MatF FeatureExtractor::extract(const Tensor& batch, bool train) {
    if (batch.c != 3 || batch.h != spec_.input_side || batch.w != spec_.input_side) {
        throw DataError("extract_embeddings: expected Nx3x" + std::to_string(spec_.input_side) +
                        "x" + std::to_string(spec_.input_side) + ", got N x " +
                        std::to_string(batch.c) + " x " + std::to_string(batch.h) + " x " +
                        std::to_string(batch.w));
    }
    Tensor features = net_->forward(batch, train);
    Tensor pooled = pool_.forward(features, train);
    MatF emb(batch.n, pooled.c);
    for (int n = 0; n < batch.n; ++n) {
        for (int c = 0; c < pooled.c; ++c) {
            emb.at(n, c) = pooled.at(n, c, 0, 0);
        }
    }
    return emb;
}

void FeatureExtractor::backward_from_embedding(const MatF& d_embedding) {
    Tensor d(d_embedding.rows, d_embedding.cols, 1, 1);
    for (int n = 0; n < d_embedding.rows; ++n) {
        for (int c = 0; c < d_embedding.cols; ++c) {
            d.at(n, c, 0, 0) = d_embedding.at(n, c);
        }
    }
    net_->backward(pool_.backward(d));
}

void FeatureExtractor::collect_params(std::vector<ParamBlob*>& out) {
    net_->collect_params(out);
}

namespace {

std::unique_ptr<Sequential> make_tiny_test_net(const std::string& p, int width, Rng& rng) {
    auto net = std::make_unique<Sequential>();
    const int mid = std::max(4, width / 2);
    net->add(std::make_unique<Conv2d>(p + "conv1", 3, mid, 3, 2, 1, 1, rng));
    net->add(std::make_unique<ReLU>());
    net->add(std::make_unique<Conv2d>(p + "conv2", mid, width, 3, 2, 1, 1, rng));
    net->add(std::make_unique<ReLU>());
    return net;
}

std::unique_ptr<Sequential> make_convnext_block(const std::string& p, int dim, Rng& rng) {
    auto inner = std::make_unique<Sequential>();
    inner->add(std::make_unique<Conv2d>(p + ".dwconv", dim, dim, 7, 1, 3, dim, rng));
    inner->add(std::make_unique<ChannelLayerNorm>(p + ".norm", dim));
    inner->add(std::make_unique<Conv2d>(p + ".pw1", dim, 4 * dim, 1, 1, 0, 1, rng));
    inner->add(std::make_unique<Gelu>());
    inner->add(std::make_unique<Conv2d>(p + ".pw2", 4 * dim, dim, 1, 1, 0, 1, rng));
    return inner;
}

std::unique_ptr<Sequential> make_convnext_tiny_net(const std::string& p, Rng& rng) {
    const int dims[4] = {96, 192, 384, 768};
    const int depths[4] = {3, 3, 9, 3};
    auto net = std::make_unique<Sequential>();
    net->add(std::make_unique<Conv2d>(p + "stem.conv", 3, dims[0], 4, 4, 0, 1, rng));
    net->add(std::make_unique<ChannelLayerNorm>(p + "stem.norm", dims[0]));
    for (int stage = 0; stage < 4; ++stage) {
        const std::string sp = p + "stage" + std::to_string(stage);
        if (stage > 0) {
            net->add(std::make_unique<ChannelLayerNorm>(sp + ".down.norm", dims[stage - 1]));
            net->add(std::make_unique<Conv2d>(sp + ".down.conv", dims[stage - 1], dims[stage], 2, 2,
                                              0, 1, rng));
        }
        for (int b = 0; b < depths[stage]; ++b) {
            net->add(std::make_unique<ResidualBlock>(
                make_convnext_block(sp + ".block" + std::to_string(b), dims[stage], rng)));
        }
    }
    return net;
}

struct MBConvStage {
    int expand, out_ch, repeats, stride, kernel;
};

void add_mbconv(Sequential& net, const std::string& p, int in_ch, int out_ch, int expand,
                int stride, int kernel, Rng& rng) {
    const bool residual = (stride == 1 && in_ch == out_ch);
    auto body = std::make_unique<Sequential>();
    int mid = in_ch * expand;
    if (expand != 1) {
        body->add(std::make_unique<Conv2d>(p + ".expand", in_ch, mid, 1, 1, 0, 1, rng));
        body->add(std::make_unique<Silu>());
    }
    body->add(std::make_unique<Conv2d>(p + ".dw", mid, mid, kernel, stride, kernel / 2, mid, rng));
    body->add(std::make_unique<Silu>());
    body->add(std::make_unique<Conv2d>(p + ".project", mid, out_ch, 1, 1, 0, 1, rng));
    if (residual) {
        net.add(std::make_unique<ResidualBlock>(std::move(body)));
    } else {
        net.add(std::move(body));
    }
}

std::unique_ptr<Sequential> make_efficientnet_b0_net(const std::string& p, Rng& rng) {
    const MBConvStage stages[] = {
        {1, 16, 1, 1, 3}, {6, 24, 2, 2, 3}, {6, 40, 2, 2, 5},  {6, 80, 3, 2, 3},
        {6, 112, 3, 1, 5}, {6, 192, 4, 2, 5}, {6, 320, 1, 1, 3},
    };
    auto net = std::make_unique<Sequential>();
    net->add(std::make_unique<Conv2d>(p + "stem.conv", 3, 32, 3, 2, 1, 1, rng));
    net->add(std::make_unique<Silu>());
    int in_ch = 32;
    int si = 0;
    for (const auto& st : stages) {
        for (int r = 0; r < st.repeats; ++r) {
            const std::string bp =
                p + "stage" + std::to_string(si) + ".block" + std::to_string(r);
            add_mbconv(*net, bp, in_ch, st.out_ch, st.expand, r == 0 ? st.stride : 1, st.kernel,
                       rng);
            in_ch = st.out_ch;
        }
        ++si;
    }
    net->add(std::make_unique<Conv2d>(p + "head.conv", in_ch, 1280, 1, 1, 0, 1, rng));
    net->add(std::make_unique<Silu>());
    return net;
}

}  // namespace

std::unique_ptr<FeatureExtractor> build_backbone(const BackboneSpec& spec, uint64_t init_seed) {
    const int dim = spec.embedding_dim();  // validates family/variant
    if (spec.input_side <= 0) {
        throw ConfigError("backbone input_side must be positive");
    }
    if (spec.pretrained && spec.family == BackboneFamily::tiny_test) {
        throw ConfigError("tiny_test backbones have no pretrained weights");
    }

    Rng rng(init_seed);
    std::unique_ptr<Sequential> net;
    switch (spec.family) {
        case BackboneFamily::tiny_test:
            net = make_tiny_test_net("", dim, rng);
            break;
        case BackboneFamily::convnext:
            net = make_convnext_tiny_net("", rng);
            break;
        case BackboneFamily::efficientnet:
            net = make_efficientnet_b0_net("", rng);
            break;
    }
    auto fx = std::make_unique<FeatureExtractor>(spec, std::move(net));

    if (spec.pretrained) {
        if (spec.weights_path.empty()) {
            throw ConfigError("pretrained weights unavailable for " + to_string(spec.family) + "/" +
                              spec.variant +
                              ": set weights_path to a local weights file, or run with "
                              "pretrained=false for seeded random initialization");
        }
        auto blobs = read_blob_file(spec.weights_path);
        std::vector<ParamBlob*> params;
        fx->collect_params(params);
        for (ParamBlob* blob : params) {
            auto it = blobs.find(blob->tag);
            if (it == blobs.end() || it->second.size() != blob->w.size()) {
                throw ConfigError("pretrained weights file " + spec.weights_path +
                                  " does not provide parameter '" + blob->tag +
                                  "'; run with pretrained=false to use random initialization");
            }
            blob->w = it->second;
        }
    }
    return fx;
}

}  // namespace dbfuse
