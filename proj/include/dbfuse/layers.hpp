#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dbfuse/rng.hpp"
#include "dbfuse/tensor.hpp"

namespace dbfuse {

// One trainable weight array plus its gradient accumulator.
struct ParamBlob {
    std::string tag;
    std::vector<float> w;
    std::vector<float> g;

    void zero_grad() { std::fill(g.begin(), g.end(), 0.0f); }
};

// Layers cache their forward inputs; backward accumulates parameter gradients
// and returns the input gradient. One instance serves one computation at a
// time (single-writer during training).
class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual void collect_params(std::vector<ParamBlob*>& out) {}
};

class Conv2d : public Layer {
public:
    Conv2d(std::string tag, int in_ch, int out_ch, int kernel, int stride, int pad, int groups,
           Rng& rng);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamBlob*>& out) override;

private:
    int in_ch_, out_ch_, k_, stride_, pad_, groups_;
    ParamBlob weight_;  // [out_ch][in_ch/groups][k][k]
    ParamBlob bias_;    // [out_ch]
    Tensor cached_x_;
};

class ReLU : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor cached_x_;
};

class Gelu : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor cached_x_;
};

class Silu : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    Tensor cached_x_;
};

// Normalizes over channels at each (sample, y, x) position, with per-channel
// affine parameters.
class ChannelLayerNorm : public Layer {
public:
    ChannelLayerNorm(std::string tag, int channels);

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamBlob*>& out) override;

private:
    int channels_;
    ParamBlob gamma_, beta_;
    Tensor cached_x_;
    std::vector<float> cached_mean_, cached_inv_std_;
    static constexpr float kEps = 1e-5f;
};

class Sequential : public Layer {
public:
    Sequential() = default;
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamBlob*>& out) override;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// y = x + inner(x); inner must preserve shape.
class ResidualBlock : public Layer {
public:
    explicit ResidualBlock(std::unique_ptr<Sequential> inner) : inner_(std::move(inner)) {}

    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;
    void collect_params(std::vector<ParamBlob*>& out) override;

private:
    std::unique_ptr<Sequential> inner_;
};

// N x C x H x W -> N x C x 1 x 1 mean pool.
class GlobalAvgPool : public Layer {
public:
    Tensor forward(const Tensor& x, bool train) override;
    Tensor backward(const Tensor& dy) override;

private:
    int cached_h_ = 0, cached_w_ = 0;
};

// Fully connected layer on row-major matrices (the classification head path).
class Dense {
public:
    Dense(std::string tag, int in_dim, int out_dim, Rng& rng);

    MatF forward(const MatF& x);
    MatF backward(const MatF& dy);
    void collect_params(std::vector<ParamBlob*>& out);

    int in_dim() const { return in_dim_; }
    int out_dim() const { return out_dim_; }

private:
    int in_dim_, out_dim_;
    ParamBlob weight_;  // [out_dim][in_dim]
    ParamBlob bias_;    // [out_dim]
    MatF cached_x_;
};

}  // namespace dbfuse
