#include "dbfuse/layers.hpp"

#include <cmath>

#include "dbfuse/errors.hpp"

namespace dbfuse {

namespace {

void init_uniform_fan_in(ParamBlob& blob, int fan_in, Rng& rng) {
    const double a = std::sqrt(1.0 / fan_in);
    for (float& v : blob.w) {
        v = static_cast<float>(rng.uniform(-a, a));
    }
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string tag, int in_ch, int out_ch, int kernel, int stride, int pad, int groups,
               Rng& rng)
    : in_ch_(in_ch), out_ch_(out_ch), k_(kernel), stride_(stride), pad_(pad), groups_(groups) {
    if (in_ch % groups != 0 || out_ch % groups != 0) {
        throw TrainingError("Conv2d '" + tag + "': channels not divisible by groups");
    }
    const int icg = in_ch / groups;
    weight_.tag = tag + ".weight";
    weight_.w.resize(static_cast<size_t>(out_ch) * icg * kernel * kernel);
    weight_.g.resize(weight_.w.size(), 0.0f);
    bias_.tag = tag + ".bias";
    bias_.w.resize(out_ch, 0.0f);
    bias_.g.resize(out_ch, 0.0f);
    init_uniform_fan_in(weight_, icg * kernel * kernel, rng);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    if (x.c != in_ch_) {
        throw TrainingError("Conv2d '" + weight_.tag + "': expected " + std::to_string(in_ch_) +
                            " input channels, got " + std::to_string(x.c));
    }
    cached_x_ = x;
    const int oh = (x.h + 2 * pad_ - k_) / stride_ + 1;
    const int ow = (x.w + 2 * pad_ - k_) / stride_ + 1;
    const int icg = in_ch_ / groups_;
    const int ocg = out_ch_ / groups_;
    Tensor y(x.n, out_ch_, oh, ow);

    for (int n = 0; n < x.n; ++n) {
        for (int oc = 0; oc < out_ch_; ++oc) {
            const int g = oc / ocg;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    float acc = bias_.w[oc];
                    const int iy0 = oy * stride_ - pad_;
                    const int ix0 = ox * stride_ - pad_;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ix0 + kx;
                            if (ix < 0 || ix >= x.w) continue;
                            const float* wrow =
                                &weight_.w[((static_cast<size_t>(oc) * icg) * k_ + ky) * k_ + kx];
                            for (int ic = 0; ic < icg; ++ic) {
                                acc += wrow[static_cast<size_t>(ic) * k_ * k_] *
                                       x.at(n, g * icg + ic, iy, ix);
                            }
                        }
                    }
                    y.at(n, oc, oy, ox) = acc;
                }
            }
        }
    }
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const Tensor& x = cached_x_;
    const int icg = in_ch_ / groups_;
    const int ocg = out_ch_ / groups_;
    Tensor dx(x.n, x.c, x.h, x.w);

    for (int n = 0; n < dy.n; ++n) {
        for (int oc = 0; oc < out_ch_; ++oc) {
            const int g = oc / ocg;
            for (int oy = 0; oy < dy.h; ++oy) {
                for (int ox = 0; ox < dy.w; ++ox) {
                    const float grad = dy.at(n, oc, oy, ox);
                    if (grad == 0.0f) continue;
                    bias_.g[oc] += grad;
                    const int iy0 = oy * stride_ - pad_;
                    const int ix0 = ox * stride_ - pad_;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int iy = iy0 + ky;
                        if (iy < 0 || iy >= x.h) continue;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int ix = ix0 + kx;
                            if (ix < 0 || ix >= x.w) continue;
                            for (int ic = 0; ic < icg; ++ic) {
                                const size_t wi =
                                    ((static_cast<size_t>(oc) * icg + ic) * k_ + ky) * k_ + kx;
                                weight_.g[wi] += grad * x.at(n, g * icg + ic, iy, ix);
                                dx.at(n, g * icg + ic, iy, ix) += grad * weight_.w[wi];
                            }
                        }
                    }
                }
            }
        }
    }
    return dx;
}

void Conv2d::collect_params(std::vector<ParamBlob*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

// ------------------------------------------------------------ activations

Tensor ReLU::forward(const Tensor& x, bool) {
    cached_x_ = x;
    Tensor y = x;
    for (float& v : y.data) {
        if (v < 0.0f) v = 0.0f;
    }
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i) {
        if (cached_x_.data[i] <= 0.0f) dx.data[i] = 0.0f;
    }
    return dx;
}

namespace {
constexpr float kInvSqrt2 = 0.70710678118654752440f;
constexpr float kInvSqrt2Pi = 0.39894228040143267794f;
}  // namespace

Tensor Gelu::forward(const Tensor& x, bool) {
    cached_x_ = x;
    Tensor y = x;
    for (float& v : y.data) {
        v = 0.5f * v * (1.0f + std::erf(v * kInvSqrt2));
    }
    return y;
}

Tensor Gelu::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i) {
        const float v = cached_x_.data[i];
        const float cdf = 0.5f * (1.0f + std::erf(v * kInvSqrt2));
        const float pdf = kInvSqrt2Pi * std::exp(-0.5f * v * v);
        dx.data[i] *= cdf + v * pdf;
    }
    return dx;
}

Tensor Silu::forward(const Tensor& x, bool) {
    cached_x_ = x;
    Tensor y = x;
    for (float& v : y.data) {
        v = v / (1.0f + std::exp(-v));
    }
    return y;
}

Tensor Silu::backward(const Tensor& dy) {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i) {
        const float v = cached_x_.data[i];
        const float s = 1.0f / (1.0f + std::exp(-v));
        dx.data[i] *= s * (1.0f + v * (1.0f - s));
    }
    return dx;
}

// ------------------------------------------------------- ChannelLayerNorm

ChannelLayerNorm::ChannelLayerNorm(std::string tag, int channels) : channels_(channels) {
    gamma_.tag = tag + ".gamma";
    gamma_.w.assign(channels, 1.0f);
    gamma_.g.assign(channels, 0.0f);
    beta_.tag = tag + ".beta";
    beta_.w.assign(channels, 0.0f);
    beta_.g.assign(channels, 0.0f);
}

Tensor ChannelLayerNorm::forward(const Tensor& x, bool) {
    cached_x_ = x;
    const size_t positions = static_cast<size_t>(x.n) * x.h * x.w;
    cached_mean_.assign(positions, 0.0f);
    cached_inv_std_.assign(positions, 0.0f);
    Tensor y(x.n, x.c, x.h, x.w);
    size_t p = 0;
    for (int n = 0; n < x.n; ++n) {
        for (int yy = 0; yy < x.h; ++yy) {
            for (int xx = 0; xx < x.w; ++xx, ++p) {
                float mean = 0.0f;
                for (int c = 0; c < x.c; ++c) mean += x.at(n, c, yy, xx);
                mean /= x.c;
                float var = 0.0f;
                for (int c = 0; c < x.c; ++c) {
                    const float d = x.at(n, c, yy, xx) - mean;
                    var += d * d;
                }
                var /= x.c;
                const float inv_std = 1.0f / std::sqrt(var + kEps);
                cached_mean_[p] = mean;
                cached_inv_std_[p] = inv_std;
                for (int c = 0; c < x.c; ++c) {
                    y.at(n, c, yy, xx) =
                        (x.at(n, c, yy, xx) - mean) * inv_std * gamma_.w[c] + beta_.w[c];
                }
            }
        }
    }
    return y;
}

Tensor ChannelLayerNorm::backward(const Tensor& dy) {
    const Tensor& x = cached_x_;
    Tensor dx(x.n, x.c, x.h, x.w);
    size_t p = 0;
    for (int n = 0; n < x.n; ++n) {
        for (int yy = 0; yy < x.h; ++yy) {
            for (int xx = 0; xx < x.w; ++xx, ++p) {
                const float mean = cached_mean_[p];
                const float inv_std = cached_inv_std_[p];
                // dL/dxhat and its channel statistics.
                float sum_dxhat = 0.0f, sum_dxhat_xhat = 0.0f;
                for (int c = 0; c < x.c; ++c) {
                    const float xhat = (x.at(n, c, yy, xx) - mean) * inv_std;
                    const float d = dy.at(n, c, yy, xx);
                    gamma_.g[c] += d * xhat;
                    beta_.g[c] += d;
                    const float dxhat = d * gamma_.w[c];
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                for (int c = 0; c < x.c; ++c) {
                    const float xhat = (x.at(n, c, yy, xx) - mean) * inv_std;
                    const float dxhat = dy.at(n, c, yy, xx) * gamma_.w[c];
                    dx.at(n, c, yy, xx) =
                        inv_std * (dxhat - sum_dxhat / x.c - xhat * sum_dxhat_xhat / x.c);
                }
            }
        }
    }
    return dx;
}

void ChannelLayerNorm::collect_params(std::vector<ParamBlob*>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
}

// ------------------------------------------------------------- Sequential

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor cur = x;
    for (auto& layer : layers_) {
        cur = layer->forward(cur, train);
    }
    return cur;
}

Tensor Sequential::backward(const Tensor& dy) {
    Tensor cur = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        cur = (*it)->backward(cur);
    }
    return cur;
}

void Sequential::collect_params(std::vector<ParamBlob*>& out) {
    for (auto& layer : layers_) {
        layer->collect_params(out);
    }
}

// ---------------------------------------------------------- ResidualBlock

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
    Tensor y = inner_->forward(x, train);
    if (!y.same_shape(x)) {
        throw TrainingError("residual block inner path changed shape");
    }
    for (size_t i = 0; i < y.data.size(); ++i) {
        y.data[i] += x.data[i];
    }
    return y;
}

Tensor ResidualBlock::backward(const Tensor& dy) {
    Tensor dx = inner_->backward(dy);
    for (size_t i = 0; i < dx.data.size(); ++i) {
        dx.data[i] += dy.data[i];
    }
    return dx;
}

void ResidualBlock::collect_params(std::vector<ParamBlob*>& out) {
    inner_->collect_params(out);
}

// --------------------------------------------------------- GlobalAvgPool

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
    cached_h_ = x.h;
    cached_w_ = x.w;
    Tensor y(x.n, x.c, 1, 1);
    const float inv = 1.0f / (x.h * x.w);
    for (int n = 0; n < x.n; ++n) {
        for (int c = 0; c < x.c; ++c) {
            float acc = 0.0f;
            for (int yy = 0; yy < x.h; ++yy) {
                for (int xx = 0; xx < x.w; ++xx) {
                    acc += x.at(n, c, yy, xx);
                }
            }
            y.at(n, c, 0, 0) = acc * inv;
        }
    }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    Tensor dx(dy.n, dy.c, cached_h_, cached_w_);
    const float inv = 1.0f / (cached_h_ * cached_w_);
    for (int n = 0; n < dy.n; ++n) {
        for (int c = 0; c < dy.c; ++c) {
            const float g = dy.at(n, c, 0, 0) * inv;
            for (int yy = 0; yy < cached_h_; ++yy) {
                for (int xx = 0; xx < cached_w_; ++xx) {
                    dx.at(n, c, yy, xx) = g;
                }
            }
        }
    }
    return dx;
}

// ------------------------------------------------------------------ Dense

Dense::Dense(std::string tag, int in_dim, int out_dim, Rng& rng)
    : in_dim_(in_dim), out_dim_(out_dim) {
    weight_.tag = tag + ".weight";
    weight_.w.resize(static_cast<size_t>(out_dim) * in_dim);
    weight_.g.resize(weight_.w.size(), 0.0f);
    bias_.tag = tag + ".bias";
    bias_.w.assign(out_dim, 0.0f);
    bias_.g.assign(out_dim, 0.0f);
    init_uniform_fan_in(weight_, in_dim, rng);
}

MatF Dense::forward(const MatF& x) {
    if (x.cols != in_dim_) {
        throw TrainingError("Dense '" + weight_.tag + "': expected width " +
                            std::to_string(in_dim_) + ", got " + std::to_string(x.cols));
    }
    cached_x_ = x;
    MatF y(x.rows, out_dim_);
    for (int r = 0; r < x.rows; ++r) {
        for (int o = 0; o < out_dim_; ++o) {
            float acc = bias_.w[o];
            const float* wr = &weight_.w[static_cast<size_t>(o) * in_dim_];
            for (int i = 0; i < in_dim_; ++i) {
                acc += wr[i] * x.at(r, i);
            }
            y.at(r, o) = acc;
        }
    }
    return y;
}

MatF Dense::backward(const MatF& dy) {
    const MatF& x = cached_x_;
    MatF dx(x.rows, in_dim_);
    for (int r = 0; r < x.rows; ++r) {
        for (int o = 0; o < out_dim_; ++o) {
            const float g = dy.at(r, o);
            if (g == 0.0f) continue;
            bias_.g[o] += g;
            float* wg = &weight_.g[static_cast<size_t>(o) * in_dim_];
            const float* wr = &weight_.w[static_cast<size_t>(o) * in_dim_];
            for (int i = 0; i < in_dim_; ++i) {
                wg[i] += g * x.at(r, i);
                dx.at(r, i) += g * wr[i];
            }
        }
    }
    return dx;
}

void Dense::collect_params(std::vector<ParamBlob*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
}

}  // namespace dbfuse
