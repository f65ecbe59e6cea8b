#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace dbfuse {

// Dense NCHW batch tensor, float32.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0f) {}

    size_t size() const { return data.size(); }

    float& at(int i, int ch, int y, int x) {
        return data[((static_cast<size_t>(i) * c + ch) * h + y) * w + x];
    }
    float at(int i, int ch, int y, int x) const {
        return data[((static_cast<size_t>(i) * c + ch) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

// Row-major float matrix (embeddings, logits).
struct MatF {
    int rows = 0, cols = 0;
    std::vector<float> v;

    MatF() = default;
    MatF(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0f) {}

    float& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

// Row-major double matrix (probabilities, metric inputs).
struct MatD {
    int rows = 0, cols = 0;
    std::vector<double> v;

    MatD() = default;
    MatD(int r, int c) : rows(r), cols(c), v(static_cast<size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
};

}  // namespace dbfuse
