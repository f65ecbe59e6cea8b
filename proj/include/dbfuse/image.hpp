#pragma once

#include <string>
#include <vector>

#include "dbfuse/tensor.hpp"

namespace dbfuse {

// HWC interleaved RGB image, values in [0,1].
struct Image {
    int h = 0, w = 0;
    std::vector<float> rgb;  // h*w*3

    Image() = default;
    Image(int h_, int w_) : h(h_), w(w_), rgb(static_cast<size_t>(h_) * w_ * 3, 0.0f) {}

    float& at(int y, int x, int ch) { return rgb[(static_cast<size_t>(y) * w + x) * 3 + ch]; }
    float at(int y, int x, int ch) const { return rgb[(static_cast<size_t>(y) * w + x) * 3 + ch]; }

    bool empty() const { return rgb.empty(); }
};

struct ImageSample {
    Image pixels;
    int label = -1;
    std::string source_id;
};

// Decodes a PNG/JPEG file to RGB in [0,1]; grayscale is replicated to 3
// channels. Throws DataError for unreadable or undecodable files.
Image load_image(const std::string& path);

// Writes an image as PNG (8-bit per channel). Throws DataError on failure.
void save_image_png(const std::string& path, const Image& img);

// Bilinear resize with half-pixel center alignment.
Image resize_bilinear(const Image& src, int out_h, int out_w);

// Resizes to side x side x 3, values stay in [0,1]. label/source_id carried
// through unchanged. side <= 0 or empty pixels are errors.
ImageSample preprocess(const ImageSample& sample, int side = 128);

// Packs samples into an NCHW batch; every image must be side x side x 3.
// When flip[i] is true the image is mirrored horizontally.
Tensor to_batch(const std::vector<const ImageSample*>& samples, int side,
                const std::vector<bool>* flip = nullptr);

}  // namespace dbfuse
