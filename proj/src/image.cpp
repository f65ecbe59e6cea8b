#include "dbfuse/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/imgcodecs.hpp>

#include "dbfuse/errors.hpp"

namespace dbfuse {

Image load_image(const std::string& path) {
    cv::Mat m = cv::imread(path, cv::IMREAD_UNCHANGED);
    if (m.empty()) {
        throw DataError("undecodable or unreadable image file: " + path);
    }
    Image out(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        for (int x = 0; x < m.cols; ++x) {
            float r, g, b;
            if (m.channels() == 1) {
                r = g = b = m.at<uint8_t>(y, x) / 255.0f;
            } else if (m.channels() == 3) {
                const auto& px = m.at<cv::Vec3b>(y, x);
                b = px[0] / 255.0f;
                g = px[1] / 255.0f;
                r = px[2] / 255.0f;
            } else if (m.channels() == 4) {
                const auto& px = m.at<cv::Vec4b>(y, x);
                b = px[0] / 255.0f;
                g = px[1] / 255.0f;
                r = px[2] / 255.0f;
            } else {
                throw DataError("unsupported channel count in image: " + path);
            }
            out.at(y, x, 0) = r;
            out.at(y, x, 1) = g;
            out.at(y, x, 2) = b;
        }
    }
    return out;
}

void save_image_png(const std::string& path, const Image& img) {
    cv::Mat m(img.h, img.w, CV_8UC3);
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            auto q = [&](int ch) {
                float v = std::clamp(img.at(y, x, ch), 0.0f, 1.0f);
                return static_cast<uint8_t>(std::lround(v * 255.0f));
            };
            m.at<cv::Vec3b>(y, x) = cv::Vec3b(q(2), q(1), q(0));  // BGR
        }
    }
    if (!cv::imwrite(path, m)) {
        throw DataError("failed to write PNG: " + path);
    }
}

Image resize_bilinear(const Image& src, int out_h, int out_w) {
    Image dst(out_h, out_w);
    const double sy = static_cast<double>(src.h) / out_h;
    const double sx = static_cast<double>(src.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y0c = std::clamp(y0, 0, src.h - 1);
        int y1c = std::clamp(y0 + 1, 0, src.h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x0c = std::clamp(x0, 0, src.w - 1);
            int x1c = std::clamp(x0 + 1, 0, src.w - 1);
            for (int ch = 0; ch < 3; ++ch) {
                double top = (1.0 - wx) * src.at(y0c, x0c, ch) + wx * src.at(y0c, x1c, ch);
                double bot = (1.0 - wx) * src.at(y1c, x0c, ch) + wx * src.at(y1c, x1c, ch);
                dst.at(y, x, ch) = static_cast<float>((1.0 - wy) * top + wy * bot);
            }
        }
    }
    return dst;
}

ImageSample preprocess(const ImageSample& sample, int side) {
    if (side <= 0) {
        throw DataError("preprocess: side must be positive, got " + std::to_string(side));
    }
    if (sample.pixels.empty()) {
        throw DataError("preprocess: empty image (" + sample.source_id + ")");
    }
    ImageSample out;
    out.label = sample.label;
    out.source_id = sample.source_id;
    if (sample.pixels.h == side && sample.pixels.w == side) {
        out.pixels = sample.pixels;
    } else {
        out.pixels = resize_bilinear(sample.pixels, side, side);
    }
    for (float& v : out.pixels.rgb) {
        v = std::clamp(v, 0.0f, 1.0f);
    }
    return out;
}

Tensor to_batch(const std::vector<const ImageSample*>& samples, int side,
                const std::vector<bool>* flip) {
    Tensor t(static_cast<int>(samples.size()), 3, side, side);
    for (size_t i = 0; i < samples.size(); ++i) {
        const Image& img = samples[i]->pixels;
        if (img.h != side || img.w != side) {
            throw DataError("batch shape mismatch: expected " + std::to_string(side) + "x" +
                            std::to_string(side) + "x3, got " + std::to_string(img.h) + "x" +
                            std::to_string(img.w) + "x3 (" + samples[i]->source_id + ")");
        }
        bool do_flip = flip && (*flip)[i];
        for (int ch = 0; ch < 3; ++ch) {
            for (int y = 0; y < side; ++y) {
                for (int x = 0; x < side; ++x) {
                    int sx = do_flip ? side - 1 - x : x;
                    t.at(static_cast<int>(i), ch, y, x) = img.at(y, sx, ch);
                }
            }
        }
    }
    return t;
}

}  // namespace dbfuse
