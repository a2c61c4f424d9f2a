#pragma once

#include <filesystem>
#include <vector>

#include "woundstage/image.hpp"
#include "woundstage/model.hpp"

namespace woundstage {

// Spatial class evidence map taken at one layer. Values are >= 0 by
// construction (gradient and sum both pass through a ReLU).
struct ActivationMap {
    int class_id = 0;
    int layer_id = 0;
    int height = 0, width = 0;
    std::vector<double> values;  // row major, height*width
};

// Fused, min-max normalized saliency at input resolution. Values in [0,1];
// an all-zero map stays all-zero. raw_min/raw_max are the pre-normalization
// range.
struct SaliencyImage {
    int height = 0, width = 0;
    std::vector<double> values;
    double raw_min = 0, raw_max = 0;
};

// Picks the class to explain: class_id if >= 0 (validated), otherwise the
// predicted class (first maximal logit).
template <typename T>
int resolve_class(const ModelGraph<T>& model, const std::vector<T>& chw, int class_id);

// Channel-weighted class evidence at `layer_id` (default: the last conv
// layer): positive part of d(logit_c)/dA weighs the activation, channels are
// summed and the sum clamped at zero. `chw` is a normalized input buffer.
template <typename T>
ActivationMap layercam(const ModelGraph<T>& model, const std::vector<T>& chw, int class_id = -1,
                       int layer_id = -1);

// Gradient of the chosen class logit w.r.t. the input, with every ReLU
// passing gradient only where its forward input was positive and the
// incoming gradient positive. Returns a CHW buffer matching the input.
template <typename T>
std::vector<double> guided_backprop(const ModelGraph<T>& model, const std::vector<T>& chw,
                                    int class_id = -1);

// Upsamples the map to (height, width), multiplies by the positive part of
// the guided gradient (channel max), then min-max normalizes. Zeros of the
// upsampled map are zeros of the result regardless of the gradient.
SaliencyImage fuse_saliency(const ActivationMap& map, const std::vector<double>& guided_chw,
                            int height, int width);

// Blends a blue->green->red colormap of the saliency onto the image.
// alpha 0 returns the image unchanged.
ImageU8 render_overlay(const ImageU8& base, const SaliencyImage& saliency, double alpha);

// Saliency (or map) values as a grayscale image, scaled so the maximum is
// white; an all-zero field renders black.
ImageU8 render_grayscale(const std::vector<double>& values, int width, int height);

extern template int resolve_class<float>(const ModelGraph<float>&, const std::vector<float>&, int);
extern template int resolve_class<double>(const ModelGraph<double>&, const std::vector<double>&, int);
extern template ActivationMap layercam<float>(const ModelGraph<float>&, const std::vector<float>&, int, int);
extern template ActivationMap layercam<double>(const ModelGraph<double>&, const std::vector<double>&, int, int);
extern template std::vector<double> guided_backprop<float>(const ModelGraph<float>&,
                                                           const std::vector<float>&, int);
extern template std::vector<double> guided_backprop<double>(const ModelGraph<double>&,
                                                            const std::vector<double>&, int);

}  // namespace woundstage
