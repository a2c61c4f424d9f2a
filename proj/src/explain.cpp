#include "woundstage/explain.hpp"

#include <algorithm>
#include <cmath>

#include "woundstage/errors.hpp"

namespace woundstage {

namespace {

template <typename T>
TensorPtr<T> input_tensor(const ModelGraph<T>& model, const std::vector<T>& chw, bool needs_grad) {
    int s = resolved_input_size(model.config);
    if (chw.size() != static_cast<std::size_t>(3) * s * s)
        throw DimensionError("explain: expected a 3x" + std::to_string(s) + "x" + std::to_string(s) +
                             " input buffer, got " + std::to_string(chw.size()) + " values");
    auto x = make_tensor<T>({3, s, s}, needs_grad);
    x->data = chw;
    return x;
}

}  // namespace

template <typename T>
int resolve_class(const ModelGraph<T>& model, const std::vector<T>& chw, int class_id) {
    if (class_id >= model.config.num_classes)
        throw UsageError("class " + std::to_string(class_id) + " outside the model's " +
                         std::to_string(model.config.num_classes) + " classes");
    if (class_id >= 0) return class_id;
    std::vector<T> logits = model.infer_logits(chw);
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

template <typename T>
ActivationMap layercam(const ModelGraph<T>& model, const std::vector<T>& chw, int class_id,
                       int layer_id) {
    int cls = resolve_class(model, chw, class_id);
    if (layer_id < 0) layer_id = model.last_conv_layer_index();
    if (layer_id < 0 || layer_id >= static_cast<int>(model.layers.size()))
        throw UsageError("layer " + std::to_string(layer_id) + " outside the model's " +
                         std::to_string(model.layers.size()) + " layers");

    Tape<T> tape;
    auto x = input_tensor(model, chw, /*needs_grad=*/true);
    std::vector<TensorPtr<T>> acts;
    auto logits = model.forward(tape, x, &acts);
    auto target = tape.select(logits, cls);
    tape.backward(target, GradMode::standard);

    const auto& a = acts[static_cast<std::size_t>(layer_id)];
    if (a->shape.size() != 3)
        throw UsageError("layer " + std::to_string(layer_id) + " (" +
                         model.layers[static_cast<std::size_t>(layer_id)].describe() +
                         ") has no spatial output to map");
    int k = a->dim(0), h = a->dim(1), w = a->dim(2);

    ActivationMap map;
    map.class_id = cls;
    map.layer_id = layer_id;
    map.height = h;
    map.width = w;
    map.values.assign(static_cast<std::size_t>(h) * w, 0.0);
    std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int c = 0; c < k; ++c) {
        const T* av = a->data.data() + static_cast<std::size_t>(c) * plane;
        const T* gv = a->grad.data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            double g = static_cast<double>(gv[i]);
            if (g > 0.0) map.values[i] += g * static_cast<double>(av[i]);
        }
    }
    for (double& v : map.values)
        if (v < 0.0) v = 0.0;
    return map;
}

template <typename T>
std::vector<double> guided_backprop(const ModelGraph<T>& model, const std::vector<T>& chw,
                                    int class_id) {
    int cls = resolve_class(model, chw, class_id);
    Tape<T> tape;
    auto x = input_tensor(model, chw, /*needs_grad=*/true);
    auto logits = model.forward(tape, x);
    auto target = tape.select(logits, cls);
    tape.backward(target, GradMode::guided);
    std::vector<double> out(x->grad.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<double>(x->grad[i]);
    return out;
}

SaliencyImage fuse_saliency(const ActivationMap& map, const std::vector<double>& guided_chw,
                            int height, int width) {
    if (height <= 0 || width <= 0) throw UsageError("fuse: output size must be positive");
    if (guided_chw.size() != static_cast<std::size_t>(3) * height * width)
        throw DimensionError("fuse: guided gradient has " + std::to_string(guided_chw.size()) +
                             " values, expected 3x" + std::to_string(height) + "x" +
                             std::to_string(width));
    if (map.values.size() != static_cast<std::size_t>(map.height) * map.width)
        throw DimensionError("fuse: activation map size does not match its dimensions");

    std::vector<double> up =
        resize_bilinear_plane(map.values, map.width, map.height, width, height);

    SaliencyImage out;
    out.height = height;
    out.width = width;
    out.values.resize(static_cast<std::size_t>(height) * width);
    std::size_t plane = out.values.size();
    for (std::size_t i = 0; i < plane; ++i) {
        double g = std::max({guided_chw[i], guided_chw[i + plane], guided_chw[i + 2 * plane]});
        out.values[i] = up[i] * std::max(g, 0.0);
    }

    auto [mn_it, mx_it] = std::minmax_element(out.values.begin(), out.values.end());
    out.raw_min = *mn_it;
    out.raw_max = *mx_it;
    if (out.raw_max > out.raw_min) {
        double span = out.raw_max - out.raw_min;
        for (double& v : out.values) v = (v - out.raw_min) / span;
    } else if (out.raw_max != 0.0) {
        // constant nonzero field: everything is equally the maximum
        std::fill(out.values.begin(), out.values.end(), 1.0);
    }
    // constant zero stays zero
    return out;
}

namespace {

void heat_color(double t, std::uint8_t rgb[3]) {
    t = std::clamp(t, 0.0, 1.0);
    double r, g, b;
    if (t <= 0.5) {
        double u = 2.0 * t;  // blue -> green
        r = 0.0;
        g = u;
        b = 1.0 - u;
    } else {
        double u = 2.0 * t - 1.0;  // green -> red
        r = u;
        g = 1.0 - u;
        b = 0.0;
    }
    rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * r));
    rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * g));
    rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * b));
}

}  // namespace

ImageU8 render_overlay(const ImageU8& base, const SaliencyImage& saliency, double alpha) {
    if (base.width != saliency.width || base.height != saliency.height)
        throw DimensionError("overlay: image is " + std::to_string(base.width) + "x" +
                             std::to_string(base.height) + ", saliency is " +
                             std::to_string(saliency.width) + "x" + std::to_string(saliency.height));
    if (alpha < 0.0 || alpha > 1.0) throw UsageError("overlay: alpha must be in [0,1]");

    ImageU8 out(base.width, base.height);
    std::size_t n = static_cast<std::size_t>(base.width) * base.height;
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t heat[3];
        heat_color(saliency.values[i], heat);
        for (int c = 0; c < 3; ++c) {
            double v = (1.0 - alpha) * base.pixels[i * 3 + static_cast<std::size_t>(c)] +
                       alpha * heat[c];
            out.pixels[i * 3 + static_cast<std::size_t>(c)] =
                static_cast<std::uint8_t>(std::clamp(std::lround(v), 0l, 255l));
        }
    }
    return out;
}

ImageU8 render_grayscale(const std::vector<double>& values, int width, int height) {
    if (values.size() != static_cast<std::size_t>(width) * height)
        throw DimensionError("grayscale render: value count does not match dimensions");
    double mx = 0;
    for (double v : values) mx = std::max(mx, v);
    ImageU8 out(width, height);
    for (std::size_t i = 0; i < values.size(); ++i) {
        double t = mx > 0 ? std::clamp(values[i] / mx, 0.0, 1.0) : 0.0;
        auto v = static_cast<std::uint8_t>(std::lround(255.0 * t));
        out.pixels[i * 3] = v;
        out.pixels[i * 3 + 1] = v;
        out.pixels[i * 3 + 2] = v;
    }
    return out;
}

template int resolve_class<float>(const ModelGraph<float>&, const std::vector<float>&, int);
template int resolve_class<double>(const ModelGraph<double>&, const std::vector<double>&, int);
template ActivationMap layercam<float>(const ModelGraph<float>&, const std::vector<float>&, int, int);
template ActivationMap layercam<double>(const ModelGraph<double>&, const std::vector<double>&, int, int);
template std::vector<double> guided_backprop<float>(const ModelGraph<float>&,
                                                    const std::vector<float>&, int);
template std::vector<double> guided_backprop<double>(const ModelGraph<double>&,
                                                     const std::vector<double>&, int);

}  // namespace woundstage
