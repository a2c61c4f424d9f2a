#include "woundstage/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "woundstage/errors.hpp"
#include "woundstage/rng.hpp"

namespace woundstage {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

using nlohmann::json;

namespace {
constexpr const char* kCheckpointFormat = "woundstage.checkpoint.v1";
}

std::string preset_name(Preset p) {
    switch (p) {
        case Preset::vgg16_shape: return "vgg16_shape";
        case Preset::vgg_tiny: return "vgg_tiny";
    }
    throw UsageError("unknown preset value");
}

Preset preset_from_name(const std::string& name) {
    if (name == "vgg16_shape") return Preset::vgg16_shape;
    if (name == "vgg_tiny") return Preset::vgg_tiny;
    throw UsageError("unknown preset '" + name + "' (expected vgg16_shape or vgg_tiny)");
}

int resolved_input_size(const ModelConfig& cfg) {
    if (cfg.input_size > 0) return cfg.input_size;
    return cfg.preset == Preset::vgg16_shape ? 224 : 64;
}

std::int64_t LayerSpec::weight_count() const {
    if (kind == LayerKind::conv)
        return static_cast<std::int64_t>(out_channels) * in_channels * kernel * kernel;
    if (kind == LayerKind::linear) return static_cast<std::int64_t>(out_features) * in_features;
    return 0;
}

std::int64_t LayerSpec::bias_count() const {
    if (kind == LayerKind::conv) return out_channels;
    if (kind == LayerKind::linear) return out_features;
    return 0;
}

std::string LayerSpec::describe() const {
    switch (kind) {
        case LayerKind::conv:
            return "conv " + std::to_string(in_channels) + "->" + std::to_string(out_channels) +
                   " k" + std::to_string(kernel) + " s" + std::to_string(stride) + " p" +
                   std::to_string(padding);
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool:
            return "maxpool k" + std::to_string(kernel) + " s" + std::to_string(stride);
        case LayerKind::flatten: return "flatten";
        case LayerKind::linear:
            return "linear " + std::to_string(in_features) + "->" + std::to_string(out_features);
    }
    return "?";
}

namespace {

bool same_shape(const LayerSpec& a, const LayerSpec& b) {
    return a.kind == b.kind && a.in_channels == b.in_channels && a.out_channels == b.out_channels &&
           a.kernel == b.kernel && a.stride == b.stride && a.padding == b.padding &&
           a.in_features == b.in_features && a.out_features == b.out_features;
}

}  // namespace

bool operator==(const LayerSpec& a, const LayerSpec& b) {
    return same_shape(a, b) && a.trainable == b.trainable;
}

std::vector<LayerSpec> expand_preset(const ModelConfig& cfg) {
    if (cfg.num_classes < 2) throw UsageError("num_classes must be at least 2");
    int s = resolved_input_size(cfg);

    // conv widths per block; blocks are separated by pooling stages
    std::vector<std::vector<int>> blocks;
    std::vector<int> fc;
    if (cfg.preset == Preset::vgg16_shape) {
        blocks = {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}};
        fc = {4096, 4096};
    } else {
        blocks = {{8}, {16}, {32}, {64}};
        fc = {128};
    }
    int pools = static_cast<int>(blocks.size());
    int factor = 1 << pools;
    if (s % factor != 0 || s / factor < 1)
        throw DimensionError("input_size " + std::to_string(s) + " is not divisible by " +
                             std::to_string(factor) + " (preset " + preset_name(cfg.preset) + ")");

    std::vector<LayerSpec> layers;
    int ch = 3;
    for (auto& block : blocks) {
        for (int width : block) {
            LayerSpec conv;
            conv.kind = LayerKind::conv;
            conv.in_channels = ch;
            conv.out_channels = width;
            conv.kernel = 3;
            conv.stride = 1;
            conv.padding = 1;
            layers.push_back(conv);
            layers.push_back({LayerKind::relu});
            ch = width;
        }
        LayerSpec pool;
        pool.kind = LayerKind::maxpool;
        pool.kernel = 2;
        pool.stride = 2;
        layers.push_back(pool);
    }
    layers.push_back({LayerKind::flatten});
    int features = ch * (s / factor) * (s / factor);
    for (int width : fc) {
        LayerSpec lin;
        lin.kind = LayerKind::linear;
        lin.in_features = features;
        lin.out_features = width;
        layers.push_back(lin);
        layers.push_back({LayerKind::relu});
        features = width;
    }
    LayerSpec head;
    head.kind = LayerKind::linear;
    head.in_features = features;
    head.out_features = cfg.num_classes;
    layers.push_back(head);
    return layers;
}

std::int64_t conv_trunk_parameter_count(const std::vector<LayerSpec>& layers) {
    std::int64_t n = 0;
    for (const auto& l : layers)
        if (l.kind == LayerKind::conv) n += l.weight_count() + l.bias_count();
    return n;
}

namespace {

template <typename T>
void init_layer_params(const LayerSpec& spec, TensorPtr<T>& weight, TensorPtr<T>& bias, Rng& rng) {
    std::int64_t fan_in =
        spec.kind == LayerKind::conv ? static_cast<std::int64_t>(spec.in_channels) * spec.kernel * spec.kernel
                                     : spec.in_features;
    double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    if (spec.kind == LayerKind::conv)
        weight = make_tensor<T>({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel},
                                spec.trainable);
    else
        weight = make_tensor<T>({spec.out_features, spec.in_features}, spec.trainable);
    for (auto& v : weight->data) v = static_cast<T>(rng.uniform(-bound, bound));
    bias = make_tensor<T>({spec.kind == LayerKind::conv ? spec.out_channels : spec.out_features},
                          spec.trainable);
}

}  // namespace

template <typename T>
ModelGraph<T> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    ModelGraph<T> model;
    model.config = cfg;
    model.config.input_size = resolved_input_size(cfg);
    model.layers = expand_preset(model.config);
    model.meta.seed = seed;
    model.weights.assign(model.layers.size(), nullptr);
    model.biases.assign(model.layers.size(), nullptr);
    Rng rng(seed);
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        if (model.layers[i].parametric())
            init_layer_params(model.layers[i], model.weights[i], model.biases[i], rng);
    return model;
}

template <typename T>
TensorPtr<T> ModelGraph<T>::forward(Tape<T>& tape, const TensorPtr<T>& input,
                                    std::vector<TensorPtr<T>>* activations) const {
    return forward_from(tape, 0, input, activations);
}

template <typename T>
TensorPtr<T> ModelGraph<T>::forward_from(Tape<T>& tape, int start_layer,
                                         const TensorPtr<T>& activation,
                                         std::vector<TensorPtr<T>>* activations) const {
    if (start_layer < 0 || start_layer >= static_cast<int>(layers.size()))
        throw UsageError("forward_from: layer index " + std::to_string(start_layer) +
                         " outside [0," + std::to_string(layers.size()) + ")");
    TensorPtr<T> cur = activation;
    for (std::size_t i = static_cast<std::size_t>(start_layer); i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        switch (l.kind) {
            case LayerKind::conv:
                cur = tape.conv2d(cur, weights[i], biases[i], l.stride, l.padding);
                break;
            case LayerKind::relu: cur = tape.relu(cur); break;
            case LayerKind::maxpool: cur = tape.maxpool2d(cur, l.kernel, l.stride); break;
            case LayerKind::flatten: cur = tape.flatten(cur); break;
            case LayerKind::linear: cur = tape.linear(cur, weights[i], biases[i]); break;
        }
        if (activations) activations->push_back(cur);
    }
    return cur;
}

template <typename T>
std::vector<T> ModelGraph<T>::infer_logits(const std::vector<T>& chw) const {
    int s = resolved_input_size(config);
    if (chw.size() != static_cast<std::size_t>(3) * s * s)
        throw DimensionError("infer_logits: expected a 3x" + std::to_string(s) + "x" + std::to_string(s) +
                             " buffer, got " + std::to_string(chw.size()) + " values");
    Tape<T> tape;
    tape.set_recording(false);
    auto input = make_tensor<T>({3, s, s});
    input->data = chw;
    auto logits = forward(tape, input);
    return logits->data;
}

template <typename T>
std::vector<TensorPtr<T>> ModelGraph<T>::parameters() const {
    std::vector<TensorPtr<T>> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].parametric()) {
            out.push_back(weights[i]);
            out.push_back(biases[i]);
        }
    return out;
}

template <typename T>
std::vector<TensorPtr<T>> ModelGraph<T>::trainable_parameters() const {
    std::vector<TensorPtr<T>> out;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].parametric() && layers[i].trainable) {
            out.push_back(weights[i]);
            out.push_back(biases[i]);
        }
    return out;
}

template <typename T>
std::int64_t ModelGraph<T>::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& l : layers) n += l.weight_count() + l.bias_count();
    return n;
}

template <typename T>
int ModelGraph<T>::conv_block_count() const {
    int n = 0;
    for (const auto& l : layers)
        if (l.kind == LayerKind::maxpool) ++n;
    return n;
}

template <typename T>
int ModelGraph<T>::last_conv_layer_index() const {
    int idx = -1;
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::conv) idx = static_cast<int>(i);
    return idx;
}

template <typename T>
void finetune_surgery(ModelGraph<T>& model, int freeze_blocks, int num_classes, std::uint64_t seed) {
    if (num_classes < 2) throw UsageError("num_classes must be at least 2");
    int blocks = model.conv_block_count();
    if (freeze_blocks < 0) freeze_blocks = blocks > 0 ? blocks - 1 : 0;
    if (freeze_blocks > blocks)
        throw UsageError("cannot freeze " + std::to_string(freeze_blocks) + " blocks, model has " +
                         std::to_string(blocks));

    int head = -1;
    for (std::size_t i = 0; i < model.layers.size(); ++i)
        if (model.layers[i].kind == LayerKind::linear) head = static_cast<int>(i);
    if (head < 0) throw UsageError("model has no linear head to replace");

    int block = 0;
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        LayerSpec& l = model.layers[i];
        if (l.kind == LayerKind::conv) {
            l.trainable = block >= freeze_blocks;
            model.weights[i]->set_requires_grad(l.trainable);
            model.biases[i]->set_requires_grad(l.trainable);
        } else if (l.kind == LayerKind::maxpool) {
            ++block;
        } else if (l.kind == LayerKind::linear) {
            l.trainable = true;
            model.weights[i]->set_requires_grad(true);
            model.biases[i]->set_requires_grad(true);
        }
    }

    LayerSpec& hl = model.layers[head];
    hl.out_features = num_classes;
    hl.trainable = true;
    Rng rng(seed);
    init_layer_params(hl, model.weights[head], model.biases[head], rng);
    model.config.num_classes = num_classes;
}

namespace {

json layer_to_json(const LayerSpec& l) {
    json j;
    switch (l.kind) {
        case LayerKind::conv:
            j["kind"] = "conv";
            j["in"] = l.in_channels;
            j["out"] = l.out_channels;
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            j["padding"] = l.padding;
            j["trainable"] = l.trainable;
            break;
        case LayerKind::relu: j["kind"] = "relu"; break;
        case LayerKind::maxpool:
            j["kind"] = "maxpool";
            j["kernel"] = l.kernel;
            j["stride"] = l.stride;
            break;
        case LayerKind::flatten: j["kind"] = "flatten"; break;
        case LayerKind::linear:
            j["kind"] = "linear";
            j["in"] = l.in_features;
            j["out"] = l.out_features;
            j["trainable"] = l.trainable;
            break;
    }
    return j;
}

LayerSpec layer_from_json(const json& j) {
    LayerSpec l;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv") {
        l.kind = LayerKind::conv;
        l.in_channels = j.at("in").get<int>();
        l.out_channels = j.at("out").get<int>();
        l.kernel = j.at("kernel").get<int>();
        l.stride = j.at("stride").get<int>();
        l.padding = j.at("padding").get<int>();
        l.trainable = j.at("trainable").get<bool>();
    } else if (kind == "relu") {
        l.kind = LayerKind::relu;
    } else if (kind == "maxpool") {
        l.kind = LayerKind::maxpool;
        l.kernel = j.at("kernel").get<int>();
        l.stride = j.at("stride").get<int>();
    } else if (kind == "flatten") {
        l.kind = LayerKind::flatten;
    } else if (kind == "linear") {
        l.kind = LayerKind::linear;
        l.in_features = j.at("in").get<int>();
        l.out_features = j.at("out").get<int>();
        l.trainable = j.at("trainable").get<bool>();
    } else {
        throw DataError("checkpoint header has unknown layer kind '" + kind + "'");
    }
    return l;
}

}  // namespace

void save_checkpoint(const ModelGraph<float>& model, const std::filesystem::path& path) {
    // only preset-shaped graphs are writable; everything else has no header
    // representation
    std::vector<LayerSpec> expected = expand_preset(model.config);
    if (expected.size() != model.layers.size())
        throw UsageError("model layers do not match its configuration; refusing to save");
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (!same_shape(expected[i], model.layers[i]))
            throw UsageError("model layer " + std::to_string(i) + " (" + model.layers[i].describe() +
                             ") does not match its configuration; refusing to save");

    json header;
    header["format"] = kCheckpointFormat;
    header["preset"] = preset_name(model.config.preset);
    header["input_size"] = resolved_input_size(model.config);
    header["num_classes"] = model.config.num_classes;
    header["seed"] = model.meta.seed;
    header["epoch"] = model.meta.trained_epochs;
    json jl = json::array();
    for (const auto& l : model.layers) jl.push_back(layer_to_json(l));
    header["layers"] = jl;
    std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        if (!model.layers[i].parametric()) continue;
        const auto& w = model.weights[i]->data;
        const auto& b = model.biases[i]->data;
        out.write(reinterpret_cast<const char*>(w.data()),
                  static_cast<std::streamsize>(w.size() * sizeof(float)));
        out.write(reinterpret_cast<const char*>(b.data()),
                  static_cast<std::streamsize>(b.size() * sizeof(float)));
    }
    if (!out) throw DataError("checkpoint write failed: " + path.string());
}

ModelGraph<float> load_checkpoint(const std::filesystem::path& path,
                                  const std::optional<ModelConfig>& expect) {
    std::error_code ec;
    std::uintmax_t fsize = std::filesystem::file_size(path, ec);
    if (ec) throw DataError("cannot open checkpoint: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    if (fsize < sizeof(std::uint64_t)) throw DataError("corrupt checkpoint header: file too small");

    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || len == 0 || len > fsize - sizeof len)
        throw DataError("corrupt checkpoint header: bad length field");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw DataError("corrupt checkpoint header: unreadable");

    json header = json::parse(text, nullptr, false);
    if (header.is_discarded() || !header.is_object())
        throw DataError("corrupt checkpoint header: not valid JSON");
    ModelGraph<float> model;
    try {
        if (header.at("format").get<std::string>() != kCheckpointFormat)
            throw DataError("checkpoint format tag mismatch");
        model.config.preset = preset_from_name(header.at("preset").get<std::string>());
        model.config.input_size = header.at("input_size").get<int>();
        model.config.num_classes = header.at("num_classes").get<int>();
        model.meta.seed = header.at("seed").get<std::uint64_t>();
        model.meta.trained_epochs = header.at("epoch").get<int>();
        for (const auto& jl : header.at("layers")) model.layers.push_back(layer_from_json(jl));
    } catch (const json::exception& e) {
        throw DataError(std::string("corrupt checkpoint header: ") + e.what());
    }

    // the layer table must agree with the stored configuration
    std::vector<LayerSpec> expected = expand_preset(model.config);
    if (expected.size() != model.layers.size())
        throw DataError("checkpoint header lists " + std::to_string(model.layers.size()) +
                        " layers, configuration implies " + std::to_string(expected.size()));
    for (std::size_t i = 0; i < expected.size(); ++i)
        if (!same_shape(expected[i], model.layers[i]))
            throw DataError("checkpoint layer " + std::to_string(i) + " (" +
                            model.layers[i].describe() + ") does not match configuration (" +
                            expected[i].describe() + ")");

    if (expect) {
        ModelConfig want = *expect;
        want.input_size = resolved_input_size(want);
        std::vector<LayerSpec> wanted = expand_preset(want);
        std::size_t n = std::min(wanted.size(), model.layers.size());
        for (std::size_t i = 0; i < n; ++i)
            if (!same_shape(wanted[i], model.layers[i]))
                throw DataError("checkpoint layer " + std::to_string(i) + " (" +
                                model.layers[i].describe() + ") does not match expected (" +
                                wanted[i].describe() + ")");
        if (wanted.size() != model.layers.size())
            throw DataError("checkpoint has " + std::to_string(model.layers.size()) +
                            " layers, expected " + std::to_string(wanted.size()));
        if (want.preset != model.config.preset)
            throw DataError("checkpoint preset " + preset_name(model.config.preset) +
                            " does not match expected " + preset_name(want.preset));
    }

    std::uint64_t payload = 0;
    for (const auto& l : model.layers)
        payload += static_cast<std::uint64_t>(l.weight_count() + l.bias_count()) * sizeof(float);
    std::uint64_t actual = fsize - sizeof len - len;
    if (actual != payload)
        throw DataError("checkpoint payload is " + std::to_string(actual) + " bytes, header implies " +
                        std::to_string(payload));

    model.weights.assign(model.layers.size(), nullptr);
    model.biases.assign(model.layers.size(), nullptr);
    for (std::size_t i = 0; i < model.layers.size(); ++i) {
        const LayerSpec& l = model.layers[i];
        if (!l.parametric()) continue;
        if (l.kind == LayerKind::conv)
            model.weights[i] =
                make_tensor<float>({l.out_channels, l.in_channels, l.kernel, l.kernel}, l.trainable);
        else
            model.weights[i] = make_tensor<float>({l.out_features, l.in_features}, l.trainable);
        model.biases[i] = make_tensor<float>(
            {l.kind == LayerKind::conv ? l.out_channels : l.out_features}, l.trainable);
        in.read(reinterpret_cast<char*>(model.weights[i]->data.data()),
                static_cast<std::streamsize>(model.weights[i]->data.size() * sizeof(float)));
        in.read(reinterpret_cast<char*>(model.biases[i]->data.data()),
                static_cast<std::streamsize>(model.biases[i]->data.size() * sizeof(float)));
        if (!in) throw DataError("checkpoint payload truncated inside layer " + std::to_string(i));
    }
    return model;
}

template struct ModelGraph<float>;
template struct ModelGraph<double>;
template ModelGraph<float> build_model<float>(const ModelConfig&, std::uint64_t);
template ModelGraph<double> build_model<double>(const ModelConfig&, std::uint64_t);
template void finetune_surgery<float>(ModelGraph<float>&, int, int, std::uint64_t);
template void finetune_surgery<double>(ModelGraph<double>&, int, int, std::uint64_t);

}  // namespace woundstage
