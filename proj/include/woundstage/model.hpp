#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "woundstage/tensor.hpp"

namespace woundstage {

enum class Preset { vgg16_shape, vgg_tiny };

std::string preset_name(Preset p);
Preset preset_from_name(const std::string& name);

struct ModelConfig {
    Preset preset = Preset::vgg_tiny;
    int input_size = 0;  // 0 means the preset default (224 / 64)
    int num_classes = 6;
};

int resolved_input_size(const ModelConfig& cfg);

enum class LayerKind { conv, relu, maxpool, flatten, linear };

struct LayerSpec {
    LayerKind kind;
    // conv and maxpool
    int in_channels = 0, out_channels = 0;
    int kernel = 0, stride = 1, padding = 0;
    // linear
    int in_features = 0, out_features = 0;
    // conv/linear only; frozen layers keep their values during training
    bool trainable = true;

    bool parametric() const { return kind == LayerKind::conv || kind == LayerKind::linear; }
    std::int64_t weight_count() const;
    std::int64_t bias_count() const;
    std::string describe() const;  // e.g. "conv 3->8 k3" or "linear 1024->128"
};

bool operator==(const LayerSpec& a, const LayerSpec& b);

// Full layer list for a configuration, input image to logits.
std::vector<LayerSpec> expand_preset(const ModelConfig& cfg);

// Parameters of the convolutional stack only (weights plus biases).
std::int64_t conv_trunk_parameter_count(const std::vector<LayerSpec>& layers);

struct ModelMeta {
    std::uint64_t seed = 0;
    int trained_epochs = 0;
};

template <typename T>
struct ModelGraph {
    ModelConfig config;
    std::vector<LayerSpec> layers;
    // Parallel to layers; null entries for non-parametric layers.
    std::vector<TensorPtr<T>> weights;
    std::vector<TensorPtr<T>> biases;
    ModelMeta meta;

    // Runs the whole network. If `activations` is given it receives the
    // output tensor of every layer, indexed like `layers`.
    TensorPtr<T> forward(Tape<T>& tape, const TensorPtr<T>& input,
                         std::vector<TensorPtr<T>>* activations = nullptr) const;

    // Same, but starts at `start_layer` with `activation` as that layer's
    // input. forward(tape, x) == forward_from(tape, 0, x).
    TensorPtr<T> forward_from(Tape<T>& tape, int start_layer, const TensorPtr<T>& activation,
                              std::vector<TensorPtr<T>>* activations = nullptr) const;

    // Forward without gradient bookkeeping. Input is a CHW buffer.
    std::vector<T> infer_logits(const std::vector<T>& chw) const;

    std::vector<TensorPtr<T>> parameters() const;
    std::vector<TensorPtr<T>> trainable_parameters() const;
    std::int64_t parameter_count() const;
    int conv_block_count() const;       // number of pooling stages
    int last_conv_layer_index() const;  // default target for activation maps
};

// Fresh network with uniform He-style init: weights uniform in
// [-sqrt(6/fan_in), +sqrt(6/fan_in)], biases zero. Deterministic in `seed`.
template <typename T>
ModelGraph<T> build_model(const ModelConfig& cfg, std::uint64_t seed);

// Transfer preparation: freezes the first `freeze_blocks` conv blocks
// (a block is everything up to and including a pooling layer), replaces the
// final linear layer with a freshly initialized `num_classes`-wide head, and
// leaves every other parameter untouched. freeze_blocks < 0 means all blocks
// except the last. Linear layers always stay trainable.
template <typename T>
void finetune_surgery(ModelGraph<T>& model, int freeze_blocks, int num_classes, std::uint64_t seed);

// Single-file checkpoint: little-endian u64 header length, UTF-8 JSON header
// (config, layer table, seed, epoch), then raw float32 parameter payload in
// declaration order (weight then bias per layer). Saving a just-loaded model
// reproduces the file byte for byte.
void save_checkpoint(const ModelGraph<float>& model, const std::filesystem::path& path);

// `expect`, when given, is validated against the stored configuration; the
// first differing layer is named in the error.
ModelGraph<float> load_checkpoint(const std::filesystem::path& path,
                                  const std::optional<ModelConfig>& expect = std::nullopt);

extern template struct ModelGraph<float>;
extern template struct ModelGraph<double>;
extern template ModelGraph<float> build_model<float>(const ModelConfig&, std::uint64_t);
extern template ModelGraph<double> build_model<double>(const ModelConfig&, std::uint64_t);
extern template void finetune_surgery<float>(ModelGraph<float>&, int, int, std::uint64_t);
extern template void finetune_surgery<double>(ModelGraph<double>&, int, int, std::uint64_t);

}  // namespace woundstage
