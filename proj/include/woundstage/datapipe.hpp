#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "woundstage/errors.hpp"
#include "woundstage/image.hpp"
#include "woundstage/rng.hpp"

namespace woundstage {

// Healing-stage classes, in canonical order. The enum value is the class
// index used everywhere (labels, confusion matrices, model outputs).
enum class StageLabel : int {
    control = 0,
    day0 = 1,
    day3 = 2,
    day7 = 3,
    day10 = 4,
    delay_day10 = 5,
};
inline constexpr int kNumStages = 6;

const std::string& stage_name(StageLabel label);
std::optional<StageLabel> stage_from_name(const std::string& name);

struct Sample {
    std::string image_path;  // as written in the manifest
    StageLabel label = StageLabel::control;
    int dataset_id = 0;
};

struct Manifest {
    std::vector<Sample> samples;
    std::array<int, kNumStages> class_counts() const;
};

// CSV with the exact header "path,label,dataset_id". No quoting; paths must
// not contain commas.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// How n samples of one class are divided across train/validation/test for
// integer ratios (rt, rv, rs): train gets ceil(n*rt/sum), validation gets
// ceil(n*rv/sum) capped by what remains, test gets the rest. Exact for
// proportionally divisible n, train-heavy otherwise.
std::array<int, 3> split_counts(int n, const std::array<int, 3>& ratios);

struct SplitResult {
    Manifest train, validation, test;
};

// Per-class split: each class is shuffled (seeded, independent streams) and
// divided by split_counts. Classes never leak across parts.
SplitResult stratified_split(const Manifest& manifest, const std::array<int, 3>& ratios,
                             std::uint64_t seed);

// The twelve dihedral variants in fixed order: rotations 0/90/180/270
// degrees, each as {unflipped, horizontal flip, vertical flip}. Duplicates
// (e.g. for symmetric images) are kept so the count is always twelve.
std::vector<ImageU8> augment12(const ImageU8& img);

// Balances class sizes by resampling with replacement up to the largest
// class. Original items always stay; draws come uniformly from the original
// members of each class. Errors on an empty class.
template <typename Item>
std::vector<std::vector<Item>> oversample_balance(const std::vector<std::vector<Item>>& per_class,
                                                  std::uint64_t seed) {
    std::size_t mx = 0;
    for (const auto& cls : per_class) mx = std::max(mx, cls.size());
    if (mx == 0) throw DataError("oversample: no samples in any class");
    std::vector<std::vector<Item>> out = per_class;
    Rng rng(seed);
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        const auto& cls = per_class[c];
        if (cls.empty())
            throw DataError("oversample: class " + std::to_string(c) + " is empty, cannot balance");
        for (std::size_t i = cls.size(); i < mx; ++i)
            out[c].push_back(cls[static_cast<std::size_t>(rng.below(cls.size()))]);
    }
    return out;
}

struct NormalizeConstants {
    std::array<double, 3> mean{0.485, 0.456, 0.406};
    std::array<double, 3> stdev{0.229, 0.224, 0.225};
};

// 8-bit RGB image to a normalized CHW buffer: (v/255 - mean) / stdev.
template <typename T>
std::vector<T> normalize_chw(const ImageU8& img, const NormalizeConstants& k = {});

// Fully materialized model-ready split, used by training and evaluation.
struct Dataset {
    int channels = 3;
    int height = 0;
    int width = 0;
    std::vector<std::vector<float>> inputs;  // normalized CHW buffers
    std::vector<int> labels;

    std::size_t size() const { return inputs.size(); }
};

// Reads every manifest image, resizes to input_size square and normalizes.
// Relative manifest paths resolve against base_dir.
Dataset load_dataset(const Manifest& manifest, int input_size, const NormalizeConstants& k = {},
                     const std::filesystem::path& base_dir = {});

extern template std::vector<float> normalize_chw<float>(const ImageU8&, const NormalizeConstants&);
extern template std::vector<double> normalize_chw<double>(const ImageU8&, const NormalizeConstants&);

}  // namespace woundstage
