#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "woundstage/datapipe.hpp"
#include "woundstage/image.hpp"
#include "woundstage/rng.hpp"

namespace woundstage {

// Two synthetic tasks sharing a blue histology-like color scheme:
//  - target: six stage classes of oriented gratings with class-dependent
//    spatial frequency and noise fraction. Orientation order follows the
//    stage order, so blue-region coherency rises from Control to DelayDay10.
//  - source: six unrelated texture families (checkerboard, dots, rings,
//    grid, starburst, blobs) used for pretraining. Labels reuse the stage
//    names purely as class slots.
enum class SynthTask { target, source };

struct SynthConfig {
    SynthTask task = SynthTask::target;
    int per_class = 60;
    std::vector<int> counts;  // optional per-class override, size 6
    int image_size = 96;
    std::uint64_t seed = 1;
};

ImageU8 make_target_image(int cls, int image_size, Rng& rng);
ImageU8 make_source_image(int cls, int image_size, Rng& rng);

// Writes <out_dir>/<Label>/<Label>_NNNN.png for every sample and returns a
// manifest with paths relative to out_dir. dataset_id cycles 1..3.
// Deterministic in the seed, including across count changes.
Manifest synthesize_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

}  // namespace woundstage
