#include "woundstage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "woundstage/errors.hpp"

namespace woundstage {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

// shared colorization: scalar texture u in [0,1] to a blue-dominated pixel.
// Hue lands near 226 degrees, saturation 0.47..0.73, value 0.55..0.95, so
// every pixel falls inside the default collagen mask window.
void blue_pixel(double u, std::uint8_t* rgb) {
    u = std::clamp(u, 0.0, 1.0);
    rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * (0.15 + 0.35 * u)));
    rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * (0.25 + 0.35 * u)));
    rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * (0.55 + 0.40 * u)));
}

ImageU8 colorize(const std::vector<double>& u, int s) {
    ImageU8 img(s, s);
    for (std::size_t i = 0; i < u.size(); ++i) blue_pixel(u[i], img.pixels.data() + i * 3);
    return img;
}

// smoothed unit-RMS noise field
std::vector<double> noise_field(int s, double sigma, Rng& rng) {
    std::vector<double> n(static_cast<std::size_t>(s) * s);
    for (double& v : n) v = rng.u01();
    gaussian_blur_plane(n, s, s, sigma);
    double mean = 0;
    for (double v : n) mean += v;
    mean /= static_cast<double>(n.size());
    double rms = 0;
    for (double& v : n) {
        v -= mean;
        rms += v * v;
    }
    rms = std::sqrt(rms / static_cast<double>(n.size()));
    if (rms > 0)
        for (double& v : n) v /= rms;
    return n;
}

}  // namespace

ImageU8 make_target_image(int cls, int s, Rng& rng) {
    if (cls < 0 || cls >= kNumStages) throw UsageError("target class outside [0,6)");
    if (s < 8) throw UsageError("image size too small");
    // Per-class texture: class 0 is an isotropic cross of two orthogonal
    // gratings (near-zero orientation coherency by construction); classes
    // 1..5 are single-orientation gratings with rising frequency and falling
    // noise, so measured coherency climbs steeply through the classes.
    static constexpr double kFreq[kNumStages] = {7.5, 6.0, 9.0, 12.0, 15.0, 18.0};
    static constexpr double kNoiseWeight[kNumStages] = {0.5, 0.6, 0.5, 0.45, 0.35, 0.15};

    double theta = rng.uniform(0.0, 3.14159265358979323846);
    double phase = rng.uniform(0.0, kTwoPi);
    double freq = kFreq[cls] * (1.0 + 0.1 * (rng.u01() - 0.5));
    double w = kNoiseWeight[cls];
    double ct = std::cos(theta), st = std::sin(theta);
    bool cross = cls == 0;
    double phase2 = cross ? rng.uniform(0.0, kTwoPi) : 0.0;

    std::vector<double> noise = noise_field(s, 2.0, rng);
    const double grating_rms = 0.7071067811865476;  // sine RMS, noise matched to it

    std::vector<double> u(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            double g;
            if (cross) {
                // equal-energy orthogonal pair, total RMS matched to a single sine
                double g1 = std::sin(kTwoPi * freq * (x * ct + y * st) / static_cast<double>(s) + phase);
                double g2 = std::sin(kTwoPi * freq * (-x * st + y * ct) / static_cast<double>(s) + phase2);
                g = grating_rms * (g1 + g2);
            } else {
                g = std::sin(kTwoPi * freq * (x * ct + y * st) / static_cast<double>(s) + phase);
            }
            double n = noise[static_cast<std::size_t>(y) * s + x] * grating_rms;
            double t = (1.0 - w) * g + w * n;
            u[static_cast<std::size_t>(y) * s + x] = 0.5 + 0.35 * t;
        }
    return colorize(u, s);
}

ImageU8 make_source_image(int cls, int s, Rng& rng) {
    if (cls < 0 || cls >= kNumStages) throw UsageError("source class outside [0,6)");
    if (s < 8) throw UsageError("image size too small");
    std::vector<double> u(static_cast<std::size_t>(s) * s, 0.5);

    switch (cls) {
        case 0: {  // checkerboard
            int cell = 8 + static_cast<int>(rng.below(9));
            int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell)));
            int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell)));
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    int v = ((x + ox) / cell + (y + oy) / cell) % 2;
                    u[static_cast<std::size_t>(y) * s + x] = v ? 0.75 : 0.25;
                }
            break;
        }
        case 1: {  // polka dots
            int pitch = 12 + static_cast<int>(rng.below(9));
            double radius = (0.25 + 0.15 * rng.u01()) * pitch;
            int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(pitch)));
            int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(pitch)));
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    int dx = (x + ox) % pitch - pitch / 2;
                    int dy = (y + oy) % pitch - pitch / 2;
                    bool in = dx * dx + dy * dy <= radius * radius;
                    u[static_cast<std::size_t>(y) * s + x] = in ? 0.75 : 0.25;
                }
            break;
        }
        case 2: {  // concentric rings
            double cx = rng.uniform(0.25, 0.75) * s;
            double cy = rng.uniform(0.25, 0.75) * s;
            double period = 8.0 + 8.0 * rng.u01();
            double phase = rng.uniform(0.0, kTwoPi);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    double d = std::hypot(x - cx, y - cy);
                    u[static_cast<std::size_t>(y) * s + x] =
                        0.5 + 0.35 * std::sin(kTwoPi * d / period + phase);
                }
            break;
        }
        case 3: {  // axis-aligned grid
            int period = 8 + static_cast<int>(rng.below(9));
            int thick = 2 + static_cast<int>(rng.below(3));
            int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(period)));
            int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(period)));
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    bool on = (x + ox) % period < thick || (y + oy) % period < thick;
                    u[static_cast<std::size_t>(y) * s + x] = on ? 0.75 : 0.25;
                }
            break;
        }
        case 4: {  // starburst
            double cx = rng.uniform(0.35, 0.65) * s;
            double cy = rng.uniform(0.35, 0.65) * s;
            int spokes = 6 + static_cast<int>(rng.below(7));
            double phase = rng.uniform(0.0, kTwoPi);
            for (int y = 0; y < s; ++y)
                for (int x = 0; x < s; ++x) {
                    double ang = std::atan2(y - cy, x - cx);
                    u[static_cast<std::size_t>(y) * s + x] =
                        0.5 + 0.35 * std::sin(spokes * ang + phase);
                }
            break;
        }
        case 5: {  // blob field
            std::vector<double> n = noise_field(s, 5.0, rng);
            std::vector<double> sorted = n;
            std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
            double median = sorted[sorted.size() / 2];
            for (std::size_t i = 0; i < u.size(); ++i) u[i] = n[i] > median ? 0.75 : 0.25;
            break;
        }
    }
    return colorize(u, s);
}

Manifest synthesize_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    if (cfg.image_size < 8) throw UsageError("image_size must be at least 8");
    std::vector<int> counts = cfg.counts;
    if (counts.empty()) counts.assign(kNumStages, cfg.per_class);
    if (counts.size() != kNumStages)
        throw UsageError("counts must list exactly " + std::to_string(kNumStages) + " classes");
    for (int c : counts)
        if (c < 0) throw UsageError("counts must be non-negative");

    std::filesystem::create_directories(out_dir);
    Manifest manifest;
    Rng master(cfg.seed);
    int running = 0;
    for (int cls = 0; cls < kNumStages; ++cls) {
        const std::string& label = stage_name(static_cast<StageLabel>(cls));
        std::filesystem::create_directories(out_dir / label);
        for (int i = 0; i < counts[static_cast<std::size_t>(cls)]; ++i) {
            std::uint64_t tag =
                (static_cast<std::uint64_t>(cfg.task == SynthTask::source ? kNumStages : 0) +
                 static_cast<std::uint64_t>(cls)) *
                    1000003ull +
                static_cast<std::uint64_t>(i);
            Rng rng = master.fork(tag);
            ImageU8 img = cfg.task == SynthTask::target
                              ? make_target_image(cls, cfg.image_size, rng)
                              : make_source_image(cls, cfg.image_size, rng);
            char name[64];
            std::snprintf(name, sizeof name, "%s_%04d.png", label.c_str(), i);
            std::filesystem::path rel = std::filesystem::path(label) / name;
            write_png(out_dir / rel, img);
            manifest.samples.push_back(
                Sample{rel.generic_string(), static_cast<StageLabel>(cls), running % 3 + 1});
            ++running;
        }
    }
    return manifest;
}

}  // namespace woundstage
