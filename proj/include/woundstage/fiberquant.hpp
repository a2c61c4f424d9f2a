#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "woundstage/image.hpp"

namespace woundstage {

// HSV window for collagen-like (blue-stained) pixels. Hue is in degrees; a
// window with lo > hi wraps around 0.
struct MaskParams {
    double hue_lo = 150.0;
    double hue_hi = 270.0;
    double sat_min = 0.15;
    double val_min = 0.10;
};

struct CollagenMask {
    int width = 0, height = 0;
    std::vector<std::uint8_t> mask;  // 0/1 per pixel
    std::size_t selected = 0;

    double coverage() const {
        return mask.empty() ? 0.0 : static_cast<double>(selected) / static_cast<double>(mask.size());
    }
};

CollagenMask collagen_mask(const ImageU8& img, const MaskParams& params = {});

// Mean smoothed gradient products over the masked region.
struct StructureTensorSummary {
    double jxx = 0, jxy = 0, jyy = 0;
};

// Centered differences (borders clamped), Gaussian smoothing of the three
// gradient products with the given sigma (kernel radius ceil(3*sigma),
// replicated borders), then the mean over masked pixels. mask may be null
// for whole-image statistics.
StructureTensorSummary structure_tensor_summary(const std::vector<double>& plane, int width,
                                                int height, const std::vector<std::uint8_t>* mask,
                                                double sigma);

// Orientation coherency in [0,1]: eigenvalue contrast of the structure
// tensor, (l1-l2)/(l1+l2) with a 1e-12 guard in the denominator. 0 for
// constant images, approaches 1 for a single dominant orientation.
double coherency_from_summary(const StructureTensorSummary& s);
double coherency(const std::vector<double>& plane, int width, int height,
                 const std::vector<std::uint8_t>* mask, double sigma = 2.0);

// Luma plane + collagen mask + coherency in one step.
double image_coherency(const ImageU8& img, const MaskParams& params = {}, double sigma = 2.0);

struct WelchResult {
    double t = 0;   // statistic
    double df = 0;  // Welch-Satterthwaite degrees of freedom
    double p = 1;   // two-sided
};

// Welch's unequal-variance t-test. Each group needs >= 2 values and at least
// one group must have nonzero variance; two constant groups leave the
// statistic undefined and raise a numeric error.
WelchResult welch_ttest_full(const std::vector<double>& a, const std::vector<double>& b);
double welch_t_test(const std::vector<double>& a, const std::vector<double>& b);  // p-value

struct GroupStats {
    int count = 0;
    double mean = 0, median = 0, q1 = 0, q3 = 0, iqr = 0;
    double whisker_low = 0, whisker_high = 0;  // Tukey fences clipped to the data
};

// Quantiles use linear interpolation between order statistics
// (position q*(n-1)).
GroupStats group_stats(std::vector<double> values);

struct PValueMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<double>> p;  // symmetric; diagonal is NaN
};

// Pairwise Welch tests between named groups. Symmetric by construction.
PValueMatrix pvalue_matrix(const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& groups);

// Writes the matrix as CSV with '-' on the diagonal.
void save_pvalue_csv(const PValueMatrix& matrix, const std::filesystem::path& path);

}  // namespace woundstage
