#include "woundstage/fiberquant.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "woundstage/errors.hpp"
#include "woundstage/stats.hpp"

namespace woundstage {

CollagenMask collagen_mask(const ImageU8& img, const MaskParams& params) {
    if (params.sat_min < 0 || params.sat_min > 1 || params.val_min < 0 || params.val_min > 1)
        throw UsageError("mask thresholds must be in [0,1]");
    CollagenMask out;
    out.width = img.width;
    out.height = img.height;
    out.mask.assign(static_cast<std::size_t>(img.width) * img.height, 0);
    for (std::size_t i = 0; i < out.mask.size(); ++i) {
        const std::uint8_t* p = img.pixels.data() + i * 3;
        Hsv hsv = rgb_to_hsv(p[0], p[1], p[2]);
        bool hue_ok = params.hue_lo <= params.hue_hi
                          ? (hsv.h >= params.hue_lo && hsv.h <= params.hue_hi)
                          : (hsv.h >= params.hue_lo || hsv.h <= params.hue_hi);
        if (hue_ok && hsv.s >= params.sat_min && hsv.v >= params.val_min) {
            out.mask[i] = 1;
            ++out.selected;
        }
    }
    return out;
}

StructureTensorSummary structure_tensor_summary(const std::vector<double>& plane, int width,
                                                int height, const std::vector<std::uint8_t>* mask,
                                                double sigma) {
    if (width <= 0 || height <= 0) throw UsageError("structure tensor: empty image");
    if (plane.size() != static_cast<std::size_t>(width) * height)
        throw UsageError("structure tensor: plane size does not match dimensions");
    if (mask && mask->size() != plane.size())
        throw UsageError("structure tensor: mask size does not match image");
    if (sigma <= 0) throw UsageError("structure tensor: sigma must be positive");

    std::size_t n = plane.size();
    std::vector<double> gxx(n), gxy(n), gyy(n);
    for (int y = 0; y < height; ++y) {
        int ym = std::max(y - 1, 0), yp = std::min(y + 1, height - 1);
        for (int x = 0; x < width; ++x) {
            int xm = std::max(x - 1, 0), xp = std::min(x + 1, width - 1);
            double fx = 0.5 * (plane[static_cast<std::size_t>(y) * width + xp] -
                               plane[static_cast<std::size_t>(y) * width + xm]);
            double fy = 0.5 * (plane[static_cast<std::size_t>(yp) * width + x] -
                               plane[static_cast<std::size_t>(ym) * width + x]);
            std::size_t i = static_cast<std::size_t>(y) * width + x;
            gxx[i] = fx * fx;
            gxy[i] = fx * fy;
            gyy[i] = fy * fy;
        }
    }
    gaussian_blur_plane(gxx, width, height, sigma);
    gaussian_blur_plane(gxy, width, height, sigma);
    gaussian_blur_plane(gyy, width, height, sigma);

    StructureTensorSummary s;
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask && !(*mask)[i]) continue;
        s.jxx += gxx[i];
        s.jxy += gxy[i];
        s.jyy += gyy[i];
        ++count;
    }
    if (count == 0) throw DataError("structure tensor: mask selects no pixels");
    s.jxx /= static_cast<double>(count);
    s.jxy /= static_cast<double>(count);
    s.jyy /= static_cast<double>(count);
    return s;
}

double coherency_from_summary(const StructureTensorSummary& s) {
    double diff = s.jxx - s.jyy;
    double num = std::sqrt(diff * diff + 4.0 * s.jxy * s.jxy);
    return num / (s.jxx + s.jyy + 1e-12);
}

double coherency(const std::vector<double>& plane, int width, int height,
                 const std::vector<std::uint8_t>* mask, double sigma) {
    return coherency_from_summary(structure_tensor_summary(plane, width, height, mask, sigma));
}

double image_coherency(const ImageU8& img, const MaskParams& params, double sigma) {
    CollagenMask m = collagen_mask(img, params);
    std::vector<double> luma = luminance_plane(img);
    return coherency(luma, img.width, img.height, &m.mask, sigma);
}

WelchResult welch_ttest_full(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw DataError("welch test: both groups need at least 2 values");
    auto mean_var = [](const std::vector<double>& v) {
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0;
        for (double x : v) var += (x - mean) * (x - mean);
        var /= static_cast<double>(v.size() - 1);
        return std::pair<double, double>(mean, var);
    };
    auto [ma, va] = mean_var(a);
    auto [mb, vb] = mean_var(b);
    double na = static_cast<double>(a.size());
    double nb = static_cast<double>(b.size());
    double sa = va / na, sb = vb / nb;
    double se2 = sa + sb;

    if (se2 == 0.0)
        throw NumericError("welch test: both groups have zero variance, the statistic is undefined");

    WelchResult r;
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    r.p = student_t_two_sided_p(r.t, r.df);
    return r;
}

double welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    return welch_ttest_full(a, b).p;
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    std::size_t lo = static_cast<std::size_t>(pos);
    double frac = pos - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

GroupStats group_stats(std::vector<double> values) {
    if (values.empty()) throw DataError("group stats: empty group");
    GroupStats g;
    g.count = static_cast<int>(values.size());
    for (double v : values) g.mean += v;
    g.mean /= static_cast<double>(values.size());
    std::sort(values.begin(), values.end());
    g.median = quantile_sorted(values, 0.5);
    g.q1 = quantile_sorted(values, 0.25);
    g.q3 = quantile_sorted(values, 0.75);
    g.iqr = g.q3 - g.q1;
    g.whisker_low = std::max(values.front(), g.q1 - 1.5 * g.iqr);
    g.whisker_high = std::min(values.back(), g.q3 + 1.5 * g.iqr);
    return g;
}

PValueMatrix pvalue_matrix(const std::vector<std::string>& names,
                           const std::vector<std::vector<double>>& groups) {
    if (names.size() != groups.size()) throw UsageError("pvalue matrix: names and groups differ");
    if (groups.size() < 2) throw DataError("pvalue matrix: need at least two groups");
    PValueMatrix m;
    m.names = names;
    std::size_t n = groups.size();
    m.p.assign(n, std::vector<double>(n, std::numeric_limits<double>::quiet_NaN()));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double p = welch_t_test(groups[i], groups[j]);
            m.p[i][j] = p;
            m.p[j][i] = p;
        }
    return m;
}

void save_pvalue_csv(const PValueMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write p-value matrix: " + path.string());
    out << "group";
    for (const auto& name : matrix.names) out << ',' << name;
    out << '\n' << std::setprecision(9);
    for (std::size_t i = 0; i < matrix.p.size(); ++i) {
        out << matrix.names[i];
        for (std::size_t j = 0; j < matrix.p[i].size(); ++j) {
            if (i == j)
                out << ",-";
            else
                out << ',' << matrix.p[i][j];
        }
        out << '\n';
    }
    if (!out) throw DataError("p-value matrix write failed: " + path.string());
}

}  // namespace woundstage
