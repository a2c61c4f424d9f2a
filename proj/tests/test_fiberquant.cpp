#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "woundstage/errors.hpp"
#include "woundstage/fiberquant.hpp"
#include "woundstage/rng.hpp"
#include "woundstage/stats.hpp"

using namespace woundstage;

namespace {

constexpr double kPi = 3.14159265358979323846;

double t_pdf(double x, double nu) {
    double c = std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2) - 0.5 * std::log(nu * kPi);
    return std::exp(c - (nu + 1) / 2 * std::log1p(x * x / nu));
}

// adaptive Simpson quadrature, the reference for the closed-form CDF
double simpson(double (*f)(double, double), double nu, double a, double b, double fa, double fb,
               double fm, double eps, int depth) {
    double m = (a + b) / 2;
    double lm = (a + m) / 2, rm = (m + b) / 2;
    double flm = f(lm, nu), frm = f(rm, nu);
    double whole = (b - a) / 6 * (fa + 4 * fm + fb);
    double left = (m - a) / 6 * (fa + 4 * flm + fm);
    double right = (b - m) / 6 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15 * eps)
        return left + right + (left + right - whole) / 15;
    return simpson(f, nu, a, m, fa, fm, flm, eps / 2, depth - 1) +
           simpson(f, nu, m, b, fm, fb, frm, eps / 2, depth - 1);
}

double two_sided_p_quadrature(double t, double nu) {
    double at = std::abs(t);
    if (at == 0) return 1.0;
    double fa = t_pdf(0, nu), fb = t_pdf(at, nu), fm = t_pdf(at / 2, nu);
    double half = simpson(t_pdf, nu, 0, at, fa, fb, fm, 1e-13, 60);
    return 1.0 - 2.0 * half;
}

std::vector<double> grating(int s, double fx, double fy, double amp = 1.0, double bias = 128.0) {
    std::vector<double> img(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
            img[static_cast<std::size_t>(y) * s + x] =
                bias + amp * 50.0 * std::sin(2 * kPi * (fx * x + fy * y) / s);
    return img;
}

}  // namespace

TEST_CASE("incomplete beta agrees with closed forms") {
    // I_x(1,1) = x; I_x(a,1) = x^a; I_x(1,b) = 1-(1-x)^b; I_0.5(a,a) = 1/2
    for (double x : {0.05, 0.3, 0.5, 0.77, 0.99}) {
        CHECK(regularized_incomplete_beta(x, 1, 1) == doctest::Approx(x).epsilon(1e-12));
        CHECK(regularized_incomplete_beta(x, 3, 1) == doctest::Approx(x * x * x).epsilon(1e-12));
        CHECK(regularized_incomplete_beta(x, 1, 4) ==
              doctest::Approx(1 - std::pow(1 - x, 4)).epsilon(1e-12));
    }
    for (double a : {0.5, 1.0, 2.5, 7.0})
        CHECK(regularized_incomplete_beta(0.5, a, a) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(regularized_incomplete_beta(0.0, 2, 3) == 0.0);
    CHECK(regularized_incomplete_beta(1.0, 2, 3) == 1.0);
}

TEST_CASE("student t closed forms at small degrees of freedom") {
    // nu=1: F(t) = 1/2 + atan(t)/pi
    CHECK(student_t_two_sided_p(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    // nu=2: F(t) = 1/2 + t / (2 sqrt(t^2+2))
    double t = std::sqrt(2.0);
    double expect = 2.0 * (1.0 - (0.5 + t / (2 * std::sqrt(t * t + 2))));
    CHECK(student_t_two_sided_p(t, 2.0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(student_t_two_sided_p(0.0, 5.0) == 1.0);
    // symmetric in t
    CHECK(student_t_two_sided_p(-1.7, 9.0) == student_t_two_sided_p(1.7, 9.0));
}

TEST_CASE("welch p-values match the quadrature oracle on random pairs") {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        int na = 3 + static_cast<int>(rng.below(20));
        int nb = 3 + static_cast<int>(rng.below(20));
        double shift = rng.uniform(-1.0, 1.0);
        double sa = 0.5 + rng.u01(), sb = 0.5 + 2 * rng.u01();
        std::vector<double> a, b;
        for (int i = 0; i < na; ++i) a.push_back(sa * rng.normal());
        for (int i = 0; i < nb; ++i) b.push_back(shift + sb * rng.normal());

        WelchResult r = welch_ttest_full(a, b);
        double oracle = two_sided_p_quadrature(r.t, r.df);
        CHECK(std::abs(r.p - oracle) < 1e-6);
        CHECK(r.p > 0.0);
        CHECK(r.p <= 1.0);
    }
}

TEST_CASE("welch statistic on a hand-computed pair") {
    std::vector<double> a{1, 2, 3, 4, 5};          // mean 3, var 2.5
    std::vector<double> b{2, 4, 6, 8, 10};         // mean 6, var 10
    WelchResult r = welch_ttest_full(a, b);
    CHECK(r.t == doctest::Approx(-3.0 / std::sqrt(2.5 / 5 + 10.0 / 5)).epsilon(1e-12));
    double se_a = 0.5, se_b = 2.0;
    double df = (se_a + se_b) * (se_a + se_b) / (se_a * se_a / 4 + se_b * se_b / 4);
    CHECK(r.df == doctest::Approx(df).epsilon(1e-12));
}

TEST_CASE("welch degenerate inputs raise") {
    CHECK_THROWS_AS((void)welch_t_test({1.0}, {1.0, 2.0}), DataError);
    CHECK_THROWS_AS((void)welch_t_test({1.0, 2.0}, {3.0}), DataError);
    CHECK_THROWS_AS((void)welch_t_test({2.0, 2.0}, {3.0, 3.0}), NumericError);
    // one-sided constant group is fine
    CHECK(welch_t_test({2.0, 2.0}, {1.0, 4.0}) > 0.0);
}

TEST_CASE("identical groups give p exactly 1") {
    std::vector<double> g{0.1, 0.2, 0.3};
    CHECK(welch_t_test(g, g) == 1.0);
}

TEST_CASE("grating coherency is near one, constant image exactly zero") {
    int s = 96;
    auto vertical = grating(s, 9, 0);
    CHECK(coherency(vertical, s, s, nullptr, 2.0) >= 0.95);

    std::vector<double> flat(static_cast<std::size_t>(s) * s, 77.0);
    CHECK(coherency(flat, s, s, nullptr, 2.0) == 0.0);
}

TEST_CASE("coherency is invariant under exact 90 degree rotation") {
    int s = 64;
    auto img = grating(s, 7, 3);
    // rotate the pixel grid by 90 degrees: (x,y) -> (y, s-1-x)
    std::vector<double> rot(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
            rot[static_cast<std::size_t>(x) * s + (s - 1 - y)] = img[static_cast<std::size_t>(y) * s + x];
    double c1 = coherency(img, s, s, nullptr, 2.0);
    double c2 = coherency(rot, s, s, nullptr, 2.0);
    CHECK(std::abs(c1 - c2) < 1e-6);
}

TEST_CASE("coherency is invariant under affine intensity changes") {
    int s = 48;
    auto img = grating(s, 5, 2);
    std::vector<double> scaled(img.size());
    for (std::size_t i = 0; i < img.size(); ++i) scaled[i] = 3.25 * img[i] + 41.0;
    double c1 = coherency(img, s, s, nullptr, 2.0);
    double c2 = coherency(scaled, s, s, nullptr, 2.0);
    CHECK(std::abs(c1 - c2) < 1e-9);
}

TEST_CASE("coherency stays in [0,1] on random images") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        int s = 16 + static_cast<int>(rng.below(33));
        std::vector<double> img(static_cast<std::size_t>(s) * s);
        for (auto& v : img) v = rng.uniform(0.0, 255.0);
        double c = coherency(img, s, s, nullptr, 1.0 + 2 * rng.u01());
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("masked coherency uses only the selected region") {
    int s = 64;
    // left half: strong vertical grating; right half: constant
    std::vector<double> img(static_cast<std::size_t>(s) * s, 100.0);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s / 2; ++x)
            img[static_cast<std::size_t>(y) * s + x] = 128 + 60 * std::sin(2 * kPi * 8 * x / s);
    std::vector<std::uint8_t> left(static_cast<std::size_t>(s) * s, 0), right = left;
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x)
            (x < s / 2 ? left : right)[static_cast<std::size_t>(y) * s + x] = 1;
    // margin keeps the blur from leaking the grating into the right mask
    for (int y = 0; y < s; ++y)
        for (int x = s / 2; x < s / 2 + 8; ++x) right[static_cast<std::size_t>(y) * s + x] = 0;

    double c_left = coherency(img, s, s, &left, 2.0);
    double c_right = coherency(img, s, s, &right, 2.0);
    CHECK(c_left > 0.9);
    CHECK(c_right == 0.0);  // constant region

    std::vector<std::uint8_t> empty(static_cast<std::size_t>(s) * s, 0);
    CHECK_THROWS_AS((void)coherency(img, s, s, &empty, 2.0), DataError);
}

TEST_CASE("collagen mask selects the blue window with hue wraparound") {
    ImageU8 img(3, 1);
    // pixel 0: saturated blue (hue 240), pixel 1: red (hue 0), pixel 2: gray
    img.pixels = {40, 60, 220, 220, 40, 40, 128, 128, 128};
    CollagenMask m = collagen_mask(img);
    CHECK(m.mask == std::vector<std::uint8_t>{1, 0, 0});
    CHECK(m.selected == 1);
    CHECK(m.coverage() == doctest::Approx(1.0 / 3));

    // wraparound window 300..60 catches red, not blue
    MaskParams wrap;
    wrap.hue_lo = 300;
    wrap.hue_hi = 60;
    wrap.sat_min = 0.2;
    wrap.val_min = 0.1;
    CollagenMask w = collagen_mask(img, wrap);
    CHECK(w.mask == std::vector<std::uint8_t>{0, 1, 0});
}

TEST_CASE("group statistics use interpolated quantiles and clipped whiskers") {
    GroupStats g = group_stats({4, 1, 3, 2});
    CHECK(g.count == 4);
    CHECK(g.mean == doctest::Approx(2.5));
    CHECK(g.median == doctest::Approx(2.5));
    CHECK(g.q1 == doctest::Approx(1.75));
    CHECK(g.q3 == doctest::Approx(3.25));
    CHECK(g.iqr == doctest::Approx(1.5));
    // fences at -0.5 and 5.5 -> whiskers clip to the extreme data inside
    CHECK(g.whisker_low == 1.0);
    CHECK(g.whisker_high == 4.0);

    // an actual outlier is excluded from the whisker
    GroupStats h = group_stats({1, 2, 3, 4, 50});
    CHECK(h.whisker_high < 50.0);

    CHECK_THROWS_AS((void)group_stats({}), DataError);
}

TEST_CASE("p-value matrix is symmetric with unit diagonal convention") {
    std::vector<std::string> names{"A", "B", "C"};
    Rng rng(7);
    std::vector<std::vector<double>> groups(3);
    for (int g = 0; g < 3; ++g)
        for (int i = 0; i < 8; ++i) groups[static_cast<std::size_t>(g)].push_back(g + rng.u01());

    PValueMatrix m = pvalue_matrix(names, groups);
    REQUIRE(m.p.size() == 3);
    for (int i = 0; i < 3; ++i) {
        CHECK(std::isnan(m.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)]));
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(m.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] ==
                  m.p[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);  // bit exact
            CHECK(m.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] > 0.0);
            CHECK(m.p[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] <= 1.0);
        }
    }

    // identical groups: off-diagonal exactly 1
    PValueMatrix same = pvalue_matrix({"X", "Y"}, {groups[0], groups[0]});
    CHECK(same.p[0][1] == 1.0);

    CHECK_THROWS_AS((void)pvalue_matrix({"A"}, {groups[0]}), DataError);
    CHECK_THROWS_AS((void)pvalue_matrix({"A", "B"}, {groups[0]}), UsageError);
}

TEST_CASE("p-value matrix CSV renders a dash diagonal") {
    std::vector<std::string> names{"G1", "G2"};
    std::vector<std::vector<double>> groups{{1, 2, 3}, {2, 3, 4}};
    PValueMatrix m = pvalue_matrix(names, groups);
    auto path = std::filesystem::temp_directory_path() / "woundstage_pvalues.csv";
    save_pvalue_csv(m, path);
    std::ifstream in(path);
    std::string header, row1;
    std::getline(in, header);
    std::getline(in, row1);
    CHECK(header == "group,G1,G2");
    CHECK(row1.substr(0, 5) == "G1,-,");
}

TEST_CASE("structure tensor summary of a pure gradient is rank one") {
    // f(x,y) = 3x + 4y: fx=3, fy=4 everywhere (interior), coherency 1
    int s = 32;
    std::vector<double> img(static_cast<std::size_t>(s) * s);
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) img[static_cast<std::size_t>(y) * s + x] = 3.0 * x + 4.0 * y;
    // interior mask avoids clamped borders
    std::vector<std::uint8_t> interior(static_cast<std::size_t>(s) * s, 0);
    for (int y = 8; y < s - 8; ++y)
        for (int x = 8; x < s - 8; ++x) interior[static_cast<std::size_t>(y) * s + x] = 1;
    StructureTensorSummary st = structure_tensor_summary(img, s, s, &interior, 2.0);
    CHECK(st.jxx == doctest::Approx(9.0).epsilon(1e-9));
    CHECK(st.jyy == doctest::Approx(16.0).epsilon(1e-9));
    CHECK(st.jxy == doctest::Approx(12.0).epsilon(1e-9));
    CHECK(coherency_from_summary(st) == doctest::Approx(1.0).epsilon(1e-9));
}
