#include "woundstage/stats.hpp"

#include <cmath>

#include "woundstage/errors.hpp"

namespace woundstage {

double log_beta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

namespace {

// Continued fraction for the incomplete beta, evaluated with the modified
// Lentz scheme.
double beta_cf(double x, double a, double b) {
    const int max_iter = 300;
    const double eps = 3e-16;
    const double tiny = 1e-300;

    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    throw NumericError("incomplete beta continued fraction did not converge");
}

}  // namespace

double regularized_incomplete_beta(double x, double a, double b) {
    if (a <= 0.0 || b <= 0.0) throw UsageError("incomplete beta requires a,b > 0");
    if (std::isnan(x)) throw NumericError("incomplete beta of NaN");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double front = std::exp(a * std::log(x) + b * std::log1p(-x) - log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
    return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double student_t_two_sided_p(double t, double nu) {
    if (nu <= 0.0) throw UsageError("t distribution requires nu > 0");
    if (std::isnan(t)) throw NumericError("t statistic is NaN");
    if (std::isinf(t)) return 0.0;
    // P(|T| >= |t|) = I_{nu/(nu+t^2)}(nu/2, 1/2); exactly 1 when t == 0
    double x = nu / (nu + t * t);
    return regularized_incomplete_beta(x, nu / 2.0, 0.5);
}

double student_t_cdf(double t, double nu) {
    double half_tail = 0.5 * student_t_two_sided_p(t, nu);
    return t >= 0.0 ? 1.0 - half_tail : half_tail;
}

}  // namespace woundstage
