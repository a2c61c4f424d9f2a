#pragma once

namespace woundstage {

// log of the Beta function
double log_beta(double a, double b);

// Regularized incomplete beta I_x(a,b) for a,b > 0, clamped domain [0,1].
// Continued fraction (modified Lentz), switching to the complement for fast
// convergence.
double regularized_incomplete_beta(double x, double a, double b);

// CDF of Student's t with nu > 0 degrees of freedom.
double student_t_cdf(double t, double nu);

// P(|T| >= |t|) for Student's t: the two-sided p-value of a t statistic.
// Exactly 1 at t == 0.
double student_t_two_sided_p(double t, double nu);

}  // namespace woundstage
