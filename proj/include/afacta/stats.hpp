#pragma once

// Self-contained distribution tails used by the significance tests.

namespace afacta::stats {

// Regularized lower/upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// P[X > x] for X ~ chi-square with dof degrees of freedom.
double chi_square_upper_tail(double x, double dof);

// P[T <= t] for T ~ Student-t with dof degrees of freedom.
double students_t_cdf(double t, double dof);

// P[|T| >= |t|].
double students_t_two_sided(double t, double dof);

}  // namespace afacta::stats
