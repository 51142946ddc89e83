#include "afacta/stats.hpp"

#include <cmath>
#include <limits>

#include "afacta/errors.hpp"

namespace afacta::stats {

namespace {

constexpr int kMaxIterations = 10000;
constexpr double kEpsilon = 1e-16;
constexpr double kTiny = 1e-300;

// Series for P(a, x); converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    for (int n = 1; n < kMaxIterations; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::fabs(term) < std::fabs(sum) * kEpsilon) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Lentz continued fraction for Q(a, x); used for x >= a + 1.
double gamma_q_fraction(double a, double x) {
    double b = x + 1.0 - a;
    double c = 1.0 / kTiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxIterations; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = b + an / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEpsilon) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

double beta_fraction(double a, double b, double x) {
    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m < kMaxIterations; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < kEpsilon) break;
    }
    return h;
}

}  // namespace

double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw DomainError("gamma_p needs a > 0 and x >= 0");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return gamma_p_series(a, x);
    return 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw DomainError("gamma_q needs a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
    return gamma_q_fraction(a, x);
}

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw DomainError("incomplete_beta needs a, b > 0");
    if (x < 0.0 || x > 1.0) throw DomainError("incomplete_beta needs x in [0, 1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x));
    // The fraction converges for x < (a + 1) / (a + b + 2); use symmetry otherwise.
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_fraction(a, b, x) / a;
    return 1.0 - front * beta_fraction(b, a, 1.0 - x) / b;
}

double chi_square_upper_tail(double x, double dof) {
    if (dof <= 0.0) throw DomainError("chi-square needs positive degrees of freedom");
    if (x <= 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    return gamma_q(dof / 2.0, x / 2.0);
}

double students_t_cdf(double t, double dof) {
    if (dof <= 0.0) throw DomainError("Student-t needs positive degrees of freedom");
    if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
    double tail = 0.5 * incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
    return t > 0 ? 1.0 - tail : tail;
}

double students_t_two_sided(double t, double dof) {
    if (dof <= 0.0) throw DomainError("Student-t needs positive degrees of freedom");
    if (std::isinf(t)) return 0.0;
    return incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

}  // namespace afacta::stats
