#include "r2lml/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace r2lml {

namespace {

constexpr double kEps = 1e-15;
constexpr int kMaxTerms = 10000;

// P(a, x) by its power series; converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
    double term = 1.0 / a, sum = term;
    for (int n = 1; n < kMaxTerms; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Legendre continued fraction (modified Lentz).
double gamma_q_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < kMaxTerms; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kEps) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

} // namespace

double regularized_gamma_q(double a, double x) {
    if (!(a > 0.0) || !(x >= 0.0)) throw ConfigError("regularized gamma needs a > 0 and x >= 0");
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
    return std::clamp(gamma_q_fraction(a, x), 0.0, 1.0);
}

double chi_square_sf(double x, double dof) {
    if (!(dof > 0.0)) throw ConfigError("chi-square degrees of freedom must be positive");
    if (x <= 0.0) return 1.0;
    return regularized_gamma_q(0.5 * dof, 0.5 * x);
}

double binomial_two_sided_half(long b, long c) {
    if (b < 0 || c < 0) throw ConfigError("discordant counts must be non-negative");
    const long n = b + c;
    if (n == 0) return 1.0;
    const long k = std::min(b, c);
    const double log_half_n = static_cast<double>(n) * std::log(0.5);
    const double log_n_fact = std::lgamma(static_cast<double>(n) + 1.0);
    double tail = 0.0;
    for (long i = 0; i <= k; ++i)
        tail += std::exp(log_n_fact - std::lgamma(static_cast<double>(i) + 1.0) -
                         std::lgamma(static_cast<double>(n - i) + 1.0) + log_half_n);
    return std::min(1.0, 2.0 * tail);
}

} // namespace r2lml
