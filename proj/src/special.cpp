#include "rbedl/special.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace rbedl::special {
namespace {

void require_positive(double x, const char* name) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw std::domain_error(std::string(name) + ": argument must be finite and > 0, got " +
                                std::to_string(x));
    }
}

// Below these the recurrences shift the argument up before the asymptotic
// series is applied; the truncated series error is < 1e-15 beyond them.
constexpr double kDigammaShift = 10.0;
constexpr double kLogGammaShift = 15.0;
// n! is exact in float64 up to 22!.
constexpr double kExactFactorialLimit = 23.0;

}  // namespace

double digamma(double x) {
    require_positive(x, "digamma");
    double acc = 0.0;
    while (x < kDigammaShift) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli tail: -1/12, 1/120, -1/252, 1/240, -1/132, 691/32760
    const double tail =
        inv2 * (1.0 / 12 -
                inv2 * (1.0 / 120 -
                        inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))));
    return acc + std::log(x) - 0.5 * inv - tail;
}

double trigamma(double x) {
    require_positive(x, "trigamma");
    double acc = 0.0;
    while (x < kDigammaShift) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv + 0.5 * inv2 +
        inv * inv2 *
            (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * 5.0 / 66))));
    return acc + series;
}

double log_gamma(double x) {
    require_positive(x, "log_gamma");
    // Small integers go through the exact factorial so that ln Gamma(1) and
    // ln Gamma(2) are exactly zero; KL terms rely on that cancellation.
    if (x <= kExactFactorialLimit && x == std::floor(x)) {
        double factorial = 1.0;
        for (double k = 2.0; k < x; k += 1.0) factorial *= k;
        return std::log(factorial);
    }
    // ln Gamma(x) = ln Gamma(x + n) - ln(x (x+1) ... (x+n-1))
    double shift = 1.0;
    while (x < kLogGammaShift) {
        shift *= x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    const double series =
        inv * (1.0 / 12 -
               inv2 * (1.0 / 360 - inv2 * (1.0 / 1260 - inv2 * (1.0 / 1680 - inv2 * (1.0 / 1188)))));
    const double half_log_two_pi = 0.5 * std::log(2.0 * std::numbers::pi);
    return (x - 0.5) * std::log(x) - x + half_log_two_pi + series - std::log(shift);
}

}  // namespace rbedl::special
