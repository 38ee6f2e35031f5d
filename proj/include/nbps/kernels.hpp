#ifndef NBPS_KERNELS_HPP
#define NBPS_KERNELS_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace nbps {

inline constexpr double euler_gamma = 0.57721566490153286060651209;

/// Digamma function; absolute error below 1e-12 for x >= 1e-3.
inline double digamma(double x) {
    if (!(x > 0)) {
        throw std::domain_error("digamma requires x > 0");
    }
    double acc = 0.0;
    while (x < 10.0) {
        acc -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // ln(x) - 1/(2x) - sum B_{2n} / (2n x^{2n})
    double series = inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * (691.0 / 32760 - inv2 / 12))))));
    return acc + std::log(x) - 0.5 * inv - series;
}

/// Trigamma function (derivative of digamma), same domain as digamma.
inline double trigamma(double x) {
    if (!(x > 0)) {
        throw std::domain_error("trigamma requires x > 0");
    }
    double acc = 0.0;
    while (x < 10.0) {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    double series = 1.0 + inv * 0.5 + inv2 * (1.0 / 6 - inv2 * (1.0 / 30 - inv2 * (1.0 / 42 - inv2 * (1.0 / 30 - inv2 * 5.0 / 66))));
    return acc + inv * series;
}

/// Thread-safe log-gamma (std::lgamma touches a global on glibc).
inline double log_gamma(double x) {
#if defined(__GLIBC__) || defined(__linux__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

inline double log_beta_fn(double a, double b) {
    return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

inline double sample_normal(Rng& rng) {
    for (;;) {
        const double u = 2.0 * rng.uniform() - 1.0;
        const double v = 2.0 * rng.uniform() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

/// Gamma(shape, scale) via Marsaglia-Tsang; shapes below one are boosted to
/// shape+1 and corrected with a uniform power, which stays stable for the
/// tiny shapes produced by table counts of one.
inline double sample_gamma(double shape, double scale, Rng& rng) {
    if (!(shape > 0) || !(scale > 0)) {
        throw std::domain_error("sample_gamma requires shape > 0 and scale > 0");
    }
    if (shape < 1.0) {
        const double boosted = sample_gamma(shape + 1.0, 1.0, rng);
        return scale * boosted * std::pow(rng.uniform_pos(), 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = sample_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_pos();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return scale * d * v;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return scale * d * v;
        }
    }
}

inline double sample_beta(double a, double b, Rng& rng) {
    const double x = sample_gamma(a, 1.0, rng);
    const double y = sample_gamma(b, 1.0, rng);
    return x / (x + y);
}

namespace detail {

// Hormann's PTRS transformed-rejection sampler, exact for lambda >= 10.
inline long long poisson_ptrs(double lambda, Rng& rng) {
    const double log_lambda = std::log(lambda);
    const double b = 0.931 + 2.53 * std::sqrt(lambda);
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double v_r = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= v_r) {
            return static_cast<long long>(k);
        }
        if (k < 0.0 || (us < 0.013 && v > us)) {
            continue;
        }
        if (std::log(v * inv_alpha / (a / (us * us) + b)) <=
            k * log_lambda - lambda - log_gamma(k + 1.0)) {
            return static_cast<long long>(k);
        }
    }
}

}

inline long long sample_poisson(double lambda, Rng& rng) {
    if (!(lambda >= 0)) {
        throw std::domain_error("sample_poisson requires lambda >= 0");
    }
    if (lambda == 0.0) {
        return 0;
    }
    if (lambda < 10.0) {
        const double limit = std::exp(-lambda);
        long long k = 0;
        double prod = rng.uniform_pos();
        while (prod > limit) {
            ++k;
            prod *= rng.uniform_pos();
        }
        return k;
    }
    return detail::poisson_ptrs(lambda, rng);
}

inline long long sample_bernoulli(double p, Rng& rng) {
    return rng.uniform() < p ? 1 : 0;
}

inline long long sample_binomial(long long n, double p, Rng& rng) {
    if (n < 0) {
        throw std::domain_error("sample_binomial requires n >= 0");
    }
    if (p <= 0.0) return 0;
    if (p >= 1.0) return n;
    long long k = 0;
    for (long long t = 0; t < n; ++t) {
        k += sample_bernoulli(p, rng);
    }
    return k;
}

/// Splits n items across cells proportionally to probs (need not be
/// normalized). Linear in n, which is fine at the column totals this
/// library splits.
inline std::vector<long long> sample_multinomial(long long n, std::span<const double> probs, Rng& rng) {
    std::vector<long long> out(probs.size(), 0);
    double total = 0.0;
    for (double p : probs) {
        if (!(p >= 0)) throw std::domain_error("sample_multinomial requires nonnegative probs");
        total += p;
    }
    if (!(total > 0)) throw std::domain_error("sample_multinomial requires a positive prob total");
    for (long long t = 0; t < n; ++t) {
        double u = rng.uniform() * total;
        std::size_t cell = probs.size() - 1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (u < probs[i]) {
                cell = i;
                break;
            }
            u -= probs[i];
        }
        ++out[cell];
    }
    return out;
}

/// NB(r, p) via its gamma-Poisson mixture.
inline long long sample_nb(double r, double p, Rng& rng) {
    if (!(r > 0)) {
        throw std::domain_error("sample_nb requires r > 0");
    }
    if (!(p >= 0 && p < 1)) {
        throw std::domain_error("sample_nb requires p in [0, 1)");
    }
    if (p == 0.0) {
        return 0;
    }
    const double lambda = sample_gamma(r, p / (1.0 - p), rng);
    return sample_poisson(lambda, rng);
}

/// Logarithmic(p) on {1, 2, ...} with PMF p^u / [-u ln(1-p)].
inline long long sample_logarithmic(double p, Rng& rng) {
    if (!(p > 0 && p < 1)) {
        throw std::domain_error("sample_logarithmic requires p in (0, 1)");
    }
    const double r = std::log1p(-p);
    for (;;) {
        const double v = rng.uniform_pos();
        if (v >= p) {
            return 1;
        }
        const double u = rng.uniform_pos();
        const double q = -std::expm1(r * u);
        if (v <= q * q) {
            const double result = std::floor(1.0 + std::log(v) / std::log(q));
            if (result < 1.0 || !std::isfinite(result)) {
                continue;
            }
            return static_cast<long long>(result);
        }
        return v >= q ? 1 : 2;
    }
}

/// Chinese restaurant table draw: number of tables occupied by m customers
/// under concentration r, as a sum of independent Bernoulli indicators.
inline long long sample_crt(long long m, double r, Rng& rng) {
    if (m < 0) {
        throw std::domain_error("sample_crt requires m >= 0");
    }
    if (!(r > 0)) {
        throw std::domain_error("sample_crt requires r > 0");
    }
    long long tables = 0;
    for (long long t = 0; t < m; ++t) {
        tables += sample_bernoulli(r / (r + static_cast<double>(t)), rng);
    }
    return tables;
}

/// Exact CRT PMF over {0..m} by sequential convolution of the Bernoulli
/// chain. Enumeration oracle; capped at m <= 25.
inline std::vector<double> crt_pmf_oracle(int m, double r) {
    if (m < 0 || m > 25) {
        throw std::invalid_argument("crt_pmf_oracle supports 0 <= m <= 25");
    }
    if (!(r > 0)) {
        throw std::domain_error("crt_pmf_oracle requires r > 0");
    }
    std::vector<double> pmf{1.0};
    for (int t = 0; t < m; ++t) {
        const double p = r / (r + static_cast<double>(t));
        std::vector<double> next(pmf.size() + 1, 0.0);
        for (std::size_t l = 0; l < pmf.size(); ++l) {
            next[l] += pmf[l] * (1.0 - p);
            next[l + 1] += pmf[l] * p;
        }
        pmf.swap(next);
    }
    return pmf;
}

/// Parameters of the logBeta law: the total -sum(ln(1-p)) mass of the
/// absolutely continuous part of a beta process.
struct LogBetaParams {
    double mass;           // gamma0 role
    double concentration;  // c + r-dot role

    void validate() const {
        if (!(mass > 0) || !(concentration > 0)) {
            throw std::domain_error("LogBetaParams requires positive mass and concentration");
        }
    }
};

namespace detail {

// q / (1 - e^{-q}), continuous at zero.
inline double levy_h(double q) {
    return q < 1e-8 ? 1.0 + 0.5 * q : q / (-std::expm1(-q));
}

}

/// Draws p* ~ logBeta(mass, concentration) by simulating the jumps of the
/// Levy measure mass * e^{-a q} / (1 - e^{-q}) dq above a truncation level,
/// then adding the mean of the truncated small-jump part.
inline double sample_logbeta(const LogBetaParams& params, Rng& rng) {
    params.validate();
    const double a = params.concentration;
    constexpr double eps = 1e-6;   // truncation level
    constexpr double split = 0.5;  // body/tail split point
    double total = 0.0;

    // Body (eps, split]: dominate by mass * h(split) / q and thin.
    const double h_split = detail::levy_h(split);
    const double log_ratio = std::log(split / eps);
    const long long n_body = sample_poisson(params.mass * h_split * log_ratio, rng);
    for (long long i = 0; i < n_body; ++i) {
        const double q = eps * std::exp(rng.uniform() * log_ratio);
        if (rng.uniform() * h_split < std::exp(-a * q) * detail::levy_h(q)) {
            total += q;
        }
    }

    // Tail (split, inf): dominate by mass * e^{-a q} / (1 - e^{-split}) and thin.
    const double tail_mass = params.mass * std::exp(-a * split) / (a * (-std::expm1(-split)));
    const long long n_tail = sample_poisson(tail_mass, rng);
    for (long long i = 0; i < n_tail; ++i) {
        const double q = split - std::log(rng.uniform_pos()) / a;
        if (rng.uniform() * (-std::expm1(-q)) < -std::expm1(-split)) {
            total += q;
        }
    }

    // Mean of the truncated (0, eps] part: integrand expands to
    // 1 + (1/2 - a) q + O(q^2) at this scale.
    const double small_mean = params.mass * (eps + (0.5 - a) * eps * eps * 0.5);
    return total + std::max(0.0, small_mean);
}

}

#endif
