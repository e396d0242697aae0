#pragma once

#include <lignn/error.hpp>

#include <cmath>
#include <cstdint>

// Closed-form burst/row model of element-wise (algorithmic) dropout with the
// cache ignored: Q random reads of C contiguous columns, rows of N columns,
// bursts of M columns holding K elements, element droprate alpha.
namespace lignn::analytic {

struct ModelParams {
    double Q = 0;  // requests
    double C = 0;  // columns per request
    double N = 0;  // columns per row
    double M = 0;  // columns per burst
    double K = 0;  // elements per burst
    double alpha = 0;

    void validate() const {
        if (M <= 0 || N <= 0 || std::fmod(N, M) != 0) throw ConfigError("burst columns M must divide row columns N");
        if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("droprate must lie in [0, 1]");
        if (K <= 0 || C < 0 || Q < 0) throw ConfigError("request and burst sizes must be non-negative");
    }
};

struct AccessEstimate {
    double actual = 0;   // Q C (1 - alpha^K)
    double desired = 0;  // Q C (1 - alpha)
};

/// Expected column accesses: a burst survives unless all K of its elements drop.
inline AccessEstimate expected_actual_bursts(const ModelParams& p) {
    p.validate();
    return {p.Q * p.C * (1.0 - std::pow(p.alpha, p.K)), p.Q * p.C * (1.0 - p.alpha)};
}

struct Probability {
    double value = 0;
    bool non_integral_exponent = false;
};

/// Upper bound on skipping a whole row: alpha^(C K / M).
inline Probability row_skip_probability(const ModelParams& p) {
    p.validate();
    const double e = p.C * p.K / p.M;
    return {std::pow(p.alpha, e), e != std::floor(e)};
}

struct Ratio {
    double value = 0;
    bool at_limit = false;
};

/// Algorithmic over locality-aware actual accesses: (1 - a^K) / (1 - a)
/// = 1 + a + ... + a^(K-1). At a = 1 the limit K is returned and flagged.
inline Ratio inefficiency_ratio(double alpha, std::uint32_t K) {
    if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("droprate must lie in [0, 1]");
    if (alpha == 1.0) return {static_cast<double>(K), true};
    double sum = 0, term = 1;
    for (std::uint32_t i = 0; i < K; ++i) {
        sum += term;
        term *= alpha;
    }
    return {sum, false};
}

/// Row-activation counterpart: (1 - a^(CK/M)) / (1 - a).
inline Ratio row_inefficiency_ratio(const ModelParams& p) {
    p.validate();
    const double e = p.C * p.K / p.M;
    if (p.alpha == 1.0) return {e, true};
    return {(1.0 - std::pow(p.alpha, e)) / (1.0 - p.alpha), false};
}

}  // namespace lignn::analytic
