#ifndef NBPS_SWEEP_COMMON_HPP
#define NBPS_SWEEP_COMMON_HPP

#include <cmath>
#include <cstdint>

#include "error.hpp"
#include "rng.hpp"

namespace nbps {
namespace detail {

// Stream ids for per-variable substreams inside one sweep. Derivation is
// (chain, sweep, variable[, index]) so gene-parallel execution cannot change
// the draws.
inline constexpr std::uint64_t var_gamma0 = 1;
inline constexpr std::uint64_t var_gene = 2;
inline constexpr std::uint64_t var_rest = 3;
inline constexpr std::uint64_t var_sample = 4;
inline constexpr std::uint64_t var_conc = 5;
inline constexpr std::uint64_t var_pstar = 6;
inline constexpr std::uint64_t var_mh = 7;
inline constexpr std::uint64_t var_crt = 8;

inline void ensure_finite(double value, const char* variable, long sweep) {
    if (!std::isfinite(value)) {
        throw NumericalError(variable, sweep);
    }
}

}
}

#endif
