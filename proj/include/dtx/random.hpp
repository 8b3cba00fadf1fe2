#pragma once

// Seeded random streams. Engines are std::mt19937_64 (fully specified by the
// standard); every distribution comes from Boost.Random, whose algorithms are
// fixed in the headers, so a (seed, inputs) pair reproduces bit-for-bit on any
// platform that ships the same Boost release.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/geometric_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "dtx/errors.hpp"

namespace dtx {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed-splitting rule shared by every replicated computation:
/// child(seed, i) = splitmix64(splitmix64(seed) + i).
/// Replica i always receives the same child seed regardless of scheduling.
constexpr std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return splitmix64(splitmix64(seed) + index);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

inline double uniform01(Rng &rng) { return boost::random::uniform_01<double>()(rng); }

inline double standard_normal(Rng &rng) {
    return boost::random::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Index drawn from a discrete distribution given by (unnormalized-safe)
/// probabilities. Falls back to the last positive entry on round-off.
inline std::size_t sample_categorical(Rng &rng, std::span<const double> probs) {
    const double u = uniform01(rng);
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) {
            continue;
        }
        acc += probs[i];
        last_positive = i;
        if (u < acc) {
            return i;
        }
    }
    return last_positive;
}

/// Dirichlet(alpha, ..., alpha) draw of the given size.
///
/// Uses the Gamma-ratio construction in log space: for any alpha > 0,
/// G_alpha = G_{alpha+1} * U^{1/alpha}, so log G_alpha is finite even when
/// alpha is tiny (alpha = 0.01 would otherwise underflow to exact zeros).
inline std::vector<double> sample_dirichlet(Rng &rng, std::size_t size, double alpha) {
    detail::require<parameter_error>(alpha > 0.0, "dirichlet alpha must be positive");
    detail::require<parameter_error>(size > 0, "dirichlet size must be positive");
    boost::random::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
    std::vector<double> logs(size);
    double max_log = -std::numeric_limits<double>::infinity();
    for (auto &l : logs) {
        double g = gamma(rng);
        double u = 1.0 - uniform01(rng);  // (0, 1]
        l = std::log(g) + std::log(u) / alpha;
        max_log = std::max(max_log, l);
    }
    double total = 0.0;
    for (auto &l : logs) {
        l = std::exp(l - max_log);
        total += l;
    }
    for (auto &l : logs) {
        l /= total;
    }
    return logs;
}

/// Random time tau in {1, 2, ...} with P(tau = t) = (1 - gamma) gamma^(t-1).
/// Counts of n categorical draws, via successive conditional binomials.
inline std::vector<std::size_t> sample_multinomial(Rng &rng, std::size_t n, std::span<const double> probs) {
    std::vector<std::size_t> counts(probs.size(), 0);
    double mass = 0.0;
    for (double p : probs) {
        mass += p;
    }
    std::size_t left = n;
    for (std::size_t i = 0; i < probs.size() && left > 0; ++i) {
        if (i + 1 == probs.size() || probs[i] >= mass) {
            counts[i] = left;
            break;
        }
        const double q = std::clamp(probs[i] / mass, 0.0, 1.0);
        mass -= probs[i];
        if (q <= 0.0) {
            continue;
        }
        boost::random::binomial_distribution<long long> bin(static_cast<long long>(left), q);
        counts[i] = static_cast<std::size_t>(bin(rng));
        left -= counts[i];
    }
    return counts;
}

class GeometricTimeSampler {
  public:
    explicit GeometricTimeSampler(double gamma) : gamma_(gamma) {
        detail::require<domain_error>(gamma >= 0.0 && gamma < 1.0,
                                      "geometric time requires gamma in [0, 1)");
    }

    double gamma() const noexcept { return gamma_; }

    std::size_t operator()(Rng &rng) const {
        if (gamma_ == 0.0) {
            return 1;
        }
        // boost counts failures before the first success: P(k) = p (1-p)^k, k >= 0.
        boost::random::geometric_distribution<std::size_t, double> failures(1.0 - gamma_);
        return failures(rng) + 1;
    }

  private:
    double gamma_;
};

}  // namespace dtx
