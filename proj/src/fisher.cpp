#include <algorithm>
#include <cmath>
#include <vector>

#include "ck/lpi.hpp"

namespace ck {

namespace {

using u128 = unsigned __int128;

// Exact binomial coefficient; every intermediate value stays integral.
u128 binom128(long long n, long long k) {
    if (k < 0 || k > n) return 0;
    if (k > n - k) k = n - k;
    u128 c = 1;
    for (long long i = 1; i <= k; ++i) c = c * static_cast<u128>(n - k + i) / static_cast<u128>(i);
    return c;
}

long double log_factorial(long long k) {
    static thread_local std::vector<long double> cache{0.0L};
    while (static_cast<long long>(cache.size()) <= k) {
        long double next = cache.back() + std::log(static_cast<long double>(cache.size()));
        cache.push_back(next);
    }
    return cache[static_cast<std::size_t>(k)];
}

// Tables up to this total are handled with exact integer arithmetic;
// C(120,60) still fits a 128-bit unsigned.
constexpr long long EXACT_LIMIT = 120;

double fisher_exact_small(long long a, long long r1, long long r2, long long c1,
                          FisherSided sided) {
    long long k_min = std::max(0LL, c1 - r2);
    long long k_max = std::min(r1, c1);
    u128 total = 0;
    std::vector<u128> term(static_cast<std::size_t>(k_max - k_min + 1));
    for (long long k = k_min; k <= k_max; ++k) {
        term[static_cast<std::size_t>(k - k_min)] = binom128(r1, k) * binom128(r2, c1 - k);
        total += term[static_cast<std::size_t>(k - k_min)];
    }
    u128 observed = term[static_cast<std::size_t>(a - k_min)];
    u128 tail = 0;
    for (long long k = k_min; k <= k_max; ++k) {
        u128 t = term[static_cast<std::size_t>(k - k_min)];
        bool include = sided == FisherSided::Right ? k >= a : t <= observed;
        if (include) tail += t;
    }
    long double p = static_cast<long double>(tail) / static_cast<long double>(total);
    return std::min(1.0, static_cast<double>(p));
}

double fisher_exact_large(long long a, long long r1, long long r2, long long c1,
                          FisherSided sided) {
    long long n = r1 + r2;
    auto log_pmf = [&](long long k) {
        return log_factorial(r1) - log_factorial(k) - log_factorial(r1 - k) +
               log_factorial(r2) - log_factorial(c1 - k) - log_factorial(r2 - c1 + k) -
               (log_factorial(n) - log_factorial(c1) - log_factorial(n - c1));
    };
    long long k_min = std::max(0LL, c1 - r2);
    long long k_max = std::min(r1, c1);
    long double observed = log_pmf(a);
    long double sum = 0.0L;
    for (long long k = k_min; k <= k_max; ++k) {
        long double lp = log_pmf(k);
        bool include = sided == FisherSided::Right ? k >= a : lp <= observed + 1e-7L;
        if (include) sum += std::exp(lp);
    }
    double p = static_cast<double>(sum);
    return std::clamp(p, std::numeric_limits<double>::min(), 1.0);
}

}  // namespace

double fisher_exact(const std::array<std::array<long long, 2>, 2>& table, FisherSided sided) {
    long long a = table[0][0], b = table[0][1], c = table[1][0], d = table[1][1];
    if (a < 0 || b < 0 || c < 0 || d < 0)
        raise(Err::UsageError, "fisher_exact requires nonnegative counts");
    long long r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) return 1.0;  // degenerate margin
    if (r1 + r2 <= EXACT_LIMIT) return fisher_exact_small(a, r1, r2, c1, sided);
    return fisher_exact_large(a, r1, r2, c1, sided);
}

}  // namespace ck
