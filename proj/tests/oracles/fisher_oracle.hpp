// Independent Fisher oracle: exhaustive enumeration of all 2x2 tables with
// the observed margins, each table's probability computed from log
// factorials (a different arithmetic route than the shipped test).
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

inline long double log_fact(long long k) {
    long double s = 0.0L;
    for (long long i = 2; i <= k; ++i) s += std::log(static_cast<long double>(i));
    return s;
}

struct FisherOracle {
    // hypergeometric probability of the table [[k, r1-k],[c1-k, r2-c1+k]]
    static long double table_probability(long long k, long long r1, long long r2, long long c1) {
        long long n = r1 + r2;
        long long a = k, b = r1 - k, c = c1 - k, d = r2 - c1 + k;
        long double lp = log_fact(r1) + log_fact(r2) + log_fact(c1) + log_fact(n - c1) -
                         log_fact(n) - log_fact(a) - log_fact(b) - log_fact(c) - log_fact(d);
        return std::exp(lp);
    }

    static double right_sided(long long a, long long b, long long c, long long d) {
        long long r1 = a + b, r2 = c + d, c1 = a + c;
        if (r1 == 0 || r2 == 0 || c1 == 0 || b + d == 0) return 1.0;
        long long k_min = std::max(0LL, c1 - r2), k_max = std::min(r1, c1);
        long double p = 0.0L;
        for (long long k = a; k <= k_max; ++k) p += table_probability(k, r1, r2, c1);
        (void)k_min;
        return static_cast<double>(std::min(p, 1.0L));
    }

    static double two_sided(long long a, long long b, long long c, long long d) {
        long long r1 = a + b, r2 = c + d, c1 = a + c;
        if (r1 == 0 || r2 == 0 || c1 == 0 || b + d == 0) return 1.0;
        long long k_min = std::max(0LL, c1 - r2), k_max = std::min(r1, c1);
        long double observed = table_probability(a, r1, r2, c1);
        long double p = 0.0L;
        for (long long k = k_min; k <= k_max; ++k) {
            long double t = table_probability(k, r1, r2, c1);
            if (t <= observed * (1.0L + 1e-9L)) p += t;
        }
        return static_cast<double>(std::min(p, 1.0L));
    }

    // sanity: the probabilities over one margin family must sum to 1
    static double total_mass(long long r1, long long r2, long long c1) {
        long long k_min = std::max(0LL, c1 - r2), k_max = std::min(r1, c1);
        long double p = 0.0L;
        for (long long k = k_min; k <= k_max; ++k) p += table_probability(k, r1, r2, c1);
        return static_cast<double>(p);
    }
};

}  // namespace oracle
