// Evidence-count truth values. Every probabilistic estimate in the kernel
// is backed by a (positive weight, total weight) pair; probabilities are
// Laplace-smoothed so fresh evidence never yields 0 or 1.
#pragma once

#include <algorithm>

namespace ck {

struct TruthValue {
    double w_pos = 0.0;  // positive-evidence weight
    double w = 0.0;      // total-evidence weight, w >= w_pos

    static TruthValue counts(double positive, double total) { return {positive, total}; }

    // Raw frequency; undefined at w == 0, reported as 0.
    double f() const { return w > 0.0 ? w_pos / w : 0.0; }
    // Smoothed probability in (0,1).
    double p_hat() const { return (w_pos + 1.0) / (w + 2.0); }
    // Confidence in [0,1), approaching 1 with accumulated evidence.
    double confidence() const { return w / (w + 1.0); }

    bool valid() const { return w_pos >= 0.0 && w >= w_pos; }
    bool operator==(const TruthValue&) const = default;
};

// Pools two bodies of evidence; commutative, associative, identity (0,0).
inline TruthValue revise(const TruthValue& a, const TruthValue& b) {
    return {a.w_pos + b.w_pos, a.w + b.w};
}

// Inverts the smoothed form: the truth value with total weight `w` whose
// p_hat equals `p` (clamped into the representable range).
inline TruthValue from_p_hat(double p, double w) {
    double w_pos = p * (w + 2.0) - 1.0;
    return {std::clamp(w_pos, 0.0, w), w};
}

}  // namespace ck
