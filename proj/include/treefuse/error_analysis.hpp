#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "treefuse/code_matrix.hpp"
#include "treefuse/errors.hpp"
#include "treefuse/local_rules.hpp"
#include "treefuse/observation.hpp"

namespace treefuse {

// P(decide H_m at a level | H_l true); columns are conditional
// distributions and sum to one.
struct ConfusionMatrix {
    std::size_t hyps = 0;
    std::vector<double> p;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t m) : hyps(m), p(m * m, 0.0) {}

    static ConfusionMatrix identity(std::size_t m) {
        ConfusionMatrix c(m);
        for (std::size_t i = 0; i < m; ++i) c.at(i, i) = 1.0;
        return c;
    }

    double& at(std::size_t decide, std::size_t truth) { return p[decide * hyps + truth]; }
    double at(std::size_t decide, std::size_t truth) const { return p[decide * hyps + truth]; }

    double column_sum(std::size_t truth) const {
        double s = 0.0;
        for (std::size_t m = 0; m < hyps; ++m) s += at(m, truth);
        return s;
    }

    // Largest per-hypothesis misclassification probability, max_m (1 - P_mm).
    double q_max() const {
        double q = 0.0;
        for (std::size_t m = 0; m < hyps; ++m) q = std::max(q, 1.0 - at(m, m));
        return q;
    }
};

// Bit probabilities seen one level up when nodes with decision confusion
// `conf` relay through C: P(u_j = 1 | H_l) = sum_m c_mj P(m|l).
inline BitProbTable bit_probs_from_confusion(const CodeMatrix& C, const ConfusionMatrix& conf) {
    if (conf.hyps != C.rows())
        throw std::invalid_argument("bit_probs_from_confusion: size mismatch");
    BitProbTable B(C.cols(), C.rows());
    for (std::size_t j = 0; j < C.cols(); ++j)
        for (std::size_t l = 0; l < C.rows(); ++l) {
            double s = 0.0;
            for (std::size_t m = 0; m < C.rows(); ++m)
                if (C.bit(m, j)) s += conf.at(m, l);
            B.at(j, l) = s;
        }
    return B;
}

// Exact misclassification probability of fusing one level's word, given
// the per-node transmit probabilities (leaf-level expression).
inline double leaf_error_exact(const CodeMatrix& C, const BitProbTable& bit_probs,
                               const HypothesisSet& priors, std::size_t cap = kDefaultEnumCap) {
    return expected_fusion_cost(C, bit_probs, priors, cap);
}

template <typename Model>
double leaf_error_exact(const CodeMatrix& C, const Model& model, const HypothesisSet& priors,
                        const std::vector<ThresholdRule>& rules, const QuadratureConfig& quad = {},
                        std::size_t cap = kDefaultEnumCap) {
    return expected_fusion_cost(C, transmit_probabilities(rules, model, quad), priors, cap);
}

// Monte Carlo estimate of the same quantity; the fallback when the word
// width exceeds the exact enumeration cap.
template <typename Rng>
std::pair<double, double> leaf_error_mc(const CodeMatrix& C, const BitProbTable& bit_probs,
                                        const HypothesisSet& priors, std::size_t trials,
                                        Rng& rng) {
    const std::size_t N = C.cols(), M = C.rows();
    std::size_t errors = 0;
    Codeword word(N);
    for (std::size_t t = 0; t < trials; ++t) {
        double u = uniform01(rng);
        std::size_t truth = M - 1;
        for (std::size_t l = 0; l < M; ++l) {
            u -= priors.priors[l];
            if (u < 0.0) {
                truth = l;
                break;
            }
        }
        for (std::size_t j = 0; j < N; ++j)
            word[j] = uniform01(rng) < bit_probs.at(j, truth) ? 1 : 0;
        if (min_hamming_fuse(C, word, rng).decision != truth) ++errors;
    }
    const double pe = static_cast<double>(errors) / static_cast<double>(trials);
    return {pe, std::sqrt(pe * (1.0 - pe) / static_cast<double>(trials))};
}

// Misclassification one level above nodes whose decisions have confusion
// conf_prev and which relay through C (the intermediate-level recursion).
inline double intermediate_error(const CodeMatrix& C, const ConfusionMatrix& conf_prev,
                                 const HypothesisSet& priors, std::size_t cap = kDefaultEnumCap) {
    return expected_fusion_cost(C, bit_probs_from_confusion(C, conf_prev), priors, cap);
}

// Confusion matrix of the decisions made by fusing a word with the given
// bit probabilities against C:
//   P(decide m | H_l) = sum_i p(u = i | H_l) * (tie share of m at i).
inline ConfusionMatrix confusion_from_level(const CodeMatrix& C, const BitProbTable& bit_probs,
                                            std::size_t cap = kDefaultEnumCap) {
    const std::size_t N = C.cols(), M = C.rows();
    if (bit_probs.nodes != N || bit_probs.hyps != M)
        throw std::invalid_argument("confusion_from_level: bit_probs shape mismatch");
    detail::check_enum_width(N, cap, "confusion_from_level");

    const auto masks = detail::row_masks_of(C);
    ConfusionMatrix conf(M);
    for (std::uint64_t word = 0; word < (std::uint64_t{1} << N); ++word) {
        const auto tie = detail::tie_info(masks, word);
        const double share = 1.0 / static_cast<double>(tie.count);
        for (std::size_t l = 0; l < M; ++l) {
            double p = 1.0;
            for (std::size_t j = 0; j < N; ++j) {
                const double b = bit_probs.at(j, l);
                p *= ((word >> j) & 1u) ? b : 1.0 - b;
            }
            for (std::size_t m = 0; m < M; ++m)
                if (tie.contains(m)) conf.at(m, l) += p * share;
        }
    }
    return conf;
}

inline ConfusionMatrix confusion_from_level(const CodeMatrix& C, const ConfusionMatrix& conf_prev,
                                            std::size_t cap = kDefaultEnumCap) {
    return confusion_from_level(C, bit_probs_from_confusion(C, conf_prev), cap);
}

// End-to-end exact chain for the classification tree: leaf bit
// probabilities feed the level-(K-1) confusion, confusions propagate
// through the intermediate matrices, and the top matrix yields the fusion
// center's misclassification probability.
struct ChainResult {
    double pe = 0.0;
    // confusions[i] = confusion of the decisions made by fusing with
    // matrices[K-1-i] (i = 0 is the level just above the leaves).
    std::vector<ConfusionMatrix> confusions;
};

inline ChainResult chain_exact_error(const std::vector<CodeMatrix>& matrices,
                                     const BitProbTable& leaf_bit_probs,
                                     const HypothesisSet& priors,
                                     std::size_t cap = kDefaultEnumCap) {
    if (matrices.empty()) throw std::invalid_argument("chain_exact_error: no matrices");
    ChainResult res;
    const std::size_t K = matrices.size();
    if (K == 1) {
        res.pe = leaf_error_exact(matrices[0], leaf_bit_probs, priors, cap);
        return res;
    }
    ConfusionMatrix conf = confusion_from_level(matrices[K - 1], leaf_bit_probs, cap);
    res.confusions.push_back(conf);
    for (std::size_t k = K - 1; k >= 2; --k) {
        conf = confusion_from_level(matrices[k - 1], conf, cap);
        res.confusions.push_back(conf);
    }
    res.pe = intermediate_error(matrices[0], res.confusions.back(), priors, cap);
    return res;
}

// Worst per-bit transmission error of a leaf level: max over hypotheses
// and nodes of P(u_j != c_lj | H_l). This is the leaf-side q entering the
// asymptotic bounds.
inline double q_max_from_bit_probs(const CodeMatrix& C, const BitProbTable& bit_probs) {
    double q = 0.0;
    for (std::size_t l = 0; l < C.rows(); ++l)
        for (std::size_t j = 0; j < C.cols(); ++j) {
            const double b = bit_probs.at(j, l);
            q = std::max(q, C.bit(l, j) ? 1.0 - b : b);
        }
    return q;
}

// ---- Asymptotic bounds ----

struct BoundLevel {
    std::size_t d_min = 0;
    double q_max = 0.0;
    double a = std::numeric_limits<double>::quiet_NaN();
    bool a_condition_ok = false;   // a inside its admissible range
    bool d_condition_ok = false;   // d_min large enough for the chosen a
    double factor = std::numeric_limits<double>::quiet_NaN();
};

struct BoundReport {
    std::vector<BoundLevel> levels;
    bool feasible = false;
    double value = std::numeric_limits<double>::quiet_NaN();
};

enum class AkPolicy {
    midpoint,  // midpoint of the printed admissible window
    tightest,  // smallest a that keeps the d_min condition valid (tightest bound)
};

namespace detail {

// Admissible-window endpoints for the exponent parameter a at one level.
inline double a_lower_bound(double q, std::size_t /*M*/) {
    return 2.0 * (1.0 - q) / (q - 4.0 * q * q * (1.0 - q));
}

inline double a_upper_window(double q, std::size_t M) {
    return (q * (2.0 * static_cast<double>(M) - 2.0) + 2.0 * (1.0 - q)) /
           (q - 4.0 * q * q * (1.0 - q));
}

// Minimum d_min for validity given a:  d >= 2(M-2) / [(1-4q(1-q)) - (1/a)(2/q - 2)].
inline double d_min_required(double q, std::size_t M, double a) {
    const double c1 = 1.0 - 4.0 * q * (1.0 - q);
    const double c2 = 2.0 / q - 2.0;
    const double denom = c1 - c2 / a;
    if (denom <= 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 * (static_cast<double>(M) - 2.0) / denom;
}

}  // namespace detail

// Classification bound: P_e at the fusion center is at most
// (leaf q_max) ^ (prod_k d_min^k / a_k), valid when every level's q_max is
// below 1/2 and every level's d_min clears its validity threshold.
// `levels` runs from the matrix fused at the FC (k = 1) to the leaf level
// (k = K); the base of the power is the last entry's q_max.
inline BoundReport classification_bound(const std::vector<std::pair<std::size_t, double>>& levels,
                                        std::size_t M, AkPolicy policy = AkPolicy::midpoint,
                                        const std::optional<std::vector<double>>& user_a = {}) {
    if (levels.empty()) throw std::invalid_argument("classification_bound: no levels");
    if (user_a && user_a->size() != levels.size())
        throw std::invalid_argument("classification_bound: user a_k count mismatch");

    BoundReport rep;
    rep.levels.resize(levels.size());
    bool all_ok = true;
    bool any_perfect = false;
    double exponent = 1.0;
    for (std::size_t k = 0; k < levels.size(); ++k) {
        auto& lv = rep.levels[k];
        lv.d_min = levels[k].first;
        lv.q_max = levels[k].second;
        if (lv.q_max == 0.0) {
            // Perfect level: the conditions hold vacuously and the chained
            // bound collapses to zero.
            lv.a_condition_ok = lv.d_condition_ok = true;
            any_perfect = true;
            continue;
        }
        if (lv.q_max >= 0.5) {
            all_ok = false;
            continue;
        }
        const double lo = detail::a_lower_bound(lv.q_max, M);
        const double hi = detail::a_upper_window(lv.q_max, M);
        if (user_a) {
            lv.a = (*user_a)[k];
        } else if (policy == AkPolicy::midpoint) {
            lv.a = 0.5 * (lo + hi);
        } else {
            // Smallest admissible a still compatible with this level's
            // d_min; minimizing a maximizes d/a and tightens the bound.
            const double c1 = 1.0 - 4.0 * lv.q_max * (1.0 - lv.q_max);
            const double c2 = 2.0 / lv.q_max - 2.0;
            const double margin = c1 - 2.0 * (static_cast<double>(M) - 2.0) /
                                           static_cast<double>(lv.d_min);
            const double from_d = margin > 0.0 ? c2 / margin
                                               : std::numeric_limits<double>::infinity();
            lv.a = std::max(lo * (1.0 + 1e-9), from_d);
        }
        lv.a_condition_ok = std::isfinite(lv.a) && lv.a > lo;
        lv.d_condition_ok =
            lv.a_condition_ok &&
            static_cast<double>(lv.d_min) >= detail::d_min_required(lv.q_max, M, lv.a);
        lv.factor = static_cast<double>(lv.d_min) / lv.a;
        if (!lv.a_condition_ok || !lv.d_condition_ok) all_ok = false;
        exponent *= lv.factor;
    }
    rep.feasible = all_ok;
    if (!rep.feasible) return rep;
    if (any_perfect) {
        rep.value = 0.0;
        return rep;
    }
    rep.value = std::pow(levels.back().second, exponent);
    return rep;
}

struct EstimationBoundReport {
    std::vector<double> factors;  // per-level (M-1) (4q(1-q))^(d/2)
    bool feasible = false;
    double value = std::numeric_limits<double>::quiet_NaN();
};

// Estimation-side bound: P_e <= 1 - prod_k [1 - (M-1)(4 q_k (1-q_k))^(d_k/2)],
// valid when every q_k < 1/2. Per-level factors are reported so the
// fixed-height / fixed-degree limiting behavior can be tabulated.
inline EstimationBoundReport estimation_bound(
    const std::vector<std::pair<std::size_t, double>>& levels, std::size_t M) {
    if (levels.empty()) throw std::invalid_argument("estimation_bound: no levels");
    EstimationBoundReport rep;
    rep.feasible = true;
    double prod = 1.0;
    for (const auto& [d, q] : levels) {
        if (q >= 0.5 || q < 0.0) rep.feasible = false;
        const double base = 4.0 * q * (1.0 - q);
        const double f = (static_cast<double>(M) - 1.0) *
                         std::pow(base, 0.5 * static_cast<double>(d));
        rep.factors.push_back(f);
        prod *= std::max(0.0, 1.0 - f);
    }
    if (rep.feasible) rep.value = std::clamp(1.0 - prod, 0.0, 1.0);
    return rep;
}

// One level of the estimation recursion: a matrix (possibly a wide
// concatenation), its transmit probabilities, and the zoom-conditional
// priors at that level.
struct EstimationLevel {
    CodeMatrix matrix;
    BitProbTable bit_probs;
    HypothesisSet priors;
};

// Probability of zooming into a wrong region anywhere along the path:
// 1 - prod over levels of (1 - per-level fusion cost).
inline double estimation_error_recursive(const std::vector<EstimationLevel>& levels,
                                         std::size_t cap = kDefaultEnumCap) {
    if (levels.empty()) throw std::invalid_argument("estimation_error_recursive: no levels");
    double prod = 1.0;
    for (const auto& lv : levels)
        prod *= 1.0 - expected_fusion_cost(lv.matrix, lv.bit_probs, lv.priors, cap);
    return 1.0 - prod;
}

}  // namespace treefuse
