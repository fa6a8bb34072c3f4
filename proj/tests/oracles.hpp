// Independent reference evaluators used to pin expected values. These
// transcribe the defining expressions literally (odometer loops over bit
// vectors, explicit products) and share no code with the library paths
// they check.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "treefuse/code_matrix.hpp"
#include "treefuse/error_analysis.hpp"
#include "treefuse/local_rules.hpp"

namespace oracle {

using treefuse::BitProbTable;
using treefuse::CodeMatrix;
using treefuse::HypothesisSet;

inline bool next_word(std::vector<int>& bits) {
    for (auto& b : bits) {
        if (b == 0) {
            b = 1;
            return true;
        }
        b = 0;
    }
    return false;
}

// Cost of deciding l for received word i: distances computed entry by
// entry, tie set collected explicitly.
inline double psi(const CodeMatrix& C, const std::vector<int>& word, std::size_t l) {
    std::vector<std::size_t> dist(C.rows(), 0);
    for (std::size_t m = 0; m < C.rows(); ++m)
        for (std::size_t j = 0; j < C.cols(); ++j)
            if (static_cast<int>(C.bit(m, j)) != word[j]) ++dist[m];
    std::size_t best = dist[0];
    for (auto d : dist) best = std::min(best, d);
    std::size_t ties = 0;
    bool l_tied = false;
    for (std::size_t m = 0; m < C.rows(); ++m)
        if (dist[m] == best) {
            ++ties;
            if (m == l) l_tied = true;
        }
    return l_tied ? 1.0 - 1.0 / static_cast<double>(ties) : 1.0;
}

inline double word_probability(const BitProbTable& B, const std::vector<int>& word,
                               std::size_t l) {
    double p = 1.0;
    for (std::size_t j = 0; j < word.size(); ++j) {
        const double b1 = B.at(j, l);
        p *= word[j] ? b1 : 1.0 - b1;
    }
    return p;
}

// Leaf-level misclassification: sum over words and hypotheses of
// prior x word probability x cost.
inline double leaf_error(const CodeMatrix& C, const BitProbTable& B, const HypothesisSet& pr) {
    std::vector<int> word(C.cols(), 0);
    double total = 0.0;
    do {
        for (std::size_t l = 0; l < C.rows(); ++l)
            total += pr.priors[l] * word_probability(B, word, l) * psi(C, word, l);
    } while (next_word(word));
    return total;
}

// Intermediate-level recursion transcribed literally:
//   sum_{i,l} P_l prod_j [(2 i_j - 1) sum_m c_mj P_ml + (1 - i_j)] psi_{i,l}.
inline double intermediate_error(const CodeMatrix& C, const treefuse::ConfusionMatrix& conf,
                                 const HypothesisSet& pr) {
    std::vector<int> word(C.cols(), 0);
    double total = 0.0;
    do {
        for (std::size_t l = 0; l < C.rows(); ++l) {
            double prod = 1.0;
            for (std::size_t j = 0; j < C.cols(); ++j) {
                double s = 0.0;
                for (std::size_t m = 0; m < C.rows(); ++m)
                    s += static_cast<double>(C.bit(m, j)) * conf.at(m, l);
                prod *= (2.0 * word[j] - 1.0) * s + (1.0 - word[j]);
            }
            total += pr.priors[l] * prod * psi(C, word, l);
        }
    } while (next_word(word));
    return total;
}

// Confusion of the decisions made by fusing against C:
//   P(decide m | H_l) = 1 - sum_i p(i|l) psi_{i,m}.
inline treefuse::ConfusionMatrix confusion(const CodeMatrix& C, const BitProbTable& B) {
    treefuse::ConfusionMatrix conf(C.rows());
    for (std::size_t m = 0; m < C.rows(); ++m)
        for (std::size_t l = 0; l < C.rows(); ++l) {
            std::vector<int> word(C.cols(), 0);
            double s = 0.0;
            do {
                s += word_probability(B, word, l) * psi(C, word, m);
            } while (next_word(word));
            conf.at(m, l) = 1.0 - s;
        }
    return conf;
}

// Weight matrix entries from first principles: enumerate the other nodes'
// bits, multiply their probabilities, weight by the cost difference.
inline double weight_entry(const CodeMatrix& C, const BitProbTable& B, const HypothesisSet& pr,
                           std::size_t j, std::size_t l) {
    const std::size_t N = C.cols();
    std::vector<int> others(N > 1 ? N - 1 : 0, 0);
    double total = 0.0;
    do {
        std::vector<int> w0(N, 0), w1(N, 0);
        std::size_t q = 0;
        for (std::size_t pos = 0; pos < N; ++pos) {
            if (pos == j) continue;
            w0[pos] = w1[pos] = others[q++];
        }
        w0[j] = 0;
        w1[j] = 1;
        double p = 1.0;
        for (std::size_t pos = 0; pos < N; ++pos) {
            if (pos == j) continue;
            const double b1 = B.at(pos, l);
            p *= w0[pos] ? b1 : 1.0 - b1;
        }
        total += p * (psi(C, w0, l) - psi(C, w1, l));
    } while (!others.empty() && next_word(others));
    return pr.priors[l] * total;
}

// Direct substitution of the classification bound and its two validity
// conditions, given explicit a_k.
struct ClassificationBoundCheck {
    bool feasible = false;
    double value = 0.0;
};

inline ClassificationBoundCheck classification_bound_direct(
    const std::vector<std::size_t>& d_min, const std::vector<double>& q_max,
    const std::vector<double>& a, std::size_t M) {
    ClassificationBoundCheck out;
    out.feasible = true;
    double exponent = 1.0;
    for (std::size_t k = 0; k < d_min.size(); ++k) {
        const double q = q_max[k];
        if (!(q > 0.0 && q < 0.5)) {
            out.feasible = false;
            return out;
        }
        const double denom_a = q - 4.0 * q * q * (1.0 - q);
        if (!(a[k] > 2.0 * (1.0 - q) / denom_a)) out.feasible = false;
        const double lhs = (1.0 - 4.0 * q * (1.0 - q)) - (1.0 / a[k]) * (2.0 / q - 2.0);
        if (!(lhs > 0.0) ||
            static_cast<double>(d_min[k]) < 2.0 * (static_cast<double>(M) - 2.0) / lhs)
            out.feasible = false;
        exponent *= static_cast<double>(d_min[k]) / a[k];
    }
    if (out.feasible) out.value = std::pow(q_max.back(), exponent);
    return out;
}

inline double estimation_bound_direct(const std::vector<std::size_t>& d_min,
                                      const std::vector<double>& q_max, std::size_t M) {
    double prod = 1.0;
    for (std::size_t k = 0; k < d_min.size(); ++k) {
        const double q = q_max[k];
        prod *= 1.0 - (static_cast<double>(M) - 1.0) *
                          std::pow(4.0 * q * (1.0 - q),
                                   0.5 * static_cast<double>(d_min[k]));
    }
    const double v = 1.0 - prod;
    return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

// Monte Carlo estimate of the leaf-level error with an unrelated RNG;
// ties broken uniformly like the fusion rule prescribes.
inline double leaf_error_mc(const CodeMatrix& C, const BitProbTable& B, const HypothesisSet& pr,
                            std::size_t trials, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t errors = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        double u = unif(gen);
        std::size_t truth = C.rows() - 1;
        for (std::size_t l = 0; l < C.rows(); ++l) {
            u -= pr.priors[l];
            if (u < 0.0) {
                truth = l;
                break;
            }
        }
        std::vector<int> word(C.cols());
        for (std::size_t j = 0; j < C.cols(); ++j)
            word[j] = unif(gen) < B.at(j, truth) ? 1 : 0;
        // nearest rows
        std::vector<std::size_t> dist(C.rows(), 0);
        for (std::size_t m = 0; m < C.rows(); ++m)
            for (std::size_t j = 0; j < C.cols(); ++j)
                if (static_cast<int>(C.bit(m, j)) != word[j]) ++dist[m];
        std::size_t best = dist[0];
        for (auto d : dist) best = std::min(best, d);
        std::vector<std::size_t> tied;
        for (std::size_t m = 0; m < C.rows(); ++m)
            if (dist[m] == best) tied.push_back(m);
        const std::size_t pick =
            tied[std::uniform_int_distribution<std::size_t>(0, tied.size() - 1)(gen)];
        if (pick != truth) ++errors;
    }
    return static_cast<double>(errors) / static_cast<double>(trials);
}

}  // namespace oracle
