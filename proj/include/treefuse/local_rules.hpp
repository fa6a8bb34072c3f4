#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "treefuse/code_matrix.hpp"
#include "treefuse/errors.hpp"
#include "treefuse/observation.hpp"
#include "treefuse/quadrature.hpp"

namespace treefuse {

inline constexpr std::size_t kDefaultEnumCap = 24;

namespace detail {

// Rows at minimum Hamming distance from a received word (packed bit j of
// `word` = node j). M <= 32.
struct TieInfo {
    std::size_t min_dist = 0;
    std::size_t count = 0;
    std::uint32_t tied_mask = 0;

    bool contains(std::size_t l) const { return (tied_mask >> l) & 1u; }
};

inline TieInfo tie_info(const std::vector<std::uint64_t>& row_masks, std::uint64_t word) {
    TieInfo t;
    t.min_dist = ~std::size_t{0};
    for (std::size_t m = 0; m < row_masks.size(); ++m) {
        const auto d = static_cast<std::size_t>(std::popcount(row_masks[m] ^ word));
        if (d < t.min_dist) {
            t.min_dist = d;
            t.count = 1;
            t.tied_mask = 1u << m;
        } else if (d == t.min_dist) {
            ++t.count;
            t.tied_mask |= 1u << m;
        }
    }
    return t;
}

inline std::vector<std::uint64_t> row_masks_of(const CodeMatrix& C) {
    std::vector<std::uint64_t> masks(C.rows());
    for (std::size_t m = 0; m < C.rows(); ++m) masks[m] = C.row_mask(m);
    return masks;
}

inline void check_enum_width(std::size_t bits, std::size_t cap, const char* who) {
    if (bits > cap)
        throw capacity_error(std::string(who) + ": " + std::to_string(bits) +
                             " bits exceed the exact enumeration cap of " + std::to_string(cap));
}

}  // namespace detail

// Cost of globally deciding H_l when the received word is i: zero for a
// uniquely correct nearest row, 1 - 1/rho under an rho-way tie containing
// the truth (the random tie-break picks it with probability 1/rho), 1
// otherwise. Values lie in {0} union [1/2, 1].
inline double psi_cost(const CodeMatrix& C, std::uint64_t packed_word, std::size_t l) {
    const auto t = detail::tie_info(detail::row_masks_of(C), packed_word);
    if (!t.contains(l)) return 1.0;
    return 1.0 - 1.0 / static_cast<double>(t.count);
}

inline double psi_cost(const CodeMatrix& C, const Codeword& word, std::size_t l) {
    if (word.size() != C.cols()) throw std::invalid_argument("psi_cost: codeword length");
    std::uint64_t packed = 0;
    for (std::size_t j = 0; j < word.size(); ++j)
        packed |= static_cast<std::uint64_t>(word[j] & 1u) << j;
    return psi_cost(C, packed, l);
}

// Lazy view of the full cost tensor of a code matrix.
class CostTensor {
  public:
    explicit CostTensor(const CodeMatrix& C) : C_(&C), masks_(detail::row_masks_of(C)) {}

    double operator()(std::uint64_t packed_word, std::size_t l) const {
        const auto t = detail::tie_info(masks_, packed_word);
        return t.contains(l) ? 1.0 - 1.0 / static_cast<double>(t.count) : 1.0;
    }

    double operator()(const Codeword& word, std::size_t l) const {
        std::uint64_t packed = 0;
        for (std::size_t j = 0; j < word.size(); ++j)
            packed |= static_cast<std::uint64_t>(word[j] & 1u) << j;
        return (*this)(packed, l);
    }

    const CodeMatrix& matrix() const { return *C_; }

  private:
    const CodeMatrix* C_;
    std::vector<std::uint64_t> masks_;
};

// P(u_j = 1 | H_l) for node j, hypothesis l.
struct BitProbTable {
    std::size_t nodes = 0;
    std::size_t hyps = 0;
    std::vector<double> p;

    BitProbTable() = default;
    BitProbTable(std::size_t n, std::size_t m) : nodes(n), hyps(m), p(n * m, 0.0) {}

    double& at(std::size_t j, std::size_t l) { return p[j * hyps + l]; }
    double at(std::size_t j, std::size_t l) const { return p[j * hyps + l]; }
};

struct WeightMatrix {
    std::size_t nodes = 0;
    std::size_t hyps = 0;
    std::vector<double> a;

    WeightMatrix() = default;
    WeightMatrix(std::size_t n, std::size_t m) : nodes(n), hyps(m), a(n * m, 0.0) {}

    double& at(std::size_t j, std::size_t l) { return a[j * hyps + l]; }
    double at(std::size_t j, std::size_t l) const { return a[j * hyps + l]; }
};

// 1-bit transmission rule: emit 0 iff sum_l p(y|H_l) * weights[l] < 0.
// The sign expression is evaluated directly per observation, which stays
// correct for multimodal region-conditioned likelihoods.
struct ThresholdRule {
    std::vector<double> weights;
};

template <typename Model>
std::uint8_t emit_bit(const ThresholdRule& rule, const Model& model, double y) {
    double s = 0.0;
    for (std::size_t l = 0; l < rule.weights.size(); ++l)
        s += model.likelihood(l, y) * rule.weights[l];
    return s < 0.0 ? 0 : 1;  // equality falls through to the 1 branch
}

// The one-bit relay rule of intermediate nodes: transmit the code-matrix
// entry addressed by the node's own M-ary decision and its column.
inline std::uint8_t intermediate_map(const CodeMatrix& C, std::size_t decision, std::size_t j) {
    if (decision >= C.rows()) throw std::out_of_range("intermediate_map: decision index");
    if (j >= C.cols()) throw std::out_of_range("intermediate_map: column index");
    return C.bit(decision, j);
}

// Exact Bayes cost of min-Hamming fusion given per-node bit probabilities:
//   sum_{i,l} P_l * prod_j P(u_j = i_j | H_l) * psi_{i,l}
// enumerated over all 2^N received words.
inline double expected_fusion_cost(const CodeMatrix& C, const BitProbTable& bit_probs,
                                   const HypothesisSet& priors,
                                   std::size_t cap = kDefaultEnumCap) {
    const std::size_t N = C.cols(), M = C.rows();
    if (bit_probs.nodes != N || bit_probs.hyps != M)
        throw std::invalid_argument("expected_fusion_cost: bit_probs shape mismatch");
    if (priors.size() != M) throw std::invalid_argument("expected_fusion_cost: priors size");
    detail::check_enum_width(N, cap, "expected_fusion_cost");

    const auto masks = detail::row_masks_of(C);
    double total = 0.0;
    for (std::uint64_t word = 0; word < (std::uint64_t{1} << N); ++word) {
        const auto tie = detail::tie_info(masks, word);
        for (std::size_t l = 0; l < M; ++l) {
            double p = priors.priors[l];
            if (p == 0.0) continue;
            for (std::size_t j = 0; j < N; ++j) {
                const double b = bit_probs.at(j, l);
                p *= ((word >> j) & 1u) ? b : 1.0 - b;
            }
            const double cost =
                tie.contains(l) ? 1.0 - 1.0 / static_cast<double>(tie.count) : 1.0;
            total += p * cost;
        }
    }
    return total;
}

// Row j of the PBPO weight matrix (Eq. style: marginalize the other N-1
// bits under their current rules, weighting by the cost difference of
// sending 0 versus 1).
inline void weight_row(const CodeMatrix& C, std::size_t j, const HypothesisSet& priors,
                       const BitProbTable& bit_probs, WeightMatrix& out,
                       std::size_t cap = kDefaultEnumCap) {
    const std::size_t N = C.cols(), M = C.rows();
    detail::check_enum_width(N - 1, cap, "weight_row");
    const auto masks = detail::row_masks_of(C);
    const std::uint64_t low_mask = (std::uint64_t{1} << j) - 1;

    for (std::size_t l = 0; l < M; ++l) out.at(j, l) = 0.0;
    for (std::uint64_t partial = 0; partial < (std::uint64_t{1} << (N - 1)); ++partial) {
        // Splice bit j into the partial word.
        const std::uint64_t base = (partial & low_mask) | ((partial & ~low_mask) << 1);
        const auto tie0 = detail::tie_info(masks, base);
        const auto tie1 = detail::tie_info(masks, base | (std::uint64_t{1} << j));
        for (std::size_t l = 0; l < M; ++l) {
            double p = priors.priors[l];
            if (p == 0.0) continue;
            for (std::size_t q = 0; q < N; ++q) {
                if (q == j) continue;
                const double b = bit_probs.at(q, l);
                p *= ((base >> q) & 1u) ? b : 1.0 - b;
            }
            const double psi0 =
                tie0.contains(l) ? 1.0 - 1.0 / static_cast<double>(tie0.count) : 1.0;
            const double psi1 =
                tie1.contains(l) ? 1.0 - 1.0 / static_cast<double>(tie1.count) : 1.0;
            out.at(j, l) += p * (psi0 - psi1);
        }
    }
}

inline WeightMatrix weight_matrix(const CodeMatrix& C, const HypothesisSet& priors,
                                  const BitProbTable& bit_probs,
                                  std::size_t cap = kDefaultEnumCap) {
    if (priors.size() != C.rows()) throw std::invalid_argument("weight_matrix: priors size");
    if (bit_probs.nodes != C.cols() || bit_probs.hyps != C.rows())
        throw std::invalid_argument("weight_matrix: bit_probs shape mismatch");
    WeightMatrix W(C.cols(), C.rows());
    for (std::size_t j = 0; j < C.cols(); ++j) weight_row(C, j, priors, bit_probs, W, cap);
    return W;
}

// The node's rule when treated as the only node: weights derived from its
// own column alone. Deterministic PBPO starting point, exact at N = 1.
inline ThresholdRule single_node_rule(const CodeMatrix& C, std::size_t j,
                                      const HypothesisSet& priors) {
    const std::size_t M = C.rows();
    std::size_t zeros = 0;
    for (std::size_t l = 0; l < M; ++l) zeros += C.bit(l, j) == 0 ? 1u : 0u;
    const std::size_t ones = M - zeros;

    // psi of the 1-column subproblem for received bit b: rows matching b
    // tie at distance 0 (all rows tie when none match).
    const auto psi = [M](std::size_t matches, bool row_matches) {
        if (matches == 0) return 1.0 - 1.0 / static_cast<double>(M);
        return row_matches ? 1.0 - 1.0 / static_cast<double>(matches) : 1.0;
    };
    ThresholdRule rule;
    rule.weights.resize(M);
    for (std::size_t l = 0; l < M; ++l) {
        const bool is_one = C.bit(l, j) == 1;
        const double psi0 = psi(zeros, !is_one);
        const double psi1 = psi(ones, is_one);
        rule.weights[l] = priors.priors[l] * (psi0 - psi1);
    }
    return rule;
}

// Panel anchors for integrating a decision indicator against the
// conditional density: a sigma/2 grid around every characteristic point of
// the model, so narrow sign bands of the threshold expression cannot fall
// between the nodes of a single wide panel.
template <typename Model>
std::vector<double> decision_anchors(const Model& model, std::size_t l) {
    const auto [lo, hi] = model.support(l);
    std::vector<double> pts{lo, hi};
    const double sigma = model.sigma();
    for (double x : model.characteristic_points()) {
        if (sigma > 0.0) {
            for (int k = -16; k <= 16; ++k) {
                const double v = x + 0.5 * sigma * static_cast<double>(k);
                if (v > lo && v < hi) pts.push_back(v);
            }
        } else if (x > lo && x < hi) {
            pts.push_back(x);
        }
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

// P(u_j = 1 | H_l) for a rule: quadrature of the decision indicator
// against the conditional density (or direct evaluation at the atom for a
// point-mass model).
template <typename Model>
double transmit_probability(const ThresholdRule& rule, const Model& model, std::size_t l,
                            const QuadratureConfig& quad = {}) {
    if constexpr (std::is_same_v<Model, GaussianShiftModel>) {
        if (model.is_point_mass())
            return emit_bit(rule, model, model.mean(l)) ? 1.0 : 0.0;
    }
    return integrate_with_anchors(
        [&](double y) {
            return emit_bit(rule, model, y) ? model.likelihood(l, y) : 0.0;
        },
        decision_anchors(model, l), quad);
}

template <typename Model>
BitProbTable transmit_probabilities(const std::vector<ThresholdRule>& rules, const Model& model,
                                    const QuadratureConfig& quad = {}) {
    BitProbTable B(rules.size(), model.num_hypotheses());
    for (std::size_t j = 0; j < rules.size(); ++j)
        for (std::size_t l = 0; l < model.num_hypotheses(); ++l)
            B.at(j, l) = transmit_probability(rules[j], model, l, quad);
    return B;
}

struct PbpoOptions {
    std::size_t max_sweeps = 100;
    double tol = 1e-8;
    QuadratureConfig quad{};
    std::size_t enum_cap = kDefaultEnumCap;
    std::optional<std::vector<ThresholdRule>> init_rules;
    bool record_cost_trace = true;
};

struct PbpoResult {
    std::vector<ThresholdRule> rules;
    BitProbTable bit_probs;
    bool converged = false;
    std::size_t sweeps = 0;
    std::vector<double> cost_trace;  // exact Bayes cost after init and each sweep
};

// Person-by-person optimization of the 1-bit transmission rules: cycle
// through nodes j = 0..N-1, refreshing node j's weight row from the other
// nodes' current transmit probabilities, until no bit probability moves by
// more than tol in a full sweep.
template <typename Model>
PbpoResult pbpo_fixed_point(const CodeMatrix& C, const Model& model, const HypothesisSet& priors,
                            const PbpoOptions& opt = {}) {
    const std::size_t N = C.cols(), M = C.rows();
    if (model.num_hypotheses() != M)
        throw std::invalid_argument("pbpo_fixed_point: model/matrix hypothesis count");
    if (priors.size() != M) throw std::invalid_argument("pbpo_fixed_point: priors size");

    PbpoResult res;
    if (opt.init_rules) {
        if (opt.init_rules->size() != N)
            throw std::invalid_argument("pbpo_fixed_point: init rule count");
        res.rules = *opt.init_rules;
    } else {
        res.rules.reserve(N);
        for (std::size_t j = 0; j < N; ++j) res.rules.push_back(single_node_rule(C, j, priors));
    }
    res.bit_probs = transmit_probabilities(res.rules, model, opt.quad);
    if (opt.record_cost_trace)
        res.cost_trace.push_back(expected_fusion_cost(C, res.bit_probs, priors, opt.enum_cap));

    WeightMatrix W(N, M);
    for (std::size_t sweep = 0; sweep < opt.max_sweeps; ++sweep) {
        const BitProbTable prev = res.bit_probs;
        for (std::size_t j = 0; j < N; ++j) {
            weight_row(C, j, priors, res.bit_probs, W, opt.enum_cap);
            res.rules[j].weights.assign(W.a.begin() + static_cast<std::ptrdiff_t>(j * M),
                                        W.a.begin() + static_cast<std::ptrdiff_t>((j + 1) * M));
            for (std::size_t l = 0; l < M; ++l)
                res.bit_probs.at(j, l) = transmit_probability(res.rules[j], model, l, opt.quad);
        }
        res.sweeps = sweep + 1;
        if (opt.record_cost_trace)
            res.cost_trace.push_back(expected_fusion_cost(C, res.bit_probs, priors, opt.enum_cap));
        double delta = 0.0;
        for (std::size_t i = 0; i < prev.p.size(); ++i)
            delta = std::max(delta, std::abs(prev.p[i] - res.bit_probs.p[i]));
        if (delta < opt.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace treefuse
