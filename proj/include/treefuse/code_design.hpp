#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "treefuse/code_matrix.hpp"
#include "treefuse/error_analysis.hpp"
#include "treefuse/local_rules.hpp"
#include "treefuse/observation.hpp"
#include "treefuse/rng.hpp"

namespace treefuse {

struct AnnealSchedule {
    double initial_temp = 0.1;
    double cooling = 0.95;
    std::size_t steps_per_temp = 200;
    double min_temp = 1e-4;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(initial_temp > min_temp && min_temp > 0.0))
            throw std::invalid_argument("AnnealSchedule: need T0 > T_min > 0");
        if (!(cooling > 0.0 && cooling < 1.0))
            throw std::invalid_argument("AnnealSchedule: cooling factor outside (0, 1)");
        if (steps_per_temp < 1) throw std::invalid_argument("AnnealSchedule: steps_per_temp < 1");
    }
};

struct DesignResult {
    CodeMatrix matrix;
    double objective = 0.0;
    std::vector<double> trace;  // best-so-far objective, one entry per step
    bool converged = false;
    std::size_t d_min = 0;
};

using DesignObjective = std::function<double(const CodeMatrix&)>;

namespace detail {

template <typename Rng>
CodeMatrix random_matrix(std::size_t M, std::size_t N, Rng& rng) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<std::uint8_t> bits(M * N);
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
        CodeMatrix C(M, N, std::move(bits));
        if (C.distinct_rows()) return C;
    }
    throw std::runtime_error("random_matrix: could not draw distinct rows");
}

}  // namespace detail

// Metropolis search over single-bit flips. Candidates with duplicate rows
// are rejected outright; the best matrix ever visited is returned.
template <typename Rng>
DesignResult anneal(const DesignObjective& objective, std::size_t M, std::size_t N,
                    const AnnealSchedule& schedule, Rng& rng) {
    schedule.validate();
    CodeMatrix current = detail::random_matrix(M, N, rng);
    double cur_obj = objective(current);
    CodeMatrix best = current;
    double best_obj = cur_obj;
    std::vector<double> trace{best_obj};

    for (double temp = schedule.initial_temp; temp > schedule.min_temp;
         temp *= schedule.cooling) {
        for (std::size_t step = 0; step < schedule.steps_per_temp; ++step) {
            const std::size_t r = uniform_index(rng, M);
            const std::size_t c = uniform_index(rng, N);
            current.set_bit(r, c, current.bit(r, c) ^ 1u);
            if (!current.distinct_rows()) {
                current.set_bit(r, c, current.bit(r, c) ^ 1u);
                trace.push_back(best_obj);
                continue;
            }
            const double cand_obj = objective(current);
            const double delta = cand_obj - cur_obj;
            if (delta <= 0.0 || uniform01(rng) < std::exp(-delta / temp)) {
                cur_obj = cand_obj;
                if (cand_obj < best_obj) {
                    best_obj = cand_obj;
                    best = current;
                }
            } else {
                current.set_bit(r, c, current.bit(r, c) ^ 1u);  // revert
            }
            trace.push_back(best_obj);
        }
    }
    return DesignResult{best, best_obj, std::move(trace), true, min_distance(best)};
}

inline DesignResult anneal(const DesignObjective& objective, std::size_t M, std::size_t N,
                           const AnnealSchedule& schedule) {
    SplitMix64 rng(schedule.seed);
    return anneal(objective, M, N, schedule, rng);
}

// Greedy coordinate descent over columns: cycle j = 1..N, trying all 2^M
// values for column j and keeping the best. Stops after a full pass with
// no improvement (converged) or after max_passes.
inline DesignResult cyclic_column_replacement(const DesignObjective& objective,
                                              const CodeMatrix& start,
                                              std::size_t max_passes = 16) {
    const std::size_t M = start.rows(), N = start.cols();
    if (M > 20) throw std::invalid_argument("cyclic_column_replacement: 2^M too large");
    CodeMatrix current = start;
    if (!current.distinct_rows())
        throw std::invalid_argument("cyclic_column_replacement: start has duplicate rows");
    double cur_obj = objective(current);
    std::vector<double> trace{cur_obj};
    bool converged = false;

    const auto set_column = [&](CodeMatrix& C, std::size_t j, std::uint64_t value) {
        for (std::size_t m = 0; m < M; ++m)
            C.set_bit(m, j, static_cast<std::uint8_t>((value >> (M - 1 - m)) & 1u));
    };

    for (std::size_t pass = 0; pass < max_passes && !converged; ++pass) {
        bool improved = false;
        for (std::size_t j = 0; j < N; ++j) {
            std::uint64_t best_value = to_integer_columns(current)[j];
            double best_obj = cur_obj;
            for (std::uint64_t v = 0; v < (std::uint64_t{1} << M); ++v) {
                if (v == best_value) continue;
                CodeMatrix cand = current;
                set_column(cand, j, v);
                if (!cand.distinct_rows()) continue;
                const double o = objective(cand);
                if (o < best_obj) {
                    best_obj = o;
                    best_value = v;
                }
            }
            if (best_obj < cur_obj) {
                set_column(current, j, best_value);
                cur_obj = best_obj;
                improved = true;
            }
            trace.push_back(cur_obj);
        }
        if (!improved) converged = true;
    }
    return DesignResult{current, cur_obj, std::move(trace), converged, min_distance(current)};
}

struct TreeDesignOptions {
    AnnealSchedule schedule{};
    std::size_t ccr_passes = 4;  // polish after annealing; 0 disables
    PbpoOptions pbpo{};          // rule refresh inside the leaf objective
    std::size_t enum_cap = kDefaultEnumCap;
};

struct TreeDesign {
    std::vector<DesignResult> levels;          // [0] fused at the FC ... [K-1] leaf level
    std::vector<ConfusionMatrix> confusions;   // confusion after each designed level,
                                               // leaf side first
    PbpoResult leaf_pbpo;                      // rules for the final leaf matrix
};

// Sequential per-level design: the leaf matrix minimizes the exact fusion
// cost with PBPO rules refreshed per candidate; each level above minimizes
// the intermediate-error recursion driven by the confusion matrix of the
// level just designed.
template <typename Model>
TreeDesign design_tree_codes(std::size_t height, std::size_t degree, const Model& model,
                             const HypothesisSet& priors, const TreeDesignOptions& opt = {}) {
    if (height < 1) throw std::invalid_argument("design_tree_codes: height must be >= 1");
    const std::size_t M = priors.size(), N = degree;

    TreeDesign design;

    // Leaf level: candidate objective = exact cost under freshly optimized
    // transmission rules.
    PbpoOptions candidate_pbpo = opt.pbpo;
    const DesignObjective leaf_objective = [&](const CodeMatrix& C) {
        const auto res = pbpo_fixed_point(C, model, priors, candidate_pbpo);
        return expected_fusion_cost(C, res.bit_probs, priors, opt.enum_cap);
    };

    AnnealSchedule sched = opt.schedule;
    sched.seed = derive_seed(opt.schedule.seed, height);
    DesignResult leaf = anneal(leaf_objective, M, N, sched);
    if (opt.ccr_passes > 0) {
        DesignResult polished = cyclic_column_replacement(leaf_objective, leaf.matrix,
                                                          opt.ccr_passes);
        polished.trace.insert(polished.trace.begin(), leaf.trace.begin(), leaf.trace.end());
        leaf = std::move(polished);
    }
    design.leaf_pbpo = pbpo_fixed_point(leaf.matrix, model, priors, opt.pbpo);
    ConfusionMatrix conf =
        confusion_from_level(leaf.matrix, design.leaf_pbpo.bit_probs, opt.enum_cap);
    design.confusions.push_back(conf);
    design.levels.push_back(std::move(leaf));

    for (std::size_t k = height - 1; k >= 1; --k) {
        const DesignObjective objective = [&](const CodeMatrix& C) {
            return intermediate_error(C, conf, priors, opt.enum_cap);
        };
        sched.seed = derive_seed(opt.schedule.seed, k);
        DesignResult level = anneal(objective, M, N, sched);
        if (opt.ccr_passes > 0) {
            DesignResult polished =
                cyclic_column_replacement(objective, level.matrix, opt.ccr_passes);
            polished.trace.insert(polished.trace.begin(), level.trace.begin(),
                                  level.trace.end());
            level = std::move(polished);
        }
        if (k > 1) {
            conf = confusion_from_level(level.matrix, conf, opt.enum_cap);
            design.confusions.push_back(conf);
        }
        design.levels.push_back(std::move(level));
    }
    std::reverse(design.levels.begin(), design.levels.end());
    return design;
}

}  // namespace treefuse
