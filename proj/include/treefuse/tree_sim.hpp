#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "treefuse/code_matrix.hpp"
#include "treefuse/error_analysis.hpp"
#include "treefuse/local_rules.hpp"
#include "treefuse/observation.hpp"
#include "treefuse/quantizer.hpp"
#include "treefuse/rng.hpp"
#include "treefuse/stats.hpp"

namespace treefuse {

inline std::size_t pow_sz(std::size_t base, std::size_t exp) {
    std::size_t r = 1;
    while (exp--) r *= base;
    return r;
}

// Perfect tree T(K, N): K levels below the fusion center, every internal
// node with exactly N children, M hypotheses per fusion stage.
struct TreeConfig {
    std::size_t height = 1;   // K
    std::size_t degree = 1;   // N
    std::size_t hyps = 2;     // M
    std::vector<CodeMatrix> matrices;  // [0] fused at the FC ... [K-1] leaf level
    double beta = 0.0;        // BSC crossover on parent-child links
    std::size_t trials = 5000;
    std::uint64_t seed = 0;

    std::size_t node_total() const {
        std::size_t total = 1;  // the FC
        for (std::size_t k = 1; k <= height; ++k) total += pow_sz(degree, k);
        return total;
    }

    void validate_classification() const {
        if (height < 1) throw std::invalid_argument("TreeConfig: height must be >= 1");
        if (degree < 1) throw std::invalid_argument("TreeConfig: degree must be >= 1");
        if (beta < 0.0 || beta > 0.5)
            throw std::invalid_argument("TreeConfig: beta must lie in [0, 1/2]");
        if (trials < 1) throw std::invalid_argument("TreeConfig: need at least one trial");
        if (matrices.size() != height)
            throw std::invalid_argument("TreeConfig: need one code matrix per level");
        for (const auto& C : matrices) {
            if (C.rows() != hyps || C.cols() != degree)
                throw std::invalid_argument("TreeConfig: matrix shape mismatch");
            if (!C.distinct_rows())
                throw std::invalid_argument("TreeConfig: code matrix has duplicate rows");
        }
    }
};

namespace detail {

enum class Stream : std::uint64_t {
    truth = 1,
    observation = 2,
    tie = 3,
    channel = 4,
    theta = 5,
    collaboration = 6,
};

// Unique node id: FC = 0, then levels packed breadth-first.
inline std::uint64_t node_id(std::size_t degree, std::size_t level, std::size_t index) {
    std::uint64_t base = 0;
    if (level > 0) {
        base = 1;
        for (std::size_t k = 1; k < level; ++k) base += pow_sz(degree, k);
    }
    return base + index;
}

inline SplitMix64 stream(std::uint64_t seed, std::uint64_t trial, std::uint64_t node,
                         Stream purpose) {
    return SplitMix64(derive_seed(seed, trial, node, static_cast<std::uint64_t>(purpose)));
}

template <typename Rng>
std::size_t sample_prior(const HypothesisSet& priors, Rng& rng) {
    double u = uniform01(rng);
    for (std::size_t l = 0; l < priors.size(); ++l) {
        u -= priors.priors[l];
        if (u < 0.0) return l;
    }
    return priors.size() - 1;
}

// Run [0, trials) over `threads` workers; each trial writes only its own
// slots, so the aggregation below is independent of the thread count.
template <typename Fn>
void for_each_trial(std::size_t trials, unsigned threads, Fn&& fn) {
    threads = std::max(1u, threads);
    if (threads == 1 || trials < 2 * threads) {
        for (std::size_t t = 0; t < trials; ++t) fn(t);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (trials + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(trials, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &fn] {
            for (std::size_t t = lo; t < hi; ++t) fn(t);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace detail

// Flip each bit independently with probability beta.
template <typename Rng>
Codeword apply_bsc(const Codeword& word, double beta, Rng& rng) {
    if (beta < 0.0 || beta > 0.5) throw std::invalid_argument("apply_bsc: beta outside [0, 1/2]");
    Codeword out = word;
    for (auto& b : out)
        if (uniform01(rng) < beta) b ^= 1;
    return out;
}

struct TrialRecord {
    std::size_t truth = 0;     // classification: hypothesis index
    double theta = 0.0;        // estimation: parameter value
    std::size_t decision = 0;  // FC hypothesis / final region cell
    double theta_hat = 0.0;
    std::vector<std::size_t> trace;  // one fused decision per stage, leaf side first
    bool correct = false;
};

struct SimOptions {
    unsigned threads = 1;
    bool record_trials = false;
};

struct ClassificationRun {
    double pe = 0.0;
    Interval ci;
    std::size_t trials = 0;
    std::vector<TrialRecord> records;
};

// Full classification protocol: leaves sense and transmit 1-bit rules,
// every intermediate node fuses its N children with the level's matrix and
// relays its decision's code bit, the FC fuses the last word. BSC noise is
// injected on every parent-child link when beta > 0. Randomness comes from
// per-(trial, node, purpose) streams, so results do not depend on
// evaluation order or thread count.
template <typename Model>
ClassificationRun run_classification(const TreeConfig& cfg, const Model& model,
                                     const std::vector<ThresholdRule>& rules,
                                     const HypothesisSet& priors, const SimOptions& opt = {}) {
    cfg.validate_classification();
    if (rules.size() != cfg.degree)
        throw std::invalid_argument("run_classification: need one leaf rule per child column");
    if (priors.size() != cfg.hyps)
        throw std::invalid_argument("run_classification: priors size mismatch");

    const std::size_t K = cfg.height, N = cfg.degree;
    std::vector<std::uint8_t> errors(cfg.trials, 0);
    std::vector<TrialRecord> records(opt.record_trials ? cfg.trials : 0);

    detail::for_each_trial(cfg.trials, opt.threads, [&](std::size_t t) {
        auto truth_rng = detail::stream(cfg.seed, t, 0, detail::Stream::truth);
        const std::size_t truth = detail::sample_prior(priors, truth_rng);

        std::vector<std::size_t> trace;
        // Leaf transmissions.
        std::vector<std::uint8_t> bits(pow_sz(N, K));
        for (std::size_t i = 0; i < bits.size(); ++i) {
            const auto nid = detail::node_id(N, K, i);
            auto obs_rng = detail::stream(cfg.seed, t, nid, detail::Stream::observation);
            const double y = model.sample(truth, obs_rng);
            std::uint8_t b = emit_bit(rules[i % N], model, y);
            if (cfg.beta > 0.0) {
                auto ch = detail::stream(cfg.seed, t, nid, detail::Stream::channel);
                if (uniform01(ch) < cfg.beta) b ^= 1;
            }
            bits[i] = b;
        }
        // Fuse-and-relay up the tree.
        Codeword word(N);
        for (std::size_t k = K; k >= 2; --k) {
            const std::size_t parents = pow_sz(N, k - 1);
            std::vector<std::uint8_t> next(parents);
            for (std::size_t p = 0; p < parents; ++p) {
                for (std::size_t j = 0; j < N; ++j) word[j] = bits[p * N + j];
                const auto nid = detail::node_id(N, k - 1, p);
                auto tie_rng = detail::stream(cfg.seed, t, nid, detail::Stream::tie);
                const std::size_t decision =
                    min_hamming_fuse(cfg.matrices[k - 1], word, tie_rng).decision;
                if (opt.record_trials && p == 0) trace.push_back(decision);
                std::uint8_t b = intermediate_map(cfg.matrices[k - 2], decision, p % N);
                if (cfg.beta > 0.0) {
                    auto ch = detail::stream(cfg.seed, t, nid, detail::Stream::channel);
                    if (uniform01(ch) < cfg.beta) b ^= 1;
                }
                next[p] = b;
            }
            bits = std::move(next);
        }
        for (std::size_t j = 0; j < N; ++j) word[j] = bits[j];
        auto fc_tie = detail::stream(cfg.seed, t, 0, detail::Stream::tie);
        const std::size_t fc = min_hamming_fuse(cfg.matrices[0], word, fc_tie).decision;
        errors[t] = fc != truth ? 1 : 0;
        if (opt.record_trials) {
            trace.push_back(fc);
            records[t] = TrialRecord{truth, 0.0, fc, 0.0, std::move(trace), fc == truth};
        }
    });

    ClassificationRun run;
    run.trials = cfg.trials;
    std::size_t bad = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) bad += errors[t];
    run.pe = static_cast<double>(bad) / static_cast<double>(cfg.trials);
    run.ci = wilson_ci(bad, cfg.trials);
    run.records = std::move(records);
    return run;
}

// ---- Estimation (iterative zooming) ----

// Rules and observation model for one node of the zoom hierarchy.
struct ZoomNodeRules {
    RegionModel model;
    HypothesisSet priors;
    std::vector<ThresholdRule> rules;
    bool pbpo_converged = true;
};

struct ZoomState {
    std::vector<std::size_t> path;         // decisions so far, root first
    std::pair<double, double> interval;    // current parameter interval
    std::size_t next_sensing_level = 0;    // tree level that senses next
};

// Everything reusable across trials of one estimation run: the region
// tree, the per-level concatenated matrices, and PBPO rules for every
// internal zoom node (fan^d nodes at depth d).
struct EstimationPlan {
    RegionTree tree;
    PriorDensity density;
    double sigma = 1.0;
    CodeMatrix base;                         // the M x N block
    std::vector<CodeMatrix> concatenated;    // [t-1] = matrix fused for level t's word
    std::vector<std::vector<ZoomNodeRules>> nodes;  // [depth][ordinal]

    EstimationPlan(RegionTree t, PriorDensity d, double sg, CodeMatrix b)
        : tree(std::move(t)), density(std::move(d)), sigma(sg), base(std::move(b)) {}
};

inline EstimationPlan make_estimation_plan(const TreeConfig& cfg, const CodeMatrix& base,
                                           const RegionTree& tree, const PriorDensity& density,
                                           double sigma, const PbpoOptions& pbpo = {}) {
    if (tree.fan() != cfg.hyps || tree.depth() != cfg.height)
        throw std::invalid_argument("make_estimation_plan: region tree shape mismatch");
    if (base.rows() != cfg.hyps || base.cols() != cfg.degree)
        throw std::invalid_argument("make_estimation_plan: base matrix shape mismatch");
    if (!base.distinct_rows())
        throw std::invalid_argument("make_estimation_plan: base matrix has duplicate rows");

    EstimationPlan plan(tree, density, sigma, base);
    for (std::size_t t = 1; t <= cfg.height; ++t)
        plan.concatenated.push_back(concatenate(base, pow_sz(cfg.degree, t - 1)));

    const auto masses = cell_masses(tree, density);
    plan.nodes.resize(cfg.height);
    for (std::size_t d = 0; d < cfg.height; ++d) {
        const std::size_t count = pow_sz(cfg.hyps, d);
        plan.nodes[d].reserve(count);
        for (std::size_t o = 0; o < count; ++o) {
            // Ordinal -> path digits, most significant first.
            std::vector<std::size_t> path(d);
            std::size_t rem = o;
            for (std::size_t i = d; i-- > 0;) {
                path[i] = rem % cfg.hyps;
                rem /= cfg.hyps;
            }
            RegionModel model(tree.child_intervals(path), density, sigma);
            HypothesisSet priors = child_priors(tree, path, masses);
            auto res = pbpo_fixed_point(base, model, priors, pbpo);
            plan.nodes[d].push_back(
                ZoomNodeRules{std::move(model), std::move(priors), std::move(res.rules),
                              res.converged});
        }
    }
    return plan;
}

struct EstimationRun {
    double mse = 0.0;
    Interval mse_ci;
    double detect_prob = 0.0;  // P(final region contains theta)
    Interval detect_ci;
    std::size_t trials = 0;
    std::vector<TrialRecord> records;
};

struct EstimationOptions {
    SimOptions sim{};
    // When set, collaboration links between same-level nodes also see BSC
    // noise (applied to the shared word the level fuses); default mirrors
    // the classification experiment where only report links are noisy.
    bool noisy_collaboration = false;
};

// Estimation protocol: at step s the nodes of level K+1-s observe
// N(theta, sigma^2), quantize through the current zoom node's PBPO rules,
// and the (collaboration-shared) word of that whole level is fused against
// the concatenated matrix to pick the child region to zoom into. The final
// cell's representation point is the estimate.
inline EstimationRun run_estimation(const TreeConfig& cfg, const EstimationPlan& plan,
                                    const EstimationOptions& opt = {}) {
    if (cfg.beta < 0.0 || cfg.beta > 0.5)
        throw std::invalid_argument("run_estimation: beta outside [0, 1/2]");
    if (cfg.trials < 1) throw std::invalid_argument("run_estimation: need at least one trial");
    const std::size_t K = cfg.height, N = cfg.degree;

    // Inverse prior CDF for the theta draw: use the density's exact
    // inverse when it has one, an interpolated grid otherwise.
    const double lo = plan.density.lo, hi = plan.density.hi;
    std::vector<double> cdf_grid;
    if (!plan.density.icdf) {
        const std::size_t n = 4096;
        cdf_grid.resize(n + 1);
        cdf_grid[0] = 0.0;
        const double h = (hi - lo) / static_cast<double>(n);
        for (std::size_t i = 1; i <= n; ++i)
            cdf_grid[i] = cdf_grid[i - 1] +
                          integrate(plan.density.pdf, lo + (i - 1) * h, lo + i * h, {1e-12, 60});
        for (auto& v : cdf_grid) v /= cdf_grid.back();
    }
    const auto draw_theta = [&](double u) {
        if (plan.density.icdf) return plan.density.icdf(u);
        const auto it = std::upper_bound(cdf_grid.begin(), cdf_grid.end(), u);
        const std::size_t i = std::min(cdf_grid.size() - 2,
                                       static_cast<std::size_t>(it - cdf_grid.begin()) - 1);
        const double h = (hi - lo) / static_cast<double>(cdf_grid.size() - 1);
        const double span = cdf_grid[i + 1] - cdf_grid[i];
        const double frac = span > 0.0 ? (u - cdf_grid[i]) / span : 0.5;
        return lo + (static_cast<double>(i) + frac) * h;
    };

    std::vector<double> sqerr(cfg.trials, 0.0);
    std::vector<std::uint8_t> detect(cfg.trials, 0);
    std::vector<TrialRecord> records(opt.sim.record_trials ? cfg.trials : 0);

    detail::for_each_trial(cfg.trials, opt.sim.threads, [&](std::size_t t) {
        auto theta_rng = detail::stream(cfg.seed, t, 0, detail::Stream::theta);
        const double theta = draw_theta(uniform01(theta_rng));

        ZoomState zoom;
        zoom.interval = {plan.tree.edges().front(), plan.tree.edges().back()};
        Codeword word;
        for (std::size_t s = 1; s <= K; ++s) {
            const std::size_t depth = s - 1;
            const std::size_t level = K - depth;  // sensing level this step
            std::size_t ordinal = 0;
            for (std::size_t v : zoom.path) ordinal = ordinal * cfg.hyps + v;
            const ZoomNodeRules& node = plan.nodes[depth][ordinal];

            const std::size_t width = pow_sz(N, level);
            word.assign(width, 0);
            for (std::size_t i = 0; i < width; ++i) {
                const auto nid = detail::node_id(N, level, i);
                auto obs_rng = detail::stream(cfg.seed, t, nid, detail::Stream::observation);
                const double y = normal_sample(obs_rng, theta, plan.sigma);
                std::uint8_t b = emit_bit(node.rules[i % N], node.model, y);
                if (cfg.beta > 0.0) {  // report link to the parent
                    auto ch = detail::stream(cfg.seed, t, nid, detail::Stream::channel);
                    if (uniform01(ch) < cfg.beta) b ^= 1;
                }
                word[i] = b;
            }
            const std::size_t decider = level - 1;
            if (opt.noisy_collaboration && cfg.beta > 0.0 && level >= 2) {
                // Bits beyond the deciding node's own children cross one
                // collaboration hop as well.
                const auto nid = detail::node_id(N, decider, 0);
                auto ch = detail::stream(cfg.seed, t, nid, detail::Stream::collaboration);
                for (std::size_t i = N; i < width; ++i)
                    if (uniform01(ch) < cfg.beta) word[i] ^= 1;
            }
            auto tie_rng = detail::stream(cfg.seed, t, detail::node_id(N, decider, 0),
                                          detail::Stream::tie);
            const std::size_t decision =
                min_hamming_fuse(plan.concatenated[level - 1], word, tie_rng).decision;
            zoom.path.push_back(decision);
            zoom.interval = plan.tree.node_interval(zoom.path);
            zoom.next_sensing_level = level - 1;
        }
        const std::size_t cell = plan.tree.first_cell(zoom.path);
        const double theta_hat = plan.tree.representation(cell);
        sqerr[t] = (theta - theta_hat) * (theta - theta_hat);
        const bool inside = theta >= plan.tree.edges()[cell] &&
                            (theta < plan.tree.edges()[cell + 1] ||
                             cell + 1 == plan.tree.leaf_count());
        detect[t] = inside ? 1 : 0;
        if (opt.sim.record_trials) {
            const auto& edges = plan.tree.edges();
            const auto it = std::upper_bound(edges.begin(), edges.end(), theta);
            const auto true_cell = static_cast<std::size_t>(
                std::clamp<std::ptrdiff_t>(it - edges.begin() - 1, 0,
                                           static_cast<std::ptrdiff_t>(plan.tree.leaf_count()) - 1));
            records[t] = TrialRecord{true_cell, theta, cell, theta_hat, zoom.path, inside};
        }
    });

    EstimationRun run;
    run.trials = cfg.trials;
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        sum += sqerr[t];
        hits += detect[t];
    }
    run.mse = sum / static_cast<double>(cfg.trials);
    double var = 0.0;
    for (std::size_t t = 0; t < cfg.trials; ++t)
        var += (sqerr[t] - run.mse) * (sqerr[t] - run.mse);
    var = cfg.trials > 1 ? var / static_cast<double>(cfg.trials - 1) : 0.0;
    const double half = 1.959963984540054 * std::sqrt(var / static_cast<double>(cfg.trials));
    run.mse_ci = {run.mse - half, run.mse + half};
    run.detect_prob = static_cast<double>(hits) / static_cast<double>(cfg.trials);
    run.detect_ci = wilson_ci(hits, cfg.trials);
    run.records = std::move(records);
    return run;
}

// ---- Sweeps ----

struct SweepRow {
    double axis = 0.0;
    double metric = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double beta = 0.0;
    std::uint64_t seed = 0;
    double detect = std::numeric_limits<double>::quiet_NaN();
    double detect_low = std::numeric_limits<double>::quiet_NaN();
    double detect_high = std::numeric_limits<double>::quiet_NaN();
};

struct ClassificationSweepSpec {
    TreeConfig tree;                 // matrices, dims, trials, root seed
    double sigma = 1.0;
    SnrBase snr_base = SnrBase::two;
    std::vector<double> snr_db;
    std::vector<double> betas{0.0};
    HypothesisSet priors;
    PbpoOptions pbpo{};
    SimOptions sim{};
};

// One Monte Carlo run per (SNR, beta) grid point, PBPO leaf rules rebuilt
// per SNR, per-point seeds derived from the root seed.
inline std::vector<SweepRow> classification_sweep(const ClassificationSweepSpec& spec) {
    if (spec.snr_db.empty()) throw std::invalid_argument("classification_sweep: empty SNR axis");
    std::vector<SweepRow> rows;
    for (std::size_t si = 0; si < spec.snr_db.size(); ++si) {
        const double s = snr_to_s(spec.snr_db[si], spec.snr_base);
        const auto model =
            GaussianShiftModel::equally_spaced(spec.tree.hyps, s, spec.sigma);
        const auto pbpo =
            pbpo_fixed_point(spec.tree.matrices.back(), model, spec.priors, spec.pbpo);
        for (std::size_t bi = 0; bi < spec.betas.size(); ++bi) {
            TreeConfig cfg = spec.tree;
            cfg.beta = spec.betas[bi];
            cfg.seed = derive_seed(spec.tree.seed, si, bi);
            const auto run = run_classification(cfg, model, pbpo.rules, spec.priors, spec.sim);
            rows.push_back(SweepRow{spec.snr_db[si], run.pe, run.ci.low, run.ci.high, cfg.beta,
                                    cfg.seed});
        }
    }
    return rows;
}

struct EstimationSweepSpec {
    TreeConfig tree;                 // dims, trials, root seed (matrices unused)
    CodeMatrix base;                 // M x N block, concatenated per level
    double sigma = 1.0;
    std::vector<double> theta_max;
    std::vector<double> betas{0.0};
    PbpoOptions pbpo{};
    EstimationOptions est{};
    LloydMaxOptions lloyd{};
};

// Uniform theta on (0, theta_max) per axis point: Lloyd-Max splitting into
// M^K cells, zoom rules per region-tree node, then one run per beta.
inline std::vector<SweepRow> estimation_sweep(const EstimationSweepSpec& spec) {
    if (spec.theta_max.empty()) throw std::invalid_argument("estimation_sweep: empty axis");
    std::vector<SweepRow> rows;
    for (std::size_t ti = 0; ti < spec.theta_max.size(); ++ti) {
        const double tmax = spec.theta_max[ti];
        const auto density = PriorDensity::uniform(0.0, tmax);
        const auto lm = lloyd_max(density, 0.0, tmax, pow_sz(spec.tree.hyps, spec.tree.height),
                                  spec.lloyd);
        const auto tree =
            build_region_tree(lm, 0.0, tmax, spec.tree.hyps, spec.tree.height);
        const auto plan =
            make_estimation_plan(spec.tree, spec.base, tree, density, spec.sigma, spec.pbpo);
        for (std::size_t bi = 0; bi < spec.betas.size(); ++bi) {
            TreeConfig cfg = spec.tree;
            cfg.beta = spec.betas[bi];
            cfg.seed = derive_seed(spec.tree.seed, ti, bi);
            const auto run = run_estimation(cfg, plan, spec.est);
            rows.push_back(SweepRow{tmax, run.mse, run.mse_ci.low, run.mse_ci.high, cfg.beta,
                                    cfg.seed, run.detect_prob, run.detect_ci.low,
                                    run.detect_ci.high});
        }
    }
    return rows;
}

}  // namespace treefuse
