#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "treefuse/observation.hpp"
#include "treefuse/quadrature.hpp"
#include "treefuse/rng.hpp"

namespace treefuse {

struct LloydMaxResult {
    std::vector<double> boundaries;  // cells - 1 interior boundaries, ascending
    std::vector<double> points;      // one representation point per cell
    double distortion = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    std::vector<double> distortion_trace;
};

struct LloydMaxOptions {
    double tol = 1e-10;
    std::size_t max_iters = 500;
    bool random_init = false;            // default: deterministic equal-mass quantiles
    std::uint64_t init_seed = 0;
    QuadratureConfig quad{1e-13, 60};
};

namespace detail {

inline double cell_mass(const PriorDensity& d, double a, double b, const QuadratureConfig& q) {
    return integrate(d.pdf, a, b, q);
}

inline double cell_first_moment(const PriorDensity& d, double a, double b,
                                const QuadratureConfig& q) {
    return integrate([&](double t) { return t * d.pdf(t); }, a, b, q);
}

inline double cell_distortion(const PriorDensity& d, double a, double b, double r,
                              const QuadratureConfig& q) {
    return integrate([&](double t) { return (t - r) * (t - r) * d.pdf(t); }, a, b, q);
}

// t with CDF(t) = target, by bisection.
inline double quantile_of(const PriorDensity& d, double lo, double hi, double target,
                          const QuadratureConfig& q) {
    double a = lo, b = hi;
    for (int i = 0; i < 200 && b - a > 1e-15 * (1.0 + std::abs(b)); ++i) {
        const double mid = 0.5 * (a + b);
        if (cell_mass(d, lo, mid, q) < target)
            a = mid;
        else
            b = mid;
    }
    return 0.5 * (a + b);
}

}  // namespace detail

// Lloyd-Max scalar quantizer: alternate Voronoi boundaries (midpoints of
// adjacent points) and centroid updates until no point moves more than
// tol. An empty cell gets its point re-seeded inside the heaviest cell.
inline LloydMaxResult lloyd_max(const PriorDensity& density, double lo, double hi,
                                std::size_t cells, const LloydMaxOptions& opt = {}) {
    if (cells < 1) throw std::invalid_argument("lloyd_max: need at least one cell");
    if (!(lo < hi)) throw std::invalid_argument("lloyd_max: empty parameter interval");

    LloydMaxResult res;
    const double total = detail::cell_mass(density, lo, hi, opt.quad);
    if (!(total > 0.0)) throw std::invalid_argument("lloyd_max: density has no mass on interval");

    res.points.resize(cells);
    if (opt.random_init) {
        SplitMix64 rng(opt.init_seed);
        for (auto& p : res.points) p = lo + (hi - lo) * uniform01(rng);
        std::sort(res.points.begin(), res.points.end());
    } else {
        for (std::size_t i = 0; i < cells; ++i)
            res.points[i] = detail::quantile_of(
                density, lo, hi,
                total * (static_cast<double>(i) + 0.5) / static_cast<double>(cells), opt.quad);
    }
    res.boundaries.assign(cells >= 1 ? cells - 1 : 0, 0.0);

    const auto edges_of = [&](std::vector<double>& edges) {
        edges.resize(cells + 1);
        edges[0] = lo;
        for (std::size_t i = 0; i + 1 < cells; ++i) edges[i + 1] = res.boundaries[i];
        edges[cells] = hi;
    };

    std::vector<double> edges;
    for (std::size_t iter = 0; iter < opt.max_iters; ++iter) {
        // Voronoi boundaries from current points.
        for (std::size_t i = 0; i + 1 < cells; ++i)
            res.boundaries[i] = 0.5 * (res.points[i] + res.points[i + 1]);
        edges_of(edges);

        // Centroid update; re-seed any empty cell inside the heaviest one.
        double movement = 0.0;
        std::size_t heaviest = 0;
        double heaviest_mass = -1.0;
        std::vector<double> masses(cells);
        for (std::size_t i = 0; i < cells; ++i) {
            masses[i] = detail::cell_mass(density, edges[i], edges[i + 1], opt.quad);
            if (masses[i] > heaviest_mass) {
                heaviest_mass = masses[i];
                heaviest = i;
            }
        }
        for (std::size_t i = 0; i < cells; ++i) {
            double next;
            if (masses[i] <= 1e-15 * total) {
                next = 0.25 * edges[heaviest] + 0.75 * edges[heaviest + 1];
            } else {
                next = detail::cell_first_moment(density, edges[i], edges[i + 1], opt.quad) /
                       masses[i];
            }
            movement = std::max(movement, std::abs(next - res.points[i]));
            res.points[i] = next;
        }
        std::sort(res.points.begin(), res.points.end());

        double dist = 0.0;
        for (std::size_t i = 0; i + 1 < cells; ++i)
            res.boundaries[i] = 0.5 * (res.points[i] + res.points[i + 1]);
        edges_of(edges);
        for (std::size_t i = 0; i < cells; ++i)
            dist += detail::cell_distortion(density, edges[i], edges[i + 1], res.points[i],
                                            opt.quad);
        res.distortion = dist / total;
        res.distortion_trace.push_back(res.distortion);
        res.iterations = iter + 1;
        if (movement < opt.tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

// K-level zoom hierarchy over M^K Lloyd-Max cells. Contiguous blocks of
// M^(K-1-d) cells form one composite region at depth d, preserving the
// interval structure the zoom protocol nests into.
class RegionTree {
  public:
    RegionTree(std::size_t fan, std::size_t depth, std::vector<double> edges,
               std::vector<double> reps)
        : fan_(fan), depth_(depth), edges_(std::move(edges)), reps_(std::move(reps)) {
        if (fan_ < 2) throw std::invalid_argument("RegionTree: fan-out must be >= 2");
        if (depth_ < 1) throw std::invalid_argument("RegionTree: depth must be >= 1");
        std::size_t cells = 1;
        for (std::size_t k = 0; k < depth_; ++k) cells *= fan_;
        if (reps_.size() != cells || edges_.size() != cells + 1)
            throw std::invalid_argument("RegionTree: cell count must be fan^depth");
        for (std::size_t i = 0; i + 1 < edges_.size(); ++i)
            if (!(edges_[i] < edges_[i + 1]))
                throw std::invalid_argument("RegionTree: edges not strictly increasing");
    }

    std::size_t fan() const { return fan_; }
    std::size_t depth() const { return depth_; }
    std::size_t leaf_count() const { return reps_.size(); }
    const std::vector<double>& edges() const { return edges_; }
    const std::vector<double>& representation_points() const { return reps_; }

    std::size_t block_size(std::size_t node_depth) const {
        std::size_t b = 1;
        for (std::size_t k = node_depth; k < depth_; ++k) b *= fan_;
        return b;
    }

    // First leaf cell covered by the node reached via `path` (child
    // indices from the root).
    std::size_t first_cell(const std::vector<std::size_t>& path) const {
        if (path.size() > depth_) throw std::invalid_argument("RegionTree: path too deep");
        std::size_t first = 0;
        for (std::size_t d = 0; d < path.size(); ++d) {
            if (path[d] >= fan_) throw std::out_of_range("RegionTree: child index");
            first += path[d] * block_size(d + 1);
        }
        return first;
    }

    std::pair<double, double> node_interval(const std::vector<std::size_t>& path) const {
        const std::size_t first = first_cell(path);
        const std::size_t block = block_size(path.size());
        return {edges_[first], edges_[first + block]};
    }

    // The M child intervals presented by one zoom step below `path`.
    std::vector<std::pair<double, double>> child_intervals(
        const std::vector<std::size_t>& path) const {
        if (path.size() >= depth_) throw std::invalid_argument("RegionTree: node has no children");
        const std::size_t first = first_cell(path);
        const std::size_t child_block = block_size(path.size() + 1);
        std::vector<std::pair<double, double>> out;
        out.reserve(fan_);
        for (std::size_t c = 0; c < fan_; ++c)
            out.emplace_back(edges_[first + c * child_block],
                             edges_[first + (c + 1) * child_block]);
        return out;
    }

    double representation(std::size_t cell) const { return reps_.at(cell); }

    // Interior boundaries at depth-d granularity (fan^d - 1 values).
    std::vector<double> level_boundaries(std::size_t d) const {
        if (d < 1 || d > depth_) throw std::invalid_argument("RegionTree: bad level");
        const std::size_t block = block_size(d);
        std::vector<double> out;
        for (std::size_t i = block; i < leaf_count(); i += block) out.push_back(edges_[i]);
        return out;
    }

  private:
    std::size_t fan_;
    std::size_t depth_;
    std::vector<double> edges_;
    std::vector<double> reps_;
};

inline RegionTree build_region_tree(const LloydMaxResult& quantizer, double lo, double hi,
                                    std::size_t fan, std::size_t depth) {
    std::size_t cells = 1;
    for (std::size_t k = 0; k < depth; ++k) cells *= fan;
    if (quantizer.points.size() != cells)
        throw std::invalid_argument("build_region_tree: quantizer has " +
                                    std::to_string(quantizer.points.size()) + " cells, need " +
                                    std::to_string(cells));
    std::vector<double> edges;
    edges.reserve(cells + 1);
    edges.push_back(lo);
    for (double b : quantizer.boundaries) edges.push_back(b);
    edges.push_back(hi);
    return RegionTree(fan, depth, std::move(edges), quantizer.points);
}

// Prior mass of every leaf cell; block sums give the zoom-conditional
// priors at any node.
inline std::vector<double> cell_masses(const RegionTree& tree, const PriorDensity& density,
                                       const QuadratureConfig& quad = {1e-13, 60}) {
    std::vector<double> masses(tree.leaf_count());
    for (std::size_t i = 0; i < tree.leaf_count(); ++i)
        masses[i] = integrate(density.pdf, tree.edges()[i], tree.edges()[i + 1], quad);
    return masses;
}

inline HypothesisSet child_priors(const RegionTree& tree, const std::vector<std::size_t>& path,
                                  const std::vector<double>& masses) {
    const std::size_t first = tree.first_cell(path);
    const std::size_t child_block = tree.block_size(path.size() + 1);
    std::vector<double> p(tree.fan(), 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < tree.fan(); ++c) {
        for (std::size_t i = 0; i < child_block; ++i) p[c] += masses[first + c * child_block + i];
        total += p[c];
    }
    if (!(total > 0.0)) throw std::invalid_argument("child_priors: node carries no prior mass");
    for (auto& v : p) v /= total;
    return HypothesisSet(std::move(p));
}

namespace detail {

inline std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

// Plain-text region tree: "fan depth", per-level boundary lists, then one
// "low high representation" line per leaf. 17 significant digits so the
// file round-trips bit-exactly.
inline void write_region_tree(std::ostream& os, const RegionTree& tree) {
    os << tree.fan() << " " << tree.depth() << "\n";
    for (std::size_t d = 1; d <= tree.depth(); ++d) {
        os << "level " << d << "\n";
        const auto bounds = tree.level_boundaries(d);
        for (std::size_t i = 0; i < bounds.size(); ++i)
            os << (i ? " " : "") << detail::format17(bounds[i]);
        os << "\n";
    }
    os << "leaves\n";
    for (std::size_t i = 0; i < tree.leaf_count(); ++i)
        os << detail::format17(tree.edges()[i]) << " " << detail::format17(tree.edges()[i + 1])
           << " " << detail::format17(tree.representation(i)) << "\n";
}

inline RegionTree read_region_tree(std::istream& is) {
    std::size_t fan = 0, depth = 0;
    if (!(is >> fan >> depth)) throw std::invalid_argument("region tree file: bad header");
    std::string tok;
    // Level sections are derivable from the leaves; skip to the leaf list.
    while (is >> tok && tok != "leaves") {
    }
    if (tok != "leaves") throw std::invalid_argument("region tree file: missing leaf section");
    std::size_t cells = 1;
    for (std::size_t k = 0; k < depth; ++k) cells *= fan;
    std::vector<double> edges(cells + 1), reps(cells);
    for (std::size_t i = 0; i < cells; ++i) {
        double lo, hi, rep;
        if (!(is >> lo >> hi >> rep))
            throw std::invalid_argument("region tree file: truncated leaf section");
        if (i == 0) edges[0] = lo;
        edges[i + 1] = hi;
        reps[i] = rep;
    }
    return RegionTree(fan, depth, std::move(edges), std::move(reps));
}

inline void save_region_tree(const std::string& path, const RegionTree& tree) {
    std::ofstream f(path);
    if (!f) throw std::invalid_argument("cannot open for writing: " + path);
    write_region_tree(f, tree);
}

inline RegionTree load_region_tree(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("cannot open region tree file: " + path);
    return read_region_tree(f);
}

}  // namespace treefuse
