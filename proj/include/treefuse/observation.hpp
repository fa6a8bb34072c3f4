#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "treefuse/quadrature.hpp"
#include "treefuse/rng.hpp"
#include "treefuse/stats.hpp"

namespace treefuse {

// Hypotheses H_0..H_{M-1} with prior probabilities.
struct HypothesisSet {
    std::vector<double> priors;

    explicit HypothesisSet(std::vector<double> p) : priors(std::move(p)) {
        if (priors.size() < 2) throw std::invalid_argument("HypothesisSet: need at least 2");
        double sum = 0.0;
        for (double v : priors) {
            if (v < 0.0) throw std::invalid_argument("HypothesisSet: negative prior");
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("HypothesisSet: priors sum to " + std::to_string(sum));
    }

    static HypothesisSet uniform(std::size_t m) {
        return HypothesisSet(std::vector<double>(m, 1.0 / static_cast<double>(m)));
    }

    std::size_t size() const { return priors.size(); }
};

enum class SnrBase { two, ten };

// The observation SNR in dB maps to the mean spacing s. The printed map is
// base-2 (s = 2^(snr/20)); base 10 is available since that is the
// conventional dB definition.
inline double snr_to_s(double snr_db, SnrBase base = SnrBase::two) {
    const double b = base == SnrBase::two ? 2.0 : 10.0;
    return std::pow(b, snr_db / 20.0);
}

// Scalar Gaussian family with per-hypothesis means and a shared sigma.
// sigma == 0 degenerates to point masses at the means (used by ideal-
// observation tests); likelihood() then reports the point-mass weight.
class GaussianShiftModel {
  public:
    GaussianShiftModel(std::vector<double> means, double sigma)
        : means_(std::move(means)), sigma_(sigma) {
        if (means_.size() < 2) throw std::invalid_argument("GaussianShiftModel: need >= 2 means");
        if (!(sigma_ >= 0.0)) throw std::invalid_argument("GaussianShiftModel: sigma < 0");
        for (double m : means_)
            if (!std::isfinite(m)) throw std::invalid_argument("GaussianShiftModel: bad mean");
    }

    // Means 0, s, 2s, ..., (M-1)s.
    static GaussianShiftModel equally_spaced(std::size_t m, double s, double sigma) {
        std::vector<double> means(m);
        for (std::size_t i = 0; i < m; ++i) means[i] = s * static_cast<double>(i);
        return GaussianShiftModel(std::move(means), sigma);
    }

    std::size_t num_hypotheses() const { return means_.size(); }
    double sigma() const { return sigma_; }
    double mean(std::size_t l) const { return means_.at(l); }
    bool is_point_mass() const { return sigma_ == 0.0; }

    double likelihood(std::size_t l, double y) const {
        check(l);
        if (sigma_ == 0.0) return y == means_[l] ? 1.0 : 0.0;
        return gauss_pdf(y, means_[l], sigma_);
    }

    // Interval holding all but ~1e-30 of the conditional mass; quadratures
    // over y are restricted to it.
    std::pair<double, double> support(std::size_t l) const {
        check(l);
        return {means_[l] - 12.0 * sigma_, means_[l] + 12.0 * sigma_};
    }

    // Locations around which likelihood ratios (and hence decision
    // boundaries) cluster; quadratures anchor their panels here.
    const std::vector<double>& characteristic_points() const { return means_; }

    template <typename Rng>
    double sample(std::size_t l, Rng& rng) const {
        check(l);
        return normal_sample(rng, means_[l], sigma_);
    }

  private:
    void check(std::size_t l) const {
        if (l >= means_.size()) throw std::out_of_range("GaussianShiftModel: hypothesis index");
    }

    std::vector<double> means_;
    double sigma_;
};

// Prior density over the scalar parameter, with (effective) support and an
// optional exact inverse CDF (samplers fall back to numeric inversion).
struct PriorDensity {
    std::function<double(double)> pdf;
    double lo = 0.0;
    double hi = 1.0;
    std::function<double(double)> icdf;

    static PriorDensity uniform(double a, double b) {
        if (!(a < b)) throw std::invalid_argument("uniform density: empty interval");
        const double h = 1.0 / (b - a);
        return {[h, a, b](double t) { return (t >= a && t <= b) ? h : 0.0; }, a, b,
                [a, b](double u) { return a + u * (b - a); }};
    }

    static PriorDensity normal(double mean, double sd, double half_width_sigmas = 8.0) {
        if (!(sd > 0.0)) throw std::invalid_argument("normal density: sd <= 0");
        return {[mean, sd](double t) { return gauss_pdf(t, mean, sd); },
                mean - half_width_sigmas * sd, mean + half_width_sigmas * sd, nullptr};
    }
};

// Estimation-side observation family: hypothesis l means "theta lies in
// region l"; an observation is N(theta, sigma^2) with theta drawn from the
// prior conditioned on that region. The likelihood is the convolution
//   p(y|H_l) = (1/mass_l) * integral over region l of phi_sigma(y-t) p(t) dt
// evaluated by adaptive Gauss-Legendre restricted to the part of the
// region within 12 sigma of y (the only part that contributes).
class RegionModel {
  public:
    RegionModel(std::vector<std::pair<double, double>> regions, PriorDensity prior, double sigma,
                QuadratureConfig quad = {})
        : regions_(std::move(regions)), prior_(std::move(prior)), sigma_(sigma), quad_(quad) {
        if (regions_.size() < 2) throw std::invalid_argument("RegionModel: need >= 2 regions");
        if (!(sigma_ >= 0.0)) throw std::invalid_argument("RegionModel: sigma < 0");
        masses_.reserve(regions_.size());
        for (const auto& [a, b] : regions_) {
            if (!(a < b)) throw std::invalid_argument("RegionModel: empty region");
            const double m = integrate(prior_.pdf, a, b, quad_);
            if (!(m > 0.0)) throw std::invalid_argument("RegionModel: region has no prior mass");
            masses_.push_back(m);
        }
    }

    std::size_t num_hypotheses() const { return regions_.size(); }
    double sigma() const { return sigma_; }
    bool is_point_mass() const { return false; }
    const std::pair<double, double>& region(std::size_t l) const { return regions_.at(l); }
    double region_mass(std::size_t l) const { return masses_.at(l); }

    double likelihood(std::size_t l, double y) const {
        check(l);
        const auto [a, b] = regions_[l];
        if (sigma_ == 0.0) return (y >= a && y < b) ? prior_.pdf(y) / masses_[l] : 0.0;
        const double lo = std::max(a, y - 12.0 * sigma_);
        const double hi = std::min(b, y + 12.0 * sigma_);
        if (!(lo < hi)) return 0.0;
        const double mass = masses_[l];
        const double sigma = sigma_;
        const auto& pdf = prior_.pdf;
        return integrate([&](double t) { return gauss_pdf(y, t, sigma) * pdf(t); }, lo, hi,
                         quad_) /
               mass;
    }

    std::pair<double, double> support(std::size_t l) const {
        check(l);
        return {regions_[l].first - 12.0 * sigma_, regions_[l].second + 12.0 * sigma_};
    }

    // Region edges: between them every conditional likelihood is flat or
    // slowly varying, so decision boundaries concentrate near these.
    std::vector<double> characteristic_points() const {
        std::vector<double> pts;
        for (const auto& [a, b] : regions_) {
            pts.push_back(a);
            pts.push_back(b);
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        return pts;
    }

    // theta from the region-conditioned prior (inverse CDF by bisection),
    // then y ~ N(theta, sigma^2).
    template <typename Rng>
    double sample(std::size_t l, Rng& rng) const {
        check(l);
        const double theta = sample_theta(l, uniform01(rng));
        return normal_sample(rng, theta, sigma_);
    }

    double sample_theta(std::size_t l, double quantile) const {
        check(l);
        const auto [a, b] = regions_[l];
        const double target = quantile * masses_[l];
        double lo = a, hi = b;
        for (int iter = 0; iter < 200 && hi - lo > 1e-14 * (1.0 + std::abs(hi)); ++iter) {
            const double mid = 0.5 * (lo + hi);
            if (integrate(prior_.pdf, a, mid, quad_) < target)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    }

  private:
    void check(std::size_t l) const {
        if (l >= regions_.size()) throw std::out_of_range("RegionModel: hypothesis index");
    }

    std::vector<std::pair<double, double>> regions_;
    PriorDensity prior_;
    double sigma_;
    QuadratureConfig quad_;
    std::vector<double> masses_;
};

}  // namespace treefuse
