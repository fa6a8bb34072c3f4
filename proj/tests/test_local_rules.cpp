#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "treefuse/local_rules.hpp"
#include "treefuse/observation.hpp"
#include "treefuse/stats.hpp"

using namespace treefuse;

namespace {

CodeMatrix example_matrix() {
    return CodeMatrix(4, 7,
                      {1, 0, 0, 0, 1, 0, 1,   //
                       0, 0, 1, 0, 0, 0, 0,   //
                       1, 0, 1, 1, 0, 1, 0,   //
                       0, 1, 1, 1, 1, 1, 1});
}

CodeMatrix random_distinct(std::size_t M, std::size_t N, SplitMix64& rng) {
    while (true) {
        std::vector<std::uint8_t> bits(M * N);
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
        CodeMatrix C(M, N, std::move(bits));
        if (C.distinct_rows()) return C;
    }
}

BitProbTable random_bit_probs(std::size_t N, std::size_t M, SplitMix64& rng) {
    BitProbTable B(N, M);
    for (auto& v : B.p) v = uniform01(rng);
    return B;
}

}  // namespace

TEST_CASE("cost of a received word") {
    const CodeMatrix C(2, 3, {0, 0, 0, 1, 1, 1});
    CHECK(psi_cost(C, Codeword{0, 0, 0}, 0) == 0.0);   // exact row, unique
    CHECK(psi_cost(C, Codeword{0, 0, 0}, 1) == 1.0);   // wrong region
    CHECK(psi_cost(C, Codeword{1, 0, 0}, 0) == 0.0);   // still nearest to row 0
    CHECK(psi_cost(C, Codeword{1, 0, 0}, 1) == 1.0);

    const CodeMatrix T(2, 2, {0, 0, 1, 1});
    CHECK(psi_cost(T, Codeword{0, 1}, 0) == 0.5);      // two-way tie
    CHECK(psi_cost(T, Codeword{0, 1}, 1) == 0.5);
}

TEST_CASE("cost tensor agrees with the reference implementation") {
    SplitMix64 rng(21);
    for (int rep = 0; rep < 30; ++rep) {
        const auto C = random_distinct(2 + uniform_index(rng, 3), 4 + uniform_index(rng, 3), rng);
        const CostTensor psi(C);
        for (int w = 0; w < 20; ++w) {
            std::vector<int> word(C.cols());
            Codeword cw(C.cols());
            for (std::size_t j = 0; j < C.cols(); ++j) {
                word[j] = static_cast<int>(rng() & 1u);
                cw[j] = static_cast<std::uint8_t>(word[j]);
            }
            for (std::size_t l = 0; l < C.rows(); ++l)
                CHECK(psi(cw, l) == oracle::psi(C, word, l));
        }
    }
}

TEST_CASE("cost values lie in {0} union [1/2, 1]") {
    SplitMix64 rng(22);
    for (int rep = 0; rep < 20; ++rep) {
        const auto C = random_distinct(2 + uniform_index(rng, 3), 4, rng);
        const CostTensor psi(C);
        for (std::uint64_t w = 0; w < 16; ++w)
            for (std::size_t l = 0; l < C.rows(); ++l) {
                const double v = psi(w, l);
                CHECK((v == 0.0 || (v >= 0.5 && v <= 1.0)));
            }
    }
}

TEST_CASE("single-node weight matrix is the MAP rule") {
    const CodeMatrix C(2, 1, {0, 1});
    const HypothesisSet priors({0.3, 0.7});
    BitProbTable empty(1, 2);  // no other nodes, values unused
    const auto W = weight_matrix(C, priors, empty);
    CHECK(W.at(0, 0) == Catch::Approx(-0.3));
    CHECK(W.at(0, 1) == Catch::Approx(0.7));

    // Emits 0 exactly when P_0 p(y|H_0) > P_1 p(y|H_1).
    const GaussianShiftModel model({0.0, 1.0}, 1.0);
    ThresholdRule rule{{W.at(0, 0), W.at(0, 1)}};
    for (double y : {-2.0, -0.5, 0.1, 0.5, 0.9, 1.5, 3.0}) {
        const bool map_zero = 0.3 * model.likelihood(0, y) > 0.7 * model.likelihood(1, y);
        CHECK(emit_bit(rule, model, y) == (map_zero ? 0 : 1));
    }
}

TEST_CASE("weight rows for a complementary column pair are antisymmetric") {
    const CodeMatrix C(2, 2, {0, 1, 1, 0});
    const HypothesisSet priors = HypothesisSet::uniform(2);
    BitProbTable half(2, 2);
    for (auto& v : half.p) v = 0.5;
    const auto W = weight_matrix(C, priors, half);
    for (std::size_t l = 0; l < 2; ++l) {
        CHECK(W.at(1, l) == Catch::Approx(-W.at(0, l)));
        CHECK(W.at(0, l) == Catch::Approx(oracle::weight_entry(C, half, priors, 0, l)));
        CHECK(W.at(1, l) == Catch::Approx(oracle::weight_entry(C, half, priors, 1, l)));
    }
}

TEST_CASE("weight matrix matches the brute-force evaluator") {
    SplitMix64 rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        const auto C = random_distinct(2, 3, rng);
        const auto B = random_bit_probs(3, 2, rng);
        double p0 = 0.2 + 0.6 * uniform01(rng);
        const HypothesisSet priors({p0, 1.0 - p0});
        const auto W = weight_matrix(C, priors, B);
        for (std::size_t j = 0; j < 3; ++j)
            for (std::size_t l = 0; l < 2; ++l)
                CHECK(W.at(j, l) ==
                      Catch::Approx(oracle::weight_entry(C, B, priors, j, l)).margin(1e-12));
    }
}

TEST_CASE("weight magnitudes are bounded by the priors") {
    SplitMix64 rng(32);
    for (int rep = 0; rep < 20; ++rep) {
        const auto C = random_distinct(2 + uniform_index(rng, 3), 5, rng);
        const auto B = random_bit_probs(5, C.rows(), rng);
        const auto priors = HypothesisSet::uniform(C.rows());
        const auto W = weight_matrix(C, priors, B);
        for (std::size_t j = 0; j < 5; ++j)
            for (std::size_t l = 0; l < C.rows(); ++l)
                CHECK(std::abs(W.at(j, l)) <= priors.priors[l] + 1e-12);
    }
}

TEST_CASE("rule decisions are invariant under scaling all weights") {
    const GaussianShiftModel model({0.0, 1.0, 2.0}, 0.8);
    ThresholdRule rule{{-0.2, 0.05, 0.3}};
    ThresholdRule scaled{{-0.2 * 7.5, 0.05 * 7.5, 0.3 * 7.5}};
    for (double y = -3.0; y < 5.0; y += 0.37)
        CHECK(emit_bit(rule, model, y) == emit_bit(scaled, model, y));
}

TEST_CASE("weight matrix rejects widths beyond the enumeration cap") {
    SplitMix64 rng(33);
    const auto C = random_distinct(2, 30, rng);
    const auto B = random_bit_probs(30, 2, rng);
    CHECK_THROWS_AS(weight_matrix(C, HypothesisSet::uniform(2), B), capacity_error);
}

TEST_CASE("intermediate map returns the addressed code bit") {
    const auto C = example_matrix();
    CHECK(intermediate_map(C, 0, 0) == 1);  // first row starts 1 0 0 0 1 0 1
    CHECK(intermediate_map(C, 1, 0) == 0);  // second row starts 0 0 1 0 0 0 0
    CHECK_THROWS_AS(intermediate_map(C, 9, 0), std::out_of_range);
    CHECK_THROWS_AS(intermediate_map(C, 0, 9), std::out_of_range);

    SplitMix64 rng(44);
    for (int rep = 0; rep < 10; ++rep) {
        const auto R = random_distinct(2 + uniform_index(rng, 3), 5, rng);
        for (std::size_t y = 0; y < R.rows(); ++y) {
            Codeword rebuilt(R.cols());
            for (std::size_t j = 0; j < R.cols(); ++j) rebuilt[j] = intermediate_map(R, y, j);
            CHECK(rebuilt == R.row(y));
        }
    }
}

TEST_CASE("pbpo at a single node is the MAP test regardless of initialization") {
    const CodeMatrix C(2, 1, {0, 1});
    const HypothesisSet priors = HypothesisSet::uniform(2);
    const GaussianShiftModel model({0.0, 2.0}, 1.0);

    // Closed form for the symmetric threshold at s/2.
    const double p1_h0 = 1.0 - normal_cdf(1.0);
    const double p1_h1 = 1.0 - normal_cdf(-1.0);

    SplitMix64 rng(55);
    for (int rep = 0; rep < 5; ++rep) {
        PbpoOptions opt;
        std::vector<ThresholdRule> init{{std::vector<double>{uniform01(rng) - 0.5,
                                                             uniform01(rng) - 0.5}}};
        opt.init_rules = init;
        const auto res = pbpo_fixed_point(C, model, priors, opt);
        CHECK(res.converged);
        CHECK(res.bit_probs.at(0, 0) == Catch::Approx(p1_h0).margin(1e-7));
        CHECK(res.bit_probs.at(0, 1) == Catch::Approx(p1_h1).margin(1e-7));
    }
}

TEST_CASE("identical columns and a symmetric model give identical rules") {
    const CodeMatrix C(2, 3, {0, 0, 0, 1, 1, 1});
    const HypothesisSet priors = HypothesisSet::uniform(2);
    const GaussianShiftModel model({0.0, 1.6}, 1.0);

    SplitMix64 rng(66);
    for (int rep = 0; rep < 10; ++rep) {
        PbpoOptions opt;
        std::vector<ThresholdRule> init;
        for (int j = 0; j < 3; ++j)
            init.push_back(ThresholdRule{{uniform01(rng) - 0.5, uniform01(rng) - 0.5}});
        opt.init_rules = init;
        const auto res = pbpo_fixed_point(C, model, priors, opt);
        CHECK(res.converged);
        for (std::size_t j = 1; j < 3; ++j)
            for (std::size_t l = 0; l < 2; ++l)
                CHECK(res.bit_probs.at(j, l) ==
                      Catch::Approx(res.bit_probs.at(0, l)).margin(1e-6));
    }
}

TEST_CASE("zero requested sweeps returns the initialization, not converged") {
    const CodeMatrix C(2, 2, {0, 0, 1, 1});
    const GaussianShiftModel model({0.0, 1.0}, 1.0);
    PbpoOptions opt;
    opt.max_sweeps = 0;
    const auto res = pbpo_fixed_point(C, model, HypothesisSet::uniform(2), opt);
    CHECK_FALSE(res.converged);
    CHECK(res.sweeps == 0);
    // Initialization = single-node rules.
    const auto init = single_node_rule(C, 0, HypothesisSet::uniform(2));
    CHECK(res.rules[0].weights == init.weights);
}

TEST_CASE("pbpo cost trace is non-increasing") {
    SplitMix64 rng(77);
    for (int rep = 0; rep < 6; ++rep) {
        const auto C = random_distinct(2 + uniform_index(rng, 2), 3, rng);
        const double s = 0.8 + uniform01(rng);
        const auto model = GaussianShiftModel::equally_spaced(C.rows(), s, 1.0);
        const auto res = pbpo_fixed_point(C, model, HypothesisSet::uniform(C.rows()));
        for (std::size_t i = 1; i < res.cost_trace.size(); ++i)
            CHECK(res.cost_trace[i] <= res.cost_trace[i - 1] + 1e-6);
    }
}
