#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "qcdcomm/prob.hpp"
#include "qcdcomm/rng.hpp"

using namespace qcdcomm;

namespace {

Distribution random_distribution(std::size_t n, Rng& rng) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (double& v : p) {
        v = -std::log(rng.uniform01() + 1e-300);
        sum += v;
    }
    for (double& v : p) v /= sum;
    return Distribution(std::move(p));
}

ChannelMatrix random_channel(std::size_t nx, std::size_t ny, Rng& rng) {
    std::vector<std::vector<double>> rows;
    for (std::size_t x = 0; x < nx; ++x) rows.push_back(random_distribution(ny, rng).probs());
    return ChannelMatrix(rows);
}

const ChannelMatrix kZPre = ChannelMatrix::z_channel(0.1);
const ChannelMatrix kZPost = ChannelMatrix::z_channel(0.5);

}  // namespace

TEST_CASE("distribution validation") {
    REQUIRE_THROWS_AS(Distribution({0.5, -0.1, 0.6}), std::invalid_argument);
    REQUIRE_THROWS_AS(Distribution({0.5, 0.6}), std::invalid_argument);
    REQUIRE_THROWS_AS(Distribution(std::vector<double>{}), std::invalid_argument);
    // Within tolerance the constructor renormalizes exactly.
    Distribution d({0.25, 0.75 + 5e-13});
    REQUIRE(d[0] + d[1] == 1.0);
}

TEST_CASE("entropy") {
    REQUIRE(entropy(Distribution::uniform(2)) == Catch::Approx(std::log(2.0)).margin(1e-12));
    REQUIRE(entropy(Distribution::point_mass(4, 2)) == 0.0);
    // Oracle: direct evaluation of -sum p ln p.
    const double expected = -(0.3 * std::log(0.3) + 0.7 * std::log(0.7));
    REQUIRE(expected == Catch::Approx(0.610864).margin(5e-7));
    REQUIRE(entropy(Distribution({0.3, 0.7})) == Catch::Approx(expected).margin(1e-15));
}

TEST_CASE("kl divergence") {
    const Distribution p({0.5, 0.5});
    REQUIRE(kl_divergence(p, p) == 0.0);
    REQUIRE(kl_divergence(p, Distribution({0.1, 0.9})) ==
            Catch::Approx(0.5108256237659907).margin(1e-12));
    REQUIRE(kl_divergence(Distribution({1.0, 0.0}), Distribution({0.0, 1.0})) == kInfinity);
    REQUIRE_THROWS_AS(kl_divergence(p, Distribution::uniform(3)), std::invalid_argument);
}

TEST_CASE("kl divergence nonnegative, zero iff equal") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_distribution(4, rng);
        const auto q = random_distribution(4, rng);
        const double d = kl_divergence(p, q);
        REQUIRE(d >= 0.0);
        double tv = 0.0;
        for (std::size_t i = 0; i < 4; ++i) tv += std::abs(p[i] - q[i]);
        if (tv > 1e-3) REQUIRE(d > 0.0);
        REQUIRE(kl_divergence(p, p) == 0.0);
    }
}

TEST_CASE("conditional kl") {
    SECTION("point mass reduces to a single row") {
        const auto px = Distribution::point_mass(2, 1);
        REQUIRE(conditional_kl(kZPost, kZPre, px) ==
                Catch::Approx(kl_divergence(kZPost.row(1), kZPre.row(1))).margin(1e-15));
    }
    SECTION("Z-channel pair at uniform input") {
        REQUIRE(conditional_kl(kZPost, kZPre, Distribution::uniform(2)) ==
                Catch::Approx(0.25541281188299536).margin(1e-12));
    }
    SECTION("identical channels give zero for any input") {
        Rng rng(7);
        const auto ch = random_channel(3, 4, rng);
        REQUIRE(conditional_kl(ch, ch, random_distribution(3, rng)) == 0.0);
    }
    SECTION("infinity only propagates from supported rows") {
        // Row 0 has a support mismatch but zero input mass.
        const ChannelMatrix a({{1.0, 0.0}, {0.5, 0.5}});
        const ChannelMatrix b({{0.0, 1.0}, {0.5, 0.5}});
        REQUIRE(conditional_kl(a, b, Distribution::point_mass(2, 1)) == 0.0);
        REQUIRE(conditional_kl(a, b, Distribution::uniform(2)) == kInfinity);
    }
    SECTION("linear in the input law") {
        Rng rng(99);
        for (int trial = 0; trial < 50; ++trial) {
            const auto p1 = random_channel(3, 3, rng);
            const auto p0 = random_channel(3, 3, rng);
            const auto px = random_distribution(3, rng);
            const auto qx = random_distribution(3, rng);
            const double lam = rng.uniform01();
            std::vector<double> mix(3);
            for (std::size_t i = 0; i < 3; ++i) mix[i] = lam * px[i] + (1 - lam) * qx[i];
            const double lhs = conditional_kl(p1, p0, Distribution(mix));
            const double rhs = lam * conditional_kl(p1, p0, px) +
                               (1 - lam) * conditional_kl(p1, p0, qx);
            REQUIRE(lhs == Catch::Approx(rhs).margin(1e-12));
        }
    }
}

TEST_CASE("mutual information") {
    SECTION("noiseless identity channel at uniform input") {
        const ChannelMatrix ident({{1.0, 0.0}, {0.0, 1.0}});
        REQUIRE(mutual_information(Distribution::uniform(2), ident) ==
                Catch::Approx(std::log(2.0)).margin(1e-12));
    }
    SECTION("BSC(0.3) at uniform input") {
        REQUIRE(mutual_information(Distribution::uniform(2), ChannelMatrix::binary_symmetric(0.3)) ==
                Catch::Approx(0.0822828785050518).margin(1e-12));
    }
    SECTION("constant-output channel carries nothing") {
        const ChannelMatrix constant({{1.0, 0.0}, {1.0, 0.0}});
        Rng rng(5);
        REQUIRE(mutual_information(random_distribution(2, rng), constant) == 0.0);
    }
    SECTION("concave in the input law") {
        Rng rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            const auto ch = random_channel(3, 4, rng);
            const auto px = random_distribution(3, rng);
            const auto qx = random_distribution(3, rng);
            const double lam = rng.uniform01();
            std::vector<double> mix(3);
            for (std::size_t i = 0; i < 3; ++i) mix[i] = lam * px[i] + (1 - lam) * qx[i];
            const double interpolated_value = mutual_information(Distribution(mix), ch);
            const double value_interpolation = lam * mutual_information(px, ch) +
                                               (1 - lam) * mutual_information(qx, ch);
            REQUIRE(interpolated_value >= value_interpolation - 1e-10);
        }
    }
}

TEST_CASE("symbol costs") {
    const auto c = symbol_costs(kZPost, kZPre);
    REQUIRE(c[0] == 0.0);  // both rows are a point mass on y = 0
    REQUIRE(c[1] == Catch::Approx(0.5108256237659907).margin(1e-12));
    Rng rng(3);
    const auto same = random_channel(3, 3, rng);
    for (double v : symbol_costs(same, same)) REQUIRE(v == 0.0);
    SECTION("dot(costs, px) equals conditional_kl") {
        for (int trial = 0; trial < 50; ++trial) {
            const auto p1 = random_channel(4, 3, rng);
            const auto p0 = random_channel(4, 3, rng);
            const auto px = random_distribution(4, rng);
            const auto costs = symbol_costs(p1, p0);
            double dot = 0.0;
            for (std::size_t x = 0; x < 4; ++x) dot += px[x] * costs[x];
            REQUIRE(dot == Catch::Approx(conditional_kl(p1, p0, px)).margin(1e-12));
        }
    }
}
