#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <vector>

#include "qcdcomm/channels.hpp"
#include "qcdcomm/detectors.hpp"
#include "qcdcomm/rng.hpp"

using namespace qcdcomm;

namespace {

// Test-only model whose llr is a plain lookup table, so traces can be
// constructed and mutated freely.
struct LookupModel {
    std::vector<std::vector<double>> table;
    double llr(std::size_t x, std::size_t y) const { return table[x][y]; }
};

const DiscreteSensingPair kZPair(ChannelMatrix::z_channel(0.1), ChannelMatrix::z_channel(0.5));

}  // namespace

TEST_CASE("cusum_step") {
    SECTION("positive-part clamp") {
        CusumState s{.statistic = 0.5, .threshold = 10.0};
        s = cusum_step(s, -1.0);
        REQUIRE(s.statistic == 0.0);
        REQUIRE_FALSE(s.stopped());
    }
    SECTION("threshold zero fires at the first step") {
        CusumState s{.threshold = 0.0};
        s = cusum_step(s, 0.0);
        REQUIRE(s.stopped_at == 1);
    }
    SECTION("hand arithmetic") {
        CusumState s{.statistic = 1.7, .threshold = 3.0};
        s = cusum_step(s, 1.61);
        REQUIRE(s.statistic == Catch::Approx(3.31).margin(1e-12));
        REQUIRE(s.stopped());
    }
    SECTION("stepping a stopped detector is rejected") {
        CusumState s{.threshold = 0.0};
        s = cusum_step(s, 1.0);
        REQUIRE_THROWS_AS(cusum_step(s, 1.0), std::logic_error);
    }
}

TEST_CASE("scs_update and run_scs") {
    SECTION("Z-channel, all-ones codeword, L = 1, observations (0, 0), b = 3") {
        // Oracle: llr(1, 0) = ln 5 per block, so W = 2 ln 5 = 3.2189 >= 3 at
        // the second boundary.
        const std::vector<std::size_t> cw{1, 1};
        const std::vector<std::size_t> obs{0, 0};
        REQUIRE(run_scs<DiscreteSensingPair, std::size_t, std::size_t>(cw, obs, kZPair, 1, 3.0) ==
                2);
    }
    SECTION("zero llr never stops") {
        LookupModel zero{{{0.0}}};
        const std::vector<std::size_t> cw(12, 0), obs(12, 0);
        REQUIRE(run_scs<LookupModel, std::size_t, std::size_t>(cw, obs, zero, 3, 0.5) == 13);
    }
    SECTION("threshold zero stops at the first boundary") {
        LookupModel zero{{{0.0}}};
        const std::vector<std::size_t> cw(12, 0), obs(12, 0);
        REQUIRE(run_scs<LookupModel, std::size_t, std::size_t>(cw, obs, zero, 3, 0.0) == 3);
    }
    SECTION("length mismatch and bad horizon are rejected") {
        LookupModel zero{{{0.0}}};
        const std::vector<std::size_t> cw(6, 0), obs(5, 0);
        REQUIRE_THROWS_AS((run_scs<LookupModel, std::size_t, std::size_t>(cw, obs, zero, 3, 1.0)),
                          std::invalid_argument);
        const std::vector<std::size_t> obs7(7, 0);
        REQUIRE_THROWS_AS(
            (run_scs<LookupModel, std::size_t, std::size_t>(std::vector<std::size_t>(7, 0), obs7,
                                                            zero, 3, 1.0)),
            std::invalid_argument);
    }
    SECTION("update after stop is rejected") {
        SubblockCusumState s{.subblock_length = 2, .threshold = 0.0};
        s = scs_update(s, 0.0);
        REQUIRE(s.stopped_at == 2);
        REQUIRE_THROWS_AS(scs_update(s, 1.0), std::logic_error);
    }
}

TEST_CASE("multi-state scs") {
    const std::vector<std::size_t> cw{1, 1, 1, 1};
    const std::vector<std::size_t> obs{0, 0, 0, 0};
    const DiscreteSensingPair strong(ChannelMatrix::z_channel(0.1), ChannelMatrix::z_channel(0.5));
    const DiscreteSensingPair weak(ChannelMatrix::z_channel(0.1), ChannelMatrix::z_channel(0.3));

    SECTION("single alternative state reduces to run_scs") {
        const std::vector<DiscreteSensingPair> one{strong};
        REQUIRE((run_multi_state_scs<DiscreteSensingPair, std::size_t, std::size_t>(
                    cw, obs, one, 1, 3.0)) ==
                (run_scs<DiscreteSensingPair, std::size_t, std::size_t>(cw, obs, strong, 1, 3.0)));
    }
    SECTION("duplicated state changes nothing") {
        const std::vector<DiscreteSensingPair> twice{strong, strong};
        REQUIRE((run_multi_state_scs<DiscreteSensingPair, std::size_t, std::size_t>(
                    cw, obs, twice, 1, 3.0)) ==
                (run_scs<DiscreteSensingPair, std::size_t, std::size_t>(cw, obs, strong, 1, 3.0)));
    }
    SECTION("sample-wise dominant llr decides the minimum") {
        // On the all-zeros observation trace, strong's llr ln 5 beats weak's
        // ln 3 sample-wise, so the parallel test fires with strong.
        const std::vector<DiscreteSensingPair> both{weak, strong};
        const auto n_strong =
            run_scs<DiscreteSensingPair, std::size_t, std::size_t>(cw, obs, strong, 1, 3.0);
        REQUIRE((run_multi_state_scs<DiscreteSensingPair, std::size_t, std::size_t>(
                    cw, obs, both, 1, 3.0)) == n_strong);
    }
    SECTION("empty state set is rejected") {
        const std::vector<DiscreteSensingPair> none;
        REQUIRE_THROWS_AS((run_multi_state_scs<DiscreteSensingPair, std::size_t, std::size_t>(
                              cw, obs, none, 1, 3.0)),
                          std::invalid_argument);
    }
}

TEST_CASE("run_sprt") {
    LookupModel zero{{{0.0}}};
    const std::vector<std::size_t> cw(9, 0), obs(9, 0);
    SECTION("all-zero llr never crosses a positive threshold") {
        REQUIRE_FALSE(
            (run_sprt<LookupModel, std::size_t, std::size_t>(cw, obs, zero, 3, 0.5)).has_value());
    }
    SECTION("a single crossing block gives j = 1") {
        LookupModel big{{{2.0}}};
        REQUIRE(run_sprt<LookupModel, std::size_t, std::size_t>(cw, obs, big, 3, 5.0) == 1);
    }
}

namespace {

LookupModel random_lookup(Rng& rng, std::size_t ny) {
    LookupModel m;
    m.table.resize(1, std::vector<double>(ny));
    for (double& v : m.table[0]) v = 4.0 * rng.uniform01() - 2.0;
    return m;
}

}  // namespace

TEST_CASE("SCS decomposes into a family of SPRTs") {
    // N'_SCS = min_j (N'_SPRT,j + j - 1), exactly, on random traces.
    Rng rng(314);
    for (int trial = 0; trial < 1200; ++trial) {
        const std::size_t L = 1 + rng.uniform_index(3);
        const std::size_t k = 2 + rng.uniform_index(14);
        const std::size_t ny = 3;
        const LookupModel model = random_lookup(rng, ny);
        std::vector<std::size_t> cw(k * L, 0), obs(k * L);
        for (auto& y : obs) y = rng.uniform_index(ny);
        const double b = 3.0 * rng.uniform01();

        const auto n_scs =
            run_scs<LookupModel, std::size_t, std::size_t>(cw, obs, model, L, b);
        std::uint64_t best_blocks = k + 1;
        for (std::size_t j = 0; j < k; ++j) {
            const auto tail = run_sprt<LookupModel, std::size_t, std::size_t>(
                std::span<const std::size_t>(cw).subspan(j * L),
                std::span<const std::size_t>(obs).subspan(j * L), model, L, b);
            if (tail.has_value())
                best_blocks = std::min<std::uint64_t>(best_blocks, *tail + j);
        }
        const std::uint64_t n_from_sprt = best_blocks <= k ? best_blocks * L : k * L + 1;
        REQUIRE(n_scs == n_from_sprt);
    }
}

TEST_CASE("clamp monotonicity") {
    Rng rng(159);
    SECTION("raising any llr never increases the stopping time") {
        for (int trial = 0; trial < 400; ++trial) {
            const std::size_t L = 1 + rng.uniform_index(3);
            const std::size_t k = 2 + rng.uniform_index(10);
            LookupModel model = random_lookup(rng, 4);
            std::vector<std::size_t> cw(k * L, 0), obs(k * L);
            for (auto& y : obs) y = rng.uniform_index(4);
            const double b = 2.5 * rng.uniform01();
            const auto before =
                run_scs<LookupModel, std::size_t, std::size_t>(cw, obs, model, L, b);
            // Raise one table entry.
            const std::size_t y = rng.uniform_index(4);
            model.table[0][y] += 1.0 + rng.uniform01();
            const auto after =
                run_scs<LookupModel, std::size_t, std::size_t>(cw, obs, model, L, b);
            REQUIRE(after <= before);
        }
    }
    SECTION("raising the start value never increases the stopping time") {
        for (int trial = 0; trial < 400; ++trial) {
            const std::size_t k = 2 + rng.uniform_index(12);
            std::vector<double> blocks(k);
            for (double& z : blocks) z = 3.0 * rng.uniform01() - 1.5;
            const double b = 2.0 * rng.uniform01() + 0.2;
            auto stop_from = [&](double w0) -> std::uint64_t {
                SubblockCusumState s{.statistic = w0, .subblock_length = 1, .threshold = b};
                for (double z : blocks) {
                    s = scs_update(s, z);
                    if (s.stopped()) return *s.stopped_at;
                }
                return k + 1;
            };
            const double raised = 0.5 + rng.uniform01();
            REQUIRE(stop_from(raised) <= stop_from(0.0));
        }
    }
}

TEST_CASE("threshold_for_far") {
    REQUIRE(threshold_for_far(std::exp(-1.0), 1) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(threshold_for_far(0.01, 2) ==
            Catch::Approx(std::abs(std::log(0.01)) + std::log(2.0)).margin(1e-12));
    REQUIRE_THROWS_AS(threshold_for_far(0.0, 2), std::invalid_argument);
    REQUIRE_THROWS_AS(threshold_for_far(1.5, 2), std::invalid_argument);
}

TEST_CASE("block llr saturates on one-sided support") {
    const DiscreteSensingPair mismatched(ChannelMatrix({{1.0, 0.0}}),
                                         ChannelMatrix({{0.5, 0.5}}));
    const std::vector<std::size_t> cw{0, 0};
    SECTION("+inf fires immediately") {
        const std::vector<std::size_t> obs{0, 1};
        REQUIRE(run_scs<DiscreteSensingPair, std::size_t, std::size_t>(cw, obs, mismatched, 2,
                                                                       100.0) == 2);
    }
    SECTION("-inf clamps to zero") {
        const DiscreteSensingPair reversed(ChannelMatrix({{0.5, 0.5}}),
                                           ChannelMatrix({{1.0, 0.0}}));
        const std::vector<std::size_t> obs{0, 1};
        REQUIRE(run_scs<DiscreteSensingPair, std::size_t, std::size_t>(cw, obs, reversed, 2,
                                                                       0.5) == 3);
    }
}
