#pragma once

// Monte Carlo harness over the broadcast channel: worst-case delay and
// false-alarm-rate estimation for the subblock CuSum, delay-slope fitting,
// desk-scale ML decoding for the communication branch, and the modified
// Wald identity check. Runs are embarrassingly parallel; every run derives
// its own rng stream from (master seed, codeword, change point, replicate)
// so results are independent of scheduling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qcdcomm/channels.hpp"
#include "qcdcomm/cscc.hpp"
#include "qcdcomm/detectors.hpp"
#include "qcdcomm/prob.hpp"
#include "qcdcomm/rng.hpp"

namespace qcdcomm {

/// Runs fn(0), ..., fn(count - 1) across worker threads. Each index owns its
/// output slot, so aggregation order cannot change results.
template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    threads = std::min(threads, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += threads) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// One simulated trajectory: change point, stopping time (n + 1 when the
/// detector never fired) and the SCS statistic at each subblock boundary.
struct DetectorRun {
    std::uint64_t change_point = StateSequence::kChangeNever;
    std::uint64_t stopping_time = 0;
    bool fired = false;
    std::vector<std::pair<std::uint64_t, double>> trace;  // (boundary sample index, W)
};

namespace detail {

/// Simulates blocks start_block, start_block + 1, ... of one codeword with
/// the state switching at nu, running the SCS with W = 0 at the starting
/// boundary. Returns the absolute stopping sample index, or n + 1.
template <class Model, class X>
std::uint64_t scs_stopping_time(std::span<const X> codeword, const Model& model, std::uint64_t nu,
                                std::size_t L, double b, std::size_t start_block, Rng& rng,
                                std::vector<std::pair<std::uint64_t, double>>* trace = nullptr) {
    const std::size_t k = codeword.size() / L;
    SubblockCusumState state;
    state.subblock_length = L;
    state.threshold = b;
    state.subblocks_done = start_block;
    for (std::size_t j = start_block; j < k; ++j) {
        double z = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
            const std::uint64_t i = static_cast<std::uint64_t>(j * L + t) + 1;  // 1-based
            const auto y = model.sample(i >= nu ? 1 : 0, codeword[j * L + t], rng);
            z += model.llr(codeword[j * L + t], y);
        }
        state = scs_update(state, z);
        if (trace) trace->emplace_back((j + 1) * L, state.statistic);
        if (state.stopped()) return *state.stopped_at;
    }
    return codeword.size() + 1;
}

}  // namespace detail

/// Samples one full trajectory with the state switching at nu and runs the
/// SCS over it.
template <class Model, class X>
DetectorRun simulate_run(std::span<const X> codeword, const Model& model, std::uint64_t nu,
                         std::size_t L, double b, Rng& rng, bool keep_trace = false) {
    if (L < 1 || codeword.empty() || codeword.size() % L != 0)
        throw std::invalid_argument("simulate_run: codeword length must be a positive multiple of L");
    if (nu != StateSequence::kChangeNever && (nu < 1 || nu > codeword.size()))
        throw std::invalid_argument("simulate_run: change point outside [1, n] and not infinity");
    DetectorRun run;
    run.change_point = nu;
    run.stopping_time = detail::scs_stopping_time(codeword, model, nu, L, b, 0, rng,
                                                  keep_trace ? &run.trace : nullptr);
    run.fired = run.stopping_time <= codeword.size();
    return run;
}

struct SimOptions {
    std::size_t runs = 1000;             // replicates per cell
    std::uint64_t seed = 1;
    std::size_t codeword_sample = 16;    // worst-over-codewords subset size
    double max_censored_fraction = 0.5;  // flag threshold per cell
    std::uint64_t far_sample_cap = 1000000;  // renewal cap per FAR run, in samples
    std::size_t threads = 0;             // 0 = available parallelism
};

namespace detail {

inline std::vector<std::size_t> sampled_codewords(const CsccCodebook& cb, std::size_t want,
                                                  std::uint64_t seed) {
    const std::size_t total = cb.num_messages();
    if (want == 0 || want >= total) {
        std::vector<std::size_t> all(total);
        for (std::size_t i = 0; i < total; ++i) all[i] = i;
        return all;
    }
    // Deterministic Fisher-Yates prefix.
    std::vector<std::size_t> idx(total);
    for (std::size_t i = 0; i < total; ++i) idx[i] = i;
    Rng rng = Rng::derive(seed, 0x636f6465);
    for (std::size_t i = 0; i < want; ++i)
        std::swap(idx[i], idx[i + rng.uniform_index(total - i)]);
    idx.resize(want);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct MeanAccumulator {
    double sum = 0.0, sum_sq = 0.0;
    std::size_t n = 0;

    void add(double v) {
        sum += v;
        sum_sq += v * v;
        ++n;
    }
    double mean() const { return n ? sum / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN(); }
    double se() const {
        if (n < 2) return std::numeric_limits<double>::quiet_NaN();
        const double m = mean();
        const double var = std::max(0.0, (sum_sq - static_cast<double>(n) * m * m) /
                                             static_cast<double>(n - 1));
        return std::sqrt(var / static_cast<double>(n));
    }
};

}  // namespace detail

struct FarEstimate {
    double far = 0.0;          // max over sampled codewords of 1 / mean stopping time
    double far_upper95 = 0.0;  // delta-method 95% upper confidence bound for that codeword
    double mean_stop = 0.0;
    double mean_stop_se = 0.0;
    std::size_t worst_codeword = 0;
    std::size_t censored = 0;  // runs that hit the sample cap (counted at the cap)
    std::size_t runs = 0;
    bool lower_bound_only = false;  // every run censored: far is only bounded below cap^-1
};

/// FAR = 1 / E_inf(N), maximized over sampled codewords. Under nu = infinity
/// the SCS regenerates from W = 0 after each no-fire horizon (renewal
/// restarts) and a run accumulates samples until the first fire or the cap.
/// Censored runs enter the mean at the cap, which biases the mean down and
/// the FAR estimate up, keeping the calibration check conservative.
template <class Model>
FarEstimate estimate_far(const CsccCodebook& cb, const Model& model, double b, SimOptions opt) {
    if (opt.runs < 1) throw std::invalid_argument("estimate_far: runs must be >= 1");
    const auto picks = detail::sampled_codewords(cb, opt.codeword_sample, opt.seed);
    const std::size_t L = cb.subblock_length;
    const std::size_t n = cb.block_length();

    struct Cell {
        detail::MeanAccumulator acc;
        std::size_t censored = 0;
    };
    std::vector<Cell> cells(picks.size());
    parallel_for(picks.size(), opt.threads, [&](std::size_t ci) {
        const auto& cw = cb.codewords[picks[ci]];
        Cell& cell = cells[ci];
        for (std::size_t rep = 0; rep < opt.runs; ++rep) {
            Rng rng = Rng::derive(opt.seed, picks[ci], StateSequence::kChangeNever, rep);
            std::uint64_t total = 0;
            bool fired = false;
            while (total < opt.far_sample_cap) {
                const std::uint64_t stop = detail::scs_stopping_time(
                    std::span<const Symbol>(cw), model, StateSequence::kChangeNever, L, b, 0, rng);
                if (stop <= n) {
                    total += stop;
                    fired = true;
                    break;
                }
                total += n;
            }
            if (!fired) {
                ++cell.censored;
                total = opt.far_sample_cap;
            }
            cell.acc.add(static_cast<double>(total));
        }
    });

    FarEstimate est;
    est.runs = opt.runs * picks.size();
    bool first = true;
    for (std::size_t ci = 0; ci < cells.size(); ++ci) {
        est.censored += cells[ci].censored;
        const double mean = cells[ci].acc.mean();
        const double far = 1.0 / mean;
        if (first || far > est.far) {
            first = false;
            est.far = far;
            est.mean_stop = mean;
            est.mean_stop_se = cells[ci].acc.se();
            est.worst_codeword = picks[ci];
            const double lo = mean - 1.96 * est.mean_stop_se;
            est.far_upper95 = lo > 0.0 ? 1.0 / lo : kInfinity;
        }
    }
    if (est.censored == est.runs) {
        est.lower_bound_only = true;
        est.far = 1.0 / static_cast<double>(opt.far_sample_cap);
        est.far_upper95 = est.far;
    }
    return est;
}

struct DelayCell {
    std::size_t codeword_index = 0;
    std::uint64_t change_point = 1;
    double mean_delay = 0.0;  // over uncensored runs; lower bound on the true mean
    double se = 0.0;
    std::size_t censored = 0;
    std::size_t runs = 0;
};

struct DelayEstimate {
    double worst_mean = 0.0;
    double worst_se = 0.0;
    std::size_t worst_codeword = 0;
    std::uint64_t worst_change_point = 1;
    std::size_t total_censored = 0;
    bool censoring_flagged = false;
    std::vector<DelayCell> cells;
};

/// Change-point sweep that covers subblock-boundary offsets jL + 1 and
/// mid-subblock offsets for the first few subblocks.
inline std::vector<std::uint64_t> default_change_points(std::size_t L, std::size_t subblocks = 3) {
    std::vector<std::uint64_t> nus;
    for (std::size_t j = 0; j < subblocks; ++j) {
        nus.push_back(j * L + 1);
        if (L >= 2) nus.push_back(j * L + 1 + L / 2);
    }
    std::sort(nus.begin(), nus.end());
    nus.erase(std::unique(nus.begin(), nus.end()), nus.end());
    return nus;
}

/// Worst-case average detection delay. Each (codeword, nu) cell starts the
/// SCS at W = 0 at the subblock boundary preceding nu -- the exact worst
/// case over complete pre-change blocks, because the clamped recursion is
/// monotone in its start value. Within the straddling block the pre-change
/// samples are drawn from p0, so that block's LLR follows the mixed law.
/// Averages (N - nu + 1)^+ per cell and reports the maximum over cells;
/// runs with N = n + 1 are right-censored.
template <class Model>
DelayEstimate estimate_wadd(const CsccCodebook& cb, const Model& model, double b,
                            const std::vector<std::uint64_t>& change_points, SimOptions opt) {
    if (opt.runs < 1) throw std::invalid_argument("estimate_wadd: runs must be >= 1");
    const std::size_t L = cb.subblock_length;
    const std::size_t n = cb.block_length();
    for (std::uint64_t nu : change_points)
        if (nu < 1 || nu > n)
            throw std::invalid_argument("estimate_wadd: change point outside [1, n]");
    const auto picks = detail::sampled_codewords(cb, opt.codeword_sample, opt.seed);

    DelayEstimate est;
    est.cells.resize(picks.size() * change_points.size());
    parallel_for(est.cells.size(), opt.threads, [&](std::size_t idx) {
        const std::size_t ci = idx / change_points.size();
        const std::uint64_t nu = change_points[idx % change_points.size()];
        const auto& cw = cb.codewords[picks[ci]];
        const std::size_t start_block = static_cast<std::size_t>((nu - 1) / L);
        detail::MeanAccumulator acc;
        std::size_t censored = 0;
        for (std::size_t rep = 0; rep < opt.runs; ++rep) {
            Rng rng = Rng::derive(opt.seed, picks[ci], nu, rep);
            const std::uint64_t stop = detail::scs_stopping_time(std::span<const Symbol>(cw),
                                                                 model, nu, L, b, start_block, rng);
            if (stop > n) {
                ++censored;
                continue;
            }
            acc.add(stop >= nu ? static_cast<double>(stop - nu + 1) : 0.0);
        }
        DelayCell& cell = est.cells[idx];
        cell.codeword_index = picks[ci];
        cell.change_point = nu;
        cell.runs = opt.runs;
        cell.censored = censored;
        cell.mean_delay = acc.mean();  // NaN when every run censored
        cell.se = acc.se();
    });

    bool first = true;
    for (const auto& cell : est.cells) {
        est.total_censored += cell.censored;
        if (static_cast<double>(cell.censored) >
            opt.max_censored_fraction * static_cast<double>(cell.runs))
            est.censoring_flagged = true;
        if (std::isnan(cell.mean_delay)) continue;
        if (first || cell.mean_delay > est.worst_mean) {
            first = false;
            est.worst_mean = cell.mean_delay;
            est.worst_se = cell.se;
            est.worst_codeword = cell.codeword_index;
            est.worst_change_point = cell.change_point;
        }
    }
    if (first) {
        est.worst_mean = std::numeric_limits<double>::quiet_NaN();
        est.censoring_flagged = true;
    }
    return est;
}

struct SlopeFit {
    double slope = 0.0;      // symbols of delay per nat of threshold
    double intercept = 0.0;
    std::vector<double> thresholds;
    std::vector<double> wadds;
    std::vector<double> residuals;
    bool censoring_flagged = false;
};

/// Least-squares fit of WADD against the threshold b. Asymptotically the
/// slope approaches 1 / D(p1 || p0 | pX).
template <class Model>
SlopeFit fit_delay_slope(const CsccCodebook& cb, const Model& model,
                         const std::vector<double>& b_grid,
                         const std::vector<std::uint64_t>& change_points, SimOptions opt) {
    if (b_grid.size() < 3) throw std::invalid_argument("fit_delay_slope: need >= 3 thresholds");
    for (std::size_t i = 0; i + 1 < b_grid.size(); ++i)
        if (!(b_grid[i] < b_grid[i + 1]))
            throw std::invalid_argument("fit_delay_slope: thresholds must be increasing");
    SlopeFit fit;
    fit.thresholds = b_grid;
    for (double b : b_grid) {
        const DelayEstimate est = estimate_wadd(cb, model, b, change_points, opt);
        fit.censoring_flagged |= est.censoring_flagged;
        fit.wadds.push_back(est.worst_mean);
    }
    if (fit.censoring_flagged) {
        fit.slope = fit.intercept = std::numeric_limits<double>::quiet_NaN();
        return fit;
    }
    const double n = static_cast<double>(b_grid.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < b_grid.size(); ++i) {
        sx += b_grid[i];
        sy += fit.wadds[i];
        sxx += b_grid[i] * b_grid[i];
        sxy += b_grid[i] * fit.wadds[i];
    }
    fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    fit.intercept = (sy - fit.slope * sx) / n;
    for (std::size_t i = 0; i < b_grid.size(); ++i)
        fit.residuals.push_back(fit.wadds[i] - (fit.intercept + fit.slope * b_grid[i]));
    return fit;
}

/// Maximum-likelihood message estimate over a desk-scale codebook:
/// argmax_m sum_i log p(y_i | x_i(m)), ties broken by message index.
inline std::size_t ml_decode(const CsccCodebook& cb, const ChannelMatrix& comm,
                             std::span<const std::size_t> observations) {
    if (observations.size() != cb.block_length())
        throw std::invalid_argument("ml_decode: observation length mismatch");
    if (cb.num_messages() > (std::size_t{1} << 16))
        throw std::invalid_argument("ml_decode: codebook exceeds the desk-scale 2^16 messages");
    std::size_t best = 0;
    double best_score = -kInfinity;
    for (std::size_t m = 0; m < cb.num_messages(); ++m) {
        double score = 0.0;
        for (std::size_t i = 0; i < observations.size() && score != -kInfinity; ++i) {
            const double p = comm(cb.codewords[m][i], observations[i]);
            score = p > 0.0 ? score + std::log(p) : -kInfinity;
        }
        if (m == 0 || score > best_score) {
            best = m;
            best_score = score;
        }
    }
    return best;
}

/// Per-run trace dump: CSV of (sample index, statistic) at each boundary.
inline void write_trace_csv(std::ostream& os, const DetectorRun& run) {
    os << "i,W\n";
    for (const auto& [i, w] : run.trace) os << i << ',' << w << '\n';
}

struct WaldConfig {
    std::vector<Symbol> block_input;  // x-subblock driving each block LLR Z_i
    std::size_t change_offset = 0;    // pre-change samples inside the FIRST block (0 = i.i.d.)
    double threshold = 1.0;           // one-sided SPRT threshold b
    std::size_t runs = 10000;
    std::size_t horizon_blocks = 100000;  // safety cap; intended configs stop long before
    std::uint64_t seed = 1;
};

struct WaldReport {
    double lhs = 0.0, lhs_se = 0.0;  // E[sum_{i=1}^N Z_i]
    double rhs = 0.0, rhs_se = 0.0;  // E(Z2) E(N) + (E(Z1) - E(Z2)) P(1 <= N)
    double e_z1 = 0.0, e_z2 = 0.0, e_n = 0.0, p_n_ge_1 = 1.0;
    double corollary_bound = 0.0;  // E(Z2) E(N) - 2c with c = gamma L
    bool identity_within_3se = false;
    bool corollary_holds = false;
    std::size_t capped_runs = 0;
};

/// Monte Carlo check of the modified Wald identity for a one-sided SPRT
/// whose first block may follow a different (straddling) law than the rest.
inline WaldReport wald_identity_harness(const DiscreteSensingPair& pair, const WaldConfig& cfg) {
    if (!pair.bounded_llr())
        throw std::domain_error("wald_identity_harness: unbounded-LLR model rejected");
    if (cfg.block_input.empty()) throw std::invalid_argument("wald_identity_harness: empty block");
    const std::size_t L = cfg.block_input.size();

    auto draw_block = [&](Rng& rng, bool first) {
        double z = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
            const int state = first && t < cfg.change_offset ? 0 : 1;
            const std::size_t y = pair.sample(state, cfg.block_input[t], rng);
            z += pair.llr(cfg.block_input[t], y);
        }
        return z;
    };

    WaldReport rep;
    detail::MeanAccumulator lhs, n_acc, z1_acc, z2_acc;
    for (std::size_t run = 0; run < cfg.runs; ++run) {
        Rng rng = Rng::derive(cfg.seed, 1, 0, run);
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t j = 1; j <= cfg.horizon_blocks; ++j) {
            sum += draw_block(rng, j == 1);
            n = j;
            if (sum >= cfg.threshold) break;
        }
        if (sum < cfg.threshold) ++rep.capped_runs;
        lhs.add(sum);
        n_acc.add(static_cast<double>(n));
    }
    for (std::size_t run = 0; run < cfg.runs; ++run) {
        Rng rng1 = Rng::derive(cfg.seed, 2, 0, run);
        Rng rng2 = Rng::derive(cfg.seed, 3, 0, run);
        z1_acc.add(draw_block(rng1, true));
        z2_acc.add(draw_block(rng2, false));
    }

    rep.lhs = lhs.mean();
    rep.lhs_se = lhs.se();
    rep.e_z1 = z1_acc.mean();
    rep.e_z2 = z2_acc.mean();
    rep.e_n = n_acc.mean();
    rep.p_n_ge_1 = 1.0;  // the SPRT stopping time is always >= 1
    rep.rhs = rep.e_z2 * rep.e_n + (rep.e_z1 - rep.e_z2) * rep.p_n_ge_1;
    const double var_rhs = rep.e_n * rep.e_n * z2_acc.se() * z2_acc.se() +
                           rep.e_z2 * rep.e_z2 * n_acc.se() * n_acc.se() +
                           z1_acc.se() * z1_acc.se();
    rep.rhs_se = std::sqrt(var_rhs);
    const double combined = std::sqrt(rep.lhs_se * rep.lhs_se + var_rhs);
    rep.identity_within_3se = std::abs(rep.lhs - rep.rhs) <= 3.0 * combined;
    rep.corollary_bound =
        rep.e_z2 * rep.e_n - 2.0 * pair.llr_bound() * static_cast<double>(L);
    rep.corollary_holds = rep.lhs >= rep.corollary_bound - 3.0 * combined;
    return rep;
}

}  // namespace qcdcomm
