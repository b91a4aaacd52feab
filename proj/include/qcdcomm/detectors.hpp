#pragma once

// Sequential detection statistics: the classic per-sample CuSum recursion,
// the subblock CuSum (SCS) that updates only at subblock boundaries, the
// parallel multi-state variant, and the one-sided block SPRT the SCS
// decomposes into. Detector states are single-owner sequential values.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "qcdcomm/prob.hpp"

namespace qcdcomm {

/// Stopping time sentinel for "never fired within the horizon" is n + 1,
/// carried by the runners below; the state structs use optional indices.

struct CusumState {
    double statistic = 0.0;  // W, always >= 0
    std::uint64_t index = 0;
    double threshold = 0.0;  // b, nats
    std::optional<std::uint64_t> stopped_at;

    bool stopped() const { return stopped_at.has_value(); }
};

/// W <- (W + llr)^+; fires when W >= b. The statistic freezes once stopped.
inline CusumState cusum_step(CusumState state, double llr) {
    if (state.stopped()) throw std::logic_error("cusum_step: detector already stopped");
    state.statistic = std::max(0.0, state.statistic + llr);
    state.index += 1;
    if (state.statistic >= state.threshold) state.stopped_at = state.index;
    return state;
}

struct SubblockCusumState {
    double statistic = 0.0;
    std::size_t subblock_length = 1;  // L
    double threshold = 0.0;
    std::uint64_t subblocks_done = 0;
    std::optional<std::uint64_t> stopped_at;  // sample index j L

    bool stopped() const { return stopped_at.has_value(); }
};

/// One update per completed subblock with the accumulated block LLR;
/// stopping index is recorded as the subblock-end sample index j L.
inline SubblockCusumState scs_update(SubblockCusumState state, double block_llr) {
    if (state.stopped()) throw std::logic_error("scs_update: detector already stopped");
    state.statistic = std::max(0.0, state.statistic + block_llr);
    state.subblocks_done += 1;
    if (state.statistic >= state.threshold)
        state.stopped_at = state.subblocks_done * state.subblock_length;
    return state;
}

/// Sum of per-sample LLRs over one subblock with saturating extended-real
/// arithmetic. A block needing both +inf and -inf would be an observation
/// impossible under either hypothesis and is rejected.
template <class Model, class X, class Y>
double block_llr(const Model& model, std::span<const X> inputs, std::span<const Y> outputs) {
    if (inputs.size() != outputs.size())
        throw std::invalid_argument("block_llr: length mismatch");
    double finite = 0.0;
    bool pos_inf = false, neg_inf = false;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const double v = model.llr(inputs[i], outputs[i]);
        if (v == kInfinity)
            pos_inf = true;
        else if (v == -kInfinity)
            neg_inf = true;
        else
            finite += v;
    }
    if (pos_inf && neg_inf)
        throw std::domain_error("block_llr: observation impossible under both hypotheses");
    if (pos_inf) return kInfinity;
    if (neg_inf) return -kInfinity;
    return finite;
}

/// Runs the SCS test over a full codeword/observation trace. Returns the
/// stopping time N in {L, 2L, ..., kL} or n + 1 when the threshold is never
/// reached within the horizon.
template <class Model, class X, class Y>
std::uint64_t run_scs(std::span<const X> codeword, std::span<const Y> observations,
                      const Model& model, std::size_t L, double b) {
    if (codeword.size() != observations.size())
        throw std::invalid_argument("run_scs: codeword/observation length mismatch");
    if (L < 1 || codeword.size() % L != 0)
        throw std::invalid_argument("run_scs: trace length must be a positive multiple of L");
    SubblockCusumState state;
    state.subblock_length = L;
    state.threshold = b;
    const std::size_t k = codeword.size() / L;
    for (std::size_t j = 0; j < k; ++j) {
        const double z = block_llr(model, codeword.subspan(j * L, L), observations.subspan(j * L, L));
        state = scs_update(state, z);
        if (state.stopped()) return *state.stopped_at;
    }
    return codeword.size() + 1;
}

/// Parallel SCS across one sensing pair per non-base state; the stopping
/// time is the minimum over the per-state tests on the shared trace.
template <class Model, class X, class Y>
std::uint64_t run_multi_state_scs(std::span<const X> codeword, std::span<const Y> observations,
                                  const std::vector<Model>& pairs, std::size_t L, double b) {
    if (pairs.empty()) throw std::invalid_argument("run_multi_state_scs: empty state set");
    std::uint64_t best = std::uint64_t(codeword.size()) + 1;
    for (const Model& m : pairs) best = std::min(best, run_scs(codeword, observations, m, L, b));
    return best;
}

/// One-sided SPRT over aligned subblock streams: first subblock index j >= 1
/// at which the cumulative, non-clamped block-LLR sum reaches b; nullopt
/// when the horizon ends first.
template <class Model, class X, class Y>
std::optional<std::uint64_t> run_sprt(std::span<const X> codeword_tail,
                                      std::span<const Y> observation_tail, const Model& model,
                                      std::size_t L, double b) {
    if (codeword_tail.size() != observation_tail.size())
        throw std::invalid_argument("run_sprt: length mismatch");
    if (L < 1 || codeword_tail.size() % L != 0)
        throw std::invalid_argument("run_sprt: trace length must be a positive multiple of L");
    double sum = 0.0;
    const std::size_t k = codeword_tail.size() / L;
    for (std::size_t j = 0; j < k; ++j) {
        const double z =
            block_llr(model, codeword_tail.subspan(j * L, L), observation_tail.subspan(j * L, L));
        if (z == kInfinity) return j + 1;
        if (z == -kInfinity)
            sum = -kInfinity;
        else if (sum != -kInfinity)
            sum += z;
        if (sum >= b) return j + 1;
    }
    return std::nullopt;
}

/// Threshold for a target false alarm rate: b = |log alpha| + log L.
/// Overshoot is ignored; empirical FAR should be reported alongside.
inline double threshold_for_far(double alpha, std::size_t L) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("threshold_for_far: alpha must be in (0, 1)");
    if (L < 1) throw std::invalid_argument("threshold_for_far: L must be >= 1");
    return std::abs(std::log(alpha)) + std::log(static_cast<double>(L));
}

}  // namespace qcdcomm
