#pragma once

// Observation models for the state-dependent broadcast channel: discrete
// law pairs, scalar Gaussian pairs (gain or variance change), MIMO Gaussian
// pairs, plus the passive-radar preprocessing chain that reduces to the
// scalar gain model. Models are immutable and shareable; rng streams are
// single-owner.

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "qcdcomm/prob.hpp"
#include "qcdcomm/rng.hpp"

namespace qcdcomm {

/// Deterministic state sequence: s_i = 0 for i < nu, s_i = 1 for i >= nu
/// (1-based sample indices). nu == kChangeNever means no change ever occurs.
struct StateSequence {
    static constexpr std::uint64_t kChangeNever = std::numeric_limits<std::uint64_t>::max();

    std::uint64_t change_point = kChangeNever;
    std::uint64_t horizon = 0;

    int state_at(std::uint64_t i) const { return i >= change_point ? 1 : 0; }
};

/// Pre-/post-change conditional laws over matching finite alphabets.
class DiscreteSensingPair {
  public:
    DiscreteSensingPair(ChannelMatrix pre, ChannelMatrix post)
        : p0_(std::move(pre)), p1_(std::move(post)) {
        require_same_alphabets(p0_, p1_);
        // gamma = max |log p1/p0| over (x, y) reachable under either state.
        llr_bound_ = 0.0;
        for (std::size_t x = 0; x < p0_.input_size() && llr_bound_ != kInfinity; ++x) {
            for (std::size_t y = 0; y < p0_.output_size(); ++y) {
                const double a0 = p0_(x, y), a1 = p1_(x, y);
                if (a0 == 0.0 && a1 == 0.0) continue;  // unreachable
                if (a0 == 0.0 || a1 == 0.0) {
                    llr_bound_ = kInfinity;
                    break;
                }
                llr_bound_ = std::max(llr_bound_, std::abs(std::log(a1 / a0)));
            }
        }
    }

    const ChannelMatrix& pre() const { return p0_; }
    const ChannelMatrix& post() const { return p1_; }
    std::size_t input_size() const { return p0_.input_size(); }
    std::size_t output_size() const { return p0_.output_size(); }

    /// gamma of the pair; +inf flags an unbounded-LLR model.
    double llr_bound() const { return llr_bound_; }
    bool bounded_llr() const { return llr_bound_ != kInfinity; }

    std::size_t sample(int state, std::size_t x, Rng& rng) const {
        const ChannelMatrix& law = state == 0 ? p0_ : p1_;
        if (x >= law.input_size()) throw std::out_of_range("sample: symbol out of alphabet");
        const Distribution& row = law.row(x);
        double u = rng.uniform01();
        double cum = 0.0;
        for (std::size_t y = 0; y + 1 < row.size(); ++y) {
            cum += row[y];
            if (u < cum) return y;
        }
        return row.size() - 1;
    }

    /// log p1(y|x) - log p0(y|x); +/-inf sentinel on one-sided support.
    double llr(std::size_t x, std::size_t y) const {
        const double a0 = p0_(x, y), a1 = p1_(x, y);
        if (a1 == 0.0 && a0 == 0.0) return 0.0;
        if (a0 == 0.0) return kInfinity;
        if (a1 == 0.0) return -kInfinity;
        return std::log(a1 / a0);
    }

    std::vector<double> costs() const { return symbol_costs(p1_, p0_); }

  private:
    ChannelMatrix p0_;
    ChannelMatrix p1_;
    double llr_bound_;
};

/// Scalar Gaussian sensing pair under an average power budget P.
///   gain change:     y = x + z pre-change, y = h x + z post-change, z ~ N(0,1)
///   variance change: y = x + z_s with z_s ~ N(0, sigma_s^2)
class ScalarGaussianPair {
  public:
    enum class Kind { gain_change, variance_change };

    static ScalarGaussianPair gain_change(double h, double power) {
        return ScalarGaussianPair(Kind::gain_change, h, 1.0, 1.0, power);
    }

    static ScalarGaussianPair variance_change(double sigma0_sq, double sigma1_sq, double power) {
        return ScalarGaussianPair(Kind::variance_change, 1.0, sigma0_sq, sigma1_sq, power);
    }

    Kind kind() const { return kind_; }
    double gain() const { return h_; }
    double sigma0_sq() const { return sigma0_sq_; }
    double sigma1_sq() const { return sigma1_sq_; }
    double power() const { return power_; }

    /// Noiseless observation; the zero-noise hook used by tests.
    double mean(int state, double x) const {
        return (kind_ == Kind::gain_change && state == 1) ? h_ * x : x;
    }

    double stddev(int state) const {
        if (kind_ == Kind::gain_change) return 1.0;
        return std::sqrt(state == 0 ? sigma0_sq_ : sigma1_sq_);
    }

    double sample(int state, double x, Rng& rng) const {
        return mean(state, x) + stddev(state) * rng.normal();
    }

    double llr(double x, double y) const {
        if (kind_ == Kind::gain_change) {
            // log N(y; hx, 1) - log N(y; x, 1)
            return (h_ - 1.0) * x * y + x * x * (1.0 - h_ * h_) / 2.0;
        }
        const double r = y - x;
        return 0.5 * std::log(sigma0_sq_ / sigma1_sq_) +
               r * r * (0.5 / sigma0_sq_ - 0.5 / sigma1_sq_);
    }

    /// c(x) = D(p1(.|x) || p0(.|x)).
    double symbol_cost(double x) const {
        if (kind_ == Kind::gain_change) {
            const double d = (h_ - 1.0) * x;
            return 0.5 * d * d;
        }
        return 0.5 * std::log(sigma0_sq_ / sigma1_sq_) + sigma1_sq_ / (2.0 * sigma0_sq_) - 0.5;
    }

  private:
    ScalarGaussianPair(Kind kind, double h, double s0, double s1, double power)
        : kind_(kind), h_(h), sigma0_sq_(s0), sigma1_sq_(s1), power_(power) {
        if (s0 <= 0.0 || s1 <= 0.0) throw std::invalid_argument("Gaussian variances must be > 0");
        if (power <= 0.0) throw std::invalid_argument("power budget must be > 0");
    }

    Kind kind_;
    double h_;
    double sigma0_sq_;
    double sigma1_sq_;
    double power_;
};

/// MIMO Gaussian sensing pair y = G_s x + z, z ~ N(0, I), with a
/// state-independent communication gain Gtilde and total power budget P.
class MimoGaussianPair {
  public:
    MimoGaussianPair(Eigen::MatrixXd g0, Eigen::MatrixXd g1, Eigen::MatrixXd gtilde, double power)
        : g0_(std::move(g0)), g1_(std::move(g1)), gtilde_(std::move(gtilde)), power_(power) {
        if (g0_.rows() != g1_.rows() || g0_.cols() != g1_.cols())
            throw std::invalid_argument("MimoGaussianPair: G0/G1 shape mismatch");
        if (gtilde_.cols() != g0_.cols())
            throw std::invalid_argument("MimoGaussianPair: Gtilde input dimension mismatch");
        if (power_ <= 0.0) throw std::invalid_argument("power budget must be > 0");
    }

    const Eigen::MatrixXd& g0() const { return g0_; }
    const Eigen::MatrixXd& g1() const { return g1_; }
    const Eigen::MatrixXd& comm_gain() const { return gtilde_; }
    double power() const { return power_; }
    Eigen::Index input_dim() const { return g0_.cols(); }

    /// Gamma = (G1 - G0)^T (G1 - G0).
    Eigen::MatrixXd gain_difference_gram() const {
        const Eigen::MatrixXd gbar = g1_ - g0_;
        return gbar.transpose() * gbar;
    }

    Eigen::VectorXd sample(int state, const Eigen::VectorXd& x, Rng& rng) const {
        const Eigen::MatrixXd& g = state == 0 ? g0_ : g1_;
        Eigen::VectorXd y = g * x;
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += rng.normal();
        return y;
    }

    double llr(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
        const Eigen::VectorXd r0 = y - g0_ * x;
        const Eigen::VectorXd r1 = y - g1_ * x;
        return 0.5 * (r0.squaredNorm() - r1.squaredNorm());
    }

    /// c(x) = 0.5 x^T Gamma x.
    double symbol_cost(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd d = (g1_ - g0_) * x;
        return 0.5 * d.squaredNorm();
    }

  private:
    Eigen::MatrixXd g0_;
    Eigen::MatrixXd g1_;
    Eigen::MatrixXd gtilde_;
    double power_;
};

struct PassiveRadarParams {
    std::complex<double> direct_gain;   // h0
    std::size_t direct_delay = 0;       // tau_d, in samples
    std::complex<double> target_gain;   // h (consumed downstream by the gain model)
    double doppler = 0.0;               // f, cycles per sample
    std::size_t target_delay = 0;       // tau, in samples
};

/// Preprocessed radar signal. Output index i corresponds to
///   y[i] = exp(-j 2 pi f (i + tau)) * (raw[i + tau] - h0 * x[i + tau - tau_d]),
/// emitted only where both raw and x indices exist, so the sequence may be
/// truncated at either end; first_index records the earliest emitted i.
struct PreprocessedSignal {
    std::size_t first_index = 0;
    std::vector<std::complex<double>> samples;
};

/// Direct-path subtraction and Doppler compensation for the bistatic radar
/// observation chain. After this step a noiseless post-change signal equals
/// target_gain * x[i] exactly, i.e. the model reduces to a scalar gain pair.
inline PreprocessedSignal passive_radar_preprocess(const std::vector<std::complex<double>>& raw,
                                                   const std::vector<std::complex<double>>& input,
                                                   const PassiveRadarParams& params) {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    PreprocessedSignal out;
    const std::size_t tau = params.target_delay;
    const std::size_t tau_d = params.direct_delay;
    out.first_index = tau_d > tau ? tau_d - tau : 0;
    for (std::size_t i = out.first_index;; ++i) {
        const std::size_t raw_idx = i + tau;
        const std::size_t in_idx = i + tau - tau_d;  // >= 0 by choice of first_index
        if (raw_idx >= raw.size() || in_idx >= input.size()) break;
        const std::complex<double> cleaned = raw[raw_idx] - params.direct_gain * input[in_idx];
        const double phase = -kTwoPi * params.doppler * static_cast<double>(raw_idx);
        out.samples.push_back(std::polar(1.0, phase) * cleaned);
    }
    return out;
}

}  // namespace qcdcomm
