#pragma once

// Exact finite-alphabet probability primitives: entropy, KL divergence,
// conditional KL, mutual information and per-symbol sensing cost. All
// information quantities are in nats. +inf (IEEE) is the extended-real
// sentinel for divergences with support mismatch; weighted sums skip
// zero-weight terms so 0 * inf never forms.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qcdcomm {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Probability vector over a finite alphabet. Entries are validated
/// non-negative and summing to 1 within 1e-12, then renormalized exactly.
class Distribution {
  public:
    static constexpr double kSumTolerance = 1e-12;

    explicit Distribution(std::vector<double> probs) : probs_(std::move(probs)) {
        if (probs_.empty()) throw std::invalid_argument("Distribution: empty alphabet");
        double sum = 0.0;
        for (double p : probs_) {
            if (!(p >= 0.0)) throw std::invalid_argument("Distribution: negative entry");
            sum += p;
        }
        if (std::abs(sum - 1.0) > kSumTolerance)
            throw std::invalid_argument("Distribution: entries sum to " + std::to_string(sum));
        for (double& p : probs_) p /= sum;
    }

    static Distribution uniform(std::size_t n) {
        return Distribution(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    static Distribution point_mass(std::size_t n, std::size_t at) {
        std::vector<double> p(n, 0.0);
        p.at(at) = 1.0;
        return Distribution(std::move(p));
    }

    std::size_t size() const { return probs_.size(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& probs() const { return probs_; }

  private:
    std::vector<double> probs_;
};

/// Row-stochastic conditional law p(y|x): one Distribution per input symbol.
class ChannelMatrix {
  public:
    explicit ChannelMatrix(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw std::invalid_argument("ChannelMatrix: no rows");
        rows_.reserve(rows.size());
        for (const auto& r : rows) {
            rows_.emplace_back(r);
            if (rows_.back().size() != rows_.front().size())
                throw std::invalid_argument("ChannelMatrix: ragged rows");
        }
    }

    /// Binary symmetric channel with crossover probability eps.
    static ChannelMatrix binary_symmetric(double eps) {
        return ChannelMatrix({{1.0 - eps, eps}, {eps, 1.0 - eps}});
    }

    /// Binary Z-channel: input 0 always outputs 0; input 1 outputs 0 with
    /// probability eps.
    static ChannelMatrix z_channel(double eps) {
        return ChannelMatrix({{1.0, 0.0}, {eps, 1.0 - eps}});
    }

    std::size_t input_size() const { return rows_.size(); }
    std::size_t output_size() const { return rows_.front().size(); }
    const Distribution& row(std::size_t x) const { return rows_.at(x); }
    double operator()(std::size_t x, std::size_t y) const { return rows_[x][y]; }

  private:
    std::vector<Distribution> rows_;
};

inline void require_same_alphabet(const Distribution& p, const Distribution& q) {
    if (p.size() != q.size())
        throw std::invalid_argument("alphabet mismatch between distributions");
}

inline void require_same_alphabets(const ChannelMatrix& a, const ChannelMatrix& b) {
    if (a.input_size() != b.input_size() || a.output_size() != b.output_size())
        throw std::invalid_argument("alphabet mismatch between channel matrices");
}

/// -sum p log p with 0 log 0 := 0.
inline double entropy(const Distribution& p) {
    double h = 0.0;
    for (double pi : p.probs())
        if (pi > 0.0) h -= pi * std::log(pi);
    return h;
}

/// sum p log(p/q); +inf when p puts mass where q does not.
inline double kl_divergence(const Distribution& p, const Distribution& q) {
    require_same_alphabet(p, q);
    double d = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) return kInfinity;
        d += p[i] * std::log(p[i] / q[i]);
    }
    return d;
}

/// Per-symbol sensing cost c(x) = D(p1(.|x) || p0(.|x)); entries may be +inf.
inline std::vector<double> symbol_costs(const ChannelMatrix& p1, const ChannelMatrix& p0) {
    require_same_alphabets(p1, p0);
    std::vector<double> c(p1.input_size());
    for (std::size_t x = 0; x < p1.input_size(); ++x) c[x] = kl_divergence(p1.row(x), p0.row(x));
    return c;
}

/// D(p1 || p0 | px) = sum_x px(x) D(p1(.|x) || p0(.|x)). Rows with px(x) = 0
/// are skipped, so +inf propagates only from rows actually in the support.
inline double conditional_kl(const ChannelMatrix& p1, const ChannelMatrix& p0,
                             const Distribution& px) {
    require_same_alphabets(p1, p0);
    if (px.size() != p1.input_size())
        throw std::invalid_argument("alphabet mismatch between input law and channels");
    double d = 0.0;
    for (std::size_t x = 0; x < px.size(); ++x) {
        if (px[x] == 0.0) continue;
        const double row = kl_divergence(p1.row(x), p0.row(x));
        if (row == kInfinity) return kInfinity;
        d += px[x] * row;
    }
    return d;
}

/// Output law sum_x px(x) p(.|x).
inline Distribution output_distribution(const Distribution& px, const ChannelMatrix& ch) {
    if (px.size() != ch.input_size())
        throw std::invalid_argument("alphabet mismatch between input law and channel");
    std::vector<double> py(ch.output_size(), 0.0);
    for (std::size_t x = 0; x < px.size(); ++x)
        for (std::size_t y = 0; y < py.size(); ++y) py[y] += px[x] * ch(x, y);
    return Distribution(std::move(py));
}

/// I(X; Y) in nats, computed as sum_x px(x) D(p(.|x) || py). Each term is a
/// KL divergence, so the result is nonnegative down to roundoff.
inline double mutual_information(const Distribution& px, const ChannelMatrix& ch) {
    const Distribution py = output_distribution(px, ch);
    double mi = 0.0;
    for (std::size_t x = 0; x < px.size(); ++x) {
        if (px[x] == 0.0) continue;
        double term = 0.0;
        for (std::size_t y = 0; y < py.size(); ++y) {
            const double pxy = ch(x, y);
            if (pxy > 0.0) term += pxy * std::log(pxy / py[y]);
        }
        mi += px[x] * term;
    }
    return mi;
}

}  // namespace qcdcomm
