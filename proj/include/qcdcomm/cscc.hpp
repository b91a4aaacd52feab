#pragma once

// Constant subblock-composition codebooks: type quantization, uniform
// sampling over a type class, codebook generation, the finite-L rate
// penalty, the sliding-window composition checker, and the flat text
// export format.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcdcomm/prob.hpp"
#include "qcdcomm/rng.hpp"

namespace qcdcomm {

using Symbol = std::uint32_t;

/// Per-symbol occurrence counts of a length-L subblock.
struct SubblockType {
    std::vector<std::size_t> counts;

    std::size_t length() const { return std::accumulate(counts.begin(), counts.end(), std::size_t{0}); }
    std::size_t alphabet_size() const { return counts.size(); }

    /// The induced distribution counts / L.
    Distribution induced() const {
        const double L = static_cast<double>(length());
        std::vector<double> p(counts.size());
        for (std::size_t a = 0; a < counts.size(); ++a) p[a] = static_cast<double>(counts[a]) / L;
        return Distribution(std::move(p));
    }
};

/// Nearest length-L type to px by largest-remainder rounding, ties broken by
/// symbol index. Total-variation distance to px is at most |X| / (2L).
inline SubblockType quantize_type(const Distribution& px, std::size_t L) {
    if (L < 1) throw std::invalid_argument("quantize_type: L must be >= 1");
    const std::size_t m = px.size();
    std::vector<std::size_t> counts(m);
    std::vector<std::pair<double, std::size_t>> remainders(m);
    std::size_t assigned = 0;
    for (std::size_t a = 0; a < m; ++a) {
        const double target = static_cast<double>(L) * px[a];
        counts[a] = static_cast<std::size_t>(std::floor(target));
        assigned += counts[a];
        remainders[a] = {target - std::floor(target), a};
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& u, const auto& v) {
        if (u.first != v.first) return u.first > v.first;
        return u.second < v.second;
    });
    for (std::size_t i = 0; assigned < L; ++i, ++assigned) counts[remainders[i].second] += 1;
    return SubblockType{std::move(counts)};
}

/// One draw uniform over the type class of t: an unbiased shuffle of the
/// fixed multiset. Uniform over permutations induces uniform over distinct
/// arrangements because each arrangement is generated by the same number
/// prod_a counts[a]! of permutations.
inline std::vector<Symbol> sample_subblock(const SubblockType& t, Rng& rng) {
    std::vector<Symbol> block;
    block.reserve(t.length());
    for (std::size_t a = 0; a < t.counts.size(); ++a)
        block.insert(block.end(), t.counts[a], static_cast<Symbol>(a));
    for (std::size_t i = block.size(); i > 1; --i)
        std::swap(block[i - 1], block[rng.uniform_index(i)]);
    return block;
}

struct CsccCodebook {
    std::size_t subblock_length = 0;   // L
    std::size_t num_subblocks = 0;     // k; codeword length n = k L
    SubblockType type;
    std::uint64_t seed = 0;
    std::vector<std::vector<Symbol>> codewords;

    std::size_t block_length() const { return subblock_length * num_subblocks; }
    std::size_t num_messages() const { return codewords.size(); }
    std::size_t alphabet_size() const { return type.alphabet_size(); }
};

inline constexpr std::size_t kDefaultCodebookSymbolCap = std::size_t{1} << 26;

/// num_messages codewords of k independent uniform subblocks each. Every
/// length-L subblock of every codeword has exactly composition t.
inline CsccCodebook generate_codebook(const SubblockType& t, std::size_t k,
                                      std::size_t num_messages, std::uint64_t seed,
                                      std::size_t symbol_cap = kDefaultCodebookSymbolCap) {
    if (k < 1 || num_messages < 1)
        throw std::invalid_argument("generate_codebook: k and num_messages must be >= 1");
    const std::size_t L = t.length();
    if (L < 1) throw std::invalid_argument("generate_codebook: empty type");
    if (num_messages > symbol_cap / (k * L))
        throw std::length_error("generate_codebook: codebook exceeds configured symbol cap");
    CsccCodebook cb;
    cb.subblock_length = L;
    cb.num_subblocks = k;
    cb.type = t;
    cb.seed = seed;
    Rng rng(seed);
    cb.codewords.resize(num_messages);
    for (auto& cw : cb.codewords) {
        cw.reserve(k * L);
        for (std::size_t j = 0; j < k; ++j) {
            const auto block = sample_subblock(t, rng);
            cw.insert(cw.end(), block.begin(), block.end());
        }
    }
    return cb;
}

/// Finite-L coding rate penalty r(L, pX) in nats per channel use, evaluated
/// with the bounded factor u at its upper end u = 1:
///   r = (s - 1) log(2 pi L) / (2L) + (1 / 2L) sum_{a: p(a)>0} log p(a)
///       + s / (12 L ln 2),
/// where s is the support size of the type.
inline double rate_penalty(const SubblockType& t) {
    const double L = static_cast<double>(t.length());
    std::size_t support = 0;
    double log_sum = 0.0;
    for (std::size_t a = 0; a < t.counts.size(); ++a) {
        if (t.counts[a] == 0) continue;
        ++support;
        log_sum += std::log(static_cast<double>(t.counts[a]) / L);
    }
    const double s = static_cast<double>(support);
    return (s - 1.0) * std::log(2.0 * std::numbers::pi * L) / (2.0 * L) + log_sum / (2.0 * L) +
           s / (12.0 * L * std::numbers::ln2);
}

/// Smallest window size L0 (searched over multiples of `step`) such that
/// every length-L0 window of the codeword has composition within relative
/// eps of px: |pi(a|window) - px(a)| <= eps px(a) for all a. Returns nullopt
/// when no window size up to the codeword length works.
inline std::optional<std::size_t> sliding_window_check(std::span<const Symbol> codeword,
                                                       const Distribution& px, double eps,
                                                       std::size_t step = 1) {
    if (eps <= 0.0) throw std::invalid_argument("sliding_window_check: eps must be > 0");
    if (step < 1) throw std::invalid_argument("sliding_window_check: step must be >= 1");
    const std::size_t n = codeword.size();
    for (Symbol s : codeword) {
        if (s >= px.size() || px[s] == 0.0)
            throw std::invalid_argument("sliding_window_check: codeword symbol outside supp(px)");
    }
    for (std::size_t window = step; window <= n; window += step) {
        std::vector<std::size_t> counts(px.size(), 0);
        bool ok = true;
        const double w = static_cast<double>(window);
        auto window_ok = [&]() {
            for (std::size_t a = 0; a < px.size(); ++a) {
                const double pi = static_cast<double>(counts[a]) / w;
                if (std::abs(pi - px[a]) > eps * px[a]) return false;
            }
            return true;
        };
        for (std::size_t i = 0; i < window; ++i) counts[codeword[i]] += 1;
        ok = window_ok();
        for (std::size_t i = window; ok && i < n; ++i) {
            counts[codeword[i]] += 1;
            counts[codeword[i - window]] -= 1;
            ok = window_ok();
        }
        if (ok) return window;
    }
    return std::nullopt;
}

/// Flat text export: optional leading '#' comment lines, a header line
/// "cscc <L> <k> <alphabet> <seed>", then one codeword per line as
/// space-separated symbol indices.
inline void write_codebook(std::ostream& os, const CsccCodebook& cb,
                           const std::string& comment = {}) {
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "cscc " << cb.subblock_length << ' ' << cb.num_subblocks << ' ' << cb.alphabet_size()
       << ' ' << cb.seed << '\n';
    for (const auto& cw : cb.codewords) {
        for (std::size_t i = 0; i < cw.size(); ++i) os << (i ? " " : "") << cw[i];
        os << '\n';
    }
}

inline CsccCodebook read_codebook(std::istream& is) {
    while (is >> std::ws && is.peek() == '#') {
        std::string comment;
        std::getline(is, comment);
    }
    std::string tag;
    CsccCodebook cb;
    std::size_t alphabet = 0;
    if (!(is >> tag >> cb.subblock_length >> cb.num_subblocks >> alphabet >> cb.seed) ||
        tag != "cscc")
        throw std::runtime_error("read_codebook: bad header");
    const std::size_t n = cb.subblock_length * cb.num_subblocks;
    std::vector<Symbol> cw;
    Symbol s;
    while (is >> s) {
        if (s >= alphabet) throw std::runtime_error("read_codebook: symbol out of alphabet");
        cw.push_back(s);
        if (cw.size() == n) {
            cb.codewords.push_back(cw);
            cw.clear();
        }
    }
    if (!cw.empty()) throw std::runtime_error("read_codebook: truncated codeword");
    if (cb.codewords.empty()) throw std::runtime_error("read_codebook: no codewords");
    // Recover the type from the first subblock and verify the composition
    // invariant across every subblock of every codeword.
    cb.type.counts.assign(alphabet, 0);
    for (std::size_t i = 0; i < cb.subblock_length; ++i) cb.type.counts[cb.codewords[0][i]] += 1;
    std::vector<std::size_t> counts(alphabet);
    for (const auto& word : cb.codewords) {
        for (std::size_t j = 0; j < cb.num_subblocks; ++j) {
            counts.assign(alphabet, 0);
            for (std::size_t i = 0; i < cb.subblock_length; ++i)
                counts[word[j * cb.subblock_length + i]] += 1;
            if (counts != cb.type.counts)
                throw std::runtime_error("read_codebook: subblock composition mismatch");
        }
    }
    return cb;
}

}  // namespace qcdcomm
