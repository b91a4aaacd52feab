#pragma once

// Achievable rate-delay regions. Discrete channels go through the
// cost-constrained Blahut-Arimoto iteration swept over the multiplier
// lambda; scalar Gaussian pairs have closed forms; MIMO Gaussian pairs are
// solved by projected gradient ascent over the input covariance.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qcdcomm/channels.hpp"
#include "qcdcomm/prob.hpp"

namespace qcdcomm {

/// One point on the rate-delay boundary together with what attains it.
struct TradeoffPoint {
    double rate = 0.0;    // nats per channel use
    double delta = 0.0;   // nats
    double lambda = 0.0;  // multiplier that produced the point (NaN for closed forms)
    std::optional<Distribution> input;  // attaining input law (discrete channels)
    std::vector<double> allocation;     // attaining eigen-coordinate powers (Gaussian channels)
    bool converged = true;
    std::size_t iterations = 0;
};

/// Rate-delay line achieved by alternating a capacity-achieving code with
/// the best pure sensing symbol: (lambda C, (1 - lambda) delta_star).
struct TimesharingChord {
    double capacity = 0.0;
    double delta_star = 0.0;

    /// Chord rate at a given delta, clamped to the [0, delta_star] segment.
    double rate_at(double delta) const {
        if (delta_star <= 0.0) return delta <= 0.0 ? capacity : 0.0;
        if (delta <= 0.0) return capacity;
        if (delta >= delta_star) return 0.0;
        return capacity * (1.0 - delta / delta_star);
    }

    std::pair<double, double> at(double share) const {  // share = time fraction on communication
        return {(1.0 - share) * delta_star, share * capacity};
    }
};

struct RegionCurve {
    std::vector<TradeoffPoint> points;  // sorted by delta ascending, rate nonincreasing
    TradeoffPoint capacity_end;         // (Delta(C), C)
    TradeoffPoint sensing_end;          // (Delta*, R(Delta*))
    TimesharingChord chord;
    bool all_converged = true;
    bool monotone_ok = true;
    bool concave_ok = true;
    bool dominates_chord = true;

    /// Piecewise-linear boundary rate; flat at capacity left of the first
    /// knot and clamped to the last knot's rate on the right.
    double rate_at(double delta) const {
        if (points.empty()) throw std::logic_error("RegionCurve::rate_at: empty curve");
        if (delta <= points.front().delta) return points.front().rate;
        for (std::size_t i = 0; i + 1 < points.size(); ++i) {
            const auto& a = points[i];
            const auto& b = points[i + 1];
            if (delta <= b.delta) {
                if (b.delta == a.delta) return std::max(a.rate, b.rate);
                const double t = (delta - a.delta) / (b.delta - a.delta);
                return a.rate + t * (b.rate - a.rate);
            }
        }
        return points.back().rate;
    }
};

struct BaOptions {
    double tol = 1e-10;
    std::size_t max_iter = 100000;
};

struct BaResult {
    TradeoffPoint point;
    bool objective_monotone = true;           // J(r, q) nondecreasing across iterations
    std::vector<std::size_t> excluded_symbols;  // infinite-cost symbols kept out of the support
};

/// Cost-constrained Blahut-Arimoto: alternates the posterior update
///   q(x|y) = r(x) p(y|x) / sum_x' r(x') p(y|x')
/// with the input update
///   r(x) proportional to exp( sum_y p(y|x) log q(x|y) + lambda c(x) )
/// and returns (R, Delta) = (I(r), sum_x r(x) c(x)) at the fixed point.
/// Symbols with infinite cost are excluded from the support up front and
/// reported; the iteration starts uniform over the remaining symbols.
inline BaResult blahut_arimoto_constrained(const ChannelMatrix& comm,
                                           const std::vector<double>& costs, double lambda,
                                           BaOptions opt = {}) {
    const std::size_t m = comm.input_size();
    const std::size_t ny = comm.output_size();
    if (costs.size() != m)
        throw std::invalid_argument("blahut_arimoto_constrained: cost vector size mismatch");
    if (!(lambda >= 0.0)) throw std::invalid_argument("blahut_arimoto_constrained: lambda < 0");
    if (!(opt.tol > 0.0)) throw std::invalid_argument("blahut_arimoto_constrained: tol <= 0");

    BaResult result;
    std::vector<double> r(m, 0.0);
    std::size_t support = 0;
    for (std::size_t x = 0; x < m; ++x) {
        if (costs[x] == kInfinity)
            result.excluded_symbols.push_back(x);
        else
            ++support;
    }
    if (support == 0)
        throw std::domain_error("blahut_arimoto_constrained: every symbol has infinite cost");
    for (std::size_t x = 0; x < m; ++x)
        if (costs[x] != kInfinity) r[x] = 1.0 / static_cast<double>(support);

    std::vector<double> py(ny), expo(m);
    std::vector<std::vector<double>> q(m, std::vector<double>(ny, 0.0));
    double j_prev = -kInfinity;
    bool converged = false;
    std::size_t it = 0;
    for (; it < opt.max_iter; ++it) {
        // Posterior update. r(x) > 0 and p(y|x) > 0 imply py > 0.
        std::fill(py.begin(), py.end(), 0.0);
        for (std::size_t x = 0; x < m; ++x) {
            if (r[x] == 0.0) continue;
            for (std::size_t y = 0; y < ny; ++y) py[y] += r[x] * comm(x, y);
        }
        for (std::size_t x = 0; x < m; ++x)
            for (std::size_t y = 0; y < ny; ++y)
                q[x][y] = (r[x] > 0.0 && comm(x, y) > 0.0) ? r[x] * comm(x, y) / py[y] : 0.0;
        // Input update with max-subtracted softmax; a symbol whose mass has
        // underflowed to zero stays at zero (its exponent is -inf).
        double emax = -kInfinity;
        for (std::size_t x = 0; x < m; ++x) {
            if (r[x] == 0.0) {
                expo[x] = -kInfinity;
                continue;
            }
            double e = lambda * costs[x];
            for (std::size_t y = 0; y < ny; ++y)
                if (comm(x, y) > 0.0) e += comm(x, y) * std::log(q[x][y]);
            expo[x] = e;
            emax = std::max(emax, e);
        }
        double z = 0.0;
        for (std::size_t x = 0; x < m; ++x) z += r[x] == 0.0 ? 0.0 : std::exp(expo[x] - emax);
        for (std::size_t x = 0; x < m; ++x)
            r[x] = r[x] == 0.0 ? 0.0 : std::exp(expo[x] - emax) / z;
        // Objective J(r, q) with the q from this iteration.
        double j_val = 0.0;
        for (std::size_t x = 0; x < m; ++x) {
            if (r[x] == 0.0) continue;
            for (std::size_t y = 0; y < ny; ++y)
                if (comm(x, y) > 0.0) j_val += r[x] * comm(x, y) * std::log(q[x][y] / r[x]);
            j_val += lambda * r[x] * costs[x];
        }
        if (j_prev != -kInfinity && j_val < j_prev - 1e-12) result.objective_monotone = false;
        if (j_prev != -kInfinity && std::abs(j_val - j_prev) < opt.tol) {
            converged = true;
            ++it;
            break;
        }
        j_prev = j_val;
    }

    Distribution input(std::move(r));
    double delta = 0.0;
    for (std::size_t x = 0; x < m; ++x)
        if (input[x] > 0.0) delta += input[x] * costs[x];
    result.point.rate = mutual_information(input, comm);
    result.point.delta = delta;
    result.point.lambda = lambda;
    result.point.input = std::move(input);
    result.point.converged = converged;
    result.point.iterations = it;
    return result;
}

/// Best delay slope over pure input symbols: (max_x c(x), argmax), ties
/// broken by symbol index. May return +inf when some symbol has infinite
/// cost; errors only when every cost is infinite.
inline std::pair<double, std::size_t> delta_star(const std::vector<double>& costs) {
    if (costs.empty()) throw std::invalid_argument("delta_star: empty cost vector");
    bool any_finite = false;
    for (double c : costs) any_finite |= (c != kInfinity);
    if (!any_finite) throw std::domain_error("delta_star: every symbol has infinite cost");
    std::size_t best = 0;
    for (std::size_t x = 1; x < costs.size(); ++x)
        if (costs[x] > costs[best]) best = x;
    return {costs[best], best};
}

inline std::pair<double, std::size_t> delta_star(const DiscreteSensingPair& pair) {
    return delta_star(pair.costs());
}

inline TimesharingChord timesharing_chord(double capacity, double dstar) {
    if (capacity < 0.0 || dstar < 0.0)
        throw std::invalid_argument("timesharing_chord: negative endpoint");
    return TimesharingChord{capacity, dstar};
}

struct RegionOptions {
    std::vector<double> lambda_grid;  // empty -> default geometric grid
    BaOptions ba;
    double gap_fraction = 0.02;      // bisect lambda gaps wider than this times delta*
    std::size_t max_bisections = 400;
};

/// Geometric lambda spacing over [lo, hi] plus lambda = 0.
inline std::vector<double> default_lambda_grid(std::size_t knots = 60, double lo = 1e-3,
                                               double hi = 1e3) {
    std::vector<double> grid;
    grid.reserve(knots + 1);
    grid.push_back(0.0);
    for (std::size_t i = 0; i < knots; ++i) {
        const double t = knots == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(knots - 1);
        grid.push_back(lo * std::pow(hi / lo, t));
    }
    return grid;
}

namespace detail {

inline void verify_curve_invariants(RegionCurve& curve) {
    constexpr double slack = 1e-9;
    for (std::size_t i = 0; i + 1 < curve.points.size(); ++i)
        if (curve.points[i + 1].rate > curve.points[i].rate + slack) curve.monotone_ok = false;
    for (std::size_t i = 0; i + 2 < curve.points.size(); ++i) {
        const auto& a = curve.points[i];
        const auto& b = curve.points[i + 1];
        const auto& c = curve.points[i + 2];
        if (c.delta == a.delta) continue;
        const double t = (b.delta - a.delta) / (c.delta - a.delta);
        if (b.rate < a.rate + t * (c.rate - a.rate) - slack) curve.concave_ok = false;
    }
    for (const auto& p : curve.points)
        if (p.rate < curve.chord.rate_at(p.delta) - slack) curve.dominates_chord = false;
}

}  // namespace detail

/// Sweeps the constrained Blahut-Arimoto over the lambda grid, bisecting
/// where consecutive delta gaps exceed gap_fraction * delta_star, and
/// appends the exact endpoints (Delta(C), C) and (Delta*, R(Delta*)).
inline RegionCurve region_sweep(const ChannelMatrix& comm, const DiscreteSensingPair& pair,
                                RegionOptions opt = {}) {
    const std::vector<double> costs = pair.costs();
    for (double c : costs)
        if (c == kInfinity)
            throw std::domain_error(
                "region_sweep: infinite-cost symbol present; the rate-delay boundary is "
                "degenerate (run blahut_arimoto_constrained directly for exclusions)");
    const auto [dstar, dstar_symbol] = delta_star(costs);

    RegionCurve curve;
    std::vector<double> grid = opt.lambda_grid.empty() ? default_lambda_grid() : opt.lambda_grid;
    if (grid.empty()) throw std::invalid_argument("region_sweep: empty lambda grid");
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

    std::vector<TradeoffPoint> knots;
    auto solve = [&](double lambda) {
        BaResult res = blahut_arimoto_constrained(comm, costs, lambda, opt.ba);
        curve.all_converged &= res.point.converged;
        knots.push_back(std::move(res.point));
    };
    for (double lambda : grid) solve(lambda);

    auto by_delta = [](const TradeoffPoint& a, const TradeoffPoint& b) {
        return a.delta < b.delta;
    };
    std::sort(knots.begin(), knots.end(), by_delta);
    if (dstar > 0.0) {
        std::size_t inserted = 0;
        bool changed = true;
        while (changed && inserted < opt.max_bisections) {
            changed = false;
            const std::size_t count = knots.size();
            for (std::size_t i = 0; i + 1 < count && inserted < opt.max_bisections; ++i) {
                if (knots[i + 1].delta - knots[i].delta <= opt.gap_fraction * dstar) continue;
                const double la = knots[i].lambda, lb = knots[i + 1].lambda;
                const double mid = (la > 0.0 && lb > 0.0) ? std::sqrt(la * lb) : 0.5 * (la + lb);
                if (mid == la || mid == lb) continue;
                solve(mid);
                ++inserted;
                changed = true;
            }
            std::sort(knots.begin(), knots.end(), by_delta);
        }
    }

    // Exact sensing endpoint: capacity restricted to the argmax-cost symbols.
    std::vector<double> restricted(costs.size(), kInfinity);
    for (std::size_t x = 0; x < costs.size(); ++x)
        if (costs[x] >= dstar - 1e-12) restricted[x] = 0.0;
    BaResult sensing = blahut_arimoto_constrained(comm, restricted, 0.0, opt.ba);
    curve.sensing_end = sensing.point;
    curve.sensing_end.delta = dstar;
    curve.sensing_end.lambda = kInfinity;
    curve.all_converged &= sensing.point.converged;

    // Capacity endpoint is the lambda = 0 knot.
    const TradeoffPoint& cap = *std::min_element(
        knots.begin(), knots.end(),
        [](const TradeoffPoint& a, const TradeoffPoint& b) { return a.lambda < b.lambda; });
    curve.capacity_end = cap;
    curve.chord = timesharing_chord(cap.rate, dstar);

    // Assemble: flat start at (0, C), deduplicated knots, sensing endpoint.
    // The start is a presentation point for the flat segment; it carries no
    // attaining law (the capacity law sits at (Delta(C), C)).
    TradeoffPoint origin;
    origin.rate = cap.rate;
    origin.delta = 0.0;
    origin.lambda = cap.lambda;
    curve.points.push_back(std::move(origin));
    for (auto& p : knots) {
        if (!curve.points.empty() && std::abs(p.delta - curve.points.back().delta) < 1e-10)
            continue;
        curve.points.push_back(std::move(p));
    }
    if (std::abs(curve.points.back().delta - dstar) < 1e-10) curve.points.pop_back();
    curve.points.push_back(curve.sensing_end);
    detail::verify_curve_invariants(curve);
    return curve;
}

/// Closed-form scalar Gaussian region: the rectangle corner (C, Delta*) is
/// attained by the N(0, P) input, so the boundary is flat at capacity.
inline RegionCurve scalar_gaussian_region(const ScalarGaussianPair& model) {
    const double P = model.power();
    const double capacity = 0.5 * std::log1p(P);
    double dstar = 0.0;
    if (model.kind() == ScalarGaussianPair::Kind::gain_change) {
        const double g = model.gain() - 1.0;
        dstar = 0.5 * g * g * P;
    } else {
        dstar = 0.5 * std::log(model.sigma0_sq() / model.sigma1_sq()) +
                model.sigma1_sq() / (2.0 * model.sigma0_sq()) - 0.5;
    }
    RegionCurve curve;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    TradeoffPoint corner;
    corner.rate = capacity;
    corner.delta = dstar;
    corner.lambda = nan;
    corner.allocation = {P};
    TradeoffPoint origin = corner;
    origin.delta = 0.0;
    curve.points = {origin, corner};
    curve.capacity_end = corner;
    curve.sensing_end = corner;
    curve.chord = timesharing_chord(capacity, dstar);
    detail::verify_curve_invariants(curve);
    return curve;
}

namespace detail {

/// Waterfilling power allocation: maximize sum 0.5 log(1 + g_i p_i) under
/// sum p_i <= P, p_i >= 0.
inline std::vector<double> waterfill(const std::vector<double>& gains, double budget) {
    const std::size_t m = gains.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return gains[a] > gains[b]; });
    std::vector<double> p(m, 0.0);
    for (std::size_t active = m; active >= 1; --active) {
        if (gains[order[active - 1]] <= 0.0) continue;
        double inv_sum = 0.0;
        for (std::size_t i = 0; i < active; ++i) inv_sum += 1.0 / gains[order[i]];
        const double level = (budget + inv_sum) / static_cast<double>(active);
        if (level - 1.0 / gains[order[active - 1]] < 0.0) continue;
        for (std::size_t i = 0; i < active; ++i) p[order[i]] = level - 1.0 / gains[order[i]];
        break;
    }
    return p;
}

/// Dykstra projection onto {p >= 0} ∩ {sum p <= P} ∩ {0.5 a.p >= delta}.
inline std::vector<double> project_allocation(std::vector<double> z, const std::vector<double>& a,
                                              double budget, double delta,
                                              std::size_t sweeps = 256) {
    const std::size_t m = z.size();
    std::vector<std::vector<double>> residual(3, std::vector<double>(m, 0.0));
    double a_norm2 = 0.0;
    for (double ai : a) a_norm2 += 0.25 * ai * ai;  // halfspace normal is a/2
    std::vector<double> y(m);
    for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
        double change = 0.0;
        for (std::size_t s = 0; s < 3; ++s) {
            for (std::size_t i = 0; i < m; ++i) y[i] = z[i] + residual[s][i];
            std::vector<double> proj = y;
            if (s == 0) {
                for (double& v : proj) v = std::max(0.0, v);
            } else if (s == 1) {
                double excess = -budget;
                for (double v : y) excess += v;
                if (excess > 0.0)
                    for (double& v : proj) v -= excess / static_cast<double>(m);
            } else if (a_norm2 > 0.0) {
                double value = 0.0;
                for (std::size_t i = 0; i < m; ++i) value += 0.5 * a[i] * y[i];
                if (value < delta)
                    for (std::size_t i = 0; i < m; ++i)
                        proj[i] += (delta - value) * 0.5 * a[i] / a_norm2;
            }
            for (std::size_t i = 0; i < m; ++i) {
                residual[s][i] = y[i] - proj[i];
                change += std::abs(proj[i] - z[i]);
                z[i] = proj[i];
            }
        }
        if (change < 1e-15) break;
    }
    return z;
}

struct AllocationSolve {
    std::vector<double> allocation;
    double rate = 0.0;
    bool converged = false;
};

/// Exact feasibility repair: clip to the orthant, rescale onto the budget,
/// and if the sensing constraint still fails, blend toward the allocation
/// that attains delta_star (all power on the top cost eigendirection). The
/// repaired point is feasible, so its rate is an honest achievable value.
inline void repair_allocation(std::vector<double>& p, const std::vector<double>& cost_gains,
                              double budget, double delta) {
    double total = 0.0;
    for (double& v : p) {
        v = std::max(0.0, v);
        total += v;
    }
    if (total > budget && total > 0.0)
        for (double& v : p) v *= budget / total;
    auto sensing = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) s += 0.5 * cost_gains[i] * p[i];
        return s;
    };
    const double current = sensing();
    if (current >= delta) return;
    std::size_t top = 0;
    for (std::size_t i = 1; i < cost_gains.size(); ++i)
        if (cost_gains[i] > cost_gains[top]) top = i;
    const double dstar = 0.5 * cost_gains[top] * budget;
    if (dstar <= current) return;  // nothing more to gain; knot is infeasible
    const double t = std::min(1.0, (delta - current) / (dstar - current));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] *= 1.0 - t;
    p[top] += t * budget;
}

/// Projected gradient ascent for max sum 0.5 log(1 + d_i p_i) over the
/// allocation polytope, with multi-start and a final feasibility repair.
inline AllocationSolve maximize_rate_allocation(const std::vector<double>& rate_gains,
                                                const std::vector<double>& cost_gains,
                                                double budget, double delta,
                                                const std::vector<std::vector<double>>& starts) {
    const std::size_t m = rate_gains.size();
    auto rate_of = [&](const std::vector<double>& p) {
        double f = 0.0;
        for (std::size_t i = 0; i < m; ++i) f += 0.5 * std::log1p(rate_gains[i] * p[i]);
        return f;
    };
    double max_gain = 0.0;
    for (double d : rate_gains) max_gain = std::max(max_gain, d);
    const double step = max_gain > 0.0 ? 2.0 / (max_gain * max_gain) : 1.0;

    AllocationSolve best;
    best.rate = -kInfinity;
    for (const auto& start : starts) {
        std::vector<double> p = project_allocation(start, cost_gains, budget, delta);
        bool converged = false;
        for (std::size_t it = 0; it < 4000; ++it) {
            std::vector<double> next(m);
            for (std::size_t i = 0; i < m; ++i)
                next[i] = p[i] + step * 0.5 * rate_gains[i] / (1.0 + rate_gains[i] * p[i]);
            next = project_allocation(std::move(next), cost_gains, budget, delta);
            double diff = 0.0;
            for (std::size_t i = 0; i < m; ++i) diff = std::max(diff, std::abs(next[i] - p[i]));
            p = std::move(next);
            if (diff < 1e-13) {
                converged = true;
                break;
            }
        }
        repair_allocation(p, cost_gains, budget, delta);
        const double f = rate_of(p);
        if (f > best.rate) best = AllocationSolve{std::move(p), f, converged};
    }
    return best;
}

}  // namespace detail

/// Rate-delay boundary for the MIMO Gaussian pair: max R(Sigma) subject to
/// 0.5 tr(Gamma Sigma) >= Delta, tr Sigma <= P, Sigma PSD, solved over a
/// grid of Delta knots. When Gtilde^T Gtilde commutes with Gamma the
/// covariance is restricted to the shared eigenbasis (optimal by a Fischer
/// determinant bound); otherwise a full symmetric parameterization is used.
inline RegionCurve mimo_region(const MimoGaussianPair& model, std::size_t knots = 41) {
    if (knots < 2) throw std::invalid_argument("mimo_region: need at least 2 knots");
    const double P = model.power();
    const Eigen::MatrixXd gamma = model.gain_difference_gram();
    const Eigen::MatrixXd a = model.comm_gain().transpose() * model.comm_gain();
    const Eigen::Index m = gamma.rows();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gamma);
    if (eig.info() != Eigen::Success) throw std::runtime_error("mimo_region: eigensolver failed");
    // Reorder eigenpairs descending.
    Eigen::VectorXd lam(m);
    Eigen::MatrixXd u(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        lam[i] = eig.eigenvalues()[m - 1 - i];
        u.col(i) = eig.eigenvectors().col(m - 1 - i);
    }
    const double lam_max = std::max(0.0, lam[0]);
    const double dstar = 0.5 * lam_max * P;

    // Capacity and its sensing level via waterfilling over Gtilde's modes.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(model.comm_gain(), Eigen::ComputeFullV);
    std::vector<double> comm_gains(m, 0.0);
    for (Eigen::Index i = 0; i < svd.singularValues().size() && i < m; ++i)
        comm_gains[i] = svd.singularValues()[i] * svd.singularValues()[i];
    const std::vector<double> cap_alloc = detail::waterfill(comm_gains, P);
    double capacity = 0.0;
    Eigen::MatrixXd sigma_cap = Eigen::MatrixXd::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        capacity += 0.5 * std::log1p(comm_gains[i] * cap_alloc[i]);
        sigma_cap += cap_alloc[i] * svd.matrixV().col(i) * svd.matrixV().col(i).transpose();
    }
    const double delta_at_capacity = 0.5 * (gamma * sigma_cap).trace();

    const Eigen::MatrixXd a_in_u = u.transpose() * a * u;
    const double scale = std::max(1.0, a.cwiseAbs().maxCoeff() * gamma.cwiseAbs().maxCoeff());
    const bool commuting = ((a * gamma - gamma * a).cwiseAbs().maxCoeff() <= 1e-10 * scale) &&
                           ((a_in_u - a_in_u.diagonal().asDiagonal().toDenseMatrix())
                                .cwiseAbs()
                                .maxCoeff() <= 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff()));

    RegionCurve curve;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    if (commuting) {
        std::vector<double> rate_gains(m), cost_gains(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            rate_gains[i] = std::max(0.0, a_in_u(i, i));
            cost_gains[i] = std::max(0.0, lam[i]);
        }
        const std::vector<double> wf = detail::waterfill(rate_gains, P);
        for (std::size_t j = 0; j < knots; ++j) {
            const double delta =
                dstar * static_cast<double>(j) / static_cast<double>(knots - 1);
            std::vector<std::vector<double>> starts;
            starts.push_back(wf);
            std::vector<double> sensing_start(m, 0.0);
            sensing_start[0] = P;
            starts.push_back(std::move(sensing_start));
            starts.push_back(std::vector<double>(m, P / static_cast<double>(m)));
            const auto solve =
                detail::maximize_rate_allocation(rate_gains, cost_gains, P, delta, starts);
            TradeoffPoint point;
            point.rate = solve.rate;
            point.delta = delta;
            point.lambda = nan;
            point.allocation = solve.allocation;
            point.converged = solve.converged;
            curve.all_converged &= solve.converged;
            curve.points.push_back(std::move(point));
        }
    } else {
        // Full symmetric parameterization with Dykstra over {PSD},
        // {tr <= P}, {0.5 tr(Gamma Sigma) >= Delta}.
        const double gnorm2 = 0.25 * (gamma * gamma).trace();
        auto project_sigma = [&](Eigen::MatrixXd z, double delta) {
            Eigen::MatrixXd res0 = Eigen::MatrixXd::Zero(m, m);
            Eigen::MatrixXd res1 = res0, res2 = res0;
            for (std::size_t sweep = 0; sweep < 256; ++sweep) {
                double change = 0.0;
                for (int s = 0; s < 3; ++s) {
                    Eigen::MatrixXd& res = s == 0 ? res0 : (s == 1 ? res1 : res2);
                    Eigen::MatrixXd y = z + res;
                    Eigen::MatrixXd proj;
                    if (s == 0) {
                        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(y);
                        proj = es.eigenvectors() *
                               es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                               es.eigenvectors().transpose();
                    } else if (s == 1) {
                        const double excess = y.trace() - P;
                        proj = excess > 0.0
                                   ? (y - (excess / static_cast<double>(m)) *
                                              Eigen::MatrixXd::Identity(m, m))
                                         .eval()
                                   : y;
                    } else {
                        const double value = 0.5 * (gamma * y).trace();
                        proj = (value < delta && gnorm2 > 0.0)
                                   ? (y + ((delta - value) / gnorm2) * 0.5 * gamma).eval()
                                   : y;
                    }
                    res = y - proj;
                    change += (proj - z).cwiseAbs().sum();
                    z = proj;
                }
                if (change < 1e-14) break;
            }
            return z;
        };
        auto rate_of = [&](const Eigen::MatrixXd& sigma) {
            const Eigen::MatrixXd inner =
                Eigen::MatrixXd::Identity(model.comm_gain().rows(), model.comm_gain().rows()) +
                model.comm_gain() * sigma * model.comm_gain().transpose();
            return 0.5 * std::log(inner.determinant());
        };
        const double a_top = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a)
                                 .eigenvalues()
                                 .cwiseAbs()
                                 .maxCoeff();
        const double step = a_top > 0.0 ? 2.0 / (a_top * a_top) : 1.0;
        // Exact repair mirroring repair_allocation: PSD clip, budget rescale,
        // then blend toward the delta_star covariance P u1 u1^T if needed.
        auto repair_sigma = [&](Eigen::MatrixXd& sigma, double delta) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
            sigma = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                    es.eigenvectors().transpose();
            const double tr = sigma.trace();
            if (tr > P && tr > 0.0) sigma *= P / tr;
            const double current = 0.5 * (gamma * sigma).trace();
            if (current >= delta || dstar <= current) return;
            const double t = std::min(1.0, (delta - current) / (dstar - current));
            sigma = (1.0 - t) * sigma + t * P * u.col(0) * u.col(0).transpose();
        };
        Eigen::MatrixXd warm;
        for (std::size_t j = 0; j < knots; ++j) {
            const double delta =
                dstar * static_cast<double>(j) / static_cast<double>(knots - 1);
            std::vector<Eigen::MatrixXd> starts;
            starts.push_back(sigma_cap);
            starts.push_back(P * u.col(0) * u.col(0).transpose());
            starts.push_back((P / static_cast<double>(m)) * Eigen::MatrixXd::Identity(m, m));
            if (warm.size() > 0) starts.push_back(warm);
            double best_rate = -kInfinity;
            Eigen::MatrixXd best_sigma;
            bool best_converged = false;
            for (auto& start : starts) {
                Eigen::MatrixXd sigma = project_sigma(start, delta);
                bool converged = false;
                for (std::size_t it = 0; it < 4000; ++it) {
                    const Eigen::MatrixXd inner =
                        Eigen::MatrixXd::Identity(model.comm_gain().rows(),
                                                  model.comm_gain().rows()) +
                        model.comm_gain() * sigma * model.comm_gain().transpose();
                    const Eigen::MatrixXd grad = 0.5 * model.comm_gain().transpose() *
                                                 inner.inverse() * model.comm_gain();
                    Eigen::MatrixXd next = project_sigma(sigma + step * grad, delta);
                    const double diff = (next - sigma).cwiseAbs().maxCoeff();
                    sigma = std::move(next);
                    if (diff < 1e-12) {
                        converged = true;
                        break;
                    }
                }
                repair_sigma(sigma, delta);
                const double f = rate_of(sigma);
                if (f > best_rate) {
                    best_rate = f;
                    best_sigma = sigma;
                    best_converged = converged;
                }
            }
            warm = best_sigma;
            std::vector<double> alloc(m);
            const Eigen::VectorXd diag = (u.transpose() * best_sigma * u).diagonal();
            for (Eigen::Index i = 0; i < m; ++i) alloc[i] = diag[i];
            curve.all_converged &= best_converged;
            TradeoffPoint point;
            point.rate = best_rate;
            point.delta = delta;
            point.lambda = nan;
            point.allocation = std::move(alloc);
            point.converged = best_converged;
            curve.points.push_back(std::move(point));
        }
    }

    curve.capacity_end.rate = capacity;
    curve.capacity_end.delta = delta_at_capacity;
    curve.capacity_end.lambda = nan;
    curve.capacity_end.allocation = cap_alloc;
    curve.sensing_end = curve.points.back();
    curve.chord = timesharing_chord(capacity, dstar);
    detail::verify_curve_invariants(curve);
    return curve;
}

}  // namespace qcdcomm
