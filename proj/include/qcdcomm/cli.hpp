#pragma once

// Implementations of the CLI subcommands (region, simulate, codebook).
// Kept in the library so the acceptance suite drives the same entry points
// as the binary. Exit codes: 0 success, 2 validation error,
// 3 non-convergence, 4 censoring-dominated results.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcdcomm/config.hpp"
#include "qcdcomm/cscc.hpp"
#include "qcdcomm/detectors.hpp"
#include "qcdcomm/prob.hpp"
#include "qcdcomm/reports.hpp"
#include "qcdcomm/simulator.hpp"
#include "qcdcomm/tradeoff.hpp"

namespace qcdcomm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitCensoring = 4;

struct CliOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    std::size_t threads = 0;
    bool bits = false;
};

namespace detail {

struct UnitScale {
    bool bits = false;
    double operator()(double nats) const { return bits ? nats / std::numbers::ln2 : nats; }
    const char* name() const { return bits ? "bits" : "nats"; }
};

inline void write_region_csv(const std::filesystem::path& path, const RegionCurve& curve,
                             const RunManifest& manifest, UnitScale unit) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# manifest " << manifest.hash << '\n';
    out << "lambda,delta_" << unit.name() << ",rate_" << unit.name() << '\n';
    out.precision(17);
    for (const auto& p : curve.points)
        out << p.lambda << ',' << unit(p.delta) << ',' << unit(p.rate) << '\n';
}

inline nlohmann::json point_json(const TradeoffPoint& p, UnitScale unit) {
    nlohmann::json j{{"delta", unit(p.delta)}, {"rate", unit(p.rate)}, {"converged", p.converged}};
    if (p.input) j["input"] = p.input->probs();
    if (!p.allocation.empty()) j["allocation"] = p.allocation;
    return j;
}

inline nlohmann::json curve_json(const RegionCurve& curve, UnitScale unit) {
    return nlohmann::json{
        {"capacity_end", point_json(curve.capacity_end, unit)},
        {"sensing_end", point_json(curve.sensing_end, unit)},
        {"delta_star", unit(curve.chord.delta_star)},
        {"capacity", unit(curve.chord.capacity)},
        {"timesharing_chord",
         {{"from", {{"delta", unit(curve.chord.delta_star)}, {"rate", 0.0}}},
          {"to", {{"delta", 0.0}, {"rate", unit(curve.chord.capacity)}}}}},
        {"all_converged", curve.all_converged},
        {"monotone_ok", curve.monotone_ok},
        {"concave_ok", curve.concave_ok},
        {"dominates_chord", curve.dominates_chord},
        {"num_points", curve.points.size()}};
}

inline CsccCodebook build_codebook(const CodebookConfig& cfg, std::uint64_t seed) {
    if (cfg.load_path) {
        std::ifstream in(*cfg.load_path);
        if (!in) throw ConfigError("cannot open codebook file: " + *cfg.load_path);
        return read_codebook(in);
    }
    const SubblockType type = quantize_type(Distribution(cfg.px), cfg.subblock_length);
    return generate_codebook(type, cfg.subblocks, cfg.messages, seed);
}

}  // namespace detail

inline int run_region(const CliOptions& opt) {
    Config cfg;
    try {
        cfg = load_config(opt.config_path);
        if (!cfg.sensing) throw ConfigError("region: channel.sensing is required");
        if (cfg.sensing->kind == SensingConfig::Kind::discrete && !cfg.comm)
            throw ConfigError("region: channel.comm is required for discrete sensing");
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitValidation;
    }
    const std::uint64_t seed = opt.seed_override.value_or(cfg.campaign.seed);
    const RunManifest manifest =
        make_manifest("region", opt.config_path, cfg.resolved, seed, opt.out_dir);
    const detail::UnitScale unit{opt.bits};

    RegionCurve curve;
    try {
        switch (cfg.sensing->kind) {
            case SensingConfig::Kind::discrete: {
                RegionOptions ropt;
                ropt.lambda_grid = default_lambda_grid(cfg.region.lambda_knots,
                                                       cfg.region.lambda_min,
                                                       cfg.region.lambda_max);
                ropt.ba.tol = cfg.region.tol;
                ropt.ba.max_iter = cfg.region.max_iter;
                curve = region_sweep(*cfg.comm, *cfg.sensing->discrete, ropt);
                break;
            }
            case SensingConfig::Kind::scalar_gain:
            case SensingConfig::Kind::scalar_variance:
                curve = scalar_gaussian_region(*cfg.sensing->scalar);
                break;
            case SensingConfig::Kind::mimo:
                curve = mimo_region(*cfg.sensing->mimo, cfg.region.mimo_knots);
                break;
        }
    } catch (const std::exception& e) {
        std::cerr << "region computation failed: " << e.what() << '\n';
        return kExitValidation;
    }

    std::filesystem::create_directories(opt.out_dir);
    detail::write_region_csv(std::filesystem::path(opt.out_dir) / "region.csv", curve, manifest,
                             unit);
    nlohmann::json body = detail::curve_json(curve, unit);
    body["units"] = unit.name();
    body["manifest"] = manifest_json(manifest);
    body["config"] = cfg.resolved;
    write_json_report(std::filesystem::path(opt.out_dir) / "region.json", body);
    if (!curve.all_converged) {
        std::cerr << "warning: some region points did not converge\n";
        return kExitNonConvergence;
    }
    return kExitOk;
}

inline int run_simulate(const CliOptions& opt) {
    Config cfg;
    try {
        cfg = load_config(opt.config_path);
        if (!cfg.sensing || cfg.sensing->kind != SensingConfig::Kind::discrete)
            throw ConfigError("simulate: a discrete channel.sensing section is required");
        if (!cfg.codebook) throw ConfigError("simulate: codebook section is required");
        if (!cfg.detector.threshold && !cfg.detector.target_far)
            throw ConfigError("simulate: detector.threshold or detector.target_far is required");
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitValidation;
    }
    const std::uint64_t seed = opt.seed_override.value_or(cfg.campaign.seed);
    const RunManifest manifest =
        make_manifest("simulate", opt.config_path, cfg.resolved, seed, opt.out_dir);
    const detail::UnitScale unit{opt.bits};
    const DiscreteSensingPair& pair = *cfg.sensing->discrete;

    CsccCodebook cb;
    try {
        cb = detail::build_codebook(*cfg.codebook,
                                    opt.seed_override.value_or(cfg.codebook->seed));
    } catch (const std::exception& e) {
        std::cerr << "codebook error: " << e.what() << '\n';
        return kExitValidation;
    }
    const std::size_t L = cb.subblock_length;
    const double b = cfg.detector.threshold
                         ? *cfg.detector.threshold
                         : threshold_for_far(*cfg.detector.target_far, L);

    SimOptions sim;
    sim.runs = cfg.campaign.runs_per_cell;
    sim.seed = seed;
    sim.codeword_sample = cfg.campaign.codeword_sample;
    sim.max_censored_fraction = cfg.campaign.max_censored_fraction;
    sim.far_sample_cap = cfg.campaign.far_sample_cap;
    sim.threads = opt.threads;

    const std::vector<std::uint64_t> sweep = cfg.campaign.change_points.empty()
                                                 ? default_change_points(L)
                                                 : cfg.campaign.change_points;

    nlohmann::json body;
    body["threshold"] = b;
    body["units"] = unit.name();

    const FarEstimate far = estimate_far(cb, pair, b, sim);
    body["far"] = {{"estimate", far.far},
                   {"upper95", far.far_upper95},
                   {"mean_stop", far.mean_stop},
                   {"mean_stop_se", far.mean_stop_se},
                   {"worst_codeword", far.worst_codeword},
                   {"censored", far.censored},
                   {"runs", far.runs},
                   {"lower_bound_only", far.lower_bound_only}};

    if (!cfg.campaign.alpha_grid.empty()) {
        nlohmann::json cal = nlohmann::json::array();
        for (double alpha : cfg.campaign.alpha_grid) {
            const double b_alpha = threshold_for_far(alpha, L);
            const FarEstimate est = estimate_far(cb, pair, b_alpha, sim);
            cal.push_back({{"alpha", alpha},
                           {"threshold", b_alpha},
                           {"far", est.far},
                           {"upper95", est.far_upper95},
                           {"within_bound", est.far_upper95 <= alpha},
                           {"censored", est.censored},
                           {"lower_bound_only", est.lower_bound_only}});
        }
        body["far_calibration"] = std::move(cal);
    }

    const DelayEstimate wadd = estimate_wadd(cb, pair, b, sweep, sim);
    body["wadd"] = {{"worst_mean", wadd.worst_mean},
                    {"worst_se", wadd.worst_se},
                    {"worst_codeword", wadd.worst_codeword},
                    {"worst_change_point", wadd.worst_change_point},
                    {"total_censored", wadd.total_censored},
                    {"censoring_flagged", wadd.censoring_flagged}};

    std::filesystem::create_directories(opt.out_dir);
    {
        std::ofstream cells(std::filesystem::path(opt.out_dir) / "wadd_cells.csv");
        cells << "# manifest " << manifest.hash << '\n';
        cells << "codeword,change_point,mean_delay,se,censored,runs\n";
        cells.precision(17);
        for (const auto& cell : wadd.cells)
            cells << cell.codeword_index << ',' << cell.change_point << ',' << cell.mean_delay
                  << ',' << cell.se << ',' << cell.censored << ',' << cell.runs << '\n';
    }

    if (cfg.campaign.dump_traces > 0) {
        const std::uint64_t nu = sweep.front();
        for (std::size_t rep = 0; rep < cfg.campaign.dump_traces; ++rep) {
            Rng rng = Rng::derive(seed, 0, nu, rep);
            const auto run = simulate_run(std::span<const Symbol>(cb.codewords[0]), pair, nu, L,
                                          b, rng, /*keep_trace=*/true);
            std::ofstream tr(std::filesystem::path(opt.out_dir) /
                             ("trace_" + std::to_string(rep) + ".csv"));
            tr << "# manifest " << manifest.hash << '\n';
            write_trace_csv(tr, run);
        }
    }

    bool slope_censored = false;
    if (cfg.campaign.threshold_grid.size() >= 3) {
        const SlopeFit fit = fit_delay_slope(cb, pair, cfg.campaign.threshold_grid, sweep, sim);
        slope_censored = fit.censoring_flagged;
        const double d_cond =
            conditional_kl(pair.post(), pair.pre(), cb.type.induced());
        body["slope_fit"] = {{"slope", fit.slope},
                             {"intercept", fit.intercept},
                             {"slope_times_kl", fit.slope * d_cond},
                             {"conditional_kl", d_cond},
                             {"censoring_flagged", fit.censoring_flagged}};
        std::ofstream sl(std::filesystem::path(opt.out_dir) / "slope.csv");
        sl << "# manifest " << manifest.hash << '\n';
        sl << "threshold,wadd,residual\n";
        sl.precision(17);
        for (std::size_t i = 0; i < fit.thresholds.size(); ++i)
            sl << fit.thresholds[i] << ',' << fit.wadds[i] << ','
               << (fit.residuals.empty() ? std::nan("") : fit.residuals[i]) << '\n';
    }

    body["manifest"] = manifest_json(manifest);
    body["config"] = cfg.resolved;
    write_json_report(std::filesystem::path(opt.out_dir) / "simulate.json", body);

    if (far.lower_bound_only || wadd.censoring_flagged || slope_censored) {
        std::cerr << "warning: results are censoring-dominated\n";
        return kExitCensoring;
    }
    return kExitOk;
}

inline int run_codebook(const CliOptions& opt) {
    Config cfg;
    try {
        cfg = load_config(opt.config_path);
        if (!cfg.codebook) throw ConfigError("codebook: codebook section is required");
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitValidation;
    }
    const std::uint64_t seed = opt.seed_override.value_or(cfg.codebook->seed);
    const RunManifest manifest =
        make_manifest("codebook", opt.config_path, cfg.resolved, seed, opt.out_dir);
    const detail::UnitScale unit{opt.bits};

    CsccCodebook cb;
    try {
        cb = detail::build_codebook(*cfg.codebook, seed);
    } catch (const std::exception& e) {
        std::cerr << "codebook error: " << e.what() << '\n';
        return kExitValidation;
    }

    std::filesystem::create_directories(opt.out_dir);
    {
        std::ofstream out(std::filesystem::path(opt.out_dir) / "codebook.txt");
        write_codebook(out, cb, "manifest " + manifest.hash);
    }

    nlohmann::json body;
    body["subblock_length"] = cb.subblock_length;
    body["subblocks"] = cb.num_subblocks;
    body["messages"] = cb.num_messages();
    body["type_counts"] = cb.type.counts;
    body["rate_penalty"] = unit(rate_penalty(cb.type));
    if (cfg.comm) {
        const double mi = mutual_information(cb.type.induced(), *cfg.comm);
        body["mutual_information"] = unit(mi);
        body["achievable_rate_lower"] = unit(mi - rate_penalty(cb.type));
    }
    const auto l0 = sliding_window_check(cb.codewords[0], cb.type.induced(),
                                         cfg.codebook->window_epsilon);
    body["window_epsilon"] = cfg.codebook->window_epsilon;
    if (l0)
        body["sliding_window_l0"] = *l0;
    else
        body["sliding_window_l0"] = nullptr;
    body["units"] = unit.name();
    body["manifest"] = manifest_json(manifest);
    body["config"] = cfg.resolved;
    write_json_report(std::filesystem::path(opt.out_dir) / "codebook.json", body);
    return kExitOk;
}

}  // namespace qcdcomm
