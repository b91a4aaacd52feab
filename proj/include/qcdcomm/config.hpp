#pragma once

// Config schema shared by every CLI command: one structured file (JSON;
// nested objects are the tables) covering channel, codebook, detector and
// campaign settings. Parsing reports the offending field on error.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcdcomm/channels.hpp"
#include "qcdcomm/prob.hpp"

namespace qcdcomm {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SensingConfig {
    enum class Kind { discrete, scalar_gain, scalar_variance, mimo };
    Kind kind = Kind::discrete;
    std::optional<DiscreteSensingPair> discrete;
    std::optional<ScalarGaussianPair> scalar;
    std::optional<MimoGaussianPair> mimo;
};

struct CodebookConfig {
    std::vector<double> px;
    std::size_t subblock_length = 2;
    std::size_t subblocks = 16;
    std::size_t messages = 8;
    std::uint64_t seed = 1;
    double window_epsilon = 0.5;
    std::optional<std::string> load_path;  // load instead of generating
};

struct DetectorConfig {
    std::optional<double> threshold;
    std::optional<double> target_far;
};

struct CampaignConfig {
    std::size_t runs_per_cell = 1000;
    std::size_t codeword_sample = 16;
    std::vector<std::uint64_t> change_points;  // empty -> default sweep
    std::vector<double> threshold_grid;        // slope fit; empty -> skipped
    std::vector<double> alpha_grid;            // FAR calibration; empty -> skipped
    std::uint64_t far_sample_cap = 1000000;
    double max_censored_fraction = 0.5;
    std::uint64_t seed = 1;
    std::size_t dump_traces = 0;  // statistic traces written per campaign
};

struct RegionConfig {
    std::size_t lambda_knots = 60;
    double lambda_min = 1e-3;
    double lambda_max = 1e3;
    double tol = 1e-10;
    std::size_t max_iter = 100000;
    std::size_t mimo_knots = 41;
};

struct Config {
    std::optional<ChannelMatrix> comm;
    std::optional<SensingConfig> sensing;
    std::optional<CodebookConfig> codebook;
    DetectorConfig detector;
    CampaignConfig campaign;
    RegionConfig region;
    nlohmann::json resolved;  // the parsed document, echoed into reports
};

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& j, const std::string& key,
                                           const std::string& where) {
    if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    return j.at(key);
}

template <class T>
T field_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("field '" + key + "' has the wrong type");
    }
}

inline std::vector<std::vector<double>> matrix_field(const nlohmann::json& j,
                                                     const std::string& key,
                                                     const std::string& where) {
    try {
        return require_field(j, key, where).get<std::vector<std::vector<double>>>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(where + ": field '" + key + "' must be a matrix of numbers");
    }
}

inline Eigen::MatrixXd to_eigen(const std::vector<std::vector<double>>& rows,
                                const std::string& where) {
    if (rows.empty() || rows[0].empty()) throw ConfigError(where + ": empty matrix");
    Eigen::MatrixXd m(rows.size(), rows[0].size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw ConfigError(where + ": ragged matrix");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

inline ChannelMatrix parse_comm(const nlohmann::json& j) {
    const std::string type = field_or<std::string>(j, "type", "matrix");
    if (type == "bsc") {
        const double eps = require_field(j, "epsilon", "channel.comm").get<double>();
        return ChannelMatrix::binary_symmetric(eps);
    }
    if (type == "matrix") return ChannelMatrix(matrix_field(j, "rows", "channel.comm"));
    throw ConfigError("channel.comm: unknown type '" + type + "'");
}

inline SensingConfig parse_sensing(const nlohmann::json& j) {
    SensingConfig cfg;
    const std::string type = require_field(j, "type", "channel.sensing").get<std::string>();
    if (type == "discrete") {
        cfg.kind = SensingConfig::Kind::discrete;
        cfg.discrete.emplace(ChannelMatrix(matrix_field(j, "pre", "channel.sensing")),
                             ChannelMatrix(matrix_field(j, "post", "channel.sensing")));
    } else if (type == "discrete_z") {
        cfg.kind = SensingConfig::Kind::discrete;
        cfg.discrete.emplace(
            ChannelMatrix::z_channel(require_field(j, "eps0", "channel.sensing").get<double>()),
            ChannelMatrix::z_channel(require_field(j, "eps1", "channel.sensing").get<double>()));
    } else if (type == "scalar_gain") {
        cfg.kind = SensingConfig::Kind::scalar_gain;
        cfg.scalar = ScalarGaussianPair::gain_change(
            require_field(j, "h", "channel.sensing").get<double>(),
            require_field(j, "power", "channel.sensing").get<double>());
    } else if (type == "scalar_variance") {
        cfg.kind = SensingConfig::Kind::scalar_variance;
        cfg.scalar = ScalarGaussianPair::variance_change(
            require_field(j, "sigma0_sq", "channel.sensing").get<double>(),
            require_field(j, "sigma1_sq", "channel.sensing").get<double>(),
            require_field(j, "power", "channel.sensing").get<double>());
    } else if (type == "mimo") {
        cfg.kind = SensingConfig::Kind::mimo;
        cfg.mimo.emplace(to_eigen(matrix_field(j, "g0", "channel.sensing"), "channel.sensing.g0"),
                         to_eigen(matrix_field(j, "g1", "channel.sensing"), "channel.sensing.g1"),
                         to_eigen(matrix_field(j, "gtilde", "channel.sensing"),
                                  "channel.sensing.gtilde"),
                         require_field(j, "power", "channel.sensing").get<double>());
    } else {
        throw ConfigError("channel.sensing: unknown type '" + type + "'");
    }
    return cfg;
}

}  // namespace detail

inline Config parse_config(const nlohmann::json& doc) {
    Config cfg;
    cfg.resolved = doc;
    try {
        if (doc.contains("channel")) {
            const auto& ch = doc.at("channel");
            if (ch.contains("comm")) cfg.comm = detail::parse_comm(ch.at("comm"));
            if (ch.contains("sensing")) cfg.sensing = detail::parse_sensing(ch.at("sensing"));
        }
        if (doc.contains("codebook")) {
            const auto& cb = doc.at("codebook");
            CodebookConfig c;
            c.px = detail::field_or<std::vector<double>>(cb, "px", {0.5, 0.5});
            c.subblock_length = detail::field_or<std::size_t>(cb, "subblock_length", 2);
            c.subblocks = detail::field_or<std::size_t>(cb, "subblocks", 16);
            c.messages = detail::field_or<std::size_t>(cb, "messages", 8);
            c.seed = detail::field_or<std::uint64_t>(cb, "seed", 1);
            c.window_epsilon = detail::field_or<double>(cb, "window_epsilon", 0.5);
            if (cb.contains("load_path")) c.load_path = cb.at("load_path").get<std::string>();
            if (c.messages == 0) throw ConfigError("codebook.messages: must be >= 1");
            if (c.subblock_length == 0) throw ConfigError("codebook.subblock_length: must be >= 1");
            if (c.subblocks == 0) throw ConfigError("codebook.subblocks: must be >= 1");
            cfg.codebook = std::move(c);
        }
        if (doc.contains("detector")) {
            const auto& de = doc.at("detector");
            if (de.contains("threshold")) cfg.detector.threshold = de.at("threshold").get<double>();
            if (de.contains("target_far"))
                cfg.detector.target_far = de.at("target_far").get<double>();
        }
        if (doc.contains("campaign")) {
            const auto& ca = doc.at("campaign");
            cfg.campaign.runs_per_cell =
                detail::field_or<std::size_t>(ca, "runs_per_cell", cfg.campaign.runs_per_cell);
            cfg.campaign.codeword_sample =
                detail::field_or<std::size_t>(ca, "codeword_sample", cfg.campaign.codeword_sample);
            cfg.campaign.change_points =
                detail::field_or<std::vector<std::uint64_t>>(ca, "change_points", {});
            cfg.campaign.threshold_grid =
                detail::field_or<std::vector<double>>(ca, "threshold_grid", {});
            cfg.campaign.alpha_grid = detail::field_or<std::vector<double>>(ca, "alpha_grid", {});
            cfg.campaign.far_sample_cap =
                detail::field_or<std::uint64_t>(ca, "far_sample_cap", cfg.campaign.far_sample_cap);
            cfg.campaign.max_censored_fraction = detail::field_or<double>(
                ca, "max_censored_fraction", cfg.campaign.max_censored_fraction);
            cfg.campaign.seed = detail::field_or<std::uint64_t>(ca, "seed", cfg.campaign.seed);
            cfg.campaign.dump_traces =
                detail::field_or<std::size_t>(ca, "dump_traces", cfg.campaign.dump_traces);
        }
        if (doc.contains("region")) {
            const auto& re = doc.at("region");
            cfg.region.lambda_knots =
                detail::field_or<std::size_t>(re, "lambda_knots", cfg.region.lambda_knots);
            cfg.region.lambda_min = detail::field_or<double>(re, "lambda_min", cfg.region.lambda_min);
            cfg.region.lambda_max = detail::field_or<double>(re, "lambda_max", cfg.region.lambda_max);
            cfg.region.tol = detail::field_or<double>(re, "tol", cfg.region.tol);
            cfg.region.max_iter = detail::field_or<std::size_t>(re, "max_iter", cfg.region.max_iter);
            cfg.region.mimo_knots =
                detail::field_or<std::size_t>(re, "mimo_knots", cfg.region.mimo_knots);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return cfg;
}

inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_config(doc);
}

}  // namespace qcdcomm
