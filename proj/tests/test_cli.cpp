#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qcdcomm/cscc.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCli = QCDCOMM_CLI_PATH;
const fs::path kConfigs = QCDCOMM_CONFIG_DIR;

fs::path fresh_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("qcdcomm_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args) {
    const int status = std::system((kCli + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    json j;
    in >> j;
    return j;
}

std::string strip_timestamp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream kept;
    std::string line;
    while (std::getline(in, line))
        if (line.find("timestamp") == std::string::npos) kept << line << '\n';
    return kept.str();
}

}  // namespace

TEST_CASE("region command on the binary example") {
    const auto out = fresh_dir("region_bin");
    REQUIRE(run_cli("region --config " + (kConfigs / "binary_z.json").string() + " --out " +
                    out.string()) == 0);
    const json rep = read_json(out / "region.json");
    REQUIRE(rep.at("units") == "nats");
    REQUIRE(rep.at("all_converged") == true);
    REQUIRE(std::abs(rep.at("capacity").get<double>() - 0.0822828785) < 1e-6);
    REQUIRE(std::abs(rep.at("delta_star").get<double>() - 0.5108256238) < 1e-6);
    REQUIRE(fs::exists(out / "region.csv"));

    SECTION("rerun is byte-identical modulo the timestamp") {
        const std::string first_json = strip_timestamp(out / "region.json");
        const std::string first_csv = strip_timestamp(out / "region.csv");
        REQUIRE(run_cli("region --config " + (kConfigs / "binary_z.json").string() +
                        " --out " + out.string()) == 0);
        REQUIRE(strip_timestamp(out / "region.json") == first_json);
        REQUIRE(strip_timestamp(out / "region.csv") == first_csv);
    }
    SECTION("--bits converts on output only") {
        const auto out2 = fresh_dir("region_bits");
        REQUIRE(run_cli("region --config " + (kConfigs / "binary_z.json").string() +
                        " --out " + out2.string() + " --bits") == 0);
        const json rep2 = read_json(out2 / "region.json");
        REQUIRE(rep2.at("units") == "bits");
        REQUIRE(std::abs(rep2.at("capacity").get<double>() -
                         0.0822828785 / std::numbers::ln2) < 1e-6);
    }
}

TEST_CASE("region command on gaussian configs") {
    const auto out = fresh_dir("region_gauss");
    REQUIRE(run_cli("region --config " + (kConfigs / "scalar_gain.json").string() + " --out " +
                    out.string()) == 0);
    const json rep = read_json(out / "region.json");
    REQUIRE(std::abs(rep.at("capacity").get<double>() - 0.6931471806) < 1e-9);
    REQUIRE(std::abs(rep.at("delta_star").get<double>() - 1.5) < 1e-9);
    // Flat curve: both CSV knots carry the capacity rate.
    std::ifstream csv(out / "region.csv");
    std::string line;
    std::getline(csv, line);  // manifest comment
    std::getline(csv, line);  // header
    std::vector<double> rates;
    while (std::getline(csv, line)) {
        const auto last = line.rfind(',');
        rates.push_back(std::stod(line.substr(last + 1)));
    }
    REQUIRE(rates.size() == 2);
    REQUIRE(std::abs(rates[0] - rates[1]) < 1e-12);
}

TEST_CASE("simulate command") {
    const auto out = fresh_dir("simulate");
    // Small deterministic campaign so the test stays quick.
    const fs::path cfg_path = out / "cfg.json";
    {
        std::ofstream cfg(cfg_path);
        cfg << R"({
          "channel": {
            "comm": {"type": "bsc", "epsilon": 0.3},
            "sensing": {"type": "discrete_z", "eps0": 0.1, "eps1": 0.5}
          },
          "codebook": {"px": [0.5, 0.5], "subblock_length": 2, "subblocks": 128, "messages": 4, "seed": 7},
          "detector": {"threshold": 4.0},
          "campaign": {"runs_per_cell": 150, "codeword_sample": 2, "seed": 11}
        })";
    }
    REQUIRE(run_cli("simulate --config " + cfg_path.string() + " --out " + out.string()) == 0);
    const json rep = read_json(out / "simulate.json");
    REQUIRE(rep.at("threshold").get<double>() == 4.0);
    REQUIRE(rep.at("wadd").at("censoring_flagged") == false);
    REQUIRE(rep.at("far").contains("upper95"));
    REQUIRE(rep.at("config").contains("campaign"));  // full config echo
    REQUIRE(fs::exists(out / "wadd_cells.csv"));

    SECTION("rerun is byte-identical modulo the timestamp") {
        const std::string first = strip_timestamp(out / "simulate.json");
        REQUIRE(run_cli("simulate --config " + cfg_path.string() + " --out " + out.string()) ==
                0);
        REQUIRE(strip_timestamp(out / "simulate.json") == first);
    }
    SECTION("trace dumps are emitted on request") {
        const fs::path tr_path = out / "cfg_traces.json";
        {
            std::ofstream cfg(tr_path);
            cfg << R"({
              "channel": {"sensing": {"type": "discrete_z", "eps0": 0.1, "eps1": 0.5}},
              "codebook": {"px": [0.5, 0.5], "subblock_length": 2, "subblocks": 64, "messages": 2, "seed": 7},
              "detector": {"threshold": 3.0},
              "campaign": {"runs_per_cell": 20, "codeword_sample": 1, "dump_traces": 2, "seed": 4}
            })";
        }
        REQUIRE(run_cli("simulate --config " + tr_path.string() + " --out " + out.string()) == 0);
        REQUIRE(fs::exists(out / "trace_0.csv"));
        REQUIRE(fs::exists(out / "trace_1.csv"));
        std::ifstream tr(out / "trace_0.csv");
        std::string line;
        std::getline(tr, line);  // manifest
        std::getline(tr, line);
        REQUIRE(line == "i,W");
    }

    SECTION("zero-message config is a validation error") {
        const fs::path bad_path = out / "bad.json";
        {
            std::ofstream bad(bad_path);
            bad << R"({
              "channel": {"sensing": {"type": "discrete_z", "eps0": 0.1, "eps1": 0.5}},
              "codebook": {"messages": 0},
              "detector": {"threshold": 4.0}
            })";
        }
        REQUIRE(run_cli("simulate --config " + bad_path.string() + " --out " + out.string()) ==
                2);
    }
    SECTION("missing config file is a validation error") {
        REQUIRE(run_cli("simulate --config /nonexistent.json --out " + out.string()) == 2);
    }
    SECTION("gaussian sensing is rejected for simulation") {
        REQUIRE(run_cli("simulate --config " + (kConfigs / "scalar_gain.json").string() +
                        " --out " + out.string()) == 2);
    }
}

TEST_CASE("codebook command") {
    const auto out = fresh_dir("codebook");
    REQUIRE(run_cli("codebook --config " + (kConfigs / "codebook_demo.json").string() +
                    " --out " + out.string()) == 0);
    const json rep = read_json(out / "codebook.json");
    REQUIRE(std::abs(rep.at("rate_penalty").get<double>() - 0.40641) < 5e-6);
    // Both ends of the achievable-rate sandwich are reported.
    REQUIRE(rep.at("achievable_rate_lower").get<double>() ==
            rep.at("mutual_information").get<double>() - rep.at("rate_penalty").get<double>());
    REQUIRE(rep.at("sliding_window_l0").is_number());

    // Round-trip: the emitted file loads with identical codewords and the
    // composition invariant verified on load.
    std::ifstream in(out / "codebook.txt");
    const auto cb = qcdcomm::read_codebook(in);
    REQUIRE(cb.num_messages() == 8);
    REQUIRE(cb.subblock_length == 2);

    SECTION("seed override changes the codebook deterministically") {
        const auto out2 = fresh_dir("codebook_seed");
        REQUIRE(run_cli("codebook --config " + (kConfigs / "codebook_demo.json").string() +
                        " --out " + out2.string() + " --seed 99") == 0);
        std::ifstream in2(out2 / "codebook.txt");
        const auto cb2 = qcdcomm::read_codebook(in2);
        REQUIRE(cb2.seed == 99);
        REQUIRE(cb2.codewords != cb.codewords);
    }
}
