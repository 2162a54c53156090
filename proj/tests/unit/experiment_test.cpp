#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ehpc/errors.hpp"
#include "ehpc/experiment.hpp"
#include "ehpc/policy_io.hpp"

namespace ehpc {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json small_json(std::size_t sensors = 2) {
    json j = json::parse(R"({
      "network": {"sensors": 2, "p_tot_mw": 2.0, "eta": 0.9},
      "channel": {"quantizer": {"method": "moe", "levels": 2}},
      "energy": {"capacity_cells": 2, "harvest_levels_cells": [0, 1], "rho": 0.6},
      "mc": {"runs": 400, "seed": 17}
    })");
    j["network"]["sensors"] = sensors;
    return j;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("ehpc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string str() const { return path_.string(); }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::string body_of(const std::string& policy_text) {
    std::istringstream is(policy_text);
    std::string line, out;
    while (std::getline(is, line))
        if (!line.empty() && line[0] != '#') out += line + "\n";
    return out;
}

TEST(Config, DefaultsMatchTheExperimentInventory) {
    const auto c = parse_config(json::object());
    EXPECT_EQ(c.sensors, 3u);
    EXPECT_EQ(c.eta, 0.9);
    EXPECT_EQ(c.base.sensing.pd_bar, 0.9);
    EXPECT_EQ(c.base.channel.noise_var, 1.0);
    EXPECT_EQ(c.base.channel.doppler_product, 0.05);
    EXPECT_EQ(c.base.energy.rho, 0.5);
    EXPECT_EQ(c.solver.eps1, 1e-4);
    EXPECT_EQ(c.solver.eps2, 1e-2);
    EXPECT_EQ(c.solver.mixing, GlobalMixing::Hypothesis);
    EXPECT_EQ(c.solver.step_scale, StepScale::PerSensor);
    EXPECT_EQ(c.solver.step_rule, StepRule::Kesten);
    EXPECT_EQ(c.mc.runs, 10000u);
}

TEST(Config, RoundTripIsIdentity) {
    const auto c = load_config(std::string(EHPC_CONFIG_DIR) + "/fig4.json");
    const json once = to_json(c);
    const json twice = to_json(parse_config(once));
    EXPECT_EQ(once, twice);
    EXPECT_EQ(model_hash(c), model_hash(parse_config(once)));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
    EXPECT_THROW(parse_config(json{{"netwrok", json::object()}}), ConfigError);
    EXPECT_THROW(parse_config(json{{"energy", {{"capacity", 4}}}}), ConfigError);
    EXPECT_THROW(parse_config(json{{"network", {{"eta", 1.0}}}}), ConfigError);
    EXPECT_THROW(parse_config(json{{"network", {{"p_tot_mw", "five"}}}}), ConfigError);
    EXPECT_THROW(parse_config(json{{"channel", {{"doppler_product", 0.45}, {"quantizer", {{"levels", 8}}}}}}),
                 ConfigError);
    EXPECT_THROW(parse_config(json{{"sweep", {{"axis", "colour"}, {"values", {1}}}}}), ConfigError);
    EXPECT_THROW(parse_config(json{{"solver", {{"global_mixing", "sum"}}}}), ConfigError);
    EXPECT_THROW(parse_config(json{{"solver", {{"step_scale", "unit"}}}}), ConfigError);
    EXPECT_THROW(parse_config(json{{"solver", {{"step_rule", "fast"}}}}), ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SensorOverridesPatchTheBase) {
    const auto c = load_config(std::string(EHPC_CONFIG_DIR) + "/fig4.json");
    const auto s0 = sensor_block(c, 0), s1 = sensor_block(c, 1);
    EXPECT_EQ(s0.channel.mean_square_gain, 1.0);
    EXPECT_EQ(s1.channel.mean_square_gain, 1.5);
    EXPECT_EQ(s1.channel.quantizer.boundaries, (std::vector<double>{0.0, 0.2, 1.4, 3.6}));
    EXPECT_EQ(s1.energy.rho, 0.5);
    EXPECT_EQ(s1.energy.capacity_cells, 6);
    const auto net = build_network(c);
    EXPECT_EQ(net.size(), 2u);
    EXPECT_EQ(net.sensors[0].state_count(), 7u * 4u * 4u);
}

TEST(Config, ModelHashTracksTheModelOnly) {
    auto c = parse_config(small_json());
    const auto h = model_hash(c);
    c.mc.seed = 12345;
    c.mc.runs = 7;
    EXPECT_EQ(model_hash(c), h);
    c.p_tot_mw = 3.0;
    EXPECT_NE(model_hash(c), h);
}

TEST(Sweep, AxisValuesRewriteTheConfig) {
    const auto c = load_config(std::string(EHPC_CONFIG_DIR) + "/fig4.json");
    const auto k = with_axis_value(c, "capacity_cells", 4);
    EXPECT_EQ(sensor_block(k, 1).energy.capacity_cells, 4);
    const auto r = with_axis_value(c, "rho", 0.7);
    EXPECT_EQ(sensor_block(r, 0).energy.rho, 0.7);
    EXPECT_EQ(sensor_block(r, 1).energy.rho, 0.7);
    EXPECT_EQ(with_axis_value(c, "sensors", 1).sensor_overrides.size(), 1u);
    EXPECT_EQ(with_axis_value(c, "snr_s_db", 6.0).base.sensing.snr_s_db, 6.0);
    EXPECT_THROW(with_axis_value(c, "sensors", 1.5), ConfigError);
    EXPECT_THROW(with_axis_value(c, "nope", 1.0), ConfigError);
    for (const auto& a : sweep_axes()) EXPECT_FALSE(a.empty());
}

TEST(Solver, MultiplierTransientNearZeroConverges) {
    // lambda* is small here, so early iterates bounce off zero before settling.
    const auto c = with_axis_value(load_config(std::string(EHPC_CONFIG_DIR) + "/fig9.json"), "sensors", 3);
    const auto rep = solve_suboptimal(build_network(c), c.solver);
    EXPECT_GT(rep.lambdas[0], 0.0);
    EXPECT_LT(rep.lambdas[0], 0.1);
    EXPECT_LE(rep.final_residual, bellman_threshold(c.solver.eps1, c.eta));
}

TEST(Commands, DesignQuantizerListsBoundariesAndProbabilities) {
    TempDir dir;
    json j = small_json(1);
    j["channel"]["quantizer"] = {{"method", "moe"}, {"levels", 4}};
    std::ostringstream log;
    cmd_design_quantizer(parse_config(j), dir.str(), log);
    const std::string csv = slurp(dir / "quantizer.csv");
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "sensor,method,level,lower,upper,phi,mae");
    std::vector<double> phi;
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        ASSERT_EQ(cells.size(), 7u);
        phi.push_back(std::stod(cells[5]));
    }
    ASSERT_EQ(phi.size(), 4u);
    for (int l = 0; l < 3; ++l) EXPECT_NEAR(phi[l], 0.2, 1e-12);
    EXPECT_NEAR(phi[3], 0.4, 1e-12);
    EXPECT_NE(log.str().find("MAE"), std::string::npos);
}

TEST(Commands, ExplicitFigureBoundariesAcceptedVerbatim) {
    TempDir dir;
    std::ostringstream log;
    cmd_design_quantizer(load_config(std::string(EHPC_CONFIG_DIR) + "/fig4.json"), dir.str(), log);
    EXPECT_NE(log.str().find("boundaries 0 0.3 2.5 4.7"), std::string::npos) << log.str();
}

TEST(Commands, SingleSensorModesWriteIdenticalTables) {
    TempDir opt_dir, sub_dir;
    json j = small_json(1);
    j["network"]["p_tot_mw"] = 100.0;
    const auto c = parse_config(j);
    std::ostringstream log;
    cmd_solve(c, SolveMode::Optimal, opt_dir.str(), false, log);
    cmd_solve(c, SolveMode::Suboptimal, sub_dir.str(), false, log);
    const std::string opt = slurp(opt_dir / "policy.csv");
    const std::string sub = slurp(sub_dir / "policy_sensor_0.csv");
    ASSERT_FALSE(opt.empty());
    EXPECT_EQ(body_of(opt), body_of(sub));
}

TEST(Commands, SolveWritesReportsAndSimulateReadsThemBack) {
    TempDir dir;
    const auto c = parse_config(small_json(2));
    std::ostringstream log;
    cmd_solve(c, SolveMode::Suboptimal, dir.str(), true, log);
    for (const char* f : {"rewards.csv", "policy_sensor_0.csv", "policy_sensor_1.csv", "residuals.csv",
                          "multipliers.csv", "solve_summary.json", "fig4.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const json summary = json::parse(slurp(dir / "solve_summary.json"));
    EXPECT_LE(summary["final_residual"].get<double>(), summary["residual_threshold"].get<double>());

    TempDir out;
    cmd_simulate(c, SolveMode::Suboptimal, dir.str(), out.str(), log);
    const std::string from_file = slurp(out / "simulate_suboptimal.csv");
    TempDir inline_out;
    cmd_simulate(c, SolveMode::Suboptimal, "", inline_out.str(), log);
    EXPECT_EQ(from_file, slurp(inline_out / "simulate_suboptimal.csv"));
    EXPECT_EQ(from_file.rfind("axis,value,p_e,p_e_se,avg_j,avg_j_se,avg_power_mw,violations,runs,seed\n", 0), 0u);
}

TEST(Commands, MissingPolicyNamesTheExpectedPath) {
    TempDir dir, out;
    const auto c = parse_config(small_json(2));
    std::ostringstream log;
    try {
        cmd_simulate(c, SolveMode::Optimal, dir.str(), out.str(), log);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find((dir / "policy.csv").string()), std::string::npos) << e.what();
    }
}

TEST(Commands, PolicyFromAnotherModelIsRejected) {
    TempDir dir, out;
    auto c = parse_config(small_json(2));
    std::ostringstream log;
    cmd_solve(c, SolveMode::Optimal, dir.str(), false, log);
    c.p_tot_mw = 3.0;
    EXPECT_THROW(cmd_simulate(c, SolveMode::Optimal, dir.str(), out.str(), log), ConfigError);
}

TEST(Commands, OutputsAreDeterministic) {
    TempDir a, b;
    json j = small_json(2);
    j["sweep"] = {{"axis", "p_tot_mw"}, {"values", {1.0, 3.0}}, {"modes", {"suboptimal", "random"}}};
    j["mc"]["workers"] = 2;
    const auto c = parse_config(j);
    std::ostringstream log;
    cmd_sweep(c, a.str(), true, log);
    cmd_sweep(c, b.str(), true, log);
    for (const char* f : {"sweep_suboptimal.csv", "sweep_random.csv", "fig7.csv"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const std::string fig = slurp(a / "fig7.csv");
    EXPECT_EQ(fig.rfind("series,x,metric,value,se\n", 0), 0u);
}

TEST(Commands, OptimalGuardTripsOnLargeNetworks) {
    json j = small_json(6);
    j["energy"]["capacity_cells"] = 10;
    j["energy"]["harvest_levels_cells"] = {0, 1, 2, 3};
    j["channel"]["quantizer"]["levels"] = 4;
    const auto c = parse_config(j);
    TempDir dir;
    std::ostringstream log;
    try {
        cmd_solve(c, SolveMode::Optimal, dir.str(), false, log);
        FAIL();
    } catch (const GuardError& e) {
        const double states = std::pow(11.0 * 4.0 * 4.0, 6.0);
        EXPECT_EQ(e.state_count(), states);
        EXPECT_EQ(exit_code_for(e), 4);
    }
}

TEST(Commands, ExitCodes) {
    EXPECT_EQ(exit_code_for(ConfigError("x")), 2);
    EXPECT_EQ(exit_code_for(ParameterError("x")), 2);
    EXPECT_EQ(exit_code_for(ModelValidityError("x", 0, 0)), 2);
    EXPECT_EQ(exit_code_for(ConvergenceError("x")), 3);
    EXPECT_EQ(exit_code_for(GuardError("x", 1.0)), 4);
    EXPECT_EQ(exit_code_for(std::runtime_error("x")), 1);
    EXPECT_EQ(solve_mode_from_string(to_string(SolveMode::Random)), SolveMode::Random);
    EXPECT_THROW(solve_mode_from_string("best"), ConfigError);
}

}  // namespace
}  // namespace ehpc
