#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const std::string kCli = EHPC_CLI_PATH;
const std::string kConfigs = EHPC_CONFIG_DIR;

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ehpc_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    int run(const std::string& args) const {
        const std::string cmd = "'" + kCli + "' " + args + " > '" + (dir_ / "stdout.txt").string() + "' 2> '" +
                                (dir_ / "stderr.txt").string() + "'";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string& name) const {
        std::ifstream is(dir_ / name);
        return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

TEST_F(CliTest, HelpExitsZero) {
    EXPECT_EQ(run("--help"), 0);
    EXPECT_NE(read("stdout.txt").find("simulate"), std::string::npos);
}

TEST_F(CliTest, MalformedCommandLineIsAConfigError) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("solve"), 2);
    EXPECT_EQ(run("frobnicate --config x"), 2);
}

TEST_F(CliTest, BadConfigsExitTwo) {
    EXPECT_EQ(run("validate-config --config /nonexistent.json"), 2);
    {
        std::ofstream os(path("bad.json"));
        os << R"({"network": {"sensors": 2, "eta": 1.5}})";
    }
    EXPECT_EQ(run("validate-config --config '" + path("bad.json") + "'"), 2);
    EXPECT_NE(read("stderr.txt").find("eta"), std::string::npos);
    {
        std::ofstream os(path("typo.json"));
        os << R"({"energy": {"capacity": 3}})";
    }
    EXPECT_EQ(run("solve --config '" + path("typo.json") + "' --out '" + path("o") + "'"), 2);
    EXPECT_EQ(run("solve --mode best --config '" + kConfigs + "/toy.json' --out '" + path("o") + "'"), 2);
}

TEST_F(CliTest, ValidateConfigPrintsNormalizedJson) {
    EXPECT_EQ(run("validate-config --config '" + kConfigs + "/fig4.json'"), 0);
    const std::string out = read("stdout.txt");
    EXPECT_NE(out.find("\"capacity_cells\": 6"), std::string::npos);
    EXPECT_NE(out.find("\"sensor_overrides\""), std::string::npos);
}

TEST_F(CliTest, GuardTripExitsFour) {
    EXPECT_EQ(run("solve --mode optimal --config '" + kConfigs + "/guard_n6.json' --out '" + path("o") + "'"), 4);
    EXPECT_NE(read("stderr.txt").find("state"), std::string::npos);
}

TEST_F(CliTest, SolveThenSimulateFromFiles) {
    const std::string cfg = "--config '" + kConfigs + "/toy.json'";
    ASSERT_EQ(run("solve --mode optimal " + cfg + " --out '" + path("pol") + "' --emit-plotdata"), 0);
    EXPECT_TRUE(fs::exists(dir_ / "pol" / "policy.csv"));
    EXPECT_TRUE(fs::exists(dir_ / "pol" / "fig4.csv"));
    ASSERT_EQ(run("simulate --mode optimal " + cfg + " --policy '" + path("pol") + "' --out '" + path("sim") +
                  "' --seed 11"),
              0);
    EXPECT_TRUE(fs::exists(dir_ / "sim" / "simulate_optimal.csv"));
    EXPECT_EQ(run("simulate --mode suboptimal " + cfg + " --policy '" + path("pol") + "' --out '" + path("sim") + "'"),
              2);
    EXPECT_NE(read("stderr.txt").find("policy_sensor_0.csv"), std::string::npos);
}

TEST_F(CliTest, DesignQuantizerWritesTable) {
    ASSERT_EQ(run("design-quantizer --config '" + kConfigs + "/default.json' --out '" + path("q") + "'"), 0);
    EXPECT_TRUE(fs::exists(dir_ / "q" / "quantizer.csv"));
}

}  // namespace
