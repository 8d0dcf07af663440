#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(HEATLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("heatlab_cli_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("successful runs write the tables") {
    const fs::path out = scratch("ok");
    CHECK(run("equilibrium --K 2 --N 20 --out-dir " + out.string()) == 0);
    CHECK(fs::exists(out / "equilibrium.csv"));
    CHECK(fs::exists(out / "manifest.json"));
    CHECK(run("--help") == 0);
}

TEST_CASE("config file with flag overrides") {
    const fs::path out = scratch("cfg");
    fs::create_directories(out);
    std::ofstream(out / "c.json") << R"({"N": 20, "K": 2, "dT_list": [0.01, 0.02, 0.04, 0.08]})";
    CHECK(run("linearity --config " + (out / "c.json").string() + " --coupling similar --out-dir " +
              (out / "res").string()) == 0);
    std::ifstream manifest(out / "res" / "manifest.json");
    const std::string text((std::istreambuf_iterator<char>(manifest)), std::istreambuf_iterator<char>());
    CHECK(text.find("\"coupling\": \"similar\"") != std::string::npos);
    CHECK(text.find("\"N\": \"20\"") != std::string::npos);
}

TEST_CASE("environment variable sets the default output directory") {
    const fs::path out = scratch("env");
    const std::string cmd = "HEATLAB_OUT_DIR=" + out.string() + " " + HEATLAB_CLI_PATH +
                            " equilibrium --K 2 --N 20 > /dev/null 2>&1";
    CHECK(std::system(cmd.c_str()) == 0);
    CHECK(fs::exists(out / "equilibrium.csv"));
}

TEST_CASE("exit codes") {
    const fs::path out = scratch("codes");
    CHECK(run("scaling --realizations 0 --out-dir " + out.string()) == 2);
    CHECK(run("scaling --N abc --out-dir " + out.string()) == 2);
    CHECK(run("nonsense") == 2);
    CHECK(run("equilibrium --config /nonexistent/c.json --out-dir " + out.string()) == 1);
    // A decoupled chain makes the rate graph reducible.
    CHECK(run("equilibrium --K 2 --N 20 --coupling dissimilar --w 0 --out-dir " + out.string()) == 3);
    const fs::path file = scratch("file");
    std::ofstream(file) << "x";
    CHECK(run("equilibrium --K 2 --N 20 --out-dir " + file.string() + "/sub") == 1);
}
