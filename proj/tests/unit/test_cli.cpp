#include <cstdlib>
#include <fstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"
#include "support.hpp"
#include "toolpose/metrics.hpp"
#include "toolpose/model_io.hpp"

namespace {

int run(const std::string& args) {
    const std::string cmd = std::string(TOOLPOSE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p) << text;
}

}  // namespace

TEST_CASE("cli usage errors exit with 1") {
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("track --out x.csv") == 1);
}

TEST_CASE("cli data errors exit with 2") {
    const auto dir = testing::scratch_dir("cli_data");
    CHECK(run("eval --est " + (dir / "nope.csv").string() + " --gt " + (dir / "nope.csv").string()) == 2);
    write_text(dir / "bad.csv", "frame,R00\n1,2\n");
    CHECK(run("eval --est " + (dir / "bad.csv").string() + " --gt " + (dir / "bad.csv").string()) == 2);
    write_text(dir / "spec.json", R"({"n_frames": 0})");
    CHECK(run("synth sequence --spec " + (dir / "spec.json").string() + " --out " + (dir / "seq").string()) == 2);
}

TEST_CASE("cli writes the built-in model") {
    const auto dir = testing::scratch_dir("cli_model");
    REQUIRE(run("model --out " + (dir / "tool.json").string()) == 0);
    CHECK(toolpose::load_tool_model(dir / "tool.json").gaussians.size() ==
          toolpose::default_tool_model().gaussians.size());
}

TEST_CASE("cli synth, track and eval pipeline") {
    const auto dir = testing::scratch_dir("cli_pipeline");
    write_text(dir / "spec.json",
               R"({"n_frames": 3, "seed": 2, "camera": {"width": 48, "height": 48, "focal": 75}})");
    REQUIRE(run("synth sequence --spec " + (dir / "spec.json").string() + " --out " + (dir / "seq").string()) == 0);
    CHECK(std::filesystem::exists(dir / "seq" / "ground_truth.csv"));
    REQUIRE(run("track --frames " + (dir / "seq").string() + " --init-from-manifest --max-iters-first-frame 5" +
                " --out " + (dir / "est.csv").string()) == 0);
    const auto est = toolpose::load_trajectory(dir / "est.csv");
    CHECK(est.size() == 3);
    REQUIRE(run("eval --est " + (dir / "est.csv").string() + " --gt " + (dir / "seq" / "ground_truth.csv").string() +
                " --report " + (dir / "report.txt").string() + " --curves " + (dir / "curves.csv").string()) == 0);
    CHECK(testing::read_file(dir / "report.txt").find("ADE") != std::string::npos);
    CHECK(run("track --frames " + (dir / "seq").string() + " --init-from-manifest --lr-rot -1 --out " +
              (dir / "x.csv").string()) == 2);
}
