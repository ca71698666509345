#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "run_config.hpp"

using namespace ringstereo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const char* name) {
    const fs::path d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("config round trip and strict keys") {
    cli::RunConfig c;
    c.seed = 77;
    c.scenes = 5;
    c.motion = cli::MotionKind::RandomWalk;
    c.subset = {0, 4, 8, 12};
    c.pipeline.fat_zero = 0.1;
    c.bench.sensor_counts = {2, 8};
    const nlohmann::json j = cli::config_to_json(c);
    CHECK(cli::config_to_json(cli::config_from_json(j)) == j);

    nlohmann::json bad = j;
    bad["pipeline"]["fat_zeroo"] = 1.0;
    CHECK_THROWS_AS(cli::config_from_json(bad), UsageError);
    CHECK_THROWS_AS(cli::load_config("/nonexistent/config.json"), UsageError);
}

TEST_CASE("depth on a one-scene sequence equals the K=1 sequence map") {
    const fs::path root = scratch("ringstereo_cli_k1");
    cli::RunConfig c;
    c.out = (root / "synth").string();
    REQUIRE(cli::cmd_synth(c, 1) == 0);
    c.input = (root / "synth" / "sequence").string();
    c.out = (root / "depth").string();
    REQUIRE(cli::cmd_depth(c, 1) == 0);
    c.out = (root / "seq").string();
    REQUIRE(cli::cmd_sequence(c, 1) == 0);
    const std::string a = slurp(root / "depth" / "depth.disp.f32"), b = slurp(root / "seq" / "sequence.disp.f32");
    CHECK_FALSE(a.empty());
    CHECK(a == b);
    CHECK(slurp(root / "depth" / "depth.status.u8") == slurp(root / "seq" / "sequence.status.u8"));

    c.input = (root / "missing").string();
    CHECK_THROWS_AS(cli::cmd_depth(c, 1), DataError);
    fs::remove_all(root);
}

TEST_CASE("report lists every sensor count for single and accumulated scenes") {
    const fs::path root = scratch("ringstereo_cli_report");
    cli::RunConfig c;
    c.out = root.string();
    c.bench.sensor_counts = {2, 4, 8, 16};
    c.bench.noise_levels = {0.0, 0.2};
    c.bench.instances = 1;
    c.bench.scenes = 2;
    c.bench.gain.sigma0 = 0.0;
    REQUIRE(cli::cmd_bench(c, 1) == 0);
    for (const char* f : {"sweep.csv", "gains.txt", "netd.csv", "curves.svg", "gains.svg"})
        CHECK(fs::exists(root / f));
    REQUIRE(cli::cmd_report(c) == 0);
    const std::string r = slurp(root / "report.md");
    for (int n : {2, 4, 8, 16})
        for (int k : {1, 2}) {
            const std::string row = "| " + std::to_string(n) + "-sensor, " + std::to_string(k) + "-scene |";
            CHECK_MESSAGE(r.find(row) != std::string::npos, row);
        }
    CHECK(r.find("published, 1") != std::string::npos);
    fs::remove_all(root);
}
