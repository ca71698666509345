#include <cstdio>
#include <exception>
#include <thread>

#include "CLI11.hpp"
#include "run_config.hpp"

using namespace ringstereo;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-sensor ring stereo: synthetic rigs, depth maps, sequence accumulation and benchmarks"};
    app.require_subcommand(1, 1);
    std::string config_path, out, input;
    uint64_t seed = 0;
    int threads = 1;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
        sub->add_option("--out", out, "Output directory (overrides the config)");
        sub->add_option("--seed", seed, "Global seed (overrides the config)");
        sub->add_option("--threads", threads, "Worker threads; 0 uses every core")->check(CLI::NonNegativeNumber);
    };
    auto with_input = [&](CLI::App* sub, const char* what) { sub->add_option("--input", input, what); };

    CLI::App* synth = app.add_subcommand("synth", "Render a synthetic scene or sequence");
    CLI::App* depth = app.add_subcommand("depth", "Single-scene depth map of a sequence's reference scene");
    CLI::App* sequence = app.add_subcommand("sequence", "Accumulated depth map over a whole sequence");
    CLI::App* bench = app.add_subcommand("bench", "Noise sweep, contrast gains and NETD table");
    CLI::App* report = app.add_subcommand("report", "Summary of a bench output directory");
    for (CLI::App* s : {synth, depth, sequence, bench, report}) common(s);
    with_input(depth, "Sequence manifest or its directory");
    with_input(sequence, "Sequence manifest or its directory");
    with_input(report, "Bench output directory (default: --out)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        cli::RunConfig c = config_path.empty() ? cli::RunConfig{} : cli::load_config(config_path);
        CLI::App* sub = app.get_subcommands().front();
        if (sub->count("--out")) c.out = out;
        if (sub->count("--seed")) c.seed = seed;
        if (const CLI::Option* o = sub->get_option_no_throw("--input"); o && o->count()) c.input = input;
        if (threads == 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

        const std::string name = sub->get_name();
        if (name != "report") cli::save_config(std::filesystem::path(c.out) / "config.json", c);
        if (name == "synth") return cli::cmd_synth(c, threads);
        if (name == "depth") return cli::cmd_depth(c, threads);
        if (name == "sequence") return cli::cmd_sequence(c, threads);
        if (name == "bench") return cli::cmd_bench(c, threads);
        return cli::cmd_report(c);
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kUsage;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return kNumerical;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kData;
    }
}
