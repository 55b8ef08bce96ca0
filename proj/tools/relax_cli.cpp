#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "relax/experiment.hpp"

namespace {

struct Options {
    std::string config;
    std::string out;
    std::string format = "json";
    std::uint64_t seed = 0;
    long budget = 0;
    unsigned threads = 1;
    bool timing = false;
};

int execute(const std::string& kind, const Options& o, CLI::App& sub) {
    using namespace relax;
    json j;
    {
        std::ifstream in(o.config);
        if (!in) throw IoError("cannot open config '" + o.config + "'");
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    }
    if (!j.is_object()) throw ConfigError("config: expected an object");
    if (j.contains("experiment") && j["experiment"] != kind)
        throw ConfigError("config.experiment is '" + j["experiment"].dump() + "' but the subcommand is '" + kind + "'");
    j["experiment"] = kind;
    if (sub.count("--seed")) j["seed"] = o.seed;
    if (sub.count("--budget")) j["budget"] = o.budget;

    const ExperimentConfig cfg = parse_config(j);
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentReport rep = run(cfg, o.threads);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (o.out.empty()) {
        std::cout << (o.format == "csv" ? to_csv(rep) : to_text(rep));
    } else {
        export_report(rep, o.out, o.format);
    }
    if (o.timing) std::fprintf(stderr, "wall_clock_seconds=%.3f\n", secs);
    if (rep.property_failures > 0) {
        std::fprintf(stderr, "%zu property violation(s)\n", rep.property_failures);
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relaxation experiments: envelopes, membrane densities, thin films, interchange."};
    app.require_subcommand(1);
    Options o;
    const char* kinds[] = {"envelope", "membrane", "identity", "thinfilm", "interchange", "growth", "family"};
    for (const char* k : kinds) {
        auto* sub = app.add_subcommand(k, std::string("run a '") + k + "' experiment");
        sub->add_option("--config", o.config, "JSON experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", o.out, "output file (default: stdout)");
        sub->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--seed", o.seed, "override the config seed");
        sub->add_option("--budget", o.budget, "override the optimizer budget")->check(CLI::PositiveNumber);
        sub->add_option("--threads", o.threads, "worker threads (results do not depend on it)")
            ->check(CLI::Range(1u, 256u));
        sub->add_flag("--timing", o.timing, "print wall-clock seconds to stderr");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }
    try {
        for (auto* sub : app.get_subcommands()) return execute(sub->get_name(), o, *sub);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 1;
}
