#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nids/cli.hpp"

namespace {

int fail(int code, const std::string& message) {
    nlohmann::json e{{"error", {{"code", code}, {"message", message}}}};
    std::cerr << e.dump() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"intrusion detection engine with self-incremental learning"};
    app.require_subcommand(1);

    std::string config_path;
    std::string state_dir_override;
    std::string report_name;
    bool json_only = false;
    bool has_seed_override = false;
    std::uint64_t seed_override = 0;

    auto add_common = [&](CLI::App* sub, bool needs_config) {
        auto* opt = sub->add_option("--config", config_path, "path to the run config file");
        if (needs_config) opt->required();
        sub->add_option("--state-dir", state_dir_override, "override state_dir from the config");
        sub->add_option("--seed", seed_override, "override seed from the config")
            ->each([&](const std::string&) { has_seed_override = true; });
        sub->add_flag("--json", json_only, "print the machine report JSON to stdout");
    };

    auto* synth = app.add_subcommand("synth", "generate a synthetic labeled dataset");
    auto* prepare = app.add_subcommand("prepare", "clean, balance, split, oversample and select features");
    auto* train = app.add_subcommand("train", "train the classifier and detector, build the engine state");
    auto* holdout = app.add_subcommand("scenario-holdout", "replay the held-out attack through the engine");
    auto* false_alarm = app.add_subcommand("scenario-false-alarm", "force benign rows through the anomaly path");
    auto* compare = app.add_subcommand("compare-offline", "retrain a forest offline and compare");
    auto* defaults = app.add_subcommand("defaults", "print every config key with its default");
    auto* report = app.add_subcommand("report", "render a stored report");
    for (CLI::App* sub : {synth, prepare, train, holdout, false_alarm, compare}) add_common(sub, true);
    add_common(report, true);
    report->add_option("name", report_name, "report name (e.g. train, scenario-holdout)")->required();

    CLI11_PARSE(app, argc, argv);

    if (defaults->parsed()) {
        nids::cli::print_defaults(std::cout);
        return 0;
    }

    try {
        nids::cli::RunConfig cfg = nids::cli::load_config(config_path);
        if (!state_dir_override.empty()) cfg.state_dir = state_dir_override;
        if (has_seed_override) cfg.seed = seed_override;

        if (synth->parsed()) nids::cli::cmd_synth(cfg, json_only);
        else if (prepare->parsed()) nids::cli::cmd_prepare(cfg, json_only);
        else if (train->parsed()) nids::cli::cmd_train(cfg, json_only);
        else if (holdout->parsed()) nids::cli::cmd_scenario_holdout(cfg, json_only);
        else if (false_alarm->parsed()) nids::cli::cmd_scenario_false_alarm(cfg, json_only);
        else if (compare->parsed()) nids::cli::cmd_compare_offline(cfg, json_only);
        else if (report->parsed()) nids::cli::cmd_report(cfg, report_name, json_only);
        return 0;
    } catch (const nids::cli::ConfigError& e) {
        return fail(2, e.what());
    } catch (const nids::cli::ExpectationError& e) {
        return fail(4, e.what());
    } catch (const std::exception& e) {
        return fail(3, e.what());
    }
}
