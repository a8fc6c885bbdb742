#include <filesystem>
#include <iostream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "forge/lm/checkpoint.hpp"
#include "forge/lm/train.hpp"
#include "forge/pipeline/pipeline.hpp"
#include "forge/security/security.hpp"

namespace forge::pipeline {

int run_cli(int argc, char** argv) {
    CLI::App app{"forge: smart-contract code model pipeline"};
    app.require_subcommand(1, 1);
    std::string config_path;
    std::string stage_text;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> overrides;
    std::string log_level = "info";
    app.add_option("--config", config_path, "INI config file (default: ./forge.ini when present)");
    app.add_option("--stage", stage_text, "restrict build/train to one stage")->check(CLI::IsMember({"ci", "vd", "ti"}));
    app.add_option("--seed", seed, "override run.seed");
    app.add_option("--set", overrides, "override a config key, e.g. --set train.epochs_ci=2");
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");
    app.fallthrough();
    const std::pair<const char*, const char*> commands[] = {
        {"ingest", "parse and label the contract corpus"},
        {"build", "write CI/VD/TI training datasets"},
        {"train", "pretrain the base model and train stage adapters"},
        {"generate", "sample contracts for each evaluation task"},
        {"evaluate", "score samples and run the security checks"},
        {"report", "write the summary table"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    auto logger = spdlog::get("forge");
    if (!logger) logger = spdlog::stderr_color_mt("forge");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::from_str(log_level));

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        std::filesystem::path path = config_path;
        if (path.empty() && std::filesystem::is_regular_file("forge.ini")) path = "forge.ini";
        if (seed) overrides.push_back("run.seed=" + std::to_string(*seed));
        const auto cfg = load_config(path, overrides);
        std::optional<data::Stage> stage;
        if (!stage_text.empty()) {
            stage = data::parse_stage(stage_text);
            if (command != "build" && command != "train") spdlog::warn("--stage is ignored by {}", command);
        }
        if (command == "ingest") cmd_ingest(cfg);
        else if (command == "build") cmd_build(cfg, stage);
        else if (command == "train") cmd_train(cfg, stage);
        else if (command == "generate") cmd_generate(cfg);
        else if (command == "evaluate") cmd_evaluate(cfg);
        else cmd_report(cfg);
        return kOk;
    } catch (const ConfigError& e) {
        spdlog::error("{}", e.what());
        return kConfigError;
    } catch (const MissingArtifact& e) {
        spdlog::error("{}", e.what());
        return kMissingArtifact;
    } catch (const lm::NotTrained& e) {
        spdlog::error("{}", e.what());
        return kMissingArtifact;
    } catch (const security::ToolSpawnError& e) {
        spdlog::error("external tool failed: {}", e.what());
        return kToolFailure;
    } catch (const std::exception& e) {
        spdlog::error("{} failed: {}", command, e.what());
        return kFailure;
    }
}

}  // namespace forge::pipeline
