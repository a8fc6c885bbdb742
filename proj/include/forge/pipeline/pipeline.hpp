#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/pipeline/config.hpp"

namespace forge::pipeline {

/// A required input produced by an earlier command is absent.
class MissingArtifact : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kMissingArtifact = 3, kToolFailure = 4 };

/// Artifact layout under the output directory.
struct Layout {
    std::filesystem::path root;

    std::filesystem::path corpus() const { return root / "ingest" / "corpus.jsonl"; }
    std::filesystem::path corpus_manifest() const { return root / "ingest" / "corpus_manifest.json"; }
    std::filesystem::path dataset(data::Stage s, std::string_view split) const;
    std::filesystem::path base_checkpoint() const { return root / "model" / "base.ckpt"; }
    std::filesystem::path checkpoint(data::Stage s) const;
    std::filesystem::path train_log(data::Stage s) const;
    std::filesystem::path samples() const { return root / "generate" / "samples.jsonl"; }
    std::filesystem::path scores() const { return root / "evaluate" / "scores.jsonl"; }
    std::filesystem::path metric_summary() const { return root / "evaluate" / "metrics.json"; }
    std::filesystem::path findings() const { return root / "evaluate" / "findings.jsonl"; }
    std::filesystem::path security_summary() const { return root / "evaluate" / "security_summary.json"; }
    std::filesystem::path summary() const { return root / "report" / "summary.json"; }
    std::filesystem::path report() const { return root / "report" / "report.md"; }
    std::filesystem::path manifest() const { return root / "manifest.json"; }
};

struct IngestStats {
    std::size_t total = 0;
    std::size_t kept = 0;
    std::size_t dropped_multi_contract = 0;
    std::size_t dropped_unparseable = 0;
    std::size_t dropped_unlabeled = 0;
    std::size_t labeled_by_analyzer = 0;
};

IngestStats cmd_ingest(const PipelineConfig& cfg);
/// Without a stage, every enabled stage in order.
void cmd_build(const PipelineConfig& cfg, std::optional<data::Stage> stage = std::nullopt);
void cmd_train(const PipelineConfig& cfg, std::optional<data::Stage> stage = std::nullopt);
void cmd_generate(const PipelineConfig& cfg);
void cmd_evaluate(const PipelineConfig& cfg);
void cmd_report(const PipelineConfig& cfg);

/// The seven report columns, in order.
inline constexpr std::string_view kReportColumns[] = {"AvgBLEU", "BestBLEU", "AvgCB", "BestCB",
                                                      "ComPass(%)", "VulRate(%)", "SafeAval(%)"};

/// Hex SHA-256 of a file's bytes or of a string.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_text(std::string_view text);

/// Records one command's inputs, outputs and duration in manifest.json.
void record_run(const PipelineConfig& cfg, const std::string& command, const std::vector<std::filesystem::path>& inputs,
                const std::vector<std::filesystem::path>& outputs, double seconds);

/// Full CLI entry point; returns the process exit code.
int run_cli(int argc, char** argv);

}  // namespace forge::pipeline
