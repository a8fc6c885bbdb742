#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/dataset/records.hpp"
#include "forge/lm/sampler.hpp"
#include "forge/lm/train.hpp"
#include "forge/metrics/metrics.hpp"
#include "forge/security/security.hpp"

namespace forge::pipeline {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModelSettings {
    int embed_dim = 128;
    int num_layers = 4;
    int num_heads = 4;
    int context_len = 512;
    int bpe_merges = 256;
    int pretrain_epochs = 2;
    double pretrain_learning_rate = 3e-3;
    int pretrain_batch_size = 4;
};

/// Every setting of a run. Relative paths resolve against the config file's directory.
struct PipelineConfig {
    std::filesystem::path corpus_dir = "corpus/contracts";
    std::filesystem::path labels_path;  // empty: label the corpus with the analyzer
    std::filesystem::path tasks_path = "corpus/tasks.jsonl";
    std::filesystem::path output_dir = "out";
    std::uint64_t seed = 0;
    std::vector<data::Stage> stages = {data::Stage::CI, data::Stage::VD, data::Stage::TI};
    std::size_t workers = 1;
    int samples_per_task = 5;
    ModelSettings model;
    lm::TrainConfig train;
    lm::SamplerConfig sampler;
    metrics::MetricConfig metrics;
    security::ToolConfig tools;

    /// Throws ConfigError on an invalid value.
    void validate() const;
    /// Sorted "section.key = value" lines of every setting.
    std::string canonical() const;
    bool stage_enabled(data::Stage s) const;
};

/// Reads an INI file, then applies "section.key=value" overrides in order.
/// Unknown keys are errors. A missing file is an error unless `path` is empty.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});

/// The documented key set with defaults, as an INI text.
std::string default_config_text();

}  // namespace forge::pipeline
