#pragma once

#include <array>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace forge::metrics {

struct MetricConfig {
    int max_n = 4;
    std::array<double, 4> codebleu_weights{0.25, 0.25, 0.25, 0.25};  // ngram, weighted, ast, dataflow
    double keyword_weight = 4.0;
    double smoothing_epsilon = 1e-9;

    /// Throws std::invalid_argument on a bad configuration.
    void validate() const;
};

struct Components {
    double ngram = 0;
    double weighted_ngram = 0;
    double ast_match = 0;
    double dataflow_match = 0;
};

struct SampleScores {
    double bleu = 0;
    double cb = 0;
    Components components;
    bool parse_failed = false;  // candidate did not parse; syntax and dataflow scored 0
};

class EmptyReference : public std::invalid_argument {
public:
    EmptyReference() : std::invalid_argument("reference is empty") {}
};
class EmptySamples : public std::invalid_argument {
public:
    explicit EmptySamples(const std::string& task) : std::invalid_argument("no samples for task " + task) {}
};

using Tokens = std::vector<std::string>;

/// Lexemes of comment-stripped code. Falls back to whitespace splitting when the
/// text does not lex.
Tokens code_tokens(std::string_view code);

double bleu(const Tokens& candidate, const Tokens& reference, const MetricConfig& cfg = {});
double weighted_ngram_match(const Tokens& candidate, const Tokens& reference, const MetricConfig& cfg = {});

/// Syntax and dataflow components; `failed` is set when the candidate does not parse.
double ast_match(std::string_view candidate_src, std::string_view reference_src, const MetricConfig& cfg = {},
                 bool* failed = nullptr);
double dataflow_match(std::string_view candidate_src, std::string_view reference_src, bool* failed = nullptr);

double combine(const Components& c, const MetricConfig& cfg);
SampleScores codebleu(std::string_view candidate_src, std::string_view reference_src, const MetricConfig& cfg = {});

struct TaskAggregate {
    std::string task_id;
    double avg_bleu = 0;
    double best_bleu = 0;
    double avg_cb = 0;
    double best_cb = 0;
};

TaskAggregate aggregate(const std::vector<SampleScores>& samples, const std::string& task_id);

// Evaluation files.
struct EvalTask {
    std::string task_id;
    std::string instruction;
    std::string reference_code;
};
struct GeneratedSample {
    std::string task_id;
    int sample_index = 0;
    std::string code;
};
struct ScoreRow {
    std::string task_id;
    int sample_index = 0;
    SampleScores scores;
};

/// Corpus means of the per-task aggregates.
struct Summary {
    std::size_t tasks = 0;
    double avg_bleu = 0;
    double best_bleu = 0;
    double avg_cb = 0;
    double best_cb = 0;
};

std::vector<EvalTask> read_tasks(const std::filesystem::path& path);
void write_tasks(const std::filesystem::path& path, const std::vector<EvalTask>& tasks);
std::vector<GeneratedSample> read_samples(const std::filesystem::path& path);
void write_samples(const std::filesystem::path& path, const std::vector<GeneratedSample>& samples);

/// Scores every sample against its task's reference, sorted by (task_id, sample_index).
std::vector<ScoreRow> score_samples(const std::vector<EvalTask>& tasks, const std::vector<GeneratedSample>& samples,
                                    const MetricConfig& cfg, std::size_t workers);
std::vector<TaskAggregate> aggregate_rows(const std::vector<ScoreRow>& rows);
Summary summarize(const std::vector<TaskAggregate>& per_task);

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
void write_summary(const std::filesystem::path& path, const Summary& summary);
Summary read_summary(const std::filesystem::path& path);

}  // namespace forge::metrics
