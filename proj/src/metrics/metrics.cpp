#include "forge/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <tuple>
#include <sstream>

#include "forge/common/parallel.hpp"
#include "forge/frontend/analysis.hpp"
#include "forge/frontend/ast.hpp"
#include "forge/frontend/lexer.hpp"
#include "json.hpp"

namespace forge::metrics {

namespace {

using NgramCounts = std::map<std::string, std::pair<std::size_t, bool>>;  // count, starts with keyword

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
    NgramCounts out;
    if (tokens.size() < n) return out;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string key = tokens[i];
        for (std::size_t m = 1; m < n; ++m) {
            key += '\x1f';
            key += tokens[i + m];
        }
        auto& slot = out[key];
        ++slot.first;
        slot.second = sol::is_keyword(tokens[i]) || sol::is_elementary_type(tokens[i]);
    }
    return out;
}

double ngram_score(const Tokens& cand, const Tokens& ref, const MetricConfig& cfg, double keyword_weight) {
    if (ref.empty()) throw EmptyReference();
    if (cand.empty()) return 0.0;
    double log_sum = 0;
    int orders = 0;
    for (int n = 1; n <= cfg.max_n; ++n) {
        const auto c = count_ngrams(cand, static_cast<std::size_t>(n));
        if (c.empty()) continue;  // candidate shorter than n
        const auto r = count_ngrams(ref, static_cast<std::size_t>(n));
        double num = 0, den = 0;
        for (const auto& [gram, info] : c) {
            const double w = info.second ? keyword_weight : 1.0;
            auto it = r.find(gram);
            const std::size_t clipped = it == r.end() ? 0 : std::min(info.first, it->second.first);
            num += w * static_cast<double>(clipped);
            den += w * static_cast<double>(info.first);
        }
        const double p = num > 0 ? num / den : cfg.smoothing_epsilon;
        log_sum += std::log(p);
        ++orders;
    }
    const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref.size()) / static_cast<double>(cand.size())));
    return bp * std::exp(log_sum / orders);
}

std::string trim_copy(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    return std::string(s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1));
}

// Parses comment-stripped code; nullopt when the source is not parseable at top level.
std::optional<sol::ContractAst> try_parse(std::string_view src) {
    try {
        return sol::parse_source(sol::strip_comments(src));
    } catch (const sol::LexError&) {
        return std::nullopt;
    } catch (const sol::ParseError&) {
        return std::nullopt;
    }
}

sol::ContractAst parse_reference(std::string_view src) {
    if (trim_copy(src).empty()) throw EmptyReference();
    return sol::parse_source(sol::strip_comments(src));
}

double ast_score(const sol::ContractAst& cand, const sol::ContractAst& ref) {
    const auto c = sol::subtrees(cand, 2);
    const auto r = sol::subtrees(ref, 2);
    const std::size_t total = sol::multiset_size(c);
    if (total == 0) return 0.0;
    std::size_t matched = 0;
    for (const auto& [key, count] : c) {
        auto it = r.find(key);
        if (it != r.end()) matched += std::min(count, it->second);
    }
    return static_cast<double>(matched) / static_cast<double>(total);
}

double dataflow_score(const sol::ContractAst& cand, const sol::ContractAst& ref) {
    const auto c = sol::def_use_edges(cand);
    const auto r = sol::def_use_edges(ref);
    if (c.empty()) return r.empty() ? 1.0 : 0.0;
    std::size_t matched = 0;
    for (const auto& e : c) matched += r.count(e);
    return static_cast<double>(matched) / static_cast<double>(c.size());
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!trim_copy(line).empty()) lines.push_back(line);
    }
    return lines;
}

}  // namespace

void MetricConfig::validate() const {
    if (max_n < 1) throw std::invalid_argument("max_n must be >= 1");
    double sum = 0;
    for (double w : codebleu_weights) {
        if (!(w >= 0)) throw std::invalid_argument("codebleu weights must be non-negative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw std::invalid_argument("codebleu weights must sum to 1");
    if (!(keyword_weight > 0)) throw std::invalid_argument("keyword_weight must be positive");
    if (!(smoothing_epsilon > 0)) throw std::invalid_argument("smoothing_epsilon must be positive");
}

Tokens code_tokens(std::string_view code) {
    try {
        return sol::tokenize(sol::strip_comments(code)).lexemes();
    } catch (const sol::LexError&) {
        Tokens out;
        std::istringstream in{std::string(code)};
        std::string word;
        while (in >> word) out.push_back(word);
        return out;
    }
}

double bleu(const Tokens& candidate, const Tokens& reference, const MetricConfig& cfg) {
    return ngram_score(candidate, reference, cfg, 1.0);
}

double weighted_ngram_match(const Tokens& candidate, const Tokens& reference, const MetricConfig& cfg) {
    return ngram_score(candidate, reference, cfg, cfg.keyword_weight);
}

double ast_match(std::string_view candidate_src, std::string_view reference_src, const MetricConfig&, bool* failed) {
    const auto ref = parse_reference(reference_src);
    const auto cand = try_parse(candidate_src);
    if (failed) *failed = !cand;
    return cand ? ast_score(*cand, ref) : 0.0;
}

double dataflow_match(std::string_view candidate_src, std::string_view reference_src, bool* failed) {
    const auto ref = parse_reference(reference_src);
    const auto cand = try_parse(candidate_src);
    if (failed) *failed = !cand;
    return cand ? dataflow_score(*cand, ref) : 0.0;
}

double combine(const Components& c, const MetricConfig& cfg) {
    const auto& w = cfg.codebleu_weights;
    // weights sum to 1; the clamp only removes rounding past the ends
    return std::clamp(w[0] * c.ngram + w[1] * c.weighted_ngram + w[2] * c.ast_match + w[3] * c.dataflow_match, 0.0, 1.0);
}

SampleScores codebleu(std::string_view candidate_src, std::string_view reference_src, const MetricConfig& cfg) {
    const Tokens ref_tokens = code_tokens(reference_src);
    if (ref_tokens.empty()) throw EmptyReference();
    const Tokens cand_tokens = code_tokens(candidate_src);
    const auto ref = parse_reference(reference_src);
    const auto cand = try_parse(candidate_src);

    SampleScores s;
    s.components.ngram = bleu(cand_tokens, ref_tokens, cfg);
    s.components.weighted_ngram = weighted_ngram_match(cand_tokens, ref_tokens, cfg);
    if (cand) {
        s.components.ast_match = ast_score(*cand, ref);
        s.components.dataflow_match = dataflow_score(*cand, ref);
    } else {
        s.parse_failed = true;
    }
    s.bleu = s.components.ngram;
    s.cb = combine(s.components, cfg);
    return s;
}

TaskAggregate aggregate(const std::vector<SampleScores>& samples, const std::string& task_id) {
    if (samples.empty()) throw EmptySamples(task_id);
    TaskAggregate a;
    a.task_id = task_id;
    a.best_bleu = samples.front().bleu;
    a.best_cb = samples.front().cb;
    for (const auto& s : samples) {
        a.avg_bleu += s.bleu;
        a.avg_cb += s.cb;
        a.best_bleu = std::max(a.best_bleu, s.bleu);
        a.best_cb = std::max(a.best_cb, s.cb);
    }
    a.avg_bleu /= static_cast<double>(samples.size());
    a.avg_cb /= static_cast<double>(samples.size());
    return a;
}

std::vector<EvalTask> read_tasks(const std::filesystem::path& path) {
    std::vector<EvalTask> out;
    for (const auto& line : read_lines(path)) {
        auto j = nlohmann::json::parse(line);
        out.push_back({j.at("task_id").get<std::string>(), j.at("instruction").get<std::string>(),
                       j.at("reference_code").get<std::string>()});
    }
    return out;
}

void write_tasks(const std::filesystem::path& path, const std::vector<EvalTask>& tasks) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& t : tasks) {
        out << nlohmann::ordered_json{{"task_id", t.task_id}, {"instruction", t.instruction}, {"reference_code", t.reference_code}}
                   .dump()
            << '\n';
    }
}

std::vector<GeneratedSample> read_samples(const std::filesystem::path& path) {
    std::vector<GeneratedSample> out;
    for (const auto& line : read_lines(path)) {
        auto j = nlohmann::json::parse(line);
        out.push_back({j.at("task_id").get<std::string>(), j.at("sample_index").get<int>(), j.at("code").get<std::string>()});
    }
    return out;
}

void write_samples(const std::filesystem::path& path, const std::vector<GeneratedSample>& samples) {
    // model output can hold invalid UTF-8; such bytes become U+FFFD
    std::string text;
    for (const auto& s : samples) {
        text += nlohmann::ordered_json{{"task_id", s.task_id}, {"sample_index", s.sample_index}, {"code", s.code}}.dump(
            -1, ' ', false, nlohmann::json::error_handler_t::replace);
        text += '\n';
    }
    std::ofstream(path, std::ios::binary) << text;
}

std::vector<ScoreRow> score_samples(const std::vector<EvalTask>& tasks, const std::vector<GeneratedSample>& samples,
                                    const MetricConfig& cfg, std::size_t workers) {
    cfg.validate();
    std::map<std::string, const EvalTask*> by_id;
    for (const auto& t : tasks) by_id[t.task_id] = &t;
    std::vector<ScoreRow> rows(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        const auto& s = samples[i];
        auto it = by_id.find(s.task_id);
        if (it == by_id.end()) throw std::runtime_error("sample refers to unknown task " + s.task_id);
        rows[i] = {s.task_id, s.sample_index, codebleu(s.code, it->second->reference_code, cfg)};
    });
    std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
        return std::tie(a.task_id, a.sample_index) < std::tie(b.task_id, b.sample_index);
    });
    return rows;
}

std::vector<TaskAggregate> aggregate_rows(const std::vector<ScoreRow>& rows) {
    std::vector<TaskAggregate> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::vector<SampleScores> group;
        std::size_t j = i;
        for (; j < rows.size() && rows[j].task_id == rows[i].task_id; ++j) group.push_back(rows[j].scores);
        out.push_back(aggregate(group, rows[i].task_id));
        i = j;
    }
    return out;
}

Summary summarize(const std::vector<TaskAggregate>& per_task) {
    Summary s;
    s.tasks = per_task.size();
    if (per_task.empty()) return s;
    for (const auto& a : per_task) {
        s.avg_bleu += a.avg_bleu;
        s.best_bleu += a.best_bleu;
        s.avg_cb += a.avg_cb;
        s.best_cb += a.best_cb;
    }
    const double n = static_cast<double>(per_task.size());
    s.avg_bleu /= n;
    s.best_bleu /= n;
    s.avg_cb /= n;
    s.best_cb /= n;
    return s;
}

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRow>& rows) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& r : rows) {
        const auto& c = r.scores.components;
        out << nlohmann::ordered_json{{"task_id", r.task_id},
                                      {"sample_index", r.sample_index},
                                      {"bleu", r.scores.bleu},
                                      {"codebleu", r.scores.cb},
                                      {"ngram", c.ngram},
                                      {"weighted_ngram", c.weighted_ngram},
                                      {"ast_match", c.ast_match},
                                      {"dataflow_match", c.dataflow_match},
                                      {"parse_failed", r.scores.parse_failed}}
                   .dump()
            << '\n';
    }
}

void write_summary(const std::filesystem::path& path, const Summary& s) {
    std::ofstream out(path, std::ios::binary);
    out << nlohmann::ordered_json{{"tasks", s.tasks},
                                  {"AvgBLEU", s.avg_bleu},
                                  {"BestBLEU", s.best_bleu},
                                  {"AvgCB", s.avg_cb},
                                  {"BestCB", s.best_cb}}
               .dump(2)
        << '\n';
}

Summary read_summary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    auto j = nlohmann::json::parse(in);
    Summary s;
    s.tasks = j.at("tasks").get<std::size_t>();
    s.avg_bleu = j.at("AvgBLEU").get<double>();
    s.best_bleu = j.at("BestBLEU").get<double>();
    s.avg_cb = j.at("AvgCB").get<double>();
    s.best_cb = j.at("BestCB").get<double>();
    return s;
}

}  // namespace forge::metrics
