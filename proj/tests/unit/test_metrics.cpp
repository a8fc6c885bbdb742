#include <cmath>
#include <filesystem>
#include <functional>

#include "doctest.h"
#include "forge/frontend/analysis.hpp"
#include "forge/metrics/metrics.hpp"
#include "forge/synth/toy_corpus.hpp"

using namespace forge;
using namespace forge::metrics;

namespace {

// Brute-force n-gram counter: positions compared one by one, no hashing.
double oracle_bleu(const Tokens& c, const Tokens& r, int max_n = 4, double eps = 1e-9) {
    if (c.empty()) return 0.0;
    auto occurrences = [](const Tokens& seq, const Tokens& c_seq, std::size_t at, std::size_t n) {
        std::size_t count = 0;
        for (std::size_t i = 0; i + n <= seq.size(); ++i) {
            bool same = true;
            for (std::size_t m = 0; m < n && same; ++m) same = seq[i + m] == c_seq[at + m];
            count += same ? 1 : 0;
        }
        return count;
    };
    double log_sum = 0;
    int orders = 0;
    for (int order = 1; order <= max_n; ++order) {
        const std::size_t n = static_cast<std::size_t>(order);
        if (c.size() < n) continue;
        const std::size_t total = c.size() - n + 1;
        double matched = 0;
        for (std::size_t i = 0; i < total; ++i) {
            // count each distinct n-gram once, at its first position
            bool first = true;
            for (std::size_t p = 0; p < i && first; ++p) {
                bool same = true;
                for (std::size_t m = 0; m < n && same; ++m) same = c[p + m] == c[i + m];
                first = !same;
            }
            if (!first) continue;
            matched += static_cast<double>(std::min(occurrences(c, c, i, n), occurrences(r, c, i, n)));
        }
        log_sum += std::log(matched > 0 ? matched / static_cast<double>(total) : eps);
        ++orders;
    }
    const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(r.size()) / static_cast<double>(c.size())));
    return bp * std::exp(log_sum / orders);
}

std::vector<Tokens> all_sequences(std::size_t max_len) {
    std::vector<Tokens> out{{}};
    std::vector<Tokens> frontier{{}};
    for (std::size_t len = 1; len <= max_len; ++len) {
        std::vector<Tokens> next;
        for (const auto& s : frontier) {
            for (const char* sym : {"a", "b", "c"}) {
                auto t = s;
                t.push_back(sym);
                next.push_back(t);
            }
        }
        out.insert(out.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    return out;
}

Tokens split(const std::string& s) {
    Tokens out;
    std::size_t i = 0;
    while (i < s.size()) {
        auto j = s.find(' ', i);
        if (j == std::string::npos) j = s.size();
        if (j > i) out.push_back(s.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

// Subtree enumeration by direct recursion over the parse tree.
double oracle_ast(const std::string& cand, const std::string& ref) {
    auto collect = [](const sol::ContractAst& ast) {
        std::vector<std::string> all;
        std::function<void(const sol::Node&)> rec = [&](const sol::Node& n) {
            if (n.height() >= 2) all.push_back(sol::canonical(n));
            for (const auto& c : n.children) rec(c);
        };
        rec(ast.root);
        return all;
    };
    auto c = collect(sol::parse_source(cand));
    auto r = collect(sol::parse_source(ref));
    std::size_t matched = 0;
    std::vector<bool> used(r.size(), false);
    for (const auto& s : c) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (!used[i] && r[i] == s) {
                used[i] = true;
                ++matched;
                break;
            }
        }
    }
    return c.empty() ? 0.0 : static_cast<double>(matched) / static_cast<double>(c.size());
}

}  // namespace

TEST_CASE("bleu: hand cases") {
    CHECK(bleu(split("a b a b c"), split("a b a b c d e")) == doctest::Approx(std::exp(-0.4)).epsilon(1e-12));
    CHECK(std::abs(bleu(split("a b a b c"), split("a b a b c d e")) - std::exp(-0.4)) < 1e-9);
    CHECK(bleu(split("x y z w v"), split("x y z w v")) == 1.0);
    CHECK(bleu(split("x"), split("x")) == 1.0);
    CHECK(bleu({}, split("x y")) == 0.0);
    CHECK_THROWS_AS(bleu(split("x"), {}), EmptyReference);
}

TEST_CASE("bleu: brute-force oracle over a 3-symbol alphabet (length <= 5)") {
    auto seqs = all_sequences(5);
    double worst = 0;
    for (const auto& c : seqs) {
        for (const auto& r : seqs) {
            if (r.empty()) continue;
            worst = std::max(worst, std::abs(bleu(c, r) - oracle_bleu(c, r)));
        }
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("weighted_ngram_match: weight 1 collapses to bleu; keyword divergence costs more") {
    MetricConfig unit;
    unit.keyword_weight = 1.0;
    auto seqs = all_sequences(4);
    for (std::size_t i = 0; i < seqs.size(); i += 7) {
        for (std::size_t j = 1; j < seqs.size(); j += 5) {
            CHECK(weighted_ngram_match(seqs[i], seqs[j], unit) == bleu(seqs[i], seqs[j], unit));
        }
    }
    const auto ref = split("uint x = a + b * c - d ; return x ;");
    const auto keyword_edit = split("uint x = a + b * c - d ; delete x ;");
    const auto ident_edit = split("uint x = a + b * z - d ; return x ;");
    CHECK(weighted_ngram_match(ref, ref) == 1.0);
    CHECK(bleu(keyword_edit, ref) >= bleu(ident_edit, ref));
    CHECK(weighted_ngram_match(keyword_edit, ref) < weighted_ngram_match(ident_edit, ref));
}

TEST_CASE("ast_match: identity, renaming, appended statement") {
    const std::string ref = "contract A { uint s; function f(uint x) public { s = x + 1; } }";
    CHECK(ast_match(ref, ref) == 1.0);
    CHECK(ast_match("contract Q { uint t; function g(uint y) public { t = y + 1; } }", ref) == 1.0);
    const std::string cand = "contract A { uint s; function f(uint x) public { s = x + 1; s = s * 2; } }";
    const double expected = oracle_ast(cand, ref);
    CHECK(expected < 1.0);
    CHECK(expected > 0.0);
    CHECK(ast_match(cand, ref) == doctest::Approx(expected).epsilon(1e-12));
    bool failed = false;
    CHECK(ast_match("contract A {", ref, {}, &failed) == 0.0);
    CHECK(failed);
}

TEST_CASE("dataflow_match: conventions and reordered statements") {
    const std::string ref = "contract A { function f() public { uint a = 1; uint b = 2; uint c = a; uint d = b; } }";
    CHECK(dataflow_match(ref, ref) == 1.0);
    const std::string no_edges = "contract A { function f() public { uint a = 1; } }";
    CHECK(dataflow_match(no_edges, no_edges) == 1.0);
    CHECK(dataflow_match(no_edges, ref) == 0.0);
    // Swapping independent pairs keeps the positional edge set {(0,3,var_0),(1,5,var_1)}.
    CHECK(dataflow_match("contract A { function f() public { uint b = 2; uint a = 1; uint d = b; uint c = a; } }", ref) ==
          1.0);
    // a c a b d b: edges {(0,2,var_0),(3,5,var_2)}, disjoint from the reference.
    CHECK(dataflow_match("contract A { function f() public { uint a = 1; uint c = a; uint b = 2; uint d = b; } }", ref) ==
          0.0);
    // mixed: one shared edge out of two
    CHECK(dataflow_match("contract A { function f() public { uint a = 1; uint b = 2; uint c = a; uint d = a; } }", ref) ==
          0.5);
}

TEST_CASE("codebleu: identity, arithmetic, recomputation from components") {
    const auto contracts = synth::make_toy_corpus(6, 13, 0.5);
    for (const auto& c : contracts) {
        auto s = codebleu(c.source, c.source);
        CHECK(s.cb == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(s.bleu == 1.0);
    }
    CHECK(combine({1, 1, 0, 0}, MetricConfig{}) == 0.5);

    const auto& a = contracts[0];
    const auto& b = contracts[1];
    auto s = codebleu(a.source, b.secure_twin);
    MetricConfig cfg;
    const double ngram = bleu(code_tokens(a.source), code_tokens(b.secure_twin), cfg);
    const double weighted = weighted_ngram_match(code_tokens(a.source), code_tokens(b.secure_twin), cfg);
    const double syn = ast_match(a.source, b.secure_twin, cfg);
    const double flow = dataflow_match(a.source, b.secure_twin);
    CHECK(std::abs(s.cb - 0.25 * (ngram + weighted + syn + flow)) < 1e-12);
    CHECK(s.components.ngram == ngram);
    CHECK(s.components.dataflow_match == flow);
}

TEST_CASE("codebleu: unparseable candidate is flagged, not fatal") {
    const auto c = synth::make_toy_corpus(1, 2)[0];
    auto s = codebleu("contract Broken { function f( {", c.source);
    CHECK(s.parse_failed);
    CHECK(s.components.ast_match == 0.0);
    CHECK(s.components.dataflow_match == 0.0);
    CHECK(s.cb >= 0.0);
    CHECK_THROWS_AS(codebleu("contract A {}", "  // nothing\n"), EmptyReference);
}

TEST_CASE("aggregate: mean and max") {
    std::vector<SampleScores> five;
    for (double b : {0.2, 0.4, 0.6, 0.8, 1.0}) five.push_back({b, b / 2, {}, false});
    auto agg = aggregate(five, "t");
    CHECK(agg.avg_bleu == doctest::Approx(0.6));
    CHECK(agg.best_bleu == 1.0);
    CHECK(agg.best_cb == 0.5);
    auto one = aggregate({five[1]}, "u");
    CHECK(one.avg_bleu == one.best_bleu);
    CHECK(one.avg_cb == one.best_cb);
    CHECK_THROWS_AS(aggregate({}, "v"), EmptySamples);
}

TEST_CASE("MetricConfig: validation") {
    MetricConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    cfg.codebleu_weights = {0.5, 0.5, 0.5, 0.0};
    CHECK_THROWS(cfg.validate());
    cfg = {};
    cfg.keyword_weight = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("score_samples: parallel result equals serial, files round-trip") {
    auto tasks_src = synth::make_toy_tasks(4, 3);
    std::vector<EvalTask> tasks;
    for (const auto& t : tasks_src) tasks.push_back({t.task_id, t.instruction, t.reference_code});
    auto corpus = synth::make_toy_corpus(20, 9);
    std::vector<GeneratedSample> samples;
    for (std::size_t i = 0; i < 20; ++i) {
        samples.push_back({tasks[i % 4].task_id, static_cast<int>(i / 4), corpus[i].source});
    }
    std::reverse(samples.begin(), samples.end());
    auto serial = score_samples(tasks, samples, {}, 1);
    auto parallel = score_samples(tasks, samples, {}, 4);
    REQUIRE(serial.size() == 20);
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].task_id == parallel[i].task_id);
        CHECK(serial[i].sample_index == parallel[i].sample_index);
        CHECK(serial[i].scores.cb == parallel[i].scores.cb);
    }
    CHECK(serial.front().task_id == "task_00");
    CHECK(serial.front().sample_index == 0);
    auto per_task = aggregate_rows(serial);
    CHECK(per_task.size() == 4);
    auto summary = summarize(per_task);

    auto dir = std::filesystem::temp_directory_path() / "forge_test_metrics";
    std::filesystem::create_directories(dir);
    write_tasks(dir / "tasks.jsonl", tasks);
    write_samples(dir / "samples.jsonl", samples);
    CHECK(read_tasks(dir / "tasks.jsonl").size() == 4);
    CHECK(read_samples(dir / "samples.jsonl")[3].code == samples[3].code);
    write_summary(dir / "summary.json", summary);
    auto back = read_summary(dir / "summary.json");
    CHECK(back.avg_cb == summary.avg_cb);
    CHECK(back.tasks == 4);
    write_scores(dir / "scores.jsonl", serial);
    CHECK(std::filesystem::file_size(dir / "scores.jsonl") > 0);
}
