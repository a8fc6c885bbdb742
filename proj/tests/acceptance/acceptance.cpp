// Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero
// when any criterion fails.
#include <spdlog/spdlog.h>

#include <Eigen/SVD>
#include <boost/math/distributions/binomial.hpp>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "forge/dataset/builders.hpp"
#include "forge/frontend/lexer.hpp"
#include "forge/lm/sampler.hpp"
#include "forge/lm/train.hpp"
#include "forge/metrics/metrics.hpp"
#include "forge/pipeline/pipeline.hpp"
#include "forge/security/security.hpp"
#include "forge/synth/toy_corpus.hpp"
#include "json.hpp"

using namespace forge;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("forge_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---- 1: BLEU against a brute-force counter -------------------------------------

using metrics::Tokens;

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
        const auto n = static_cast<std::size_t>(order);
        if (c.size() < n) continue;
        const std::size_t total = c.size() - n + 1;
        double matched = 0;
        for (std::size_t i = 0; i < total; ++i) {
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

Outcome check_bleu() {
    std::vector<Tokens> seqs{{}};
    std::vector<Tokens> frontier{{}};
    for (int len = 1; len <= 6; ++len) {
        std::vector<Tokens> next;
        for (const auto& s : frontier) {
            for (const char* sym : {"a", "b", "c"}) {
                auto t = s;
                t.push_back(sym);
                next.push_back(t);
            }
        }
        seqs.insert(seqs.end(), next.begin(), next.end());
        frontier = std::move(next);
    }
    double worst = 0;
    std::size_t pairs = 0;
    for (const auto& c : seqs) {
        for (const auto& r : seqs) {
            if (r.empty()) continue;
            worst = std::max(worst, std::abs(metrics::bleu(c, r) - oracle_bleu(c, r)));
            ++pairs;
        }
    }
    const double hand = metrics::bleu({"a", "b", "a", "b", "c"}, {"a", "b", "a", "b", "c", "d", "e"});
    const double hand_err = std::abs(hand - std::exp(-0.4));
    return {worst < 1e-9 && hand_err < 1e-9,
            std::to_string(pairs) + " pairs, worst " + fmt(worst) + ", hand case error " + fmt(hand_err)};
}

// ---- 2: CodeBLEU is the weighted sum of its components ---------------------------

std::vector<std::string> fixture_sources() {
    std::vector<std::string> out;
    const fs::path dir = fs::path(FORGE_FIXTURES_DIR) / "detectors";
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".sol") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out.push_back(slurp(f));
    for (const auto& c : synth::make_toy_corpus(30, 5)) {
        out.push_back(c.source);
        out.push_back(c.secure_twin);
    }
    return out;
}

Outcome check_codebleu() {
    const auto pool = fixture_sources();
    Rng rng(2024);
    double worst = 0;
    bool in_range = true;
    for (int i = 0; i < 1000; ++i) {
        const auto& cand = pool[uniform_below(rng, pool.size())];
        const auto& ref = pool[uniform_below(rng, pool.size())];
        metrics::MetricConfig cfg;
        double sum = 0;
        for (auto& w : cfg.codebleu_weights) sum += (w = 0.05 + uniform_unit(rng));
        for (auto& w : cfg.codebleu_weights) w /= sum;
        const auto s = metrics::codebleu(cand, ref, cfg);
        const auto ct = metrics::code_tokens(cand);
        const auto rt = metrics::code_tokens(ref);
        const double parts[4] = {metrics::bleu(ct, rt, cfg), metrics::weighted_ngram_match(ct, rt, cfg),
                                 metrics::ast_match(cand, ref, cfg), metrics::dataflow_match(cand, ref)};
        double expect = 0;
        for (int k = 0; k < 4; ++k) {
            expect += cfg.codebleu_weights[k] * parts[k];
            in_range = in_range && parts[k] >= 0 && parts[k] <= 1;
        }
        const auto& c = s.components;
        for (double v : {c.ngram, c.weighted_ngram, c.ast_match, c.dataflow_match, s.cb})
            in_range = in_range && v >= 0 && v <= 1;
        worst = std::max(worst, std::abs(s.cb - expect));
    }
    return {worst < 1e-9 && in_range, "1000 pairs, worst " + fmt(worst) + (in_range ? "" : ", component out of range")};
}

// ---- 3: infilling -------------------------------------------------------------

Outcome check_infill() {
    const auto corpus = synth::as_labeled(synth::make_toy_corpus(50, 31, 0.0));
    Rng rng(77);
    std::size_t bad_range = 0, bad_trip = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto& entry = corpus[uniform_below(rng, corpus.size())];
        const auto ts = sol::tokenize(sol::strip_comments(entry.source.text));
        const std::size_t n = ts.tokens.size();
        const std::size_t s = n / 5;
        auto [j, k] = data::split_five_segments(n, rng);
        bad_range += !(s <= j && j < 2 * s && 3 * s <= k && k < 4 * s);
        const auto mode = (i & 1) ? data::InfillMode::SPM : data::InfillMode::PSM;
        const auto ex = data::make_infill(ts, j, k, mode, entry.id);
        const auto [input, target] = data::render_infill(ex);
        // undo the rendering from the strings alone
        std::string pre, suf;
        const auto mid_at = input.find("<MID>");
        if (mode == data::InfillMode::PSM) {
            const auto suf_at = input.find("<SUF>");
            pre = input.substr(5, suf_at - 5);
            suf = input.substr(suf_at + 5, mid_at - suf_at - 5);
        } else {
            suf = input.substr(10, mid_at - 10);
            pre = input.substr(mid_at + 5);
        }
        bad_trip += pre + target + suf != ts.source || ex.pre.size() != j || ex.pre.size() + ex.mid.size() != k;
    }
    std::vector<data::LabeledContract> big = synth::as_labeled(synth::make_toy_corpus(2000, 99, 0.0));
    const auto records = data::build_ci_dataset(big, 5);
    std::size_t psm = 0;
    for (const auto& r : records) psm += !r.input_text.starts_with("<PRE><SUF>");
    const double frac = static_cast<double>(psm) / static_cast<double>(records.size());
    return {bad_range == 0 && bad_trip == 0 && records.size() == 10000 && frac >= 0.45 && frac <= 0.55,
            "range violations " + std::to_string(bad_range) + ", round-trip failures " + std::to_string(bad_trip) +
                ", PSM fraction " + fmt(frac) + " of " + std::to_string(records.size())};
}

// ---- 4: dataset formats, split sizes, rebuilds ----------------------------------

Outcome check_datasets() {
    const auto corpus = synth::as_labeled(synth::make_toy_corpus(200, 11));
    const std::string sec = data::tag_block(data::Tag::Security);
    const std::string vul = data::tag_block(data::Tag::Vulnerable);
    std::size_t bad = 0;
    const auto vd = data::build_vd_dataset(corpus);
    for (const auto& r : vd) bad += r.target_text != sec && r.target_text != vul;
    const auto ti = data::build_ti_dataset(data::instruction_samples(corpus));
    for (const auto& r : ti) bad += !r.input_text.ends_with(data::tag_block(r.tag)) || r.tag == data::Tag::None;
    std::size_t bad_split = 0;
    for (std::size_t n = 10; n <= 400; ++n) {
        std::vector<data::TrainingRecord> recs;
        for (std::size_t i = 0; i < n; ++i) recs.push_back({data::Stage::CI, "x", "y", data::Tag::None, std::to_string(i)});
        const auto s = data::split_811(recs, n);
        std::set<std::string> ids;
        for (const auto* part : {&s.train, &s.valid, &s.test})
            for (const auto& r : *part) ids.insert(r.source_id);
        bad_split += s.valid.size() != n / 10 || s.test.size() != n / 10 || s.train.size() != n - 2 * (n / 10) ||
                     ids.size() != n;
    }
    const auto dir = scratch("datasets");
    std::vector<data::LabeledContract> secure;
    for (const auto& c : corpus)
        if (c.label == data::Tag::Security) secure.push_back(c);
    auto write_all = [&](const std::string& name) {
        std::string bytes;
        for (const auto& [stage, recs] :
             {std::pair{std::string("ci"), data::build_ci_dataset(secure, 42)}, std::pair{std::string("vd"), data::build_vd_dataset(corpus)},
              std::pair{std::string("ti"), data::build_ti_dataset(data::instruction_samples(corpus))}}) {
            const auto split = data::split_811(recs, derive_seed(42, "split/" + stage));
            for (const auto& [part, rs] : {std::pair{"train", &split.train}, {"valid", &split.valid}, {"test", &split.test}}) {
                const auto path = dir / (name + "_" + stage + "_" + part + ".jsonl");
                data::write_jsonl(path, *rs);
                bytes += slurp(path);
            }
        }
        return bytes;
    };
    const bool identical = write_all("a") == write_all("b");
    return {bad == 0 && bad_split == 0 && identical && !vd.empty() && !ti.empty(),
            std::to_string(vd.size()) + " VD and " + std::to_string(ti.size()) + " TI records, format violations " +
                std::to_string(bad) + ", split violations " + std::to_string(bad_split) +
                (identical ? ", rebuild identical" : ", rebuild differs")};
}

// ---- 5: gradients against central differences ----------------------------------

Outcome check_gradients() {
    lm::TinyLmConfig cfg;
    cfg.vocab_size = 24;
    cfg.embed_dim = 8;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.context_len = 16;
    cfg.seed = 21;
    auto model = lm::TinyLm::init(cfg);
    auto adapters = lm::AdapterWeights::init(cfg, 2, 32, 5);
    Rng init(22);
    adapters.for_each([&](const std::string&, lm::Mat& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.05 * standard_normal(init);
    });
    Rng rng(13);
    std::vector<int> tokens(14);
    for (auto& t : tokens) t = static_cast<int>(uniform_below(rng, cfg.vocab_size));
    const std::size_t target_begin = 9;

    lm::BaseWeights gbase = lm::zeros_like(model.weights);
    lm::AdapterWeights gad = adapters.zeros();
    lm::sequence_nll(model, &adapters, tokens, target_begin, {&gbase, &gad});

    struct Group {
        std::vector<lm::Mat*> params, grads;
    } b_group, a_group, base_group;
    adapters.for_each([&](const std::string& name, lm::Mat& m) {
        (name.ends_with(".B") ? b_group : a_group).params.push_back(&m);
    });
    gad.for_each([&](const std::string& name, lm::Mat& m) { (name.ends_with(".B") ? b_group : a_group).grads.push_back(&m); });
    lm::for_each_tensor(model.weights, [&](const std::string&, lm::Mat& m) { base_group.params.push_back(&m); });
    lm::for_each_tensor(gbase, [&](const std::string&, lm::Mat& m) { base_group.grads.push_back(&m); });

    constexpr double h = 1e-5;
    auto loss = [&] { return lm::sequence_nll(model, &adapters, tokens, target_begin); };
    std::size_t checked = 0;
    double worst_small = 0;  // absolute error where both values are at numerical zero
    auto worst_rel = [&](Group& g) {
        double worst = 0;
        for (std::size_t t = 0; t < g.params.size(); ++t) {
            for (Eigen::Index i = 0; i < g.params[t]->size(); ++i) {
                double& w = g.params[t]->data()[i];
                const double keep = w;
                w = keep + h;
                const double up = loss();
                w = keep - h;
                const double down = loss();
                w = keep;
                const double fd = (up - down) / (2 * h);
                const double an = g.grads[t]->data()[i];
                const double scale = std::max(std::abs(fd), std::abs(an));
                if (scale > 1e-6)
                    worst = std::max(worst, std::abs(fd - an) / scale);
                else
                    worst_small = std::max(worst_small, std::abs(fd - an));
                ++checked;
            }
        }
        return worst;
    };
    const double rb = worst_rel(b_group);
    const double ra = worst_rel(a_group);
    const double r0 = worst_rel(base_group);
    const bool sized = !b_group.params.empty() && !a_group.params.empty() && checked <= 5000;
    return {sized && rb < 1e-4 && ra < 1e-4 && r0 < 1e-4 && worst_small < 1e-9,
            std::to_string(checked) + " parameters, worst relative error B " + fmt(rb) + ", A " + fmt(ra) + ", base " +
                fmt(r0) + ", near-zero entries " + fmt(worst_small)};
}

// ---- 7: staged training on synthetic contracts ------------------------------------

struct Trained {
    lm::TinyLm model;
    lm::Tokenizer tokenizer;
    lm::AdapterWeights adapters;
    bool ready = false;
};

double sign_test_p(std::size_t wins, std::size_t n) {
    if (n == 0 || wins == 0) return 1.0;
    boost::math::binomial_distribution<double> dist(static_cast<double>(n), 0.5);
    return boost::math::cdf(boost::math::complement(dist, static_cast<double>(wins - 1)));
}

// Mean log-probability of the target tokens that overlap the marker.
double marker_logprob(const Trained& t, const std::string& prompt, const std::string& code) {
    const auto enc = lm::encode_record(t.tokenizer, prompt, code, t.model.config.context_len);
    const lm::Mat lp = lm::log_softmax(lm::forward_logits(t.model, &t.adapters, enc.tokens));
    const std::size_t m0 = code.find(synth::kVulnerableMarker);
    const std::size_t m1 = m0 + synth::kVulnerableMarker.size();
    std::size_t at = 0;
    double sum = 0;
    int count = 0;
    for (std::size_t pos = enc.target_begin; pos < enc.tokens.size(); ++pos) {
        const int id = enc.tokens[pos];
        const std::size_t len = t.tokenizer.is_special(id) ? 0 : t.tokenizer.token_text(id).size();
        if (at < m1 && m0 < at + len) {
            sum += lp(static_cast<Eigen::Index>(pos - 1), id);
            ++count;
        }
        at += len;
    }
    return count ? sum / count : 0.0;
}

Outcome check_training(Trained& out) {
    const auto corpus = synth::make_toy_corpus(200, 42);
    const auto labeled = synth::as_labeled(corpus);

    std::vector<std::string> texts;
    for (const auto& c : corpus) texts.push_back(c.source);
    auto tok_texts = texts;
    tok_texts.push_back(std::string(data::kDetectPrompt) + "\n" + std::string(data::kGeneratePrompt) + "\n" +
                        data::tag_block(data::Tag::Security) + data::tag_block(data::Tag::Vulnerable));
    out.tokenizer = lm::Tokenizer::train(tok_texts, 256);

    lm::TinyLmConfig mc;
    mc.vocab_size = out.tokenizer.vocab_size();
    mc.embed_dim = 48;
    mc.num_layers = 2;
    mc.num_heads = 4;
    mc.context_len = 384;
    mc.seed = 42;
    lm::PretrainConfig pc;
    pc.epochs = 2;
    pc.seed = 42;
    out.model = lm::pretrain_base(lm::TinyLm::init(mc), out.tokenizer, texts, pc);

    lm::TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.optimizer = lm::Optimizer::Adam;
    tc.seed = 42;
    tc.epochs_ti = 15;
    std::vector<data::LabeledContract> secure;
    for (const auto& c : labeled)
        if (c.label == data::Tag::Security) secure.push_back(c);
    const auto ci = data::split_811(data::build_ci_dataset(secure, 42), 42);
    auto rci = lm::train_stage(out.model, out.tokenizer, lm::AdapterWeights::init(mc, 4, 32, 42), ci.train, tc, data::Stage::CI);
    const double ratio = rci.log.back().mean_loss / rci.log.front().mean_loss;

    const auto vd = data::split_811(data::build_vd_dataset(labeled), 42);
    auto rvd = lm::train_stage(out.model, out.tokenizer, rci.adapters, vd.train, tc, data::Stage::VD);
    std::size_t correct = 0;
    for (const auto& r : vd.test) correct += lm::predict_tag(out.model, out.tokenizer, &rvd.adapters, r.input_text) == r.tag;
    const double accuracy = static_cast<double>(correct) / static_cast<double>(vd.test.size());

    auto ti_cfg = tc;
    ti_cfg.learning_rate = 3e-3;
    const auto ti = data::split_811(data::build_ti_dataset(data::instruction_samples(labeled)), 42);
    auto rti = lm::train_stage(out.model, out.tokenizer, rvd.adapters, ti.train, ti_cfg, data::Stage::TI);
    out.adapters = rti.adapters;
    out.ready = true;

    // held-out contracts, all carrying the marker
    const auto held = data::instruction_samples(synth::as_labeled(synth::make_toy_corpus(100, 4242, 1.0)));
    std::size_t wins = 0, losses = 0;
    double mean_sec = 0, mean_vul = 0;
    for (const auto& s : held) {
        const double a = marker_logprob(out, data::instruction_prompt(s.instruction, data::Tag::Security), s.code);
        const double b = marker_logprob(out, data::instruction_prompt(s.instruction, data::Tag::Vulnerable), s.code);
        mean_sec += a / static_cast<double>(held.size());
        mean_vul += b / static_cast<double>(held.size());
        wins += a < b;
        losses += a > b;
    }
    const double p = sign_test_p(wins, wins + losses);
    const bool a_ok = ratio <= 0.5;
    const bool b_ok = accuracy >= 0.9;
    const bool c_ok = held.size() == 100 && mean_sec < mean_vul && p < 0.01;
    return {a_ok && b_ok && c_ok,
            std::string("(a) ") + (a_ok ? "ok" : "FAIL") + " loss ratio " + fmt(ratio) + "; (b) " + (b_ok ? "ok" : "FAIL") +
                " accuracy " + std::to_string(correct) + "/" + std::to_string(vd.test.size()) + "; (c) " +
                (c_ok ? "ok" : "FAIL") + " mean log-prob " + fmt(mean_sec) + " vs " + fmt(mean_vul) + ", lower in " +
                std::to_string(wins) + "/" + std::to_string(held.size()) + ", p " + fmt(p)};
}

// ---- 6: adapter identities on the trained model ------------------------------------

Outcome check_adapters(const Trained& t) {
    if (!t.ready) return {false, "training did not complete"};
    const auto fresh = lm::AdapterWeights::init(t.model.config, 4, 32, 9);
    Rng rng(5);
    bool equal = true;
    for (int i = 0; i < 5; ++i) {
        std::vector<int> tokens(40);
        for (auto& x : tokens) x = static_cast<int>(uniform_below(rng, t.model.config.vocab_size));
        const lm::Mat base = lm::forward_logits(t.model, nullptr, tokens);
        const lm::Mat with = lm::forward_logits(t.model, &fresh, tokens);
        equal = equal && std::memcmp(base.data(), with.data(), sizeof(double) * base.size()) == 0;
    }
    double worst = 0;
    std::size_t checked = 0;
    for (std::size_t l = 0; l < t.adapters.layers.size(); ++l) {
        for (auto target : lm::kTargets) {
            const lm::Mat delta =
                lm::effective_matrix(t.model, &t.adapters, l, target) - lm::base_matrix(t.model.weights, l, target);
            Eigen::JacobiSVD<lm::Mat> svd(delta);
            const auto& s = svd.singularValues();
            for (Eigen::Index i = 4; i < s.size(); ++i) worst = std::max(worst, s(i) / s(0));
            ++checked;
        }
    }
    return {equal && worst < 1e-8 && checked > 0,
            std::string(equal ? "zero-B output bit-equal" : "zero-B output differs") + ", " + std::to_string(checked) +
                " trained updates, worst trailing/leading singular value " + fmt(worst)};
}

// ---- 8: detector suite ------------------------------------------------------------

Outcome check_detectors() {
    const fs::path dir = fs::path(FORGE_FIXTURES_DIR) / "detectors";
    std::ifstream in(dir / "expected.jsonl");
    const std::vector<std::string> gated = {"RE", "AC", "AR", "ULLC", "DoS", "BR", "TM"};
    std::map<std::string, std::array<std::size_t, 3>> counts;  // tp, fp, fn
    std::size_t snippets = 0;
    bool withdraw_re = false;
    std::string line;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        const std::string file = j["file"];
        std::set<std::string> want, got;
        for (const auto& c : j["classes"]) want.insert(c.get<std::string>());
        for (const auto& f : security::detect(slurp(dir / file)).findings) got.insert(std::string(security::to_string(f.vuln_class)));
        for (const auto& c : gated) {
            auto& k = counts[c];
            k[0] += want.count(c) && got.count(c);
            k[1] += !want.count(c) && got.count(c);
            k[2] += want.count(c) && !got.count(c);
        }
        if (file == "re_pos_1_withdraw_before_debit.sol") withdraw_re = got.count("RE") == 1;
        ++snippets;
    }
    bool perfect = true;
    std::string worst;
    for (const auto& c : gated) {
        const auto& k = counts[c];
        if (k[0] == 0 || k[1] || k[2]) {
            perfect = false;
            worst += " " + c + "(tp " + std::to_string(k[0]) + " fp " + std::to_string(k[1]) + " fn " + std::to_string(k[2]) + ")";
        }
    }
    return {snippets == 60 && perfect && withdraw_re,
            std::to_string(snippets) + " snippets" + (perfect ? ", P = R = 1 for all seven classes" : "," + worst) +
                (withdraw_re ? ", pay-then-debit withdrawal flagged RE" : ", pay-then-debit withdrawal not flagged RE")};
}

// ---- 9: security metrics ----------------------------------------------------------

Outcome check_security_metrics() {
    Rng rng(909);
    std::size_t bad = 0;
    for (int round = 0; round < 2000; ++round) {
        const std::size_t n = 1 + uniform_below(rng, 80);
        std::vector<security::SampleAnalysis> results(n);
        std::size_t compiled = 0, flagged = 0;
        for (auto& r : results) {
            r.compile.compiled = uniform_unit(rng) < 0.75;
            const std::size_t k = uniform_below(rng, 3);
            for (std::size_t i = 0; i < k; ++i)
                r.detection.findings.push_back({security::VulnClass::RE, {0, 0}, "x", security::Confidence::High});
            compiled += r.compile.compiled;
            flagged += r.compile.compiled && k > 0;
        }
        const auto s = security::security_metrics(results);
        const double com = 100.0 * compiled / n;
        const double vul = compiled ? 100.0 * flagged / compiled : 0.0;
        const double safe = 100.0 * (compiled - flagged) / n;
        bad += s.compiled != compiled || s.compiled_with_findings != flagged || std::abs(s.com_pass - com) > 1e-12 ||
               std::abs(s.vul_rate - vul) > 1e-12 || std::abs(s.safe_aval - safe) > 1e-12 || s.safe_aval > s.com_pass;
    }
    return {bad == 0, "2000 random result vectors, mismatches " + std::to_string(bad)};
}

// ---- 10: sampling -----------------------------------------------------------------

Outcome check_sampler() {
    std::size_t mismatched = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        lm::TinyLmConfig cfg;
        cfg.vocab_size = 20 + static_cast<int>(seed % 7);
        cfg.embed_dim = 8;
        cfg.num_layers = 1 + static_cast<int>(seed % 2);
        cfg.num_heads = 2;
        cfg.context_len = 24;
        cfg.seed = 1000 + seed;
        const auto model = lm::TinyLm::init(cfg);
        Rng rng(seed);
        std::vector<int> prompt(3 + seed % 4);
        for (auto& x : prompt) x = static_cast<int>(uniform_below(rng, cfg.vocab_size - 1));
        lm::SamplerConfig sc;
        sc.temperature = 1e-9;
        sc.max_new_tokens = 12;
        sc.seed = seed;
        mismatched += lm::sample_tokens(model, nullptr, prompt, sc) != lm::greedy_tokens(model, nullptr, prompt, 12);
    }
    const std::vector<double> probs = {0.5, 0.3, 0.15, 0.05};
    const auto n = lm::nucleus(probs, 0.95);
    const bool top3 = n.ids == std::vector<int>{0, 1, 2};

    const auto tok = lm::Tokenizer::train({"contract A { function f() public {} }"}, 20);
    lm::TinyLmConfig cfg;
    cfg.vocab_size = tok.vocab_size();
    cfg.embed_dim = 16;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.context_len = 64;
    cfg.seed = 3;
    const auto model = lm::TinyLm::init(cfg);
    lm::SamplerConfig sc;
    sc.temperature = 1.0;
    sc.max_new_tokens = 40;
    sc.seed = 77;
    const auto a = lm::sample(model, tok, nullptr, "contract", sc);
    const auto b = lm::sample(model, tok, nullptr, "contract", sc);
    const bool same = a == b && !a.empty();
    return {mismatched == 0 && top3 && same, "greedy mismatches " + std::to_string(mismatched) + "/100, nucleus " +
                                                 (top3 ? "top 3" : "wrong") + ", fixed-seed output " +
                                                 (same ? "identical" : "differs")};
}

// ---- 11: end-to-end command line ---------------------------------------------------

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "forge");
    args.push_back("--log-level=off");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return pipeline::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
        out[fs::relative(e.path(), root).string()] = slurp(e.path());
    }
    return out;
}

const char* kEndToEndConfig = R"([paths]
corpus_dir = corpus/contracts
labels_path = corpus/labels.jsonl
tasks_path = corpus/tasks.jsonl
output_dir = out

[run]
seed = 7
samples_per_task = 5

[model]
embed_dim = 32
num_layers = 2
num_heads = 4
context_len = 384
bpe_merges = 256
pretrain_epochs = 2

[train]
learning_rate = 1e-3
optimizer = adam
epochs_ci = 4
epochs_vd = 4
epochs_ti = 4

[sampler]
max_new_tokens = 256
)";

Outcome check_end_to_end() {
    const std::vector<std::vector<std::string>> steps = {
        {"ingest"}, {"build", "--stage", "ci"}, {"build", "--stage", "vd"}, {"build", "--stage", "ti"},
        {"train", "--stage", "ci"}, {"train", "--stage", "vd"}, {"train", "--stage", "ti"},
        {"generate"}, {"evaluate"}, {"report"}};
    auto run = [&](const std::string& name, std::string& failure) {
        const auto dir = scratch(name);
        synth::write_toy_corpus(dir / "corpus", synth::make_toy_corpus(40, 7), synth::make_toy_tasks(10, 8), 2);
        std::ofstream(dir / "forge.ini") << kEndToEndConfig;
        for (const auto& step : steps) {
            auto args = step;
            args.push_back("--config");
            args.push_back((dir / "forge.ini").string());
            const int code = cli(args);
            if (code != 0 && failure.empty()) failure = step[0] + " exited " + std::to_string(code);
        }
        return dir / "out";
    };
    std::string failure;
    const auto first = run("e2e_a", failure);
    const auto second = run("e2e_b", failure);
    if (!failure.empty()) return {false, failure};

    const auto md = slurp(first / "report" / "report.md");
    const auto bar = md.find('|');
    const auto header = md.substr(bar, md.find('\n', bar) - bar);
    const std::string want = "| AvgBLEU | BestBLEU | AvgCB | BestCB | ComPass(%) | VulRate(%) | SafeAval(%) |";
    const auto summary = nlohmann::ordered_json::parse(slurp(first / "report" / "summary.json"));
    std::size_t samples = 0;
    std::ifstream s(first / "generate" / "samples.jsonl");
    for (std::string line; std::getline(s, line);) ++samples;
    bool keys = true;
    for (auto col : pipeline::kReportColumns) keys = keys && summary.contains(std::string(col));
    const bool identical = tree(first) == tree(second);
    return {header == want && keys && samples == 50 && identical,
            "all steps exit 0, " + std::to_string(samples) + " samples, header " + (header == want ? "ok" : "wrong") +
                ", re-run " + (identical ? "byte-identical" : "differs")};
}

}  // namespace

int main() {
    spdlog::set_level(spdlog::level::off);
    struct Criterion {
        int id;
        const char* name;
        double limit;  // seconds, 0 for none
        std::function<Outcome()> run;
    };
    Trained trained;
    const std::vector<Criterion> order = {
        {1, "BLEU matches brute-force counting", 30, check_bleu},
        {2, "CodeBLEU is linear in its components", 60, check_codebleu},
        {3, "infilling splits and round trip", 0, check_infill},
        {4, "dataset formats, splits and rebuilds", 0, check_datasets},
        {5, "analytic gradients match finite differences", 120, check_gradients},
        {7, "staged training on synthetic contracts", 600, [&] { return check_training(trained); }},
        {6, "adapter identities", 0, [&] { return check_adapters(trained); }},
        {8, "vulnerability detector suite", 0, check_detectors},
        {9, "security metrics counting oracle", 0, check_security_metrics},
        {10, "sampling", 0, check_sampler},
        {11, "end-to-end command line", 0, check_end_to_end},
    };
    std::map<int, std::string> lines;
    bool all = true;
    for (const auto& c : order) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.limit > 0 && secs > c.limit) {
            o.pass = false;
            o.detail += ", over the time limit";
        }
        all = all && o.pass;
        std::ostringstream line;
        line << (o.pass ? "PASS" : "FAIL") << "  criterion " << c.id << ": " << c.name << " (" << o.detail << "; "
             << std::fixed << std::setprecision(1) << secs << " s)";
        lines[c.id] = line.str();
        std::cerr << "finished criterion " << c.id << std::endl;
    }
    for (const auto& [id, line] : lines) std::cout << line << "\n";
    return all ? 0 : 1;
}
