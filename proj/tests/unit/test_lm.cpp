#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "forge/dataset/builders.hpp"
#include "forge/lm/checkpoint.hpp"
#include "forge/lm/sampler.hpp"
#include "forge/lm/tokenizer.hpp"
#include "forge/lm/train.hpp"
#include "json.hpp"

using namespace forge;
using namespace forge::lm;

namespace {

TinyLmConfig tiny_config(int vocab, std::uint64_t seed) {
    TinyLmConfig c;
    c.vocab_size = vocab;
    c.embed_dim = 8;
    c.num_layers = 2;
    c.num_heads = 2;
    c.context_len = 16;
    c.seed = seed;
    return c;
}

std::vector<int> random_tokens(std::size_t n, int vocab, Rng& rng) {
    std::vector<int> t(n);
    for (auto& x : t) x = static_cast<int>(uniform_below(rng, vocab));
    return t;
}

AdapterWeights random_adapters(const TinyLmConfig& c, int rank, std::uint64_t seed) {
    auto a = AdapterWeights::init(c, rank, 32, seed);
    Rng rng(seed + 17);
    a.for_each([&](const std::string&, Mat& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 0.05 * standard_normal(rng);
    });
    return a;
}

struct FdStats {
    double worst_rel = 0;
    double worst_abs_small = 0;
    std::size_t checked = 0;
};

// Central differences of `loss` against the analytic gradient, entry by entry.
void finite_difference(const std::vector<Mat*>& params, const std::vector<Mat*>& grads,
                       const std::function<double()>& loss, FdStats& st) {
    constexpr double h = 1e-5;
    for (std::size_t t = 0; t < params.size(); ++t) {
        for (Eigen::Index i = 0; i < params[t]->size(); ++i) {
            double& w = params[t]->data()[i];
            const double keep = w;
            w = keep + h;
            const double up = loss();
            w = keep - h;
            const double down = loss();
            w = keep;
            const double fd = (up - down) / (2 * h);
            const double g = grads[t]->data()[i];
            const double scale = std::max(std::abs(fd), std::abs(g));
            if (scale > 1e-6)
                st.worst_rel = std::max(st.worst_rel, std::abs(fd - g) / scale);
            else
                st.worst_abs_small = std::max(st.worst_abs_small, std::abs(fd - g));
            ++st.checked;
        }
    }
}

}  // namespace

TEST_CASE("tokenizer keeps reserved atoms whole and round-trips text") {
    const std::vector<std::string> texts = {"contract A { uint x; }\n", "function f() public { x = x + 1; }\n",
                                            "<PRE>a<SUF>b<MID>c [Tag]<security>[/Tag]"};
    const auto tok = Tokenizer::train(texts, 40);
    CHECK(tok.vocab_size() == 256 + static_cast<int>(tok.merges().size()) + 6);
    for (auto atom : Tokenizer::kSpecials) {
        const auto ids = tok.encode(atom);
        REQUIRE(ids.size() == 1);
        CHECK(ids[0] == tok.special_id(atom));
        CHECK(tok.is_special(ids[0]));
    }
    const std::string text = "<PRE>function g() {<SUF>}\n<MID>  return x;<EOT>\xc3\xa9";
    CHECK(tok.decode(tok.encode(text)) == text);
    CHECK(tok.encode("function").size() < std::string("function").size());
    CHECK(Tokenizer::train(texts, 40) == tok);
    CHECK_THROWS_AS(Tokenizer::from_merges({{300, 1}}), std::invalid_argument);

    const auto chunks = pretokenize("  foo(bar) \n\tx");
    std::string joined;
    for (auto c : chunks) joined += c;
    CHECK(joined == "  foo(bar) \n\tx");
    CHECK(chunks[1] == " foo");
}

TEST_CASE("forward yields normalized causal distributions") {
    const auto cfg = tiny_config(20, 3);
    const auto model = TinyLm::init(cfg);
    Rng rng(5);
    auto tokens = random_tokens(12, cfg.vocab_size, rng);
    const Mat lp = log_softmax(forward_logits(model, nullptr, tokens));
    for (Eigen::Index i = 0; i < lp.rows(); ++i) CHECK(std::abs(lp.row(i).array().exp().sum() - 1.0) < 1e-6);

    // changing the future leaves earlier rows untouched
    auto changed = tokens;
    for (std::size_t i = 7; i < changed.size(); ++i) changed[i] = (changed[i] + 3) % cfg.vocab_size;
    const Mat lp2 = log_softmax(forward_logits(model, nullptr, changed));
    CHECK((lp.topRows(7) - lp2.topRows(7)).cwiseAbs().maxCoeff() == 0.0);

    // joint log-probability is the sum of the per-position terms
    double joint = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) joint += lp(static_cast<Eigen::Index>(t - 1), tokens[t]);
    CHECK(std::abs(-sequence_nll(model, nullptr, tokens, 1) - joint) < 1e-6);

    std::vector<int> too_long(17, 1);
    CHECK_THROWS_AS(forward_logits(model, nullptr, too_long), SequenceTooLong);
}

TEST_CASE("incremental decoder matches the full forward pass") {
    const auto cfg = tiny_config(20, 4);
    const auto model = TinyLm::init(cfg);
    const auto adapters = random_adapters(cfg, 2, 9);
    Rng rng(6);
    const auto tokens = random_tokens(16, cfg.vocab_size, rng);
    const Mat full = forward_logits(model, &adapters, tokens);
    Decoder dec(model, &adapters);
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        const auto row = dec.step(tokens[t]);
        CHECK((row - full.row(static_cast<Eigen::Index>(t))).cwiseAbs().maxCoeff() < 1e-9);
    }
    CHECK_THROWS_AS(dec.step(0), SequenceTooLong);
}

TEST_CASE("zero B adapters reproduce the base model bit for bit") {
    auto cfg = tiny_config(30, 8);
    cfg.embed_dim = 16;
    const auto model = TinyLm::init(cfg);
    const auto adapters = AdapterWeights::init(cfg, 4, 32, 1);
    Rng rng(2);
    const auto tokens = random_tokens(16, cfg.vocab_size, rng);
    const Mat base = forward_logits(model, nullptr, tokens);
    const Mat with = forward_logits(model, &adapters, tokens);
    CHECK(std::memcmp(base.data(), with.data(), sizeof(double) * base.size()) == 0);
    CHECK_THROWS_AS(AdapterWeights::init(cfg, 5, 32, 1), std::invalid_argument);
}

TEST_CASE("adapter updates have rank at most r") {
    TinyLmConfig cfg = tiny_config(20, 1);
    cfg.embed_dim = 32;
    cfg.num_heads = 4;
    const auto model = TinyLm::init(cfg);
    const auto adapters = random_adapters(cfg, 4, 11);
    for (std::size_t l = 0; l < adapters.layers.size(); ++l) {
        for (auto t : kTargets) {
            const Mat delta = effective_matrix(model, &adapters, l, t) - base_matrix(model.weights, l, t);
            Eigen::JacobiSVD<Mat> svd(delta);
            const auto& s = svd.singularValues();
            CHECK(s(3) > 1e-8 * s(0));
            for (Eigen::Index i = 4; i < s.size(); ++i) CHECK(s(i) < 1e-8 * s(0));
        }
    }
}

TEST_CASE("masked loss: analytic cases") {
    const std::vector<std::string> texts = {"abc abc abc"};
    const auto tok = Tokenizer::train(texts, 3);
    TinyLmConfig cfg = tiny_config(tok.vocab_size(), 2);
    cfg.context_len = 32;
    auto model = TinyLm::init(cfg);

    // a zero head gives the uniform distribution
    auto uniform = model;
    uniform.weights.head.setZero();
    const auto enc = encode_record(tok, "abc", "abc ab", cfg.context_len);
    const auto L = static_cast<double>(enc.tokens.size() - enc.target_begin);
    CHECK(std::abs(masked_nll(uniform, tok, nullptr, "abc", "abc ab") - L * std::log(cfg.vocab_size)) < 1e-9);

    // a head that puts all mass on the single target token gives zero loss
    const auto one = encode_record(tok, "abc", "", cfg.context_len);
    REQUIRE(one.tokens.size() - one.target_begin == 1);
    auto forced = model;
    forced.weights.head.setZero();
    // the final hidden state at the predicting row, read through an identity head
    Mat hidden = forward_logits([&] {
        auto m = model;
        m.weights.head = Mat::Identity(cfg.embed_dim, cfg.embed_dim);
        return m;
    }(), nullptr, one.tokens);
    const Eigen::RowVectorXd hrow = hidden.row(static_cast<Eigen::Index>(one.target_begin - 1));
    forced.weights.head.col(one.tokens.back()) = 1e3 * hrow.transpose() / hrow.squaredNorm();
    CHECK(masked_nll(forced, tok, nullptr, "abc", "") < 1e-12);

    // only target rows count: the loss equals the manual sum over them
    const Mat lp = log_softmax(forward_logits(model, nullptr, enc.tokens));
    double manual = 0;
    for (std::size_t t = enc.target_begin; t < enc.tokens.size(); ++t)
        manual -= lp(static_cast<Eigen::Index>(t - 1), enc.tokens[t]);
    CHECK(std::abs(masked_nll(model, tok, nullptr, "abc", "abc ab") - manual) < 1e-9);

    // left truncation of the input, never of the target
    const auto cut = encode_record(tok, std::string(200, 'x'), "abc", cfg.context_len);
    CHECK(cut.tokens.size() == static_cast<std::size_t>(cfg.context_len));
    CHECK(cut.truncated > 0);
    CHECK(tok.decode({cut.tokens.begin() + static_cast<std::ptrdiff_t>(cut.target_begin), cut.tokens.end()}) == "abc<EOT>");
    CHECK_THROWS_AS(encode_record(tok, "", std::string(200, 'y'), cfg.context_len), TargetTruncated);
}

TEST_CASE("masked loss gradients match central differences") {
    const auto cfg = tiny_config(24, 21);
    auto model = TinyLm::init(cfg);
    auto adapters = random_adapters(cfg, 2, 5);
    Rng rng(13);
    const auto tokens = random_tokens(14, cfg.vocab_size, rng);
    const std::size_t target_begin = 9;

    BaseWeights gbase = zeros_like(model.weights);
    AdapterWeights gad = adapters.zeros();
    sequence_nll(model, &adapters, tokens, target_begin, {&gbase, &gad});

    std::vector<Mat*> ap, ag, bp, bg;
    adapters.for_each([&](const std::string&, Mat& m) { ap.push_back(&m); });
    gad.for_each([&](const std::string&, Mat& m) { ag.push_back(&m); });
    for_each_tensor(model.weights, [&](const std::string&, Mat& m) { bp.push_back(&m); });
    for_each_tensor(gbase, [&](const std::string&, Mat& m) { bg.push_back(&m); });

    std::size_t count = 0;
    for (auto* p : ap) count += p->size();
    for (auto* p : bp) count += p->size();
    CHECK(count <= 5000);

    auto loss = [&] { return sequence_nll(model, &adapters, tokens, target_begin); };
    FdStats st;
    finite_difference(ap, ag, loss, st);
    finite_difference(bp, bg, loss, st);
    INFO("worst relative error " << st.worst_rel << ", worst small-entry error " << st.worst_abs_small);
    CHECK(st.checked == count);
    CHECK(st.worst_rel < 1e-4);
    CHECK(st.worst_abs_small < 1e-9);
}

TEST_CASE("nucleus arithmetic and sampling") {
    const std::vector<double> p = {0.5, 0.3, 0.15, 0.05};
    const auto n = nucleus(p, 0.95);
    REQUIRE(n.ids == std::vector<int>{0, 1, 2});
    CHECK(std::abs(n.probs[0] - 10.0 / 19) < 1e-12);
    CHECK(std::abs(n.probs[1] - 6.0 / 19) < 1e-12);
    CHECK(std::abs(n.probs[2] - 3.0 / 19) < 1e-12);
    CHECK(nucleus(p, 1.0).ids.size() == 4);
    CHECK(nucleus(p, 0.5).ids == std::vector<int>{0});

    Eigen::RowVectorXd logits(4);
    for (int i = 0; i < 4; ++i) logits(i) = std::log(p[i]);
    Rng rng(1);
    std::array<int, 4> seen{};
    for (int i = 0; i < 20000; ++i) ++seen[sample_token(logits, 1.0, 0.95, rng)];
    CHECK(seen[3] == 0);
    CHECK(std::abs(seen[0] / 20000.0 - 10.0 / 19) < 0.02);

    logits(2) = std::nan("");
    CHECK(sample_token(logits, 1.0, 0.95, rng) == argmax(logits));

    SamplerConfig bad;
    bad.temperature = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = {};
    bad.top_p = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("tiny temperature decodes greedily and seeds fix the output") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto cfg = tiny_config(20, 100 + seed);
        const auto model = TinyLm::init(cfg);
        Rng rng(seed);
        const auto prompt = random_tokens(4, cfg.vocab_size - 1, rng);
        SamplerConfig sc;
        sc.temperature = 1e-8;
        sc.max_new_tokens = 10;
        sc.seed = seed;
        CHECK(sample_tokens(model, nullptr, prompt, sc) == greedy_tokens(model, nullptr, prompt, 10));
        sc.temperature = 1.0;
        CHECK(sample_tokens(model, nullptr, prompt, sc) == sample_tokens(model, nullptr, prompt, sc));
    }
}

TEST_CASE("training stage contracts") {
    const auto tok = Tokenizer::train({"abc def"}, 4);
    TinyLmConfig cfg = tiny_config(tok.vocab_size(), 7);
    cfg.context_len = 32;
    const auto model = TinyLm::init(cfg);
    const auto adapters = AdapterWeights::init(cfg, 2, 32, 3);
    std::vector<data::TrainingRecord> records = {{data::Stage::CI, "<PRE>ab<SUF>ef<MID>", "cd", data::Tag::None, "r1"},
                                                 {data::Stage::CI, "<PRE>a<SUF>f<MID>", "bcde", data::Tag::None, "r2"}};
    TrainConfig tc;
    tc.epochs_ci = 0;
    auto none = train_stage(model, tok, adapters, records, tc, data::Stage::CI);
    CHECK(none.log.size() == 1);
    none.adapters.for_each([&](const std::string& name, const Mat& m) {
        adapters.for_each([&](const std::string& other, const Mat& n) {
            if (name == other) CHECK(m == n);
        });
    });

    tc.epochs_ci = 3;
    tc.optimizer = Optimizer::Adam;
    tc.learning_rate = 1e-2;
    const auto trained = train_stage(model, tok, adapters, records, tc, data::Stage::CI);
    REQUIRE(trained.log.size() == 4);
    CHECK(trained.log.back().epoch == 3);
    CHECK(trained.log.back().mean_loss < trained.log.front().mean_loss);
    CHECK(to_jsonl(trained.log[1]) ==
          "{\"stage\":\"CI\",\"epoch\":1,\"mean_loss\":" + nlohmann::json(trained.log[1].mean_loss).dump() +
              ",\"records\":2}");
    const auto again = train_stage(model, tok, adapters, records, tc, data::Stage::CI);
    CHECK(again.log.back().mean_loss == trained.log.back().mean_loss);

    CHECK_THROWS_AS(train_stage(model, tok, adapters, records, tc, data::Stage::VD), StageMismatch);
    auto broken = model;
    broken.weights.head(0, 0) = std::nan("");
    try {
        train_stage(broken, tok, adapters, records, tc, data::Stage::CI);
        FAIL("expected NonFiniteLoss");
    } catch (const NonFiniteLoss& e) {
        CHECK(e.record_id == "r1");
    }
}

TEST_CASE("checkpoints round-trip at float32 precision") {
    const auto tok = Tokenizer::train({"pragma solidity ^0.8.0;"}, 5);
    TinyLmConfig cfg = tiny_config(tok.vocab_size(), 9);
    Checkpoint ck{TinyLm::init(cfg), tok, random_adapters(cfg, 2, 4), {"base", "ci"}, "state"};
    const auto path = std::filesystem::temp_directory_path() / "forge_test_ckpt.bin";
    save_checkpoint(path, ck);
    const auto back = load_checkpoint(path);
    round_to_stored_precision(ck);
    CHECK(back.model.config == ck.model.config);
    CHECK(back.tokenizer == ck.tokenizer);
    CHECK(back.lineage == ck.lineage);
    CHECK(back.rng_state == "state");
    CHECK(back.model.weights.head == ck.model.weights.head);
    CHECK(back.adapters->layers[1][2].a == ck.adapters->layers[1][2].a);
    CHECK(back.adapters->alpha == 32);

    // save -> load -> save is byte-identical
    const auto path2 = std::filesystem::temp_directory_path() / "forge_test_ckpt2.bin";
    save_checkpoint(path2, back);
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(slurp(path) == slurp(path2));

    {
        std::ofstream out(path2, std::ios::binary | std::ios::trunc);
        out << slurp(path).substr(0, 100);
    }
    CHECK_THROWS_AS(load_checkpoint(path2), CheckpointError);
    {
        std::ofstream out(path2, std::ios::binary | std::ios::trunc);
        out << "not a checkpoint at all";
    }
    CHECK_THROWS_AS(load_checkpoint(path2), CheckpointError);

    SamplerConfig sc;
    CHECK_THROWS_AS(generate_secure(back, "Keep ether.", sc), NotTrained);
    auto ti = back;
    ti.lineage.push_back("ti");
    CHECK_THROWS_AS(generate_secure(ti, "Keep ether safe for users.", sc), SequenceTooLong);
    std::filesystem::remove(path);
    std::filesystem::remove(path2);
}
