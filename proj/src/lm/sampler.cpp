#include "forge/lm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace forge::lm {

void SamplerConfig::validate() const {
    if (!(temperature > 0)) throw std::invalid_argument("sampler: temperature must be positive");
    if (!(top_p > 0 && top_p <= 1)) throw std::invalid_argument("sampler: top_p must lie in (0, 1]");
    if (max_new_tokens < 1) throw std::invalid_argument("sampler: max_new_tokens must be positive");
}

Nucleus nucleus(std::span<const double> probs, double top_p) {
    std::vector<int> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return probs[a] > probs[b]; });
    Nucleus n;
    double mass = 0;
    for (int id : order) {
        if (probs[id] <= 0 && !n.ids.empty()) break;
        n.ids.push_back(id);
        n.probs.push_back(probs[id]);
        mass += probs[id];
        if (mass >= top_p - 1e-12) break;
    }
    for (auto& p : n.probs) p /= mass;
    return n;
}

int argmax(const Eigen::RowVectorXd& logits) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < logits.size(); ++i)
        if (logits(i) > logits(best)) best = i;
    return static_cast<int>(best);
}

int sample_token(const Eigen::RowVectorXd& logits, double temperature, double top_p, Rng& rng) {
    const int best = argmax(logits);
    Eigen::RowVectorXd p = ((logits.array() - logits(best)) / temperature).exp();
    const double total = p.sum();
    if (!std::isfinite(total) || !(total > 0) || !logits.allFinite()) return best;
    p /= total;
    const auto n = nucleus(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())), top_p);
    if (n.ids.size() == 1) return n.ids[0];
    const double u = uniform_unit(rng);
    double acc = 0;
    for (std::size_t i = 0; i < n.ids.size(); ++i) {
        acc += n.probs[i];
        if (u < acc) return n.ids[i];
    }
    return n.ids.back();
}

namespace {

template <typename Pick>
std::vector<int> decode_loop(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> prompt,
                             int max_new_tokens, int eot, Pick pick) {
    if (prompt.empty()) throw std::invalid_argument("empty prompt");
    if (prompt.size() >= static_cast<std::size_t>(model.config.context_len))
        throw SequenceTooLong("prompt of " + std::to_string(prompt.size()) + " tokens leaves no room in context " +
                              std::to_string(model.config.context_len));
    Decoder dec(model, adapters);
    Eigen::RowVectorXd logits;
    for (int t : prompt) logits = dec.step(t);
    std::vector<int> out;
    while (static_cast<int>(out.size()) < max_new_tokens) {
        const int next = pick(logits);
        if (next == eot) break;
        out.push_back(next);
        if (dec.position() >= static_cast<std::size_t>(model.config.context_len)) break;
        logits = dec.step(next);
    }
    return out;
}

}  // namespace

std::vector<int> sample_tokens(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> prompt,
                               const SamplerConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, "sample"));
    const int eot = model.config.vocab_size - 1;
    return decode_loop(model, adapters, prompt, cfg.max_new_tokens, eot,
                       [&](const Eigen::RowVectorXd& l) { return sample_token(l, cfg.temperature, cfg.top_p, rng); });
}

std::vector<int> greedy_tokens(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> prompt,
                               int max_new_tokens) {
    const int eot = model.config.vocab_size - 1;
    return decode_loop(model, adapters, prompt, max_new_tokens, eot,
                       [](const Eigen::RowVectorXd& l) { return argmax(l); });
}

std::string sample(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                   std::string_view prompt, const SamplerConfig& cfg) {
    if (tokenizer.vocab_size() != model.config.vocab_size)
        throw std::invalid_argument("tokenizer and model vocabularies differ");
    std::vector<int> ids{tokenizer.eot()};
    const auto body = tokenizer.encode(prompt);
    ids.insert(ids.end(), body.begin(), body.end());
    return tokenizer.decode(sample_tokens(model, adapters, ids, cfg));
}

}  // namespace forge::lm
