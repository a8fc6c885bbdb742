#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "forge/common/random.hpp"
#include "forge/lm/model.hpp"

namespace forge::lm {

struct SamplerConfig {
    double temperature = 0.2;
    double top_p = 0.95;
    int max_new_tokens = 512;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
};

/// Smallest prefix of the tokens in descending probability whose mass reaches
/// top_p, renormalized. Ties keep the lower id first.
struct Nucleus {
    std::vector<int> ids;
    std::vector<double> probs;
};
Nucleus nucleus(std::span<const double> probs, double top_p);

/// softmax(logits / temperature), then nucleus sampling. Falls back to argmax
/// when the distribution degenerates.
int sample_token(const Eigen::RowVectorXd& logits, double temperature, double top_p, Rng& rng);
int argmax(const Eigen::RowVectorXd& logits);

/// Continues `prompt` (already tokenized, BOS included) until EOT, max_new_tokens or
/// a full context. Returns the new tokens without the EOT.
std::vector<int> sample_tokens(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> prompt,
                               const SamplerConfig& cfg);
std::vector<int> greedy_tokens(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> prompt,
                               int max_new_tokens);

/// Text continuation of a text prompt. Throws SequenceTooLong when the prompt
/// does not leave room for one token.
std::string sample(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                   std::string_view prompt, const SamplerConfig& cfg);

}  // namespace forge::lm
