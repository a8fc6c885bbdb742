#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "forge/lm/tokenizer.hpp"

namespace forge::lm {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class SequenceTooLong : public std::length_error {
public:
    using std::length_error::length_error;
};
class TargetTruncated : public std::length_error {
public:
    using std::length_error::length_error;
};

struct TinyLmConfig {
    int vocab_size = 518;
    int embed_dim = 128;
    int num_layers = 4;
    int num_heads = 4;
    int context_len = 512;
    std::uint64_t seed = 0;

    void validate() const;  // throws std::invalid_argument
    int head_dim() const { return embed_dim / num_heads; }
    friend bool operator==(const TinyLmConfig&, const TinyLmConfig&) = default;
};

// Row-vector convention: a projection maps x (1 x d_in) to x W (1 x d_out).
struct LayerWeights {
    Mat ln1_g, ln1_b;
    Mat wq, wk, wv, wo;
    Mat ln2_g, ln2_b;
    Mat w1, b1, w2, b2;
};

struct BaseWeights {
    Mat tok_emb;  // V x D
    Mat pos_emb;  // context x D
    std::vector<LayerWeights> layers;
    Mat lnf_g, lnf_b;
    Mat head;  // D x V
};

/// Visits every tensor in a fixed order.
void for_each_tensor(BaseWeights& w, const std::function<void(const std::string&, Mat&)>& fn);
void for_each_tensor(const BaseWeights& w, const std::function<void(const std::string&, const Mat&)>& fn);

/// Same shapes, all zeros.
BaseWeights zeros_like(const BaseWeights& w);

struct TinyLm {
    TinyLmConfig config;
    BaseWeights weights;

    /// Small random initialization from `config.seed`.
    static TinyLm init(const TinyLmConfig& config);
};

// Attention projections carrying adapters, in per-layer order.
enum class Target { Q, K, V, O };
inline constexpr std::array<Target, 4> kTargets = {Target::Q, Target::K, Target::V, Target::O};
std::string_view to_string(Target t);

struct LoraPair {
    Mat b;  // d x r
    Mat a;  // r x k
};

/// Low-rank updates W0 + (alpha / r) B A for every attention projection.
struct AdapterWeights {
    int rank = 4;
    double alpha = 32;
    std::vector<std::array<LoraPair, 4>> layers;

    double scale() const { return alpha / rank; }
    /// Fresh adapters: B = 0, A Gaussian with deviation 1/sqrt(d).
    static AdapterWeights init(const TinyLmConfig& config, int rank, double alpha, std::uint64_t seed);
    /// Same shapes and scaling, all zeros.
    AdapterWeights zeros() const;
    void for_each(const std::function<void(const std::string&, Mat&)>& fn);
    void for_each(const std::function<void(const std::string&, const Mat&)>& fn) const;
};

const Mat& base_matrix(const BaseWeights& w, std::size_t layer, Target t);
/// W0 + (alpha / r) B A, or W0 when there are no adapters.
Mat effective_matrix(const TinyLm& model, const AdapterWeights* adapters, std::size_t layer, Target t);

/// Gradient sinks; null members are not computed.
struct Gradients {
    BaseWeights* base = nullptr;
    AdapterWeights* adapters = nullptr;
};

/// Next-token logits at every position (T x V). Throws SequenceTooLong.
Mat forward_logits(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> tokens);

/// Row-wise log-softmax.
Mat log_softmax(const Mat& logits);

/// -sum over t in [target_begin, T) of log p(tokens[t] | tokens[<t]); accumulates gradients when asked.
double sequence_nll(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> tokens,
                    std::size_t target_begin, Gradients grads = {});

/// An input/target pair as one token sequence: EOT, input, target, EOT.
struct EncodedRecord {
    std::vector<int> tokens;
    std::size_t target_begin = 0;
    std::size_t truncated = 0;  // input tokens dropped from the left
};
EncodedRecord encode_record(const Tokenizer& tokenizer, std::string_view input_text, std::string_view target_text,
                            int context_len);

/// Negative log-likelihood of the target tokens only (closing EOT included).
double masked_nll(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                  std::string_view input_text, std::string_view target_text, Gradients grads = {});

/// Incremental decoding with a key/value cache.
class Decoder {
public:
    Decoder(const TinyLm& model, const AdapterWeights* adapters);
    /// Feeds one token and returns the logits for the next one.
    Eigen::RowVectorXd step(int token);
    std::size_t position() const { return pos_; }
    void reset() { pos_ = 0; }

private:
    const TinyLm& model_;
    std::vector<std::array<Mat, 4>> w_;  // effective q, k, v, o per layer
    std::vector<Mat> keys_, values_;
    std::size_t pos_ = 0;
};

}  // namespace forge::lm
