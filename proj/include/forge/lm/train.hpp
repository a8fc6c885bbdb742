#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/dataset/records.hpp"
#include "forge/lm/checkpoint.hpp"
#include "forge/lm/model.hpp"
#include "forge/lm/sampler.hpp"

namespace forge::lm {

class StageMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};
class NonFiniteLoss : public std::runtime_error {
public:
    NonFiniteLoss(const std::string& record_id)
        : std::runtime_error("non-finite loss on record " + record_id), record_id(record_id) {}
    std::string record_id;
};
class NotTrained : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Optimizer { SGD, Adam };
std::string_view to_string(Optimizer o);
Optimizer parse_optimizer(std::string_view text);

struct TrainConfig {
    double learning_rate = 1e-4;
    int epochs_ci = 10;
    int epochs_vd = 10;
    int epochs_ti = 1;
    int lora_r = 4;
    double lora_alpha = 32;
    int batch_size = 1;
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::SGD;
    bool fresh_adapters = false;  // start each stage from new adapters

    int epochs(data::Stage stage) const;
    void validate() const;  // throws std::invalid_argument
};

struct EpochLog {
    data::Stage stage = data::Stage::CI;
    int epoch = 0;  // 0 is the evaluation before any update
    double mean_loss = 0;  // per target token
    std::size_t records = 0;
};
std::string to_jsonl(const EpochLog& log);

struct TrainResult {
    AdapterWeights adapters;
    std::vector<EpochLog> log;
    std::size_t truncated_records = 0;  // inputs cut from the left
    std::size_t skipped_records = 0;    // targets longer than the context
    std::string rng_state;
};

/// Updates only the adapters; the base weights stay frozen. Throws StageMismatch
/// when a record belongs to another stage and NonFiniteLoss on a diverging record.
/// Records whose target cannot fit the context are skipped.
TrainResult train_stage(const TinyLm& model, const Tokenizer& tokenizer, AdapterWeights adapters,
                        const std::vector<data::TrainingRecord>& records, const TrainConfig& cfg, data::Stage stage,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

/// Mean target-token loss over the records.
double mean_token_nll(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                      const std::vector<data::TrainingRecord>& records);

/// Whichever tag block is more likely after the detection input.
data::Tag predict_tag(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                      std::string_view input_text);

/// Full-parameter next-token training of the base model on raw text.
struct PretrainConfig {
    int epochs = 4;
    double learning_rate = 3e-3;
    int batch_size = 4;
    std::uint64_t seed = 0;
};
TinyLm pretrain_base(TinyLm model, const Tokenizer& tokenizer, const std::vector<std::string>& texts,
                     const PretrainConfig& cfg, const std::function<void(int epoch, double mean_loss)>& on_epoch = {});

/// Samples code for an instruction under the security tag. Throws NotTrained
/// unless the checkpoint went through the instruction stage.
std::string generate_secure(const Checkpoint& ckpt, std::string_view instruction, const SamplerConfig& cfg);

}  // namespace forge::lm
