#include "forge/lm/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <spdlog/spdlog.h>

#include "forge/dataset/builders.hpp"
#include "json.hpp"

namespace forge::lm {

namespace {

class Optim {
public:
    Optim(Optimizer kind, double lr, std::vector<Mat*> params) : kind_(kind), lr_(lr), params_(std::move(params)) {
        if (kind_ == Optimizer::Adam) {
            for (auto* p : params_) {
                m_.push_back(Mat::Zero(p->rows(), p->cols()));
                v_.push_back(Mat::Zero(p->rows(), p->cols()));
            }
        }
    }

    // grads[i] matches params[i]; every gradient is multiplied by `scale` first.
    void step(const std::vector<Mat*>& grads, double scale) {
        ++t_;
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, t_), c2 = 1.0 - std::pow(b2, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            const Mat g = *grads[i] * scale;
            if (kind_ == Optimizer::SGD) {
                *params_[i] -= lr_ * g;
            } else {
                m_[i] = b1 * m_[i] + (1 - b1) * g;
                v_[i] = b2 * v_[i] + (1 - b2) * g.cwiseAbs2();
                *params_[i] -= (lr_ * (m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + eps)).matrix();
            }
        }
    }

private:
    Optimizer kind_;
    double lr_;
    std::vector<Mat*> params_;
    std::vector<Mat> m_, v_;
    int t_ = 0;
};

std::vector<Mat*> tensors(AdapterWeights& a) {
    std::vector<Mat*> out;
    a.for_each([&](const std::string&, Mat& m) { out.push_back(&m); });
    return out;
}

std::vector<Mat*> tensors(BaseWeights& w) {
    std::vector<Mat*> out;
    for_each_tensor(w, [&](const std::string&, Mat& m) { out.push_back(&m); });
    return out;
}

void set_zero(const std::vector<Mat*>& ms) {
    for (auto* m : ms) m->setZero();
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::string_view key, int epoch, Rng* keep) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, key, static_cast<std::uint64_t>(epoch)));
    shuffle(order, rng);
    if (keep) *keep = rng;
    return order;
}

}  // namespace

std::string_view to_string(Optimizer o) { return o == Optimizer::SGD ? "sgd" : "adam"; }

Optimizer parse_optimizer(std::string_view text) {
    if (text == "sgd") return Optimizer::SGD;
    if (text == "adam") return Optimizer::Adam;
    throw std::invalid_argument("unknown optimizer: " + std::string(text));
}

int TrainConfig::epochs(data::Stage stage) const {
    switch (stage) {
        case data::Stage::CI: return epochs_ci;
        case data::Stage::VD: return epochs_vd;
        case data::Stage::TI: return epochs_ti;
    }
    return 0;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("train config: " + m); };
    if (!(learning_rate > 0)) fail("learning_rate must be positive");
    if (epochs_ci < 0 || epochs_vd < 0 || epochs_ti < 0) fail("epochs must not be negative");
    if (lora_r < 1) fail("lora_r must be positive");
    if (!(lora_alpha > 0)) fail("lora_alpha must be positive");
    if (batch_size < 1) fail("batch_size must be positive");
}

std::string to_jsonl(const EpochLog& log) {
    nlohmann::ordered_json j;
    j["stage"] = data::to_string(log.stage);
    j["epoch"] = log.epoch;
    j["mean_loss"] = log.mean_loss;
    j["records"] = log.records;
    return j.dump();
}

double mean_token_nll(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                      const std::vector<data::TrainingRecord>& records) {
    double total = 0;
    std::size_t tokens = 0;
    for (const auto& r : records) {
        const auto enc = encode_record(tokenizer, r.input_text, r.target_text, model.config.context_len);
        total += sequence_nll(model, adapters, enc.tokens, enc.target_begin);
        tokens += enc.tokens.size() - enc.target_begin;
    }
    return tokens ? total / static_cast<double>(tokens) : 0.0;
}

data::Tag predict_tag(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                      std::string_view input_text) {
    const double secure = masked_nll(model, tokenizer, adapters, input_text, data::tag_block(data::Tag::Security));
    const double vulnerable = masked_nll(model, tokenizer, adapters, input_text, data::tag_block(data::Tag::Vulnerable));
    return vulnerable < secure ? data::Tag::Vulnerable : data::Tag::Security;
}

TrainResult train_stage(const TinyLm& model, const Tokenizer& tokenizer, AdapterWeights adapters,
                        const std::vector<data::TrainingRecord>& records, const TrainConfig& cfg, data::Stage stage,
                        const std::function<void(const EpochLog&)>& on_epoch) {
    cfg.validate();
    for (const auto& r : records) {
        if (r.stage != stage)
            throw StageMismatch("record " + r.source_id + " belongs to stage " + std::string(data::to_string(r.stage)) +
                                ", not " + std::string(data::to_string(stage)));
    }
    TrainResult result;
    std::vector<EncodedRecord> encoded;
    encoded.reserve(records.size());
    std::vector<std::string> ids;
    for (const auto& r : records) {
        try {
            encoded.push_back(encode_record(tokenizer, r.input_text, r.target_text, model.config.context_len));
        } catch (const TargetTruncated& e) {
            spdlog::warn("stage {}: skipping {} ({})", data::to_string(stage), r.source_id, e.what());
            ++result.skipped_records;
            continue;
        }
        ids.push_back(r.source_id);
        if (encoded.back().truncated) ++result.truncated_records;
    }
    if (result.truncated_records)
        spdlog::info("stage {}: {} records left-truncated to fit context {}", data::to_string(stage),
                     result.truncated_records, model.config.context_len);

    auto emit = [&](int epoch, double loss) {
        EpochLog log{stage, epoch, loss, encoded.size()};
        result.log.push_back(log);
        spdlog::info("stage {} epoch {} mean loss {:.6f} over {} records", data::to_string(stage), epoch, loss,
                     encoded.size());
        if (on_epoch) on_epoch(log);
    };

    // evaluation pass before any update
    {
        double total = 0;
        std::size_t tokens = 0;
        for (std::size_t i = 0; i < encoded.size(); ++i) {
            const double loss = sequence_nll(model, &adapters, encoded[i].tokens, encoded[i].target_begin);
            if (!std::isfinite(loss)) throw NonFiniteLoss(ids[i]);
            total += loss;
            tokens += encoded[i].tokens.size() - encoded[i].target_begin;
        }
        emit(0, tokens ? total / static_cast<double>(tokens) : 0.0);
    }

    auto params = tensors(adapters);
    AdapterWeights grad = adapters.zeros();
    auto grads = tensors(grad);
    Optim opt(cfg.optimizer, cfg.learning_rate, params);
    const std::string key = "train/" + std::string(data::to_string(stage));
    Rng last(derive_seed(cfg.seed, key));

    for (int epoch = 1; epoch <= cfg.epochs(stage); ++epoch) {
        const auto order = epoch_order(encoded.size(), cfg.seed, key, epoch, &last);
        double total = 0;
        std::size_t tokens = 0;
        for (std::size_t at = 0; at < order.size(); at += cfg.batch_size) {
            set_zero(grads);
            std::size_t batch_tokens = 0;
            const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(cfg.batch_size));
            for (std::size_t b = at; b < end; ++b) {
                const auto& e = encoded[order[b]];
                const double loss = sequence_nll(model, &adapters, e.tokens, e.target_begin, {nullptr, &grad});
                if (!std::isfinite(loss)) throw NonFiniteLoss(ids[order[b]]);
                total += loss;
                batch_tokens += e.tokens.size() - e.target_begin;
            }
            tokens += batch_tokens;
            if (batch_tokens) opt.step(grads, 1.0 / static_cast<double>(batch_tokens));
        }
        emit(epoch, tokens ? total / static_cast<double>(tokens) : 0.0);
    }
    std::ostringstream state;
    state << last;
    result.rng_state = state.str();
    result.adapters = std::move(adapters);
    return result;
}

TinyLm pretrain_base(TinyLm model, const Tokenizer& tokenizer, const std::vector<std::string>& texts,
                     const PretrainConfig& cfg, const std::function<void(int, double)>& on_epoch) {
    const auto ctx = static_cast<std::size_t>(model.config.context_len);
    std::vector<std::vector<int>> windows;
    for (const auto& text : texts) {
        std::vector<int> ids{tokenizer.eot()};
        const auto body = tokenizer.encode(text);
        ids.insert(ids.end(), body.begin(), body.end());
        ids.push_back(tokenizer.eot());
        for (std::size_t s = 0; s + 1 < ids.size(); s += ctx - 1)
            windows.emplace_back(ids.begin() + s, ids.begin() + std::min(ids.size(), s + ctx));
    }
    auto params = tensors(model.weights);
    BaseWeights grad = zeros_like(model.weights);
    auto grads = tensors(grad);
    Optim opt(Optimizer::Adam, cfg.learning_rate, params);
    const auto batch = static_cast<std::size_t>(std::max(1, cfg.batch_size));
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto order = epoch_order(windows.size(), cfg.seed, "pretrain", epoch, nullptr);
        double total = 0;
        std::size_t tokens = 0;
        for (std::size_t at = 0; at < order.size(); at += batch) {
            set_zero(grads);
            std::size_t batch_tokens = 0;
            for (std::size_t b = at; b < std::min(order.size(), at + batch); ++b) {
                const auto& w = windows[order[b]];
                const double loss = sequence_nll(model, nullptr, w, 1, {&grad, nullptr});
                if (!std::isfinite(loss)) throw NonFiniteLoss("pretraining window " + std::to_string(order[b]));
                total += loss;
                batch_tokens += w.size() - 1;
            }
            tokens += batch_tokens;
            opt.step(grads, 1.0 / static_cast<double>(batch_tokens));
        }
        const double mean = tokens ? total / static_cast<double>(tokens) : 0.0;
        spdlog::info("base pretraining epoch {} mean loss {:.6f} over {} windows", epoch, mean, windows.size());
        if (on_epoch) on_epoch(epoch, mean);
    }
    return model;
}

std::string generate_secure(const Checkpoint& ckpt, std::string_view instruction, const SamplerConfig& cfg) {
    if (!ckpt.adapters || std::find(ckpt.lineage.begin(), ckpt.lineage.end(), "ti") == ckpt.lineage.end())
        throw NotTrained("checkpoint has not been through the instruction stage");
    return sample(ckpt.model, ckpt.tokenizer, &*ckpt.adapters, data::instruction_prompt(instruction, data::Tag::Security),
                  cfg);
}

}  // namespace forge::lm
