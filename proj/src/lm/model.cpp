#include "forge/lm/model.hpp"

#include <cmath>

#include "forge/common/random.hpp"

namespace forge::lm {

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)

Mat gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Mat m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * standard_normal(rng);
    return m;
}

struct NormCache {
    Mat xhat;
    Eigen::VectorXd rstd;
};

Mat layer_norm(const Mat& x, const Mat& g, const Mat& b, NormCache* cache) {
    const auto d = static_cast<double>(x.cols());
    Mat xhat(x.rows(), x.cols());
    Eigen::VectorXd rstd(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mu = x.row(i).sum() / d;
        const auto centered = x.row(i).array() - mu;
        const double var = centered.square().sum() / d;
        rstd(i) = 1.0 / std::sqrt(var + kNormEps);
        xhat.row(i) = centered * rstd(i);
    }
    Mat y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
    if (cache) cache->xhat = std::move(xhat), cache->rstd = std::move(rstd);
    return y;
}

// Returns dx; accumulates dg and db when given.
Mat layer_norm_backward(const Mat& dy, const NormCache& c, const Mat& g, Mat* dg, Mat* db) {
    if (dg) dg->row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    if (db) db->row(0) += dy.colwise().sum();
    const Mat dxhat = dy.array().rowwise() * g.row(0).array();
    const auto d = static_cast<double>(dy.cols());
    Mat dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const double mean_d = dxhat.row(i).sum() / d;
        const double mean_dx = dxhat.row(i).dot(c.xhat.row(i)) / d;
        dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - mean_d - c.xhat.row(i).array() * mean_dx);
    }
    return dx;
}

double gelu(double u) { return 0.5 * u * (1.0 + std::tanh(kGeluC * (u + 0.044715 * u * u * u))); }

double gelu_grad(double u) {
    const double th = std::tanh(kGeluC * (u + 0.044715 * u * u * u));
    return 0.5 * (1.0 + th) + 0.5 * u * (1.0 - th * th) * kGeluC * (1.0 + 3.0 * 0.044715 * u * u);
}

// In-place causal softmax of a T x T score matrix.
void causal_softmax(Mat& s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        const double mx = s.row(i).head(i + 1).maxCoeff();
        double total = 0;
        for (Eigen::Index j = 0; j <= i; ++j) total += (s(i, j) = std::exp(s(i, j) - mx));
        s.row(i).head(i + 1) /= total;
        s.row(i).tail(s.cols() - i - 1).setZero();
    }
}

struct LayerCache {
    NormCache n1, n2;
    Mat h1, q, k, v, o, h2, u, a;
    std::vector<Mat> probs;  // per head
};

struct ForwardState {
    std::vector<std::array<Mat, 4>> w;  // effective projections
    std::vector<LayerCache> layers;
    NormCache nf;
    Mat hf;  // final normed hidden states
};

void forward(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> tokens, ForwardState& st) {
    const auto& cfg = model.config;
    const auto& W = model.weights;
    const auto T = static_cast<Eigen::Index>(tokens.size());
    if (T > cfg.context_len)
        throw SequenceTooLong("sequence of " + std::to_string(T) + " tokens exceeds context " + std::to_string(cfg.context_len));
    const int H = cfg.num_heads, dh = cfg.head_dim();
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));

    Mat x(T, cfg.embed_dim);
    for (Eigen::Index t = 0; t < T; ++t) {
        if (tokens[t] < 0 || tokens[t] >= cfg.vocab_size) throw std::out_of_range("token id " + std::to_string(tokens[t]));
        x.row(t) = W.tok_emb.row(tokens[t]) + W.pos_emb.row(t);
    }
    st.w.resize(W.layers.size());
    st.layers.resize(W.layers.size());
    for (std::size_t l = 0; l < W.layers.size(); ++l) {
        const auto& L = W.layers[l];
        auto& c = st.layers[l];
        auto& w = st.w[l];
        for (auto t : kTargets) w[static_cast<int>(t)] = effective_matrix(model, adapters, l, t);

        c.h1 = layer_norm(x, L.ln1_g, L.ln1_b, &c.n1);
        c.q = c.h1 * w[0];
        c.k = c.h1 * w[1];
        c.v = c.h1 * w[2];
        c.o.resize(T, cfg.embed_dim);
        c.probs.resize(H);
        for (int h = 0; h < H; ++h) {
            Mat s = c.q.middleCols(h * dh, dh) * c.k.middleCols(h * dh, dh).transpose() * inv;
            causal_softmax(s);
            c.o.middleCols(h * dh, dh) = s * c.v.middleCols(h * dh, dh);
            c.probs[h] = std::move(s);
        }
        x += c.o * w[3];

        c.h2 = layer_norm(x, L.ln2_g, L.ln2_b, &c.n2);
        c.u = (c.h2 * L.w1).rowwise() + L.b1.row(0);
        c.a = c.u.unaryExpr([](double z) { return gelu(z); });
        x += (c.a * L.w2).rowwise() + L.b2.row(0);
    }
    st.hf = layer_norm(x, W.lnf_g, W.lnf_b, &st.nf);
}

void accumulate_projection(const Mat& input, const Mat& dy, std::size_t layer, Target t, const TinyLm& model,
                           const AdapterWeights* adapters, Gradients& g) {
    if (!g.base && !g.adapters) return;
    const Mat G = input.transpose() * dy;
    if (g.base) {
        auto& L = g.base->layers[layer];
        Mat* dst[] = {&L.wq, &L.wk, &L.wv, &L.wo};
        *dst[static_cast<int>(t)] += G;
    }
    if (g.adapters && adapters) {
        const auto& p = adapters->layers[layer][static_cast<int>(t)];
        auto& dp = g.adapters->layers[layer][static_cast<int>(t)];
        const double s = adapters->scale();
        dp.b += s * G * p.a.transpose();
        dp.a += s * p.b.transpose() * G;
    }
    (void)model;
}

void backward(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> tokens, const ForwardState& st,
              const Mat& dhf, Gradients& g) {
    const auto& cfg = model.config;
    const auto& W = model.weights;
    const int H = cfg.num_heads, dh = cfg.head_dim();
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    BaseWeights* gb = g.base;

    Mat dx = layer_norm_backward(dhf, st.nf, W.lnf_g, gb ? &gb->lnf_g : nullptr, gb ? &gb->lnf_b : nullptr);
    for (std::size_t l = W.layers.size(); l-- > 0;) {
        const auto& L = W.layers[l];
        const auto& c = st.layers[l];
        const auto& w = st.w[l];
        LayerWeights* gl = gb ? &gb->layers[l] : nullptr;

        // feed-forward block
        if (gl) {
            gl->b2.row(0) += dx.colwise().sum();
            gl->w2 += c.a.transpose() * dx;
        }
        Mat du = (dx * L.w2.transpose()).array() * c.u.unaryExpr([](double z) { return gelu_grad(z); }).array();
        if (gl) {
            gl->b1.row(0) += du.colwise().sum();
            gl->w1 += c.h2.transpose() * du;
        }
        dx += layer_norm_backward(du * L.w1.transpose(), c.n2, L.ln2_g, gl ? &gl->ln2_g : nullptr,
                                  gl ? &gl->ln2_b : nullptr);

        // attention block
        accumulate_projection(c.o, dx, l, Target::O, model, adapters, g);
        const Mat dout = dx * w[3].transpose();
        Mat dq(dout.rows(), dout.cols()), dk(dout.rows(), dout.cols()), dv(dout.rows(), dout.cols());
        for (int h = 0; h < H; ++h) {
            const auto& p = c.probs[h];
            const Mat dO = dout.middleCols(h * dh, dh);
            const Mat dP = dO * c.v.middleCols(h * dh, dh).transpose();
            dv.middleCols(h * dh, dh) = p.transpose() * dO;
            const Eigen::VectorXd rows = (dP.array() * p.array()).rowwise().sum();
            const Mat dS = (p.array() * (dP.colwise() - rows).array()) * inv;
            dq.middleCols(h * dh, dh) = dS * c.k.middleCols(h * dh, dh);
            dk.middleCols(h * dh, dh) = dS.transpose() * c.q.middleCols(h * dh, dh);
        }
        accumulate_projection(c.h1, dq, l, Target::Q, model, adapters, g);
        accumulate_projection(c.h1, dk, l, Target::K, model, adapters, g);
        accumulate_projection(c.h1, dv, l, Target::V, model, adapters, g);
        const Mat dh1 = dq * w[0].transpose() + dk * w[1].transpose() + dv * w[2].transpose();
        dx += layer_norm_backward(dh1, c.n1, L.ln1_g, gl ? &gl->ln1_g : nullptr, gl ? &gl->ln1_b : nullptr);
    }
    if (gb) {
        for (Eigen::Index t = 0; t < dx.rows(); ++t) {
            gb->tok_emb.row(tokens[t]) += dx.row(t);
            gb->pos_emb.row(t) += dx.row(t);
        }
    }
}

}  // namespace

void TinyLmConfig::validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("model config: " + m); };
    if (vocab_size < 2) fail("vocab_size must be at least 2");
    if (embed_dim < 1 || num_layers < 1 || num_heads < 1 || context_len < 2) fail("sizes must be positive");
    if (embed_dim % num_heads != 0) fail("embed_dim must be divisible by num_heads");
}

std::string_view to_string(Target t) {
    switch (t) {
        case Target::Q: return "q";
        case Target::K: return "k";
        case Target::V: return "v";
        case Target::O: return "o";
    }
    return "?";
}

void for_each_tensor(BaseWeights& w, const std::function<void(const std::string&, Mat&)>& fn) {
    fn("tok_emb", w.tok_emb);
    fn("pos_emb", w.pos_emb);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        auto& L = w.layers[l];
        const auto p = "layer" + std::to_string(l) + ".";
        fn(p + "ln1_g", L.ln1_g);
        fn(p + "ln1_b", L.ln1_b);
        fn(p + "wq", L.wq);
        fn(p + "wk", L.wk);
        fn(p + "wv", L.wv);
        fn(p + "wo", L.wo);
        fn(p + "ln2_g", L.ln2_g);
        fn(p + "ln2_b", L.ln2_b);
        fn(p + "w1", L.w1);
        fn(p + "b1", L.b1);
        fn(p + "w2", L.w2);
        fn(p + "b2", L.b2);
    }
    fn("lnf_g", w.lnf_g);
    fn("lnf_b", w.lnf_b);
    fn("head", w.head);
}

void for_each_tensor(const BaseWeights& w, const std::function<void(const std::string&, const Mat&)>& fn) {
    for_each_tensor(const_cast<BaseWeights&>(w), [&](const std::string& name, Mat& m) { fn(name, m); });
}

BaseWeights zeros_like(const BaseWeights& w) {
    BaseWeights z = w;
    for_each_tensor(z, [](const std::string&, Mat& m) { m.setZero(); });
    return z;
}

TinyLm TinyLm::init(const TinyLmConfig& config) {
    config.validate();
    Rng rng(derive_seed(config.seed, "tinylm_init"));
    const std::size_t V = config.vocab_size, D = config.embed_dim, F = 4 * D;
    const double proj = 1.0 / std::sqrt(static_cast<double>(D));
    const double resid = proj / std::sqrt(2.0 * config.num_layers);
    TinyLm m;
    m.config = config;
    auto& w = m.weights;
    w.tok_emb = gaussian(V, D, 0.1, rng);
    w.pos_emb = gaussian(config.context_len, D, 0.02, rng);
    for (int l = 0; l < config.num_layers; ++l) {
        LayerWeights L;
        L.ln1_g = Mat::Ones(1, D);
        L.ln1_b = Mat::Zero(1, D);
        L.wq = gaussian(D, D, proj, rng);
        L.wk = gaussian(D, D, proj, rng);
        L.wv = gaussian(D, D, proj, rng);
        L.wo = gaussian(D, D, resid, rng);
        L.ln2_g = Mat::Ones(1, D);
        L.ln2_b = Mat::Zero(1, D);
        L.w1 = gaussian(D, F, proj, rng);
        L.b1 = Mat::Zero(1, F);
        L.w2 = gaussian(F, D, resid / 2, rng);
        L.b2 = Mat::Zero(1, D);
        w.layers.push_back(std::move(L));
    }
    w.lnf_g = Mat::Ones(1, D);
    w.lnf_b = Mat::Zero(1, D);
    w.head = gaussian(D, V, 0.5 * proj, rng);
    return m;
}

AdapterWeights AdapterWeights::init(const TinyLmConfig& config, int rank, double alpha, std::uint64_t seed) {
    config.validate();
    if (rank < 1 || 4 * rank > config.embed_dim)
        throw std::invalid_argument("adapter rank must satisfy 1 <= r <= embed_dim / 4");
    if (!(alpha > 0)) throw std::invalid_argument("adapter alpha must be positive");
    Rng rng(derive_seed(seed, "lora_init"));
    const std::size_t D = config.embed_dim;
    AdapterWeights a;
    a.rank = rank;
    a.alpha = alpha;
    a.layers.resize(config.num_layers);
    for (auto& layer : a.layers) {
        for (auto& p : layer) {
            p.b = Mat::Zero(D, rank);
            p.a = gaussian(rank, D, 1.0 / std::sqrt(static_cast<double>(D)), rng);
        }
    }
    return a;
}

AdapterWeights AdapterWeights::zeros() const {
    AdapterWeights z = *this;
    z.for_each([](const std::string&, Mat& m) { m.setZero(); });
    return z;
}

void AdapterWeights::for_each(const std::function<void(const std::string&, Mat&)>& fn) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (auto t : kTargets) {
            auto& p = layers[l][static_cast<int>(t)];
            const auto name = "layer" + std::to_string(l) + "." + std::string(to_string(t));
            fn(name + ".B", p.b);
            fn(name + ".A", p.a);
        }
    }
}

void AdapterWeights::for_each(const std::function<void(const std::string&, const Mat&)>& fn) const {
    const_cast<AdapterWeights*>(this)->for_each([&](const std::string& n, Mat& m) { fn(n, m); });
}

const Mat& base_matrix(const BaseWeights& w, std::size_t layer, Target t) {
    const auto& L = w.layers.at(layer);
    switch (t) {
        case Target::Q: return L.wq;
        case Target::K: return L.wk;
        case Target::V: return L.wv;
        case Target::O: return L.wo;
    }
    return L.wq;
}

Mat effective_matrix(const TinyLm& model, const AdapterWeights* adapters, std::size_t layer, Target t) {
    const Mat& w0 = base_matrix(model.weights, layer, t);
    if (!adapters) return w0;
    const auto& p = adapters->layers.at(layer)[static_cast<int>(t)];
    return w0 + adapters->scale() * (p.b * p.a);
}

Mat log_softmax(const Mat& logits) {
    Mat out(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

Mat forward_logits(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> tokens) {
    ForwardState st;
    forward(model, adapters, tokens, st);
    return st.hf * model.weights.head;
}

double sequence_nll(const TinyLm& model, const AdapterWeights* adapters, std::span<const int> tokens,
                    std::size_t target_begin, Gradients grads) {
    if (target_begin < 1 || target_begin > tokens.size())
        throw std::invalid_argument("target must start after the first token and within the sequence");
    if (target_begin == tokens.size()) return 0.0;
    ForwardState st;
    forward(model, adapters, tokens, st);
    const auto first = static_cast<Eigen::Index>(target_begin - 1);
    const auto count = static_cast<Eigen::Index>(tokens.size() - target_begin);
    const Mat hsel = st.hf.middleRows(first, count);
    const Mat lp = log_softmax(hsel * model.weights.head);
    double loss = 0;
    for (Eigen::Index r = 0; r < count; ++r) loss -= lp(r, tokens[target_begin + r]);
    if (!grads.base && !grads.adapters) return loss;

    Mat dlogits = lp.array().exp();
    for (Eigen::Index r = 0; r < count; ++r) dlogits(r, tokens[target_begin + r]) -= 1.0;
    if (grads.base) grads.base->head += hsel.transpose() * dlogits;
    Mat dhf = Mat::Zero(st.hf.rows(), st.hf.cols());
    dhf.middleRows(first, count) = dlogits * model.weights.head.transpose();
    backward(model, adapters, tokens, st, dhf, grads);
    return loss;
}

EncodedRecord encode_record(const Tokenizer& tokenizer, std::string_view input_text, std::string_view target_text,
                            int context_len) {
    const int eot = tokenizer.eot();
    auto input = tokenizer.encode(input_text);
    auto target = tokenizer.encode(target_text);
    target.push_back(eot);
    if (target.size() + 1 > static_cast<std::size_t>(context_len))
        throw TargetTruncated("target of " + std::to_string(target.size()) + " tokens does not fit context " +
                              std::to_string(context_len));
    EncodedRecord r;
    const std::size_t room = context_len - 1 - target.size();
    if (input.size() > room) {
        r.truncated = input.size() - room;
        input.erase(input.begin(), input.begin() + static_cast<std::ptrdiff_t>(r.truncated));
    }
    r.tokens.reserve(1 + input.size() + target.size());
    r.tokens.push_back(eot);
    r.tokens.insert(r.tokens.end(), input.begin(), input.end());
    r.target_begin = r.tokens.size();
    r.tokens.insert(r.tokens.end(), target.begin(), target.end());
    return r;
}

double masked_nll(const TinyLm& model, const Tokenizer& tokenizer, const AdapterWeights* adapters,
                  std::string_view input_text, std::string_view target_text, Gradients grads) {
    const auto r = encode_record(tokenizer, input_text, target_text, model.config.context_len);
    return sequence_nll(model, adapters, r.tokens, r.target_begin, grads);
}

Decoder::Decoder(const TinyLm& model, const AdapterWeights* adapters) : model_(model) {
    const auto& cfg = model.config;
    w_.resize(cfg.num_layers);
    for (int l = 0; l < cfg.num_layers; ++l)
        for (auto t : kTargets) w_[l][static_cast<int>(t)] = effective_matrix(model, adapters, l, t);
    keys_.assign(cfg.num_layers, Mat(cfg.context_len, cfg.embed_dim));
    values_.assign(cfg.num_layers, Mat(cfg.context_len, cfg.embed_dim));
}

Eigen::RowVectorXd Decoder::step(int token) {
    const auto& cfg = model_.config;
    const auto& W = model_.weights;
    if (pos_ >= static_cast<std::size_t>(cfg.context_len)) throw SequenceTooLong("decoder context is full");
    if (token < 0 || token >= cfg.vocab_size) throw std::out_of_range("token id " + std::to_string(token));
    const int H = cfg.num_heads, dh = cfg.head_dim();
    const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
    const auto t = static_cast<Eigen::Index>(pos_);

    Mat x = W.tok_emb.row(token) + W.pos_emb.row(t);
    for (int l = 0; l < cfg.num_layers; ++l) {
        const auto& L = W.layers[l];
        const Mat h = layer_norm(x, L.ln1_g, L.ln1_b, nullptr);
        const Mat q = h * w_[l][0];
        keys_[l].row(t) = h * w_[l][1];
        values_[l].row(t) = h * w_[l][2];
        Mat o(1, cfg.embed_dim);
        for (int hd = 0; hd < H; ++hd) {
            Eigen::RowVectorXd s =
                (keys_[l].topRows(t + 1).middleCols(hd * dh, dh) * q.middleCols(hd * dh, dh).transpose()).transpose() * inv;
            s = (s.array() - s.maxCoeff()).exp();
            s /= s.sum();
            o.middleCols(hd * dh, dh) = s * values_[l].topRows(t + 1).middleCols(hd * dh, dh);
        }
        x += o * w_[l][3];
        const Mat h2 = layer_norm(x, L.ln2_g, L.ln2_b, nullptr);
        const Mat a = ((h2 * L.w1) + L.b1).unaryExpr([](double z) { return gelu(z); });
        x += a * L.w2 + L.b2;
    }
    ++pos_;
    return layer_norm(x, W.lnf_g, W.lnf_b, nullptr) * W.head;
}

}  // namespace forge::lm
