#include "forge/lm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace forge::lm {

namespace {

constexpr char kMagic[8] = {'F', 'O', 'R', 'G', 'E', 'L', 'M', '\0'};

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    void i32(int v) { u32(static_cast<std::uint32_t>(v)); }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf_.append(s);
    }
    void mat(const Mat& m) {
        u32(static_cast<std::uint32_t>(m.rows()));
        u32(static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) f32(m.data()[i]);
    }
    void raw(const char* p, std::size_t n) { buf_.append(p, n); }
    const std::string& bytes() const { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[at_ + i])) << (8 * i);
        at_ += 4;
        return v;
    }
    std::uint64_t u64() {
        const std::uint64_t lo = u32();
        return lo | (static_cast<std::uint64_t>(u32()) << 32);
    }
    int i32() { return static_cast<int>(u32()); }
    double f32() { return std::bit_cast<float>(u32()); }
    std::string str() {
        const auto n = u32();
        need(n);
        auto s = data_.substr(at_, n);
        at_ += n;
        return s;
    }
    void mat(Mat& m, const std::string& name) {
        const auto rows = u32(), cols = u32();
        if (rows != m.rows() || cols != m.cols())
            throw CheckpointError("tensor " + name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                                  ", expected " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f32();
    }
    std::string raw(std::size_t n) {
        need(n);
        auto s = data_.substr(at_, n);
        at_ += n;
        return s;
    }
    bool done() const { return at_ == data_.size(); }

private:
    void need(std::size_t n) const {
        if (data_.size() - at_ < n) throw CheckpointError("checkpoint is truncated");
    }
    std::string data_;
    std::size_t at_ = 0;
};

double to_stored(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    const auto& c = ckpt.model.config;
    w.i32(c.vocab_size);
    w.i32(c.embed_dim);
    w.i32(c.num_layers);
    w.i32(c.num_heads);
    w.i32(c.context_len);
    w.u64(c.seed);
    w.u32(static_cast<std::uint32_t>(ckpt.tokenizer.merges().size()));
    for (auto [a, b] : ckpt.tokenizer.merges()) {
        w.i32(a);
        w.i32(b);
    }
    for_each_tensor(ckpt.model.weights, [&](const std::string&, const Mat& m) { w.mat(m); });
    w.u32(ckpt.adapters ? 1 : 0);
    if (ckpt.adapters) {
        w.i32(ckpt.adapters->rank);
        w.f32(ckpt.adapters->alpha);
        ckpt.adapters->for_each([&](const std::string&, const Mat& m) { w.mat(m); });
    }
    w.u32(static_cast<std::uint32_t>(ckpt.lineage.size()));
    for (const auto& s : ckpt.lineage) w.str(s);
    w.str(ckpt.rng_state);

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot read " + path.string());
    Reader r(std::string(std::istreambuf_iterator<char>(in), {}));
    if (r.raw(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw CheckpointError(path.string() + " is not a checkpoint");
    if (const auto v = r.u32(); v != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
    TinyLmConfig c;
    c.vocab_size = r.i32();
    c.embed_dim = r.i32();
    c.num_layers = r.i32();
    c.num_heads = r.i32();
    c.context_len = r.i32();
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(e.what());
    }
    std::vector<std::pair<int, int>> merges(r.u32());
    for (auto& [a, b] : merges) a = r.i32(), b = r.i32();

    Checkpoint ckpt;
    try {
        ckpt.tokenizer = Tokenizer::from_merges(std::move(merges));
    } catch (const std::invalid_argument& e) {
        throw CheckpointError(e.what());
    }
    if (ckpt.tokenizer.vocab_size() != c.vocab_size) throw CheckpointError("tokenizer does not match the model vocabulary");
    ckpt.model = TinyLm::init(c);
    for_each_tensor(ckpt.model.weights, [&](const std::string& name, Mat& m) { r.mat(m, name); });
    if (r.u32() != 0) {
        const int rank = r.i32();
        const double alpha = r.f32();
        try {
            ckpt.adapters = AdapterWeights::init(c, rank, alpha, 0);
        } catch (const std::invalid_argument& e) {
            throw CheckpointError(e.what());
        }
        ckpt.adapters->for_each([&](const std::string& name, Mat& m) { r.mat(m, name); });
    }
    ckpt.lineage.resize(r.u32());
    for (auto& s : ckpt.lineage) s = r.str();
    ckpt.rng_state = r.str();
    if (!r.done()) throw CheckpointError("trailing bytes in " + path.string());
    return ckpt;
}

void round_to_stored_precision(Checkpoint& ckpt) {
    auto round = [](const std::string&, Mat& m) { m = m.unaryExpr([](double v) { return to_stored(v); }); };
    for_each_tensor(ckpt.model.weights, round);
    if (ckpt.adapters) {
        ckpt.adapters->alpha = to_stored(ckpt.adapters->alpha);
        ckpt.adapters->for_each(round);
    }
}

}  // namespace forge::lm
