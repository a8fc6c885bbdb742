#include "forge/lm/tokenizer.hpp"

#include <algorithm>
#include <cctype>

namespace forge::lm {

namespace {

enum class CharClass { Word, Space, Punct };

CharClass classify(unsigned char c) {
    if (std::isalnum(c) || c == '_' || c >= 0x80) return CharClass::Word;
    if (std::isspace(c)) return CharClass::Space;
    return CharClass::Punct;
}

}  // namespace

std::vector<std::string_view> pretokenize(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        const std::size_t start = i;
        auto cls = classify(static_cast<unsigned char>(text[i]));
        if (text[i] == ' ' && i + 1 < n && classify(static_cast<unsigned char>(text[i + 1])) != CharClass::Space) {
            ++i;
            cls = classify(static_cast<unsigned char>(text[i]));
        } else if (cls == CharClass::Space) {
            while (i < n && classify(static_cast<unsigned char>(text[i])) == CharClass::Space) ++i;
            // leave a single trailing space to lead the next word
            if (i < n && i - start > 1 && text[i - 1] == ' ') --i;
            out.push_back(text.substr(start, i - start));
            continue;
        }
        while (i < n && classify(static_cast<unsigned char>(text[i])) == cls) ++i;
        out.push_back(text.substr(start, i - start));
    }
    return out;
}

Tokenizer::Tokenizer() { index(); }

Tokenizer Tokenizer::from_merges(std::vector<std::pair<int, int>> merges) {
    Tokenizer t;
    for (std::size_t m = 0; m < merges.size(); ++m) {
        const int limit = 256 + static_cast<int>(m);
        if (merges[m].first < 0 || merges[m].second < 0 || merges[m].first >= limit || merges[m].second >= limit)
            throw std::invalid_argument("merge " + std::to_string(m) + " refers to an undefined id");
    }
    t.merges_ = std::move(merges);
    t.index();
    return t;
}

void Tokenizer::index() {
    pieces_.clear();
    rank_.clear();
    for (int b = 0; b < 256; ++b) pieces_.emplace_back(1, static_cast<char>(b));
    for (std::size_t m = 0; m < merges_.size(); ++m) {
        pieces_.push_back(pieces_[merges_[m].first] + pieces_[merges_[m].second]);
        rank_.emplace(merges_[m], static_cast<int>(m));
    }
}

Tokenizer Tokenizer::train(const std::vector<std::string>& texts, std::size_t merges) {
    std::map<std::string, long> counts;
    for (const auto& text : texts) {
        std::size_t at = 0;
        while (at < text.size()) {
            // reserved atoms never take part in merges
            std::size_t next = std::string::npos, len = 0;
            for (auto atom : kSpecials) {
                auto p = text.find(atom, at);
                if (p < next) next = p, len = atom.size();
            }
            const auto plain = std::string_view(text).substr(at, next == std::string::npos ? std::string::npos : next - at);
            for (auto chunk : pretokenize(plain)) ++counts[std::string(chunk)];
            if (next == std::string::npos) break;
            at = next + len;
        }
    }
    std::vector<std::pair<std::vector<int>, long>> words;
    words.reserve(counts.size());
    for (const auto& [w, c] : counts) {
        std::vector<int> ids(w.begin(), w.end());
        for (auto& id : ids) id &= 0xff;
        words.emplace_back(std::move(ids), c);
    }

    std::vector<std::pair<int, int>> learned;
    for (std::size_t m = 0; m < merges; ++m) {
        std::map<std::pair<int, int>, long> pairs;
        for (const auto& [ids, c] : words)
            for (std::size_t i = 0; i + 1 < ids.size(); ++i) pairs[{ids[i], ids[i + 1]}] += c;
        if (pairs.empty()) break;
        auto best = pairs.begin();
        for (auto it = pairs.begin(); it != pairs.end(); ++it)
            if (it->second > best->second) best = it;
        if (best->second < 2) break;
        const auto pair = best->first;
        const int id = 256 + static_cast<int>(learned.size());
        learned.push_back(pair);
        for (auto& [ids, c] : words) {
            std::size_t w = 0;
            for (std::size_t r = 0; r < ids.size(); ++r) {
                if (r + 1 < ids.size() && ids[r] == pair.first && ids[r + 1] == pair.second) {
                    ids[w++] = id;
                    ++r;
                } else {
                    ids[w++] = ids[r];
                }
            }
            ids.resize(w);
        }
    }
    return from_merges(std::move(learned));
}

void Tokenizer::encode_chunk(std::string_view chunk, std::vector<int>& out) const {
    std::vector<int> ids;
    ids.reserve(chunk.size());
    for (unsigned char c : chunk) ids.push_back(c);
    while (ids.size() > 1) {
        int best_rank = -1;
        for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
            auto it = rank_.find({ids[i], ids[i + 1]});
            if (it != rank_.end() && (best_rank < 0 || it->second < best_rank)) best_rank = it->second;
        }
        if (best_rank < 0) break;
        const auto pair = merges_[best_rank];
        std::size_t w = 0;
        for (std::size_t r = 0; r < ids.size(); ++r) {
            if (r + 1 < ids.size() && ids[r] == pair.first && ids[r + 1] == pair.second) {
                ids[w++] = 256 + best_rank;
                ++r;
            } else {
                ids[w++] = ids[r];
            }
        }
        ids.resize(w);
    }
    out.insert(out.end(), ids.begin(), ids.end());
}

std::vector<int> Tokenizer::encode(std::string_view text) const {
    std::vector<int> out;
    std::size_t at = 0;
    while (at < text.size()) {
        std::size_t next = std::string_view::npos, len = 0;
        int atom_id = -1;
        for (std::size_t s = 0; s < kSpecials.size(); ++s) {
            auto p = text.find(kSpecials[s], at);
            if (p < next) next = p, len = kSpecials[s].size(), atom_id = special_id(kSpecials[s]);
        }
        const auto plain = text.substr(at, next == std::string_view::npos ? std::string_view::npos : next - at);
        for (auto chunk : pretokenize(plain)) encode_chunk(chunk, out);
        if (next == std::string_view::npos) break;
        out.push_back(atom_id);
        at = next + len;
    }
    return out;
}

int Tokenizer::special_id(std::string_view atom) const {
    const int base = 256 + static_cast<int>(merges_.size());
    for (std::size_t s = 0; s < kSpecials.size(); ++s)
        if (kSpecials[s] == atom) return base + static_cast<int>(s);
    throw std::invalid_argument("not a reserved atom: " + std::string(atom));
}

std::string Tokenizer::token_text(int id) const {
    if (id < 0 || id >= vocab_size()) throw std::out_of_range("token id " + std::to_string(id));
    if (is_special(id)) return std::string(kSpecials[id - 256 - merges_.size()]);
    return pieces_[id];
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
    std::string out;
    for (int id : ids) out += token_text(id);
    return out;
}

}  // namespace forge::lm
