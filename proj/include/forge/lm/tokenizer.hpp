#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace forge::lm {

/// Byte-level BPE with reserved atoms that always encode as single tokens.
///
/// Ids 0..255 are raw bytes, merges follow in learned order, and the six
/// reserved atoms take the last ids.
class Tokenizer {
public:
    static constexpr std::array<std::string_view, 6> kSpecials = {"<PRE>", "<SUF>", "<MID>", "[Tag]", "[/Tag]", "<EOT>"};

    Tokenizer();  // bytes only, no merges

    /// Learns up to `merges` merges from the texts. Ties break towards the smaller pair.
    static Tokenizer train(const std::vector<std::string>& texts, std::size_t merges);
    static Tokenizer from_merges(std::vector<std::pair<int, int>> merges);

    std::vector<int> encode(std::string_view text) const;
    std::string decode(const std::vector<int>& ids) const;
    std::string token_text(int id) const;

    int vocab_size() const { return 256 + static_cast<int>(merges_.size()) + static_cast<int>(kSpecials.size()); }
    int special_id(std::string_view atom) const;
    int eot() const { return vocab_size() - 1; }
    bool is_special(int id) const { return id >= 256 + static_cast<int>(merges_.size()); }

    const std::vector<std::pair<int, int>>& merges() const { return merges_; }

    friend bool operator==(const Tokenizer& a, const Tokenizer& b) { return a.merges_ == b.merges_; }

private:
    void index();
    void encode_chunk(std::string_view chunk, std::vector<int>& out) const;

    std::vector<std::pair<int, int>> merges_;
    std::vector<std::string> pieces_;            // bytes of each non-special id
    std::map<std::pair<int, int>, int> rank_;     // pair -> merge index
};

/// Splits text into merge domains: a word with an optional leading space,
/// a whitespace run, or a punctuation run with an optional leading space.
std::vector<std::string_view> pretokenize(std::string_view text);

}  // namespace forge::lm
