#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace forge::sol {

/// Half-open byte range [begin, end) into the source text.
struct Span {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool contains(const Span& other) const { return begin <= other.begin && other.end <= end; }
    friend bool operator==(const Span&, const Span&) = default;
};

/// Raw Solidity text plus where it came from.
///
/// Empty text is only legal for generated code (a model may emit nothing).
struct ContractSource {
    std::string text;
    std::string origin;

    static ContractSource make(std::string text, std::string origin);
    static ContractSource generated(std::string text) { return make(std::move(text), "generated"); }
};

bool is_valid_utf8(std::string_view text);

class LexError : public std::runtime_error {
public:
    LexError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

enum class TokenKind { Keyword, Identifier, Number, String, Punctuation, PragmaVersion };

const char* to_string(TokenKind kind);

struct Token {
    TokenKind kind = TokenKind::Punctuation;
    std::string lexeme;
    Span span;
};

/// Token sequence of one source text. Comments are recorded as skipped spans.
struct TokenStream {
    std::string source;
    std::vector<Token> tokens;
    std::vector<Span> comments;

    bool empty() const { return tokens.empty(); }
    std::size_t size() const { return tokens.size(); }
    std::vector<std::string> lexemes() const;
};

TokenStream tokenize(const ContractSource& source);
TokenStream tokenize(std::string_view text);

/// Joins token lexemes with the original inter-token bytes (whitespace and comments).
std::string reconstruct(const TokenStream& stream);

/// Removes line, block and NatSpec comments. A comment that is the only content of
/// its line(s) removes those lines entirely.
ContractSource strip_comments(const ContractSource& source);
std::string strip_comments(std::string_view text);

bool is_keyword(std::string_view word);
bool is_elementary_type(std::string_view word);
/// Built-in globals (`msg`, `block`, `tx`, `now`, ...) that the lexer reports as keywords.
bool is_global_name(std::string_view word);

}  // namespace forge::sol
