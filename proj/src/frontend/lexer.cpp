#include "forge/frontend/lexer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

namespace forge::sol {

namespace {

const std::unordered_set<std::string_view>& keywords() {
    static const std::unordered_set<std::string_view> set = {
        "abstract", "after", "alias", "anonymous", "apply", "as", "assembly", "auto", "break",
        "calldata", "case", "catch", "constant", "constructor", "continue", "contract",
        "copyof", "default", "define", "delete", "do", "else", "emit", "enum", "error",
        "event", "external", "fallback", "false", "final", "for", "function", "if",
        "immutable", "implements", "import", "in", "indexed", "inline", "interface",
        "internal", "is", "let", "library", "macro", "mapping", "match", "memory",
        "modifier", "mutable", "new", "null", "of", "override", "partial", "payable",
        "pragma", "private", "promise", "public", "pure", "receive", "reference",
        "relocatable", "return", "returns", "revert", "sealed", "sizeof", "static",
        "storage", "struct", "supports", "switch", "throw", "true", "try", "type",
        "typedef", "typeof", "unchecked", "using", "var", "view", "virtual", "while",
        // builtin functions
        "require", "assert", "selfdestruct", "suicide", "keccak256", "sha3", "sha256",
        "ripemd160", "ecrecover", "blockhash", "gasleft", "addmod", "mulmod",
        // units
        "wei", "gwei", "ether", "finney", "szabo", "seconds", "minutes", "hours", "days",
        "weeks", "years",
    };
    return set;
}

const std::unordered_set<std::string_view>& globals() {
    static const std::unordered_set<std::string_view> set = {
        "msg", "block", "tx", "now", "this", "super", "abi",
    };
    return set;
}

bool all_digits(std::string_view s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

bool ident_start(unsigned char c) { return std::isalpha(c) || c == '_' || c == '$'; }
bool ident_char(unsigned char c) { return std::isalnum(c) || c == '_' || c == '$'; }

// Longest operators first.
constexpr std::array<std::string_view, 34> kOperators = {
    ">>>=", "<<=", ">>=", ">>>", "**", "==", "!=", "<=", ">=", "&&", "||", "++", "--",
    "+=",   "-=",  "*=",  "/=",  "%=", "|=", "&=", "^=", "=>", "->", "<<", ">>", ":=",
    "+",    "-",   "*",   "/",   "%",  "<",  ">",  "=",
};

std::size_t utf8_length(unsigned char lead) {
    if (lead < 0x80) return 1;
    if ((lead >> 5) == 0x6) return 2;
    if ((lead >> 4) == 0xE) return 3;
    if ((lead >> 3) == 0x1E) return 4;
    return 1;
}

class Lexer {
public:
    explicit Lexer(std::string_view text) : text_(text) {}

    TokenStream run() {
        TokenStream out;
        out.source = std::string(text_);
        bool in_pragma = false;
        while (true) {
            skip_trivia(out.comments);
            if (pos_ >= text_.size()) break;
            Token tok = next(in_pragma);
            if (tok.kind == TokenKind::Keyword && tok.lexeme == "pragma") in_pragma = true;
            if (tok.kind == TokenKind::Punctuation && tok.lexeme == ";") in_pragma = false;
            out.tokens.push_back(std::move(tok));
        }
        return out;
    }

private:
    char peek(std::size_t ahead = 0) const {
        return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
    }

    void skip_trivia(std::vector<Span>& comments) {
        while (pos_ < text_.size()) {
            unsigned char c = static_cast<unsigned char>(text_[pos_]);
            if (std::isspace(c)) {
                ++pos_;
            } else if (c == '/' && peek(1) == '/') {
                std::size_t start = pos_;
                while (pos_ < text_.size() && text_[pos_] != '\n') ++pos_;
                comments.push_back({start, pos_});
            } else if (c == '/' && peek(1) == '*') {
                std::size_t start = pos_;
                auto close = text_.find("*/", pos_ + 2);
                if (close == std::string_view::npos) throw LexError("unterminated block comment", start);
                pos_ = close + 2;
                comments.push_back({start, pos_});
            } else {
                break;
            }
        }
    }

    Token make(TokenKind kind, std::size_t start) {
        return Token{kind, std::string(text_.substr(start, pos_ - start)), Span{start, pos_}};
    }

    Token next(bool in_pragma) {
        const std::size_t start = pos_;
        const unsigned char c = static_cast<unsigned char>(text_[pos_]);

        if (in_pragma && (std::isdigit(c) || c == '*' || ((c == 'x' || c == 'X') && !ident_char(peek(1))))) {
            while (pos_ < text_.size()) {
                unsigned char d = static_cast<unsigned char>(text_[pos_]);
                if (std::isdigit(d) || d == '.' || d == '*' || d == 'x' || d == 'X') {
                    ++pos_;
                } else {
                    break;
                }
            }
            return make(TokenKind::PragmaVersion, start);
        }
        if (ident_start(c)) {
            while (pos_ < text_.size() && ident_char(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            std::string_view word = text_.substr(start, pos_ - start);
            // Words inside a pragma directive (solidity, experimental, ...) are never user names.
            bool kw = in_pragma || is_keyword(word) || is_elementary_type(word) || is_global_name(word);
            return make(kw ? TokenKind::Keyword : TokenKind::Identifier, start);
        }
        if (std::isdigit(c) || (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
            lex_number();
            return make(TokenKind::Number, start);
        }
        if (c == '"' || c == '\'') {
            lex_string(c);
            return make(TokenKind::String, start);
        }
        for (std::string_view op : kOperators) {
            if (text_.substr(pos_, op.size()) == op) {
                pos_ += op.size();
                return make(TokenKind::Punctuation, start);
            }
        }
        pos_ += std::min(utf8_length(c), text_.size() - pos_);
        return make(TokenKind::Punctuation, start);
    }

    void lex_number() {
        if (peek() == '0' && (peek(1) == 'x' || peek(1) == 'X')) {
            pos_ += 2;
            while (pos_ < text_.size() && (std::isxdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
            return;
        }
        auto digits = [&] {
            while (pos_ < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) ++pos_;
        };
        digits();
        if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
            ++pos_;
            digits();
        }
        if ((peek() == 'e' || peek() == 'E') &&
            (std::isdigit(static_cast<unsigned char>(peek(1))) ||
             ((peek(1) == '-' || peek(1) == '+') && std::isdigit(static_cast<unsigned char>(peek(2)))))) {
            pos_ += 2;
            digits();
        }
    }

    void lex_string(char quote) {
        const std::size_t start = pos_;
        ++pos_;
        while (pos_ < text_.size()) {
            char d = text_[pos_];
            if (d == '\\') {
                pos_ += 2;
                continue;
            }
            if (d == '\n') break;
            ++pos_;
            if (d == quote) return;
        }
        throw LexError("unterminated string literal", start);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

bool is_operator_char(char c) {
    return std::string_view("+-*/%=<>!&|^~.:").find(c) != std::string_view::npos;
}

bool would_merge(char left, char right) {
    auto word = [](char c) { return ident_char(static_cast<unsigned char>(c)) || c == '.'; };
    if (word(left) && word(right)) return true;
    return is_operator_char(left) && is_operator_char(right);
}

}  // namespace

const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::Keyword: return "keyword";
        case TokenKind::Identifier: return "identifier";
        case TokenKind::Number: return "number";
        case TokenKind::String: return "string";
        case TokenKind::Punctuation: return "punctuation";
        case TokenKind::PragmaVersion: return "pragma-version";
    }
    return "?";
}

bool is_valid_utf8(std::string_view text) {
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        std::size_t len = 0;
        std::uint32_t cp = 0;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c >> 5) == 0x6) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c >> 4) == 0xE) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c >> 3) == 0x1E) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > text.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            unsigned char cc = static_cast<unsigned char>(text[i + k]);
            if ((cc >> 6) != 0x2) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
        if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

ContractSource ContractSource::make(std::string text, std::string origin) {
    if (!is_valid_utf8(text)) throw std::invalid_argument("contract source is not valid UTF-8: " + origin);
    if (text.empty() && origin != "generated") throw std::invalid_argument("empty contract source: " + origin);
    return ContractSource{std::move(text), std::move(origin)};
}

bool is_keyword(std::string_view word) { return keywords().contains(word); }

bool is_global_name(std::string_view word) { return globals().contains(word); }

bool is_elementary_type(std::string_view word) {
    if (word == "address" || word == "bool" || word == "string" || word == "byte" || word == "bytes" ||
        word == "int" || word == "uint" || word == "fixed" || word == "ufixed") {
        return true;
    }
    auto sized = [&](std::string_view prefix, int lo, int hi, int step) {
        if (!word.starts_with(prefix)) return false;
        auto rest = word.substr(prefix.size());
        if (!all_digits(rest) || rest.size() > 3 || rest.front() == '0') return false;
        int bits = std::stoi(std::string(rest));
        return bits >= lo && bits <= hi && bits % step == 0;
    };
    return sized("uint", 8, 256, 8) || sized("int", 8, 256, 8) || sized("bytes", 1, 32, 1);
}

std::vector<std::string> TokenStream::lexemes() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(t.lexeme);
    return out;
}

TokenStream tokenize(std::string_view text) { return Lexer(text).run(); }

TokenStream tokenize(const ContractSource& source) { return tokenize(source.text); }

std::string reconstruct(const TokenStream& stream) {
    std::string out;
    std::size_t cursor = 0;
    for (const auto& tok : stream.tokens) {
        out.append(stream.source, cursor, tok.span.begin - cursor);
        out += tok.lexeme;
        cursor = tok.span.end;
    }
    out.append(stream.source, cursor, std::string::npos);
    return out;
}

std::string strip_comments(std::string_view text) {
    const TokenStream stream = tokenize(text);
    if (stream.comments.empty()) return std::string(text);

    auto is_hspace = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; };

    std::string out;
    out.reserve(text.size());
    std::size_t cursor = 0;
    for (const Span& comment : stream.comments) {
        std::size_t line_start = comment.begin;
        while (line_start > cursor && is_hspace(text[line_start - 1])) --line_start;
        const bool owns_line_start = line_start == 0 || text[line_start - 1] == '\n';

        std::size_t after = comment.end;
        while (after < text.size() && is_hspace(text[after])) ++after;
        const bool owns_line_end = after == text.size() || text[after] == '\n';

        if (owns_line_start && line_start >= cursor && owns_line_end) {
            // Whole line(s) belong to the comment: drop them with their newline.
            out.append(text.substr(cursor, line_start - cursor));
            cursor = after < text.size() ? after + 1 : after;
            continue;
        }
        if (owns_line_end) {
            // Trailing comment: drop it and the horizontal space before it.
            out.append(text.substr(cursor, line_start - cursor));
            cursor = after;
            continue;
        }
        out.append(text.substr(cursor, comment.begin - cursor));
        cursor = comment.end;
        if (!out.empty() && cursor < text.size() && would_merge(out.back(), text[cursor])) out.push_back(' ');
    }
    out.append(text.substr(cursor));
    return out;
}

ContractSource strip_comments(const ContractSource& source) {
    return ContractSource{strip_comments(source.text), source.origin};
}

}  // namespace forge::sol
