#include <algorithm>
#include <array>
#include <optional>
#include <sstream>

#include "forge/frontend/ast.hpp"

namespace forge::sol {

namespace {

// Thrown inside a statement or member; the caller resynchronizes and emits an opaque node.
struct Unparseable {};

constexpr std::array<std::string_view, 12> kAssignOps = {
    "=", "|=", "^=", "&=", "<<=", ">>=", ">>>=", "+=", "-=", "*=", "/=", "%=",
};

int binary_precedence(std::string_view op) {
    if (op == "||") return 3;
    if (op == "&&") return 4;
    if (op == "==" || op == "!=") return 5;
    if (op == "<" || op == ">" || op == "<=" || op == ">=") return 6;
    if (op == "|") return 7;
    if (op == "^") return 8;
    if (op == "&") return 9;
    if (op == "<<" || op == ">>" || op == ">>>") return 10;
    if (op == "+" || op == "-") return 11;
    if (op == "*" || op == "/" || op == "%") return 12;
    if (op == "**") return 13;
    return -1;
}

bool is_unit(std::string_view w) {
    static constexpr std::array<std::string_view, 11> units = {
        "wei", "gwei", "ether", "finney", "szabo", "seconds", "minutes", "hours", "days", "weeks", "years",
    };
    return std::find(units.begin(), units.end(), w) != units.end();
}

bool is_function_qualifier(std::string_view w) {
    static constexpr std::array<std::string_view, 9> q = {
        "public", "private", "internal", "external", "pure", "view", "payable", "constant", "virtual",
    };
    return std::find(q.begin(), q.end(), w) != q.end();
}

bool is_state_var_qualifier(std::string_view w) {
    static constexpr std::array<std::string_view, 7> q = {
        "public", "private", "internal", "constant", "immutable", "override", "transient",
    };
    return std::find(q.begin(), q.end(), w) != q.end();
}

bool is_storage_location(std::string_view w) {
    return w == "memory" || w == "storage" || w == "calldata";
}

class Parser {
public:
    explicit Parser(const TokenStream& ts) : toks_(ts.tokens) {}

    Node source_unit() {
        Node unit;
        unit.kind = NodeKind::SourceUnit;
        while (!eof()) {
            if (at("pragma")) {
                unit.children.push_back(pragma());
            } else if (at("import")) {
                unit.children.push_back(import_directive());
            } else if (at("contract") || at("library") || at("interface") ||
                       (at("abstract") && at("contract", 1))) {
                unit.children.push_back(contract());
            } else if (at("}")) {
                throw ParseError("unbalanced '}'", offset());
            } else {
                unit.children.push_back(guarded_member());
            }
        }
        unit.first_token = 0;
        unit.last_token = toks_.size();
        if (!toks_.empty()) unit.span = {toks_.front().span.begin, toks_.back().span.end};
        return unit;
    }

    bool clean() const { return clean_; }

private:
    // ---------------------------------------------------------------- token access
    bool eof(std::size_t ahead = 0) const { return pos_ + ahead >= toks_.size(); }

    const Token* peek(std::size_t ahead = 0) const {
        return eof(ahead) ? nullptr : &toks_[pos_ + ahead];
    }

    bool at(std::string_view lexeme, std::size_t ahead = 0) const {
        const Token* t = peek(ahead);
        return t && t->lexeme == lexeme && t->kind != TokenKind::String;
    }

    bool at_kind(TokenKind kind, std::size_t ahead = 0) const {
        const Token* t = peek(ahead);
        return t && t->kind == kind;
    }

    bool at_identifier(std::size_t ahead = 0) const { return at_kind(TokenKind::Identifier, ahead); }

    bool at_elementary(std::size_t ahead = 0) const {
        const Token* t = peek(ahead);
        return t && t->kind == TokenKind::Keyword && is_elementary_type(t->lexeme);
    }

    std::size_t offset() const {
        if (!eof()) return toks_[pos_].span.begin;
        return toks_.empty() ? 0 : toks_.back().span.end;
    }

    const Token& advance() {
        if (eof()) throw Unparseable{};
        return toks_[pos_++];
    }

    void expect(std::string_view lexeme) {
        if (!at(lexeme)) throw Unparseable{};
        ++pos_;
    }

    bool accept(std::string_view lexeme) {
        if (!at(lexeme)) return false;
        ++pos_;
        return true;
    }

    Node finish(Node node, std::size_t first) const {
        node.first_token = first;
        node.last_token = pos_;
        if (pos_ > first) {
            node.span = {toks_[first].span.begin, toks_[pos_ - 1].span.end};
        } else {
            std::size_t at_byte = first < toks_.size() ? toks_[first].span.begin
                                                       : (toks_.empty() ? 0 : toks_.back().span.end);
            node.span = {at_byte, at_byte};
        }
        return node;
    }

    Node make(NodeKind kind, std::string text, std::size_t first, std::vector<Node> children = {}) const {
        Node n;
        n.kind = kind;
        n.text = std::move(text);
        n.children = std::move(children);
        return finish(std::move(n), first);
    }

    Node name_leaf() {
        const std::size_t first = pos_;
        const Token& t = advance();
        if (t.kind != TokenKind::Identifier && t.kind != TokenKind::Keyword) throw Unparseable{};
        Node n = make(NodeKind::Identifier, t.lexeme, first);
        n.keyword_name = t.kind == TokenKind::Keyword;
        return n;
    }

    Node identifier() {
        if (!at_identifier()) throw Unparseable{};
        return name_leaf();
    }

    // ---------------------------------------------------------------- recovery
    /// Skips one malformed statement or member starting at `start` and returns it as an
    /// opaque node. Stops after a `;` at depth 0, after a brace block opened inside the
    /// statement closes, or before a `}` that belongs to the enclosing scope.
    Node recover(std::size_t start) {
        pos_ = start;
        int depth = 0;
        bool opened_brace = false;
        while (true) {
            if (eof()) throw ParseError("unbalanced braces", offset());
            const std::string& lx = toks_[pos_].lexeme;
            const bool punct = toks_[pos_].kind == TokenKind::Punctuation;
            if (punct && (lx == "(" || lx == "[" || lx == "{")) {
                if (lx == "{" && depth == 0) opened_brace = true;
                ++depth;
            } else if (punct && (lx == ")" || lx == "]" || lx == "}")) {
                if (depth == 0) {
                    if (lx == "}") break;
                    ++pos_;
                    continue;
                }
                --depth;
                if (lx == "}" && depth == 0 && opened_brace) {
                    ++pos_;
                    break;
                }
            } else if (punct && lx == ";" && depth == 0) {
                ++pos_;
                break;
            }
            ++pos_;
        }
        if (pos_ == start) ++pos_;  // guarantee progress
        clean_ = false;
        Node n = make(NodeKind::ExpressionStmt, "", start);
        n.opaque = true;
        return n;
    }

    /// Skips a balanced `{ ... }` block starting at the current `{`.
    void skip_braces() {
        expect("{");
        int depth = 1;
        while (depth > 0) {
            if (eof()) throw ParseError("unbalanced braces", offset());
            const Token& t = toks_[pos_++];
            if (t.kind != TokenKind::Punctuation) continue;
            if (t.lexeme == "{") ++depth;
            if (t.lexeme == "}") --depth;
        }
    }

    // ---------------------------------------------------------------- top level
    Node pragma() {
        const std::size_t first = pos_;
        ++pos_;
        std::string text;
        while (!at(";")) {
            if (eof()) throw ParseError("pragma without ';'", offset());
            if (!text.empty()) text += ' ';
            text += toks_[pos_++].lexeme;
        }
        ++pos_;
        return make(NodeKind::Pragma, text, first);
    }

    Node import_directive() {
        const std::size_t first = pos_;
        while (!at(";")) {
            if (eof()) throw ParseError("import without ';'", offset());
            ++pos_;
        }
        ++pos_;
        return make(NodeKind::Import, "import", first);
    }

    Node contract() {
        const std::size_t first = pos_;
        std::string keyword = advance().lexeme;
        if (keyword == "abstract") keyword += " " + advance().lexeme;
        std::vector<Node> children;
        if (!at_identifier()) throw ParseError("contract name expected", offset());
        children.push_back(identifier());
        if (accept("is")) {
            while (!at("{")) {
                if (eof()) throw ParseError("contract body expected", offset());
                const std::size_t base_first = pos_;
                try {
                    Node base = make(NodeKind::ModifierInvocation, "base", base_first, {identifier()});
                    while (accept(".")) base.children.push_back(identifier());
                    if (at("(")) {
                        ++pos_;
                        for (auto& a : arguments(")")) base.children.push_back(std::move(a));
                    }
                    children.push_back(finish(std::move(base), base_first));
                } catch (const Unparseable&) {
                    throw ParseError("malformed inheritance list", offset());
                }
                if (!accept(",")) break;
            }
        }
        if (!accept("{")) throw ParseError("contract body expected", offset());
        while (!at("}")) {
            if (eof()) throw ParseError("unterminated contract body", offset());
            children.push_back(guarded_member());
        }
        ++pos_;
        return make(NodeKind::ContractDef, keyword, first, std::move(children));
    }

    Node guarded_member() {
        const std::size_t start = pos_;
        try {
            return member();
        } catch (const Unparseable&) {
            return recover(start);
        }
    }

    Node member() {
        if (at("function") || at("constructor") || at("fallback") || at("receive")) return function_def();
        if (at("modifier")) return modifier_def();
        if (at("event") || at("error")) return event_def();
        if (at("struct")) return struct_def();
        if (at("enum")) return enum_def();
        if (at("using")) return using_for();
        return state_var();
    }

    // ---------------------------------------------------------------- members
    Node function_def() {
        const std::size_t first = pos_;
        std::string keyword = advance().lexeme;
        Node fn;
        fn.kind = NodeKind::FunctionDef;
        fn.text = keyword;
        if (keyword == "function" && !at("(")) fn.children.push_back(name_leaf());
        fn.children.push_back(parameter_list());
        qualifiers_and_modifiers(fn);
        if (accept("returns")) {
            Node ret = parameter_list();
            ret.text = "returns";
            fn.children.push_back(std::move(ret));
            qualifiers_and_modifiers(fn);
        }
        if (!accept(";")) fn.children.push_back(block());
        return finish(std::move(fn), first);
    }

    void qualifiers_and_modifiers(Node& fn) {
        while (!eof() && !at("{") && !at(";") && !at("returns")) {
            const Token& t = *peek();
            if (t.kind == TokenKind::Keyword && is_function_qualifier(t.lexeme)) {
                fn.qualifiers.push_back(t.lexeme);
                ++pos_;
            } else if (at("override")) {
                fn.qualifiers.push_back("override");
                ++pos_;
                if (at("(")) {
                    ++pos_;
                    arguments(")");
                }
            } else if (at_identifier()) {
                const std::size_t m_first = pos_;
                Node inv = make(NodeKind::ModifierInvocation, "", m_first, {identifier()});
                while (accept(".")) inv.children.push_back(identifier());
                if (accept("(")) {
                    for (auto& a : arguments(")")) inv.children.push_back(std::move(a));
                }
                fn.children.push_back(finish(std::move(inv), m_first));
            } else {
                throw Unparseable{};
            }
        }
    }

    Node modifier_def() {
        const std::size_t first = pos_;
        ++pos_;
        Node m;
        m.kind = NodeKind::ModifierDef;
        m.text = "modifier";
        m.children.push_back(identifier());
        if (at("(")) m.children.push_back(parameter_list());
        while (at("virtual") || at("override")) m.qualifiers.push_back(advance().lexeme);
        if (!accept(";")) m.children.push_back(block());
        return finish(std::move(m), first);
    }

    Node event_def() {
        const std::size_t first = pos_;
        std::string keyword = advance().lexeme;
        std::vector<Node> children;
        children.push_back(identifier());
        children.push_back(parameter_list());
        Node ev = make(NodeKind::EventDef, keyword, first, std::move(children));
        if (accept("anonymous")) ev.qualifiers.push_back("anonymous");
        expect(";");
        return finish(std::move(ev), first);
    }

    Node struct_def() {
        const std::size_t first = pos_;
        ++pos_;
        std::vector<Node> children;
        children.push_back(identifier());
        expect("{");
        while (!accept("}")) {
            const std::size_t f = pos_;
            std::vector<Node> parts;
            parts.push_back(type_name());
            parts.push_back(name_leaf());
            expect(";");
            children.push_back(make(NodeKind::VarDecl, "", f, std::move(parts)));
        }
        return make(NodeKind::StructDef, "struct", first, std::move(children));
    }

    Node enum_def() {
        const std::size_t first = pos_;
        ++pos_;
        std::vector<Node> children;
        children.push_back(identifier());
        expect("{");
        while (!accept("}")) {
            children.push_back(identifier());
            if (!at("}")) expect(",");
        }
        return make(NodeKind::EnumDef, "enum", first, std::move(children));
    }

    Node using_for() {
        const std::size_t first = pos_;
        ++pos_;
        std::vector<Node> children;
        children.push_back(identifier());
        while (accept(".")) children.push_back(identifier());
        expect("for");
        if (!accept("*")) children.push_back(type_name());
        accept("global");
        expect(";");
        return make(NodeKind::UsingFor, "using", first, std::move(children));
    }

    Node state_var() {
        const std::size_t first = pos_;
        Node decl;
        decl.kind = NodeKind::StateVarDecl;
        decl.children.push_back(type_name());
        while (!eof() && peek()->kind == TokenKind::Keyword && is_state_var_qualifier(peek()->lexeme)) {
            decl.qualifiers.push_back(advance().lexeme);
        }
        decl.children.push_back(identifier());
        if (accept("=")) {
            decl.text = "=";
            decl.children.push_back(expression());
        }
        expect(";");
        return finish(std::move(decl), first);
    }

    Node parameter_list() {
        const std::size_t first = pos_;
        expect("(");
        Node list;
        list.kind = NodeKind::ParameterList;
        while (!accept(")")) {
            const std::size_t f = pos_;
            Node param;
            param.kind = NodeKind::VarDecl;
            param.children.push_back(type_name());
            while (at("indexed") || at("memory") || at("storage") || at("calldata") || at("payable")) {
                param.qualifiers.push_back(advance().lexeme);
            }
            if (at_identifier() || (at_kind(TokenKind::Keyword) && !at(",") && !at(")") && !is_elementary_type(peek()->lexeme) &&
                                    (at(",", 1) || at(")", 1)))) {
                param.children.push_back(name_leaf());
            }
            list.children.push_back(finish(std::move(param), f));
            if (!at(")")) expect(",");
        }
        return finish(std::move(list), first);
    }

    Node type_name() {
        const std::size_t first = pos_;
        Node type;
        if (at_elementary() || at("var")) {
            const Token& t = advance();
            type = make(NodeKind::ElementaryType, t.lexeme, first);
            if (t.lexeme == "address" && accept("payable")) {
                type.text = "address payable";
                type = finish(std::move(type), first);
            }
        } else if (at("mapping")) {
            ++pos_;
            expect("(");
            std::vector<Node> kv;
            kv.push_back(type_name());
            if (at_identifier()) ++pos_;
            expect("=>");
            kv.push_back(type_name());
            if (at_identifier()) ++pos_;
            expect(")");
            type = make(NodeKind::TypeName, "mapping", first, std::move(kv));
        } else if (at_identifier()) {
            std::vector<Node> path;
            path.push_back(identifier());
            while (at(".") && at_identifier(1)) {
                ++pos_;
                path.push_back(identifier());
            }
            type = make(NodeKind::TypeName, "user", first, std::move(path));
        } else {
            throw Unparseable{};
        }
        while (at("[")) {
            ++pos_;
            std::vector<Node> parts;
            parts.push_back(std::move(type));
            if (!at("]")) parts.push_back(expression());
            expect("]");
            type = make(NodeKind::TypeName, "[]", first, std::move(parts));
        }
        return type;
    }

    // ---------------------------------------------------------------- statements
    Node block() {
        const std::size_t first = pos_;
        expect("{");
        std::vector<Node> stmts;
        while (!at("}")) {
            if (eof()) throw ParseError("unterminated block", offset());
            stmts.push_back(guarded_statement());
        }
        ++pos_;
        return make(NodeKind::Block, "", first, std::move(stmts));
    }

    Node guarded_statement() {
        const std::size_t start = pos_;
        try {
            return statement();
        } catch (const Unparseable&) {
            return recover(start);
        }
    }

    Node statement() {
        const std::size_t first = pos_;
        if (at("{")) return block();
        if (at("if")) {
            ++pos_;
            expect("(");
            std::vector<Node> parts;
            parts.push_back(expression());
            expect(")");
            parts.push_back(statement());
            if (accept("else")) parts.push_back(statement());
            return make(NodeKind::If, "", first, std::move(parts));
        }
        if (at("for")) {
            ++pos_;
            expect("(");
            std::vector<Node> parts;
            if (accept(";")) {
                parts.push_back(make(NodeKind::Empty, "", pos_));
            } else {
                parts.push_back(simple_statement());
            }
            if (at(";")) {
                parts.push_back(make(NodeKind::Empty, "", pos_));
            } else {
                parts.push_back(expression());
            }
            expect(";");
            if (at(")")) {
                parts.push_back(make(NodeKind::Empty, "", pos_));
            } else {
                parts.push_back(expression());
            }
            expect(")");
            parts.push_back(statement());
            return make(NodeKind::For, "", first, std::move(parts));
        }
        if (at("while")) {
            ++pos_;
            expect("(");
            std::vector<Node> parts;
            parts.push_back(expression());
            expect(")");
            parts.push_back(statement());
            return make(NodeKind::While, "", first, std::move(parts));
        }
        if (at("do")) {
            ++pos_;
            std::vector<Node> parts;
            parts.push_back(statement());
            expect("while");
            expect("(");
            parts.push_back(expression());
            expect(")");
            expect(";");
            return make(NodeKind::DoWhile, "", first, std::move(parts));
        }
        if (at("return")) {
            ++pos_;
            std::vector<Node> parts;
            if (!at(";")) parts.push_back(expression());
            expect(";");
            return make(NodeKind::Return, "", first, std::move(parts));
        }
        if (at("emit")) {
            ++pos_;
            std::vector<Node> parts;
            parts.push_back(expression());
            expect(";");
            return make(NodeKind::Emit, "", first, std::move(parts));
        }
        if ((at("require") || at("assert")) && at("(", 1)) {
            std::string which = advance().lexeme;
            ++pos_;
            std::vector<Node> args = arguments(")");
            expect(";");
            return make(NodeKind::Require, which, first, std::move(args));
        }
        if (at("unchecked") && at("{", 1)) {
            ++pos_;
            std::vector<Node> parts;
            parts.push_back(block());
            return make(NodeKind::Unchecked, "", first, std::move(parts));
        }
        if (at("assembly")) {
            ++pos_;
            if (at_kind(TokenKind::String)) ++pos_;
            if (at("(")) {
                ++pos_;
                arguments(")");
            }
            skip_braces();
            return make(NodeKind::ExpressionStmt, "assembly", first);
        }
        if (at("try")) {
            ++pos_;
            while (!at("{")) advance();
            skip_braces();
            while (at("catch")) {
                while (!at("{")) advance();
                skip_braces();
            }
            return make(NodeKind::ExpressionStmt, "try", first);
        }
        if (at("revert") && at_identifier(1)) {
            ++pos_;
            std::vector<Node> parts;
            parts.push_back(expression());
            expect(";");
            return make(NodeKind::ExpressionStmt, "revert", first, std::move(parts));
        }
        if (at("break") || at("continue") || at("throw") || (at("_") && at(";", 1))) {
            std::string word = advance().lexeme;
            expect(";");
            return make(NodeKind::ExpressionStmt, word, first);
        }
        return simple_statement();
    }

    /// Variable declaration or expression statement, including the trailing `;`.
    Node simple_statement() {
        const std::size_t first = pos_;
        if (at("(") && looks_like_tuple_declaration()) {
            Node stmt;
            stmt.kind = NodeKind::VarDeclStmt;
            ++pos_;
            while (!accept(")")) {
                if (at(",")) {
                    ++pos_;
                    continue;
                }
                stmt.children.push_back(local_var_decl());
                if (!at(")")) expect(",");
            }
            expect("=");
            stmt.text = "=";
            stmt.children.push_back(expression());
            expect(";");
            return finish(std::move(stmt), first);
        }
        if (looks_like_declaration()) {
            Node stmt;
            stmt.kind = NodeKind::VarDeclStmt;
            stmt.children.push_back(local_var_decl());
            if (accept("=")) {
                stmt.text = "=";
                stmt.children.push_back(expression());
            }
            expect(";");
            return finish(std::move(stmt), first);
        }
        std::vector<Node> parts;
        parts.push_back(expression());
        expect(";");
        return make(NodeKind::ExpressionStmt, "", first, std::move(parts));
    }

    Node local_var_decl() {
        const std::size_t first = pos_;
        Node decl;
        decl.kind = NodeKind::VarDecl;
        decl.children.push_back(type_name());
        while (!eof() && is_storage_location(peek()->lexeme)) decl.qualifiers.push_back(advance().lexeme);
        decl.children.push_back(identifier());
        return finish(std::move(decl), first);
    }

    std::size_t skip_balanced(std::size_t i, std::string_view open, std::string_view close) const {
        int depth = 0;
        for (; i < toks_.size(); ++i) {
            if (toks_[i].kind != TokenKind::Punctuation) continue;
            if (toks_[i].lexeme == open) ++depth;
            if (toks_[i].lexeme == close && --depth == 0) return i + 1;
        }
        return toks_.size();
    }

    bool looks_like_declaration() const {
        if (at("var")) return true;
        if (at("mapping")) return true;
        if (at_elementary()) return !at("(", 1);
        if (!at_identifier()) return false;
        std::size_t i = pos_ + 1;
        while (i + 1 < toks_.size() && toks_[i].lexeme == "." && toks_[i + 1].kind == TokenKind::Identifier) i += 2;
        while (i < toks_.size() && toks_[i].lexeme == "[") i = skip_balanced(i, "[", "]");
        if (i >= toks_.size()) return false;
        return toks_[i].kind == TokenKind::Identifier || is_storage_location(toks_[i].lexeme);
    }

    bool looks_like_tuple_declaration() const {
        std::size_t close = skip_balanced(pos_, "(", ")");
        if (close >= toks_.size() || toks_[close].lexeme != "=") return false;
        for (std::size_t i = pos_ + 1; i + 1 < close; ++i) {
            const Token& a = toks_[i];
            const Token& b = toks_[i + 1];
            bool type_like = (a.kind == TokenKind::Keyword && is_elementary_type(a.lexeme)) ||
                             a.kind == TokenKind::Identifier || a.lexeme == "]" || is_storage_location(a.lexeme);
            if (type_like && b.kind == TokenKind::Identifier) return true;
        }
        return false;
    }

    // ---------------------------------------------------------------- expressions
    std::vector<Node> arguments(std::string_view close) {
        std::vector<Node> args;
        if (at("{") && close == ")") {
            args.push_back(named_arguments());
            expect(close);
            return args;
        }
        while (!accept(close)) {
            args.push_back(expression());
            if (!at(close)) expect(",");
        }
        return args;
    }

    Node named_arguments() {
        const std::size_t first = pos_;
        expect("{");
        std::vector<Node> parts;
        while (!accept("}")) {
            parts.push_back(name_leaf());
            expect(":");
            parts.push_back(expression());
            if (!at("}")) expect(",");
        }
        return make(NodeKind::CallOptions, "", first, std::move(parts));
    }

    Node expression() { return assignment(); }

    Node assignment() {
        const std::size_t first = pos_;
        Node lhs = conditional();
        if (const Token* t = peek(); t && t->kind == TokenKind::Punctuation &&
                                     std::find(kAssignOps.begin(), kAssignOps.end(), t->lexeme) != kAssignOps.end()) {
            std::string op = advance().lexeme;
            std::vector<Node> parts;
            parts.push_back(std::move(lhs));
            parts.push_back(assignment());
            return make(NodeKind::Assign, op, first, std::move(parts));
        }
        return lhs;
    }

    Node conditional() {
        const std::size_t first = pos_;
        Node cond = binary(3);
        if (accept("?")) {
            std::vector<Node> parts;
            parts.push_back(std::move(cond));
            parts.push_back(assignment());
            expect(":");
            parts.push_back(assignment());
            return make(NodeKind::Conditional, "", first, std::move(parts));
        }
        return cond;
    }

    Node binary(int min_prec) {
        const std::size_t first = pos_;
        Node lhs = unary();
        while (const Token* t = peek()) {
            if (t->kind != TokenKind::Punctuation) break;
            int prec = binary_precedence(t->lexeme);
            if (prec < min_prec) break;
            std::string op = advance().lexeme;
            std::vector<Node> parts;
            parts.push_back(std::move(lhs));
            parts.push_back(binary(op == "**" ? prec : prec + 1));
            lhs = make(NodeKind::BinaryOp, op, first, std::move(parts));
        }
        return lhs;
    }

    Node unary() {
        const std::size_t first = pos_;
        if (at("!") || at("~") || at("-") || at("+") || at("++") || at("--") || at("delete")) {
            std::string op = advance().lexeme;
            std::vector<Node> parts;
            parts.push_back(unary());
            return make(NodeKind::UnaryOp, op, first, std::move(parts));
        }
        return postfix(primary());
    }

    Node postfix(Node expr) {
        const std::size_t first = expr.first_token;
        while (true) {
            if (at("(")) {
                ++pos_;
                std::vector<Node> parts;
                parts.push_back(std::move(expr));
                for (auto& a : arguments(")")) parts.push_back(std::move(a));
                expr = make(NodeKind::Call, "", first, std::move(parts));
            } else if (at(".")) {
                ++pos_;
                std::vector<Node> parts;
                parts.push_back(std::move(expr));
                parts.push_back(name_leaf());
                expr = make(NodeKind::MemberAccess, "", first, std::move(parts));
            } else if (at("[")) {
                ++pos_;
                std::vector<Node> parts;
                parts.push_back(std::move(expr));
                if (!at("]") && !at(":")) parts.push_back(expression());
                if (accept(":")) {
                    if (!at("]")) parts.push_back(expression());
                }
                expect("]");
                expr = make(NodeKind::IndexAccess, "", first, std::move(parts));
            } else if (at("{") && (at_identifier(1) || at_kind(TokenKind::Keyword, 1)) && at(":", 2)) {
                // `a.call{value: v}` becomes CallOptions(callee, name, value, ...).
                Node opts = named_arguments();
                opts.text = "options";
                opts.children.insert(opts.children.begin(), std::move(expr));
                expr = finish(std::move(opts), first);
            } else if (at("++") || at("--")) {
                std::string op = "post" + advance().lexeme;
                std::vector<Node> parts;
                parts.push_back(std::move(expr));
                expr = make(NodeKind::UnaryOp, op, first, std::move(parts));
            } else {
                return expr;
            }
        }
    }

    Node primary() {
        const std::size_t first = pos_;
        const Token* t = peek();
        if (!t) throw Unparseable{};
        switch (t->kind) {
            case TokenKind::Identifier:
                return name_leaf();
            case TokenKind::Number: {
                std::string text = advance().lexeme;
                if (at_kind(TokenKind::Keyword) && is_unit(peek()->lexeme)) text += " " + advance().lexeme;
                return make(NodeKind::Literal, text, first);
            }
            case TokenKind::String: {
                std::string text = advance().lexeme;
                while (at_kind(TokenKind::String)) text += advance().lexeme;
                return make(NodeKind::Literal, text, first);
            }
            case TokenKind::Keyword: {
                if (t->lexeme == "true" || t->lexeme == "false") {
                    ++pos_;
                    return make(NodeKind::Literal, t->lexeme, first);
                }
                if ((t->lexeme == "hex" || t->lexeme == "unicode") && at_kind(TokenKind::String, 1)) {
                    std::string text = advance().lexeme;
                    text += advance().lexeme;
                    return make(NodeKind::Literal, text, first);
                }
                if (t->lexeme == "new") {
                    ++pos_;
                    std::vector<Node> parts;
                    parts.push_back(type_name());
                    return make(NodeKind::New, "new", first, std::move(parts));
                }
                if (is_elementary_type(t->lexeme) || t->lexeme == "payable") {
                    ++pos_;
                    Node ty = make(NodeKind::ElementaryType, t->lexeme, first);
                    if (at("[")) {
                        // `uint[]` / `uint[3]` used as an expression, e.g. in `new uint[](n)`.
                        while (at("[") && (at("]", 1) || at(("]"), 2))) {
                            ++pos_;
                            std::vector<Node> parts;
                            parts.push_back(std::move(ty));
                            if (!at("]")) parts.push_back(primary());
                            expect("]");
                            ty = make(NodeKind::TypeName, "[]", first, std::move(parts));
                        }
                    }
                    return ty;
                }
                if (is_global_name(t->lexeme) || is_keyword(t->lexeme)) {
                    static constexpr std::array<std::string_view, 16> structural = {
                        "if", "else", "for", "while", "do", "return", "emit", "function", "contract",
                        "modifier", "event", "struct", "mapping", "pragma", "import", "returns",
                    };
                    if (std::find(structural.begin(), structural.end(), t->lexeme) != structural.end()) {
                        throw Unparseable{};
                    }
                    return name_leaf();
                }
                throw Unparseable{};
            }
            case TokenKind::Punctuation: {
                if (t->lexeme == "(") {
                    ++pos_;
                    std::vector<Node> parts;
                    bool comma = false;
                    while (!accept(")")) {
                        if (at(",")) {
                            comma = true;
                            parts.push_back(make(NodeKind::Empty, "", pos_));
                            ++pos_;
                            continue;
                        }
                        parts.push_back(expression());
                        if (!at(")")) {
                            expect(",");
                            comma = true;
                        }
                    }
                    if (!comma && parts.size() == 1) return std::move(parts.front());
                    return make(NodeKind::Tuple, "()", first, std::move(parts));
                }
                if (t->lexeme == "[") {
                    ++pos_;
                    std::vector<Node> parts = arguments("]");
                    return make(NodeKind::Tuple, "[]", first, std::move(parts));
                }
                throw Unparseable{};
            }
            case TokenKind::PragmaVersion:
                throw Unparseable{};
        }
        throw Unparseable{};
    }

    const std::vector<Token>& toks_;
    std::size_t pos_ = 0;
    bool clean_ = true;
};

}  // namespace

const char* to_string(NodeKind kind) {
    switch (kind) {
        case NodeKind::SourceUnit: return "SourceUnit";
        case NodeKind::Pragma: return "Pragma";
        case NodeKind::Import: return "Import";
        case NodeKind::ContractDef: return "ContractDef";
        case NodeKind::FunctionDef: return "FunctionDef";
        case NodeKind::ModifierDef: return "ModifierDef";
        case NodeKind::EventDef: return "EventDef";
        case NodeKind::StateVarDecl: return "StateVarDecl";
        case NodeKind::StructDef: return "StructDef";
        case NodeKind::EnumDef: return "EnumDef";
        case NodeKind::UsingFor: return "UsingFor";
        case NodeKind::ParameterList: return "ParameterList";
        case NodeKind::VarDecl: return "VarDecl";
        case NodeKind::TypeName: return "TypeName";
        case NodeKind::ModifierInvocation: return "ModifierInvocation";
        case NodeKind::Block: return "Block";
        case NodeKind::If: return "If";
        case NodeKind::For: return "For";
        case NodeKind::While: return "While";
        case NodeKind::DoWhile: return "DoWhile";
        case NodeKind::Require: return "Require";
        case NodeKind::Return: return "Return";
        case NodeKind::Emit: return "Emit";
        case NodeKind::VarDeclStmt: return "VarDeclStmt";
        case NodeKind::ExpressionStmt: return "ExpressionStmt";
        case NodeKind::Unchecked: return "Unchecked";
        case NodeKind::Empty: return "Empty";
        case NodeKind::Assign: return "Assign";
        case NodeKind::BinaryOp: return "BinaryOp";
        case NodeKind::UnaryOp: return "UnaryOp";
        case NodeKind::Conditional: return "Conditional";
        case NodeKind::Call: return "Call";
        case NodeKind::CallOptions: return "CallOptions";
        case NodeKind::MemberAccess: return "MemberAccess";
        case NodeKind::IndexAccess: return "IndexAccess";
        case NodeKind::Tuple: return "Tuple";
        case NodeKind::New: return "New";
        case NodeKind::Identifier: return "Identifier";
        case NodeKind::Literal: return "Literal";
        case NodeKind::ElementaryType: return "ElementaryType";
    }
    return "?";
}

bool Node::has_qualifier(std::string_view q) const {
    return std::find(qualifiers.begin(), qualifiers.end(), q) != qualifiers.end();
}

std::size_t Node::height() const {
    std::size_t h = 0;
    for (const auto& c : children) h = std::max(h, c.height());
    return h + 1;
}

ContractAst parse(TokenStream tokens) {
    ContractAst ast;
    ast.tokens = std::move(tokens);
    Parser parser(ast.tokens);
    ast.root = parser.source_unit();
    ast.clean = parser.clean();
    return ast;
}

ContractAst parse_source(std::string_view text) { return parse(tokenize(text)); }

std::size_t count_contracts(const ContractAst& ast) {
    return static_cast<std::size_t>(std::count_if(ast.root.children.begin(), ast.root.children.end(),
                                                  [](const Node& n) { return n.is(NodeKind::ContractDef); }));
}

bool is_single_contract(const ContractAst& ast) { return count_contracts(ast) == 1; }

void walk(const Node& node, const std::function<bool(const Node&)>& visit) {
    if (!visit(node)) return;
    for (const auto& c : node.children) walk(c, visit);
}

std::string dump(const Node& node) {
    std::ostringstream out;
    out << '(' << to_string(node.kind);
    if (!node.text.empty()) out << ':' << node.text;
    if (node.opaque) out << ":opaque";
    for (const auto& c : node.children) out << ' ' << dump(c);
    out << ')';
    return out.str();
}

}  // namespace forge::sol
