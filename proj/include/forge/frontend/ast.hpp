#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "forge/frontend/lexer.hpp"

namespace forge::sol {

enum class NodeKind {
    SourceUnit,
    Pragma,
    Import,
    ContractDef,
    FunctionDef,
    ModifierDef,
    EventDef,
    StateVarDecl,
    StructDef,
    EnumDef,
    UsingFor,
    ParameterList,
    VarDecl,
    TypeName,
    ModifierInvocation,
    Block,
    If,
    For,
    While,
    DoWhile,
    Require,
    Return,
    Emit,
    VarDeclStmt,
    ExpressionStmt,
    Unchecked,
    Empty,
    Assign,
    BinaryOp,
    UnaryOp,
    Conditional,
    Call,
    CallOptions,
    MemberAccess,
    IndexAccess,
    Tuple,
    New,
    Identifier,
    Literal,
    ElementaryType,
};

const char* to_string(NodeKind kind);

/// One node of the lightweight parse tree.
///
/// `text` carries the kind-specific label: the name for identifiers, the value for
/// literals, the operator for Assign/BinaryOp/UnaryOp, the declaration keyword for
/// ContractDef/FunctionDef. `qualifiers` holds visibility, mutability and storage
/// keywords. `tokens` is the half-open token index range the node covers.
struct Node {
    NodeKind kind = NodeKind::Empty;
    std::string text;
    std::vector<Node> children;
    std::vector<std::string> qualifiers;
    Span span;
    std::size_t first_token = 0;
    std::size_t last_token = 0;
    bool opaque = false;
    bool keyword_name = false;  // Identifier spelled by a keyword (msg, block, keccak256, ...)

    bool is(NodeKind k) const { return kind == k; }
    bool has_qualifier(std::string_view q) const;
    /// Height of the subtree rooted here; a leaf has height 1.
    std::size_t height() const;
};

struct ContractAst {
    Node root;
    TokenStream tokens;
    bool clean = true;  // false iff at least one opaque node was produced
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Best-effort parse. Malformed statements become opaque ExpressionStmt nodes;
/// only unrecoverable top-level structure (unbalanced contract braces, a pragma
/// without terminator) raises ParseError.
ContractAst parse(TokenStream tokens);
ContractAst parse_source(std::string_view text);

/// Exactly one top-level contract, library or interface.
bool is_single_contract(const ContractAst& ast);
std::size_t count_contracts(const ContractAst& ast);

/// Pre-order traversal. The visitor returns false to skip a node's children.
void walk(const Node& node, const std::function<bool(const Node&)>& visit);

/// S-expression rendering, used by tests and debugging.
std::string dump(const Node& node);

}  // namespace forge::sol
