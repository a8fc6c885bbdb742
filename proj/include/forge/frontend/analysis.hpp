#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "forge/frontend/ast.hpp"

namespace forge::sol {

/// Multiset of canonical subtree strings, keyed by serialization.
using SubtreeMultiset = std::map<std::string, std::size_t>;

/// Canonical form of a subtree: kinds and operator labels kept, user identifiers
/// rendered as `ID` and literals as `LIT`.
std::string canonical(const Node& node);

/// Every subtree of height >= min_depth, canonicalized.
SubtreeMultiset subtrees(const ContractAst& ast, std::size_t min_depth);
SubtreeMultiset subtrees(const Node& root, std::size_t min_depth);

std::size_t multiset_size(const SubtreeMultiset& set);

struct DefUseEdge {
    std::size_t def_site = 0;  // ordinal of the defining name occurrence within its function
    std::size_t use_site = 0;  // ordinal of the reading occurrence
    std::string var;           // var_k, numbered by first definition within the function

    friend auto operator<=>(const DefUseEdge&, const DefUseEdge&) = default;
};

using DefUseSet = std::set<DefUseEdge>;

/// Edges of one function body (parameters count as definitions).
DefUseSet def_use_edges(const Node& function);

/// Union of the per-function edge sets over every function and modifier in the AST.
DefUseSet def_use_edges(const ContractAst& ast);

/// Functions and modifiers in source order.
std::vector<const Node*> functions_of(const Node& root);

}  // namespace forge::sol
