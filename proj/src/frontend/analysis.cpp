#include "forge/frontend/analysis.hpp"

#include <algorithm>
#include <unordered_map>

namespace forge::sol {

namespace {

void collect_subtrees(const Node& node, std::size_t min_depth, SubtreeMultiset& out, std::size_t& height,
                      std::string& text) {
    std::size_t max_child = 0;
    std::vector<std::string> child_text(node.children.size());
    for (std::size_t i = 0; i < node.children.size(); ++i) {
        std::size_t h = 0;
        collect_subtrees(node.children[i], min_depth, out, h, child_text[i]);
        max_child = std::max(max_child, h);
    }
    height = max_child + 1;

    text = "(";
    switch (node.kind) {
        case NodeKind::Identifier:
            text += node.keyword_name ? "Identifier:" + node.text : "ID";
            break;
        case NodeKind::Literal:
            text += "LIT";
            break;
        default:
            text += to_string(node.kind);
            if (!node.text.empty()) text += ":" + node.text;
            if (node.opaque) text += ":opaque";
    }
    for (const auto& c : child_text) {
        text += ' ';
        text += c;
    }
    text += ')';
    if (height >= min_depth) ++out[text];
}

/// Records name occurrences of one function in evaluation order.
class DefUseTracer {
public:
    struct Event {
        std::size_t token;
        std::string name;
        bool read;
        bool def;
    };

    void function(const Node& fn) {
        for (const auto& c : fn.children) {
            switch (c.kind) {
                case NodeKind::ParameterList:
                    for (const auto& p : c.children) declare(p);
                    break;
                case NodeKind::ModifierInvocation:
                    for (std::size_t i = 1; i < c.children.size(); ++i) expr(c.children[i]);
                    break;
                case NodeKind::Block:
                    expr(c);
                    break;
                default:
                    break;
            }
        }
    }

    const std::vector<Event>& events() const { return events_; }

private:
    void occur(const Node& id, bool read, bool def) {
        if (!id.is(NodeKind::Identifier) || id.keyword_name) return;
        events_.push_back({id.first_token, id.text, read, def});
    }

    void declare(const Node& var_decl) {
        if (var_decl.children.size() >= 2) occur(var_decl.children[1], false, true);
    }

    void lvalue(const Node& target, bool compound) {
        switch (target.kind) {
            case NodeKind::Identifier:
                occur(target, compound, true);
                break;
            case NodeKind::IndexAccess:
                for (std::size_t i = 1; i < target.children.size(); ++i) expr(target.children[i]);
                lvalue(target.children[0], compound);
                break;
            case NodeKind::MemberAccess:
                lvalue(target.children[0], compound);
                break;
            case NodeKind::Tuple:
                for (const auto& c : target.children) lvalue(c, compound);
                break;
            default:
                expr(target);
        }
    }

    void expr(const Node& node) {
        switch (node.kind) {
            case NodeKind::Identifier:
                occur(node, true, false);
                return;
            case NodeKind::TypeName:
            case NodeKind::ElementaryType:
            case NodeKind::Literal:
                return;
            case NodeKind::Assign:
                expr(node.children[1]);
                lvalue(node.children[0], node.text != "=");
                return;
            case NodeKind::VarDeclStmt: {
                const bool init = node.text == "=";
                if (init) expr(node.children.back());
                const std::size_t decls = init ? node.children.size() - 1 : node.children.size();
                for (std::size_t i = 0; i < decls; ++i) declare(node.children[i]);
                return;
            }
            case NodeKind::VarDecl:
                declare(node);
                return;
            case NodeKind::UnaryOp:
                if (node.text == "++" || node.text == "--" || node.text == "post++" || node.text == "post--") {
                    lvalue(node.children[0], true);
                } else if (node.text == "delete") {
                    lvalue(node.children[0], false);
                } else {
                    expr(node.children[0]);
                }
                return;
            case NodeKind::MemberAccess:
                expr(node.children[0]);
                return;
            case NodeKind::CallOptions: {
                const bool options = node.text == "options";
                if (options) expr(node.children[0]);
                for (std::size_t i = options ? 2 : 1; i < node.children.size(); i += 2) expr(node.children[i]);
                return;
            }
            default:
                for (const auto& c : node.children) expr(c);
        }
    }

    std::vector<Event> events_;
};

}  // namespace

std::string canonical(const Node& node) {
    SubtreeMultiset ignored;
    std::size_t h = 0;
    std::string text;
    collect_subtrees(node, static_cast<std::size_t>(-1), ignored, h, text);
    return text;
}

SubtreeMultiset subtrees(const Node& root, std::size_t min_depth) {
    SubtreeMultiset out;
    std::size_t h = 0;
    std::string text;
    collect_subtrees(root, std::max<std::size_t>(min_depth, 1), out, h, text);
    return out;
}

SubtreeMultiset subtrees(const ContractAst& ast, std::size_t min_depth) { return subtrees(ast.root, min_depth); }

std::size_t multiset_size(const SubtreeMultiset& set) {
    std::size_t n = 0;
    for (const auto& [_, count] : set) n += count;
    return n;
}

std::vector<const Node*> functions_of(const Node& root) {
    std::vector<const Node*> out;
    walk(root, [&](const Node& n) {
        if (n.is(NodeKind::FunctionDef) || n.is(NodeKind::ModifierDef)) {
            out.push_back(&n);
            return false;
        }
        return true;
    });
    return out;
}

DefUseSet def_use_edges(const Node& function) {
    DefUseTracer tracer;
    tracer.function(function);
    const auto& events = tracer.events();

    std::vector<std::size_t> positions;
    positions.reserve(events.size());
    for (const auto& e : events) positions.push_back(e.token);
    std::sort(positions.begin(), positions.end());
    positions.erase(std::unique(positions.begin(), positions.end()), positions.end());
    auto ordinal = [&](std::size_t token) {
        return static_cast<std::size_t>(std::lower_bound(positions.begin(), positions.end(), token) - positions.begin());
    };

    std::unordered_map<std::string, std::size_t> last_def;
    std::unordered_map<std::string, std::size_t> var_index;
    DefUseSet edges;
    for (const auto& e : events) {
        if (e.read) {
            if (auto it = last_def.find(e.name); it != last_def.end()) {
                edges.insert({it->second, ordinal(e.token), "var_" + std::to_string(var_index.at(e.name))});
            }
        }
        if (e.def) {
            var_index.try_emplace(e.name, var_index.size());
            last_def[e.name] = ordinal(e.token);
        }
    }
    return edges;
}

DefUseSet def_use_edges(const ContractAst& ast) {
    DefUseSet all;
    for (const Node* fn : functions_of(ast.root)) {
        DefUseSet edges = def_use_edges(*fn);
        all.insert(edges.begin(), edges.end());
    }
    return all;
}

}  // namespace forge::sol
