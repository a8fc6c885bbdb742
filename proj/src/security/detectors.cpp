#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "forge/security/security.hpp"

namespace forge::security {

using sol::Node;
using sol::NodeKind;

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool contains_word(std::string_view haystack, std::initializer_list<std::string_view> needles) {
    const std::string l = lower(haystack);
    return std::any_of(needles.begin(), needles.end(), [&](std::string_view n) { return l.find(n) != std::string::npos; });
}

bool any_node(const Node& root, const std::function<bool(const Node&)>& pred) {
    bool found = false;
    sol::walk(root, [&](const Node& n) {
        if (found) return false;
        if (pred(n)) found = true;
        return !found;
    });
    return found;
}

std::string member_field(const Node& n) {
    if (n.is(NodeKind::MemberAccess) && n.children.size() == 2) return n.children[1].text;
    return {};
}

bool is_member(const Node& n, std::string_view base, std::string_view field) {
    return n.is(NodeKind::MemberAccess) && n.children.size() == 2 && n.children[0].is(NodeKind::Identifier) &&
           n.children[0].text == base && n.children[1].text == field;
}

bool is_timestamp(const Node& n) {
    return is_member(n, "block", "timestamp") || (n.is(NodeKind::Identifier) && n.text == "now" && n.keyword_name);
}
bool is_block_attribute(const Node& n) {
    return is_timestamp(n) || is_member(n, "block", "number");
}
bool is_msg_sender(const Node& n) { return is_member(n, "msg", "sender"); }
bool is_tx_origin(const Node& n) { return is_member(n, "tx", "origin"); }

// Strips call options and the legacy `.value(x)` / `.gas(x)` wrappers off a callee.
const Node& underlying_callee(const Node& call) {
    const Node* callee = &call.children.front();
    for (;;) {
        if (callee->is(NodeKind::CallOptions) && callee->text == "options") {
            callee = &callee->children.front();
        } else if (callee->is(NodeKind::Call)) {
            const std::string f = member_field(callee->children.front());
            if (f != "value" && f != "gas") break;
            callee = &callee->children.front().children.front();
        } else {
            break;
        }
    }
    return *callee;
}

bool sends_value(const Node& call) {
    const Node* callee = &call.children.front();
    if (callee->is(NodeKind::CallOptions) && callee->text == "options") {
        for (std::size_t i = 1; i + 1 < callee->children.size(); i += 2) {
            if (callee->children[i].text == "value") return true;
        }
        return false;
    }
    if (callee->is(NodeKind::Call)) return member_field(callee->children.front()) == "value";
    return false;
}

bool is_low_level_call(const Node& n) {
    if (!n.is(NodeKind::Call) || n.children.empty()) return false;
    const std::string f = member_field(underlying_callee(n));
    return f == "call" || f == "delegatecall" || f == "staticcall" || f == "callcode" || f == "send";
}

// Ether leaves the contract: call with value, send, or single-argument transfer.
bool is_value_call(const Node& n) {
    if (!n.is(NodeKind::Call) || n.children.empty()) return false;
    const std::string f = member_field(underlying_callee(n));
    if (f == "call") return sends_value(n);
    if (f == "send" || f == "transfer") return n.children.size() == 2;
    return false;
}

bool is_external_call(const Node& n) {
    return is_value_call(n) || is_low_level_call(n);
}

const Node* lvalue_base(const Node& n) {
    const Node* cur = &n;
    while ((cur->is(NodeKind::IndexAccess) || cur->is(NodeKind::MemberAccess)) && !cur->children.empty()) {
        cur = &cur->children.front();
    }
    return cur->is(NodeKind::Identifier) ? cur : nullptr;
}

std::set<std::string> identifiers_in(const Node& n) {
    std::set<std::string> out;
    sol::walk(n, [&](const Node& x) {
        if (x.is(NodeKind::MemberAccess) && x.children.size() == 2) {
            // the field name is not a variable read
            sol::walk(x.children[0], [&](const Node& y) {
                if (y.is(NodeKind::Identifier) && !y.keyword_name) out.insert(y.text);
                return true;
            });
            return false;
        }
        if (x.is(NodeKind::Identifier) && !x.keyword_name) out.insert(x.text);
        return true;
    });
    return out;
}

const Node* name_of(const Node& decl) {
    for (auto it = decl.children.rbegin(); it != decl.children.rend(); ++it) {
        if (it->is(NodeKind::Identifier)) return &*it;
    }
    return nullptr;
}

const Node* body_of(const Node& fn) {
    for (const auto& c : fn.children) {
        if (c.is(NodeKind::Block)) return &c;
    }
    return nullptr;
}

std::vector<std::string> modifiers_of(const Node& fn) {
    std::vector<std::string> out;
    for (const auto& c : fn.children) {
        if (c.is(NodeKind::ModifierInvocation) && c.text != "base" && !c.children.empty()) out.push_back(c.children[0].text);
    }
    return out;
}

bool reentrancy_guarded(const Node& fn) {
    for (const auto& m : modifiers_of(fn)) {
        if (contains_word(m, {"nonreentrant", "noreentran", "reentrancyguard", "mutex"}) || lower(m) == "lock") return true;
    }
    return false;
}

struct Condition {
    const Node* expr;
    std::size_t position;
};

// Branch conditions in a subtree: require/assert arguments, if/while/for tests, ternary tests.
std::vector<Condition> conditions_in(const Node& root) {
    std::vector<Condition> out;
    sol::walk(root, [&](const Node& n) {
        switch (n.kind) {
            case NodeKind::Require:
                for (const auto& c : n.children) out.push_back({&c, n.first_token});
                break;
            case NodeKind::If:
            case NodeKind::While:
            case NodeKind::Conditional:
                if (!n.children.empty()) out.push_back({&n.children[0], n.first_token});
                break;
            case NodeKind::DoWhile:
                if (n.children.size() >= 2) out.push_back({&n.children[1], n.first_token});
                break;
            case NodeKind::For:
                if (n.children.size() >= 2 && !n.children[1].is(NodeKind::Empty)) out.push_back({&n.children[1], n.first_token});
                break;
            default:
                break;
        }
        return true;
    });
    return out;
}

struct TypeInfo {
    const Node* type = nullptr;
};

// Value type reached by indexing `type` `depth` times (mapping value or array element).
const Node* indexed_type(const Node* type, std::size_t depth) {
    while (type && depth > 0) {
        if (type->is(NodeKind::TypeName) && type->text == "mapping" && type->children.size() == 2) {
            type = &type->children[1];
        } else if (type->is(NodeKind::TypeName) && type->text == "[]" && !type->children.empty()) {
            type = &type->children[0];
        } else {
            return nullptr;
        }
        --depth;
    }
    return type;
}

bool is_uint_type(const Node* type) {
    return type && type->is(NodeKind::ElementaryType) && type->text.starts_with("uint");
}

class Analyzer {
public:
    Analyzer(const sol::ContractAst& ast) : ast_(ast) {}

    std::vector<VulnFinding> run() {
        pragma_min_ = [&]() -> std::optional<Version> {
            auto c = solidity_pragma(ast_.tokens.source);
            return c ? c->minimum() : std::nullopt;
        }();
        for (const auto& unit : ast_.root.children) {
            if (!unit.is(NodeKind::ContractDef)) continue;
            contract(unit);
        }
        std::sort(findings_.begin(), findings_.end(), [](const VulnFinding& a, const VulnFinding& b) {
            return std::tie(a.span.begin, a.span.end, a.vuln_class, a.detector) <
                   std::tie(b.span.begin, b.span.end, b.vuln_class, b.detector);
        });
        findings_.erase(std::unique(findings_.begin(), findings_.end()), findings_.end());
        return findings_;
    }

private:
    void add(VulnClass c, const Node& at, std::string detector, Confidence conf = Confidence::High) {
        findings_.push_back({c, at.span, std::move(detector), conf});
    }

    void contract(const Node& def) {
        state_.clear();
        safe_math_ = false;
        std::string contract_name = def.children.empty() ? "" : def.children[0].text;
        for (const auto& m : def.children) {
            if (m.is(NodeKind::StateVarDecl)) {
                if (const Node* n = name_of(m)) state_[n->text] = m.children.empty() ? nullptr : &m.children[0];
            } else if (m.is(NodeKind::UsingFor)) {
                if (!m.children.empty() && contains_word(m.children[0].text, {"safemath", "safecast"})) safe_math_ = true;
            }
        }
        for (const auto& m : def.children) {
            if (!m.is(NodeKind::FunctionDef)) continue;
            const Node* body = body_of(m);
            if (!body) continue;
            const Node* name = m.children.empty() || !m.children[0].is(NodeKind::Identifier) ? nullptr : &m.children[0];
            const bool constructor = m.text == "constructor" || (name && name->text == contract_name);
            function(m, *body, constructor);
        }
    }

    bool is_state(const std::string& name) const { return state_.count(name) != 0 && locals_.count(name) == 0; }

    void collect_locals(const Node& fn) {
        locals_.clear();
        for (const auto& c : fn.children) {
            if (!c.is(NodeKind::ParameterList)) continue;
            for (const auto& p : c.children) {
                if (const Node* n = name_of(p)) locals_[n->text] = p.children.empty() ? nullptr : &p.children[0];
            }
        }
        sol::walk(fn, [&](const Node& n) {
            if (n.is(NodeKind::VarDeclStmt)) {
                for (const auto& d : n.children) {
                    if (!d.is(NodeKind::VarDecl)) continue;
                    if (const Node* nm = name_of(d)) locals_[nm->text] = d.children.empty() ? nullptr : &d.children[0];
                }
            }
            return true;
        });
    }

    const Node* type_of_expr(const Node& e) const {
        std::size_t depth = 0;
        const Node* cur = &e;
        while (cur->is(NodeKind::IndexAccess) && !cur->children.empty()) {
            ++depth;
            cur = &cur->children.front();
        }
        if (is_member(*cur, "msg", "value") && depth == 0) return &uint_marker_;
        if (!cur->is(NodeKind::Identifier)) return nullptr;
        const Node* declared = nullptr;
        if (auto it = locals_.find(cur->text); it != locals_.end()) {
            declared = it->second;
        } else if (auto st = state_.find(cur->text); st != state_.end()) {
            declared = st->second;
        }
        return indexed_type(declared, depth);
    }

    bool externally_callable(const Node& fn) const {
        return !fn.has_qualifier("internal") && !fn.has_qualifier("private");
    }
    bool read_only(const Node& fn) const { return fn.has_qualifier("view") || fn.has_qualifier("pure"); }

    bool access_guarded(const Node& fn, const Node& body) const {
        for (const auto& m : modifiers_of(fn)) {
            if (!contains_word(m, {"nonreentrant", "noreentran"})) return true;
        }
        for (const auto& c : conditions_in(body)) {
            if (any_node(*c.expr, [](const Node& n) { return is_msg_sender(n) || is_tx_origin(n); })) return true;
        }
        return false;
    }

    void function(const Node& fn, const Node& body, bool constructor) {
        collect_locals(fn);
        const auto conditions = conditions_in(body);
        reentrancy(fn, body);
        access_control(fn, body, conditions, constructor);
        arithmetic(body);
        unchecked_calls(body);
        denial_of_service(body);
        bad_randomness(body, conditions);
        time_manipulation(body, conditions);
        front_running(fn, body, conditions, constructor);
    }

    // State variables read by an expression, directly or through locals derived from state.
    std::set<std::string> state_reads(const Node& e, const std::map<std::string, std::set<std::string>>& taint) const {
        std::set<std::string> out;
        for (const auto& id : identifiers_in(e)) {
            if (is_state(id)) out.insert(id);
            if (auto it = taint.find(id); it != taint.end()) out.insert(it->second.begin(), it->second.end());
        }
        return out;
    }

    void reentrancy(const Node& fn, const Node& body) {
        if (reentrancy_guarded(fn)) return;
        std::vector<const Node*> calls;
        sol::walk(body, [&](const Node& n) {
            if (is_value_call(n)) calls.push_back(&n);
            return true;
        });
        if (calls.empty()) return;

        // Reads before each call: guards, local initializers and the call's own arguments.
        std::map<std::string, std::set<std::string>> taint;
        struct Read {
            std::size_t position;
            std::set<std::string> vars;
        };
        std::vector<Read> reads;
        struct Write {
            std::size_t position;
            std::string var;
        };
        std::vector<Write> writes;
        sol::walk(body, [&](const Node& n) {
            if (n.is(NodeKind::VarDeclStmt) && n.text == "=" && !n.children.empty()) {
                auto vars = state_reads(n.children.back(), taint);
                for (const auto& d : n.children) {
                    if (const Node* nm = d.is(NodeKind::VarDecl) ? name_of(d) : nullptr) taint[nm->text] = vars;
                }
                reads.push_back({n.first_token, vars});
            } else if (n.is(NodeKind::Require)) {
                reads.push_back({n.first_token, state_reads(n, taint)});
            } else if ((n.is(NodeKind::If) || n.is(NodeKind::While)) && !n.children.empty()) {
                reads.push_back({n.first_token, state_reads(n.children[0], taint)});
            } else if (n.is(NodeKind::Assign) && n.children.size() == 2) {
                reads.push_back({n.children[1].first_token, state_reads(n.children[1], taint)});
                if (const Node* base = lvalue_base(n.children[0])) {
                    if (is_state(base->text)) writes.push_back({n.first_token, base->text});
                }
            } else if (n.is(NodeKind::UnaryOp) && (n.text.find("++") != std::string::npos ||
                                                   n.text.find("--") != std::string::npos || n.text == "delete")) {
                if (const Node* base = n.children.empty() ? nullptr : lvalue_base(n.children[0])) {
                    if (is_state(base->text)) writes.push_back({n.first_token, base->text});
                }
            } else if (is_value_call(n)) {
                reads.push_back({n.first_token, state_reads(n, taint)});
            }
            return true;
        });

        for (const Node* call : calls) {
            std::set<std::string> before;
            for (const auto& r : reads) {
                if (r.position <= call->first_token) before.insert(r.vars.begin(), r.vars.end());
            }
            const bool stale = std::any_of(writes.begin(), writes.end(), [&](const Write& w) {
                return w.position >= call->last_token && before.count(w.var) != 0;
            });
            if (stale) add(VulnClass::RE, *call, "reentrancy-state-write-after-call");
        }
    }

    void access_control(const Node& fn, const Node& body, const std::vector<Condition>& conditions, bool constructor) {
        for (const auto& c : conditions) {
            sol::walk(*c.expr, [&](const Node& n) {
                if (n.is(NodeKind::BinaryOp) && n.children.size() == 2 &&
                    ((is_tx_origin(n.children[0]) && is_msg_sender(n.children[1])) ||
                     (is_msg_sender(n.children[0]) && is_tx_origin(n.children[1])))) {
                    return false;  // contract-caller check, not authorization
                }
                if (is_tx_origin(n)) add(VulnClass::AC, n, "tx-origin-authorization");
                return true;
            });
        }
        if (constructor || !externally_callable(fn) || read_only(fn)) return;
        if (access_guarded(fn, body)) return;
        sol::walk(body, [&](const Node& n) {
            if (n.is(NodeKind::Call) && !n.children.empty() && n.children[0].is(NodeKind::Identifier) &&
                (n.children[0].text == "selfdestruct" || n.children[0].text == "suicide")) {
                add(VulnClass::AC, n, "unprotected-selfdestruct");
            }
            if (n.is(NodeKind::Assign) && n.text == "=" && n.children.size() == 2) {
                const Node* base = lvalue_base(n.children[0]);
                if (base && is_state(base->text) && contains_word(base->text, {"owner", "admin"})) {
                    add(VulnClass::AC, n, "unprotected-owner-assignment");
                }
            }
            return true;
        });
    }

    bool uint_operand(const Node& e) const {
        if (is_uint_type(type_of_expr(e))) return true;
        if (e.is(NodeKind::Tuple) && e.children.size() == 1) return uint_operand(e.children[0]);
        return false;
    }

    void arithmetic(const Node& body) {
        if (!pragma_min_ || *pragma_min_ >= Version{0, 8, 0} || safe_math_) return;
        std::set<const Node*> loop_updates;
        sol::walk(body, [&](const Node& n) {
            if (n.is(NodeKind::For) && n.children.size() >= 3) loop_updates.insert(&n.children[2]);
            return true;
        });
        sol::walk(body, [&](const Node& n) {
            if (loop_updates.count(&n)) return false;
            if (n.is(NodeKind::BinaryOp) && n.children.size() == 2 && (n.text == "+" || n.text == "-" || n.text == "*" || n.text == "**")) {
                if (uint_operand(n.children[0]) || uint_operand(n.children[1])) add(VulnClass::AR, n, "unchecked-arithmetic");
            } else if (n.is(NodeKind::Assign) && n.children.size() == 2 && (n.text == "+=" || n.text == "-=" || n.text == "*=")) {
                if (uint_operand(n.children[0])) add(VulnClass::AR, n, "unchecked-arithmetic");
            } else if (n.is(NodeKind::UnaryOp) && !n.children.empty() &&
                       (n.text.find("++") != std::string::npos || n.text.find("--") != std::string::npos)) {
                if (uint_operand(n.children[0])) add(VulnClass::AR, n, "unchecked-arithmetic");
            }
            return true;
        });
    }

    void unchecked_calls(const Node& body) {
        sol::walk(body, [&](const Node& n) {
            if (n.is(NodeKind::ExpressionStmt) && !n.opaque && !n.children.empty() && is_low_level_call(n.children[0])) {
                add(VulnClass::ULLC, n.children[0], "unchecked-low-level-call");
            }
            return true;
        });
    }

    void denial_of_service(const Node& body) {
        sol::walk(body, [&](const Node& n) {
            const Node* cond = nullptr;
            const Node* loop_body = nullptr;
            if (n.is(NodeKind::For) && n.children.size() == 4) {
                cond = &n.children[1];
                loop_body = &n.children[3];
            } else if (n.is(NodeKind::While) && n.children.size() == 2) {
                cond = &n.children[0];
                loop_body = &n.children[1];
            } else if (n.is(NodeKind::DoWhile) && n.children.size() == 2) {
                cond = &n.children[1];
                loop_body = &n.children[0];
            }
            if (!cond) return true;
            const bool length_bound = any_node(*cond, [](const Node& x) { return member_field(x) == "length"; });
            if (!length_bound) return true;
            if (any_node(*loop_body, [](const Node& x) { return is_external_call(x); })) {
                add(VulnClass::DoS, n, "external-call-in-loop");
            } else if (any_node(*loop_body, [&](const Node& x) {
                           if (!x.is(NodeKind::Call) || x.children.empty() || member_field(x.children[0]) != "push") return false;
                           const Node* base = lvalue_base(x.children[0]);
                           return base && is_state(base->text);
                       })) {
                add(VulnClass::DoS, n, "unbounded-growth-in-loop");
            }
            return true;
        });
    }

    static bool strong_entropy_source(const Node& n) {
        if (n.is(NodeKind::Call) && !n.children.empty() && n.children[0].is(NodeKind::Identifier) &&
            n.children[0].text == "blockhash") {
            return true;
        }
        return is_member(n, "block", "blockhash") || is_member(n, "block", "difficulty") ||
               is_member(n, "block", "prevrandao") || is_member(n, "block", "coinbase");
    }

    // Expression derives a pseudo-random value from block data.
    bool random_derived(const Node& e, const std::set<std::string>& tainted) const {
        return any_node(e, [&](const Node& n) {
            if (strong_entropy_source(n)) return true;
            if (n.is(NodeKind::Identifier) && !n.keyword_name && tainted.count(n.text)) return true;
            if (n.is(NodeKind::Call) && !n.children.empty() && n.children[0].is(NodeKind::Identifier) &&
                (n.children[0].text == "keccak256" || n.children[0].text == "sha3" || n.children[0].text == "sha256")) {
                return any_node(n, is_block_attribute);
            }
            if (n.is(NodeKind::BinaryOp) && n.text == "%" && n.children.size() == 2) return any_node(n.children[0], is_block_attribute);
            return false;
        });
    }

    void bad_randomness(const Node& body, const std::vector<Condition>& conditions) {
        std::set<std::string> tainted;
        sol::walk(body, [&](const Node& n) {
            if (n.is(NodeKind::VarDeclStmt) && n.text == "=" && !n.children.empty() && random_derived(n.children.back(), tainted)) {
                for (const auto& d : n.children) {
                    if (const Node* nm = d.is(NodeKind::VarDecl) ? name_of(d) : nullptr) tainted.insert(nm->text);
                }
            } else if (n.is(NodeKind::Assign) && n.children.size() == 2 && random_derived(n.children[1], tainted)) {
                if (const Node* base = lvalue_base(n.children[0])) tainted.insert(base->text);
            }
            return true;
        });
        for (const auto& c : conditions) {
            if (random_derived(*c.expr, tainted)) add(VulnClass::BR, *c.expr, "block-randomness-branch");
        }
        sol::walk(body, [&](const Node& n) {
            if (n.is(NodeKind::IndexAccess) && n.children.size() == 2 && random_derived(n.children[1], tainted)) {
                add(VulnClass::BR, n, "block-randomness-index");
            }
            if (n.is(NodeKind::BinaryOp) && n.text == "%" && n.children.size() == 2 &&
                any_node(n.children[0], [&](const Node& x) { return strong_entropy_source(x); })) {
                add(VulnClass::BR, n, "block-randomness-modulo");
            }
            return true;
        });
    }

    void time_manipulation(const Node& body, const std::vector<Condition>& conditions) {
        for (const auto& c : conditions) {
            sol::walk(*c.expr, [&](const Node& n) {
                if (is_timestamp(n)) add(VulnClass::TM, n, "timestamp-condition");
                return true;
            });
        }
        sol::walk(body, [&](const Node& n) {
            if (n.is(NodeKind::Assign) && n.children.size() == 2) {
                const Node* base = lvalue_base(n.children[0]);
                if (base && is_state(base->text)) {
                    sol::walk(n.children[1], [&](const Node& x) {
                        if (is_timestamp(x)) add(VulnClass::TM, x, "timestamp-state-write");
                        return true;
                    });
                }
            }
            return true;
        });
    }

    void front_running(const Node& fn, const Node& body, const std::vector<Condition>& conditions, bool constructor) {
        if (constructor || !externally_callable(fn) || read_only(fn)) return;
        // A stored bid/price compared against msg.value and then overwritten.
        std::set<std::string> compared;
        for (const auto& c : conditions) {
            if (!any_node(*c.expr, [](const Node& n) { return is_member(n, "msg", "value"); })) continue;
            sol::walk(*c.expr, [&](const Node& n) {
                if (n.is(NodeKind::Identifier) && !n.keyword_name && is_state(n.text)) compared.insert(n.text);
                return true;
            });
        }
        std::set<std::string> params;
        for (const auto& c : fn.children) {
            if (c.is(NodeKind::ParameterList) && c.text != "returns") {
                for (const auto& p : c.children) {
                    if (const Node* n = name_of(p)) params.insert(n->text);
                }
            }
        }
        const bool guarded = access_guarded(fn, body);
        sol::walk(body, [&](const Node& n) {
            if (!n.is(NodeKind::Assign) || n.children.size() != 2 || !n.children[0].is(NodeKind::Identifier)) return true;
            const std::string& var = n.children[0].text;
            if (!is_state(var)) return true;
            if (compared.count(var)) {
                add(VulnClass::FR, n, "order-dependent-bid", Confidence::Heuristic);
            } else if (!guarded && contains_word(var, {"price", "fee", "rate", "reward"})) {
                auto ids = identifiers_in(n.children[1]);
                if (std::any_of(ids.begin(), ids.end(), [&](const std::string& id) { return params.count(id) != 0; })) {
                    add(VulnClass::FR, n, "unprotected-price-update", Confidence::Heuristic);
                }
            }
            return true;
        });
    }

    const sol::ContractAst& ast_;
    std::optional<Version> pragma_min_;
    std::map<std::string, const Node*> state_;
    std::map<std::string, const Node*> locals_;
    bool safe_math_ = false;
    Node uint_marker_{NodeKind::ElementaryType, "uint256", {}, {}, {}, 0, 0, false, false};
    std::vector<VulnFinding> findings_;
};

}  // namespace

std::string_view to_string(VulnClass c) {
    switch (c) {
        case VulnClass::RE: return "RE";
        case VulnClass::AC: return "AC";
        case VulnClass::AR: return "AR";
        case VulnClass::ULLC: return "ULLC";
        case VulnClass::DoS: return "DoS";
        case VulnClass::BR: return "BR";
        case VulnClass::FR: return "FR";
        case VulnClass::TM: return "TM";
        case VulnClass::OTHER: return "OTHER";
    }
    return "OTHER";
}

VulnClass parse_class(std::string_view text) {
    for (VulnClass c : kAllClasses) {
        if (to_string(c) == text) return c;
    }
    throw std::invalid_argument("unknown vulnerability class: " + std::string(text));
}

std::string_view to_string(Confidence c) { return c == Confidence::High ? "high" : "heuristic"; }

DetectResult detect(const sol::ContractAst& ast) { return {Analyzer(ast).run(), false}; }

DetectResult detect(std::string_view source) {
    try {
        return detect(sol::parse_source(source));
    } catch (const sol::ParseError&) {
        return {{}, true};
    } catch (const sol::LexError&) {
        return {{}, true};
    }
}

}  // namespace forge::security
