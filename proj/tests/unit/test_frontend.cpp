#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "forge/frontend/analysis.hpp"
#include "forge/frontend/ast.hpp"
#include "forge/frontend/lexer.hpp"

using namespace forge::sol;

namespace {

std::vector<std::string> lex(std::string_view text) { return tokenize(text).lexemes(); }

// Consistent identifier renaming over the token stream, rebuilt into source text.
std::string rename_identifiers(std::string_view text, const std::string& prefix) {
    TokenStream ts = tokenize(text);
    std::map<std::string, std::string> names;
    std::string out;
    std::size_t cursor = 0;
    for (const auto& t : ts.tokens) {
        out.append(ts.source, cursor, t.span.begin - cursor);
        if (t.kind == TokenKind::Identifier) {
            auto [it, _] = names.try_emplace(t.lexeme, prefix + std::to_string(names.size()));
            out += it->second;
        } else {
            out += t.lexeme;
        }
        cursor = t.span.end;
    }
    out.append(ts.source, cursor);
    return out;
}

std::size_t count_high_nodes(const Node& n, std::size_t min_depth) {
    std::size_t total = n.height() >= min_depth ? 1 : 0;
    for (const auto& c : n.children) total += count_high_nodes(c, min_depth);
    return total;
}

const char* kBank = R"(pragma solidity ^0.8.0;
/// @notice Simple bank.
contract Bank {
    mapping(address => uint256) public balances;
    address owner;

    constructor() { owner = msg.sender; }

    function deposit() external payable {
        balances[msg.sender] += msg.value;
    }

    function withdraw(uint256 amount) external {
        require(balances[msg.sender] >= amount, "low");
        balances[msg.sender] -= amount;
        (bool ok, ) = msg.sender.call{value: amount}("");
        require(ok);
    }
}
)";

}  // namespace

TEST_CASE("tokenize: empty input gives empty stream") {
    CHECK(tokenize("").empty());
}

TEST_CASE("tokenize: pragma line") {
    auto ts = tokenize("pragma solidity ^0.8.0;");
    REQUIRE(ts.size() == 5);
    CHECK(ts.lexemes() == std::vector<std::string>{"pragma", "solidity", "^", "0.8.0", ";"});
    CHECK(ts.tokens[3].kind == TokenKind::PragmaVersion);
    CHECK(ts.tokens[0].kind == TokenKind::Keyword);
}

TEST_CASE("tokenize: trailing line comment is skipped") {
    auto ts = tokenize("uint a = 1; // note");
    CHECK(ts.lexemes() == std::vector<std::string>{"uint", "a", "=", "1", ";"});
    REQUIRE(ts.comments.size() == 1);
    CHECK(ts.comments[0].begin == 12);
}

TEST_CASE("tokenize: errors carry offsets") {
    try {
        tokenize("string s = \"abc");
        FAIL("expected LexError");
    } catch (const LexError& e) {
        CHECK(e.offset() == 11);
    }
    CHECK_THROWS_AS(tokenize("a; /* open"), LexError);
}

TEST_CASE("tokenize: spans strictly increase and reconstruct the source") {
    auto ts = tokenize(kBank);
    for (std::size_t i = 1; i < ts.tokens.size(); ++i) {
        CHECK(ts.tokens[i - 1].span.end <= ts.tokens[i].span.begin);
    }
    CHECK(reconstruct(ts) == kBank);
    std::string stripped = strip_comments(kBank);
    CHECK(reconstruct(tokenize(stripped)) == stripped);
}

TEST_CASE("strip_comments: worked examples") {
    CHECK(strip_comments("a;/*x*/b;") == "a;b;");
    CHECK(strip_comments("/// @notice doc\nuint a;") == "uint a;");
    CHECK(strip_comments("/** doc\n * more\n */\nuint a;") == "uint a;");
    CHECK(strip_comments("uint a = 1; // note\nuint b;") == "uint a = 1;\nuint b;");
    CHECK(strip_comments("string s = \"http://x\";") == "string s = \"http://x\";");
    CHECK(strip_comments("uint/*x*/a;") == "uint a;");
}

TEST_CASE("strip_comments: lexer-aware fuzz oracle keeps strings, drops comments") {
    std::mt19937_64 rng(7);
    const std::vector<std::string> code = {"uint a = 1;", "x += y;", "f(a, b);", "return;", "{", "}"};
    const std::vector<std::string> strings = {"\"//not\"", "'/*no*/'", "\"a // b\"", "\"*/\""};
    const std::vector<std::string> comments = {"// line c\n", "/* block */", "/// natspec\n", "/** doc */"};
    for (int round = 0; round < 50; ++round) {
        std::string text;
        std::vector<std::string> expected;
        int pieces = 3 + static_cast<int>(rng() % 10);
        for (int p = 0; p < pieces; ++p) {
            switch (rng() % 3) {
                case 0: {
                    const auto& c = code[rng() % code.size()];
                    text += c + " ";
                    for (auto& l : lex(c)) expected.push_back(l);
                    break;
                }
                case 1: {
                    const auto& s = strings[rng() % strings.size()];
                    text += "s = " + s + "; ";
                    expected.push_back("s");
                    expected.push_back("=");
                    expected.push_back(s);
                    expected.push_back(";");
                    break;
                }
                default:
                    text += comments[rng() % comments.size()];
            }
        }
        std::string once = strip_comments(text);
        CHECK(lex(once) == expected);
        CHECK(tokenize(once).comments.empty());
        CHECK(strip_comments(once) == once);
    }
}

TEST_CASE("parse: minimal contract") {
    auto ast = parse_source("contract A {}");
    CHECK(ast.clean);
    CHECK(dump(ast.root) == "(SourceUnit (ContractDef:contract (Identifier:A)))");
    CHECK(is_single_contract(ast));
}

TEST_CASE("parse: function with one require") {
    auto ast = parse_source("contract A { function f(uint x) public { require(x > 1); } }");
    CHECK(ast.clean);
    CHECK(dump(ast.root) ==
          "(SourceUnit (ContractDef:contract (Identifier:A) (FunctionDef:function (Identifier:f) "
          "(ParameterList (VarDecl (ElementaryType:uint) (Identifier:x))) "
          "(Block (Require:require (BinaryOp:> (Identifier:x) (Literal:1)))))))");
}

TEST_CASE("parse: garbage tail becomes an opaque statement") {
    auto ast = parse_source("contract A { function f() public { uint a = 1; a + + ) ; } }");
    CHECK_FALSE(ast.clean);
    bool opaque = false;
    walk(ast.root, [&](const Node& n) {
        opaque = opaque || n.opaque;
        return true;
    });
    CHECK(opaque);
}

TEST_CASE("parse: unrecoverable top-level structure throws") {
    CHECK_THROWS_AS(parse_source("contract A { function f() public {"), ParseError);
    CHECK_THROWS_AS(parse_source("pragma solidity ^0.8.0"), ParseError);
    CHECK_THROWS_AS(parse_source("contract A {} }"), ParseError);
}

TEST_CASE("parse: realistic contract is clean and spans nest") {
    auto ast = parse_source(strip_comments(kBank));
    CHECK(ast.clean);
    std::function<void(const Node&)> check = [&](const Node& n) {
        for (const auto& c : n.children) {
            CHECK(n.span.contains(c.span));
            check(c);
        }
        if (n.children.empty() && !n.is(NodeKind::Empty)) CHECK(n.last_token > n.first_token);
    };
    check(ast.root);
}

TEST_CASE("parse: call options and tuple declarations") {
    auto ast = parse_source(kBank);
    std::string d = dump(ast.root);
    CHECK(d.find("(VarDeclStmt:= (VarDecl (ElementaryType:bool) (Identifier:ok))") != std::string::npos);
    CHECK(d.find("(CallOptions:options (MemberAccess (MemberAccess (Identifier:msg) (Identifier:sender)) "
                 "(Identifier:call)) (Identifier:value) (Identifier:amount))") != std::string::npos);
}

TEST_CASE("is_single_contract") {
    CHECK(is_single_contract(parse_source("contract A {}")));
    CHECK_FALSE(is_single_contract(parse_source("contract A {} contract B {}")));
    CHECK_FALSE(is_single_contract(parse_source("interface I { function f() external; } contract A {}")));
    CHECK_FALSE(is_single_contract(parse_source("library L {} contract A {}")));
    CHECK(is_single_contract(parse_source("pragma solidity ^0.8.0;\nimport \"x.sol\";\ncontract A is B, C(1) {}")));
    CHECK_FALSE(is_single_contract(parse_source("pragma solidity ^0.8.0;")));
    // Invariant under comment stripping.
    std::string src = "/* contract X {} */ contract A { } // contract Y {}";
    CHECK(is_single_contract(parse_source(src)) == is_single_contract(parse_source(strip_comments(src))));
}

TEST_CASE("subtrees: empty contract at depth 2 matches enumeration") {
    auto ast = parse_source("contract A {}");
    auto set = subtrees(ast, 2);
    CHECK(multiset_size(set) == count_high_nodes(ast.root, 2));
    CHECK(multiset_size(set) == 2);
    CHECK(set.count("(ContractDef:contract (ID))") == 1);
}

TEST_CASE("subtrees: deterministic and invariant under renaming") {
    auto a = subtrees(parse_source(kBank), 2);
    CHECK(a == subtrees(parse_source(kBank), 2));
    auto renamed = rename_identifiers(kBank, "zz");
    CHECK(renamed != kBank);
    CHECK(a == subtrees(parse_source(renamed), 2));
}

TEST_CASE("def_use_edges: hand-derived graph") {
    auto ast = parse_source("contract C { function f() public { uint a = 1; uint b = a; } }");
    auto edges = def_use_edges(ast);
    REQUIRE(edges.size() == 1);
    const auto& e = *edges.begin();
    CHECK(e.def_site == 0);
    CHECK(e.use_site == 2);
    CHECK(e.var == "var_0");
}

TEST_CASE("def_use_edges: no reads, identical bodies, renaming") {
    CHECK(def_use_edges(parse_source("contract C { function f() public { uint a = 1; } }")).empty());

    auto ast = parse_source(
        "contract C { function f(uint x) public { uint y = x + 1; y += x; }"
        " function g(uint p) public { uint q = p + 1; q += p; } }");
    auto fns = functions_of(ast.root);
    REQUIRE(fns.size() == 2);
    auto ef = def_use_edges(*fns[0]);
    CHECK(ef == def_use_edges(*fns[1]));
    // x(0,def) y(1,def) x(2,read) y(3,read+def) x(4,read)
    DefUseSet expected = {{0, 2, "var_0"}, {1, 3, "var_1"}, {0, 4, "var_0"}};
    CHECK(ef == expected);

    CHECK(def_use_edges(parse_source(kBank)) == def_use_edges(parse_source(rename_identifiers(kBank, "v"))));
}
