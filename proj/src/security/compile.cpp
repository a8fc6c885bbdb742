#include <unistd.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include <spdlog/spdlog.h>

#include "forge/common/process.hpp"
#include "forge/security/security.hpp"

namespace forge::security {

std::optional<Version> parse_version(std::string_view text) {
    Version v;
    int* parts[] = {&v.major, &v.minor, &v.patch};
    std::size_t at = 0;
    for (int i = 0; i < 3; ++i) {
        if (at >= text.size()) return i >= 2 ? std::optional<Version>(v) : std::nullopt;
        if (text[at] == 'x' || text[at] == 'X' || text[at] == '*') return v;
        auto [ptr, ec] = std::from_chars(text.data() + at, text.data() + text.size(), *parts[i]);
        if (ec != std::errc()) return std::nullopt;
        at = static_cast<std::size_t>(ptr - text.data());
        if (at < text.size()) {
            if (text[at] != '.') return std::nullopt;
            ++at;
        }
    }
    return at >= text.size() ? std::optional<Version>(v) : std::nullopt;
}

std::string to_string(const Version& v) {
    return std::to_string(v.major) + "." + std::to_string(v.minor) + "." + std::to_string(v.patch);
}

bool VersionConstraint::satisfied_by(const Version& v) const {
    for (const auto& [op, x] : terms) {
        bool ok = true;
        if (op == "^") {
            ok = v >= x && v.major == x.major && (x.major != 0 || v.minor == x.minor);
        } else if (op == "~") {
            ok = v >= x && v.major == x.major && v.minor == x.minor;
        } else if (op == ">=") {
            ok = v >= x;
        } else if (op == ">") {
            ok = v > x;
        } else if (op == "<=") {
            ok = v <= x;
        } else if (op == "<") {
            ok = v < x;
        } else {
            ok = v == x;
        }
        if (!ok) return false;
    }
    return true;
}

std::optional<Version> VersionConstraint::minimum() const {
    std::optional<Version> best;
    for (const auto& [op, x] : terms) {
        if (op == "<" || op == "<=") continue;
        Version lo = x;
        if (op == ">") ++lo.patch;
        if (!best || lo > *best) best = lo;
    }
    return best;
}

std::optional<VersionConstraint> solidity_pragma(std::string_view source) {
    sol::TokenStream ts;
    try {
        ts = sol::tokenize(source);
    } catch (const sol::LexError&) {
        return std::nullopt;
    }
    const auto& t = ts.tokens;
    for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        if (t[i].lexeme != "pragma" || t[i + 1].lexeme != "solidity") continue;
        VersionConstraint c;
        std::string op;
        for (std::size_t k = i + 2; k < t.size() && t[k].lexeme != ";"; ++k) {
            const auto& lx = t[k].lexeme;
            if (t[k].kind == sol::TokenKind::PragmaVersion) {
                if (auto v = parse_version(lx)) c.terms.emplace_back(op == "=" ? "" : op, *v);
                op.clear();
            } else if (lx == "||") {
                break;  // only the first alternative is honoured
            } else {
                op += lx;
            }
        }
        return c;
    }
    return std::nullopt;
}

std::string_view to_string(CompileTool t) { return t == CompileTool::ExternalSolc ? "external-solc" : "internal-parser"; }

CompileResult internal_compile_check(std::string_view source) {
    CompileResult r;
    r.tool = CompileTool::InternalParser;
    try {
        auto ast = sol::parse_source(source);
        if (!ast.clean) r.diagnostics.push_back("unparseable statement");
        if (sol::count_contracts(ast) == 0) r.diagnostics.push_back("no contract definition");
        r.compiled = r.diagnostics.empty();
    } catch (const std::exception& e) {
        r.diagnostics.push_back(e.what());
    }
    return r;
}

namespace {

bool executable(const std::string& path) {
    if (path.find('/') == std::string::npos) {
        const char* env = std::getenv("PATH");
        std::string dirs = env ? env : "";
        std::size_t at = 0;
        while (at <= dirs.size()) {
            auto next = dirs.find(':', at);
            if (next == std::string::npos) next = dirs.size();
            const auto candidate = std::filesystem::path(dirs.substr(at, next - at)) / path;
            if (::access(candidate.c_str(), X_OK) == 0) return true;
            at = next + 1;
        }
        return false;
    }
    return ::access(path.c_str(), X_OK) == 0;
}

std::optional<std::string> pick_solc(std::string_view source, const ToolConfig& cfg) {
    std::string version = cfg.solc_default_version;
    if (auto pragma = solidity_pragma(source)) {
        if (!cfg.solc_versions.empty()) {
            std::optional<std::string> chosen;
            for (const auto& candidate : cfg.solc_versions) {
                auto v = parse_version(candidate);
                if (v && pragma->satisfied_by(*v)) {
                    chosen = candidate;
                    break;
                }
            }
            if (!chosen) return std::nullopt;
            version = *chosen;
        }
    }
    std::string path = cfg.solc_path;
    if (auto at = path.find("{version}"); at != std::string::npos) path.replace(at, 9, version);
    if (!executable(path)) return std::nullopt;
    return path;
}

}  // namespace

CompileResult compile_check(std::string_view source, const ToolConfig& cfg) {
    if (cfg.solc_path.empty()) return internal_compile_check(source);
    auto solc = pick_solc(source, cfg);
    if (!solc) {
        spdlog::debug("no external compiler matches the pragma; using the internal parser");
        return internal_compile_check(source);
    }
    char name[] = "/tmp/forge-src-XXXXXX.sol";
    const int fd = mkstemps(name, 4);
    if (fd < 0) throw ToolSpawnError("cannot create a temporary source file");
    ::close(fd);
    {
        std::ofstream out(name, std::ios::binary);
        out << source;
    }
    ProcessResult pr;
    try {
        pr = run_process({*solc, name});
    } catch (const SpawnError& e) {
        std::filesystem::remove(name);
        throw ToolSpawnError(e.what());
    }
    std::filesystem::remove(name);

    CompileResult r;
    r.tool = CompileTool::ExternalSolc;
    static const std::regex error_line(R"((^|\n)\s*\w*Error\b)");
    const bool has_errors = std::regex_search(pr.err, error_line);
    r.compiled = pr.exit_code == 0 && !has_errors;
    std::istringstream lines(pr.err);
    std::string line;
    while (std::getline(lines, line)) {
        if (!line.empty()) r.diagnostics.push_back(line);
    }
    return r;
}

}  // namespace forge::security
