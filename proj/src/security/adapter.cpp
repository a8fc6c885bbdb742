#include <unistd.h>

#include <cstdlib>
#include <fstream>

#include <spdlog/spdlog.h>

#include "forge/common/process.hpp"
#include "forge/security/security.hpp"
#include "json.hpp"

namespace forge::security {

const DetectorMap& builtin_detector_map() {
    static const DetectorMap map = {
        {"reentrancy-eth", VulnClass::RE},         {"reentrancy-no-eth", VulnClass::RE},
        {"reentrancy-benign", VulnClass::RE},      {"reentrancy-events", VulnClass::RE},
        {"reentrancy-unlimited-gas", VulnClass::RE}, {"tx-origin", VulnClass::AC},
        {"suicidal", VulnClass::AC},               {"arbitrary-send-eth", VulnClass::AC},
        {"arbitrary-send-erc20", VulnClass::AC},   {"unprotected-upgrade", VulnClass::AC},
        {"protected-vars", VulnClass::AC},         {"controlled-delegatecall", VulnClass::AC},
        {"divide-before-multiply", VulnClass::AR}, {"incorrect-exp", VulnClass::AR},
        {"tautology", VulnClass::AR},              {"unchecked-lowlevel", VulnClass::ULLC},
        {"unchecked-send", VulnClass::ULLC},       {"unchecked-transfer", VulnClass::ULLC},
        {"low-level-calls", VulnClass::ULLC},      {"calls-loop", VulnClass::DoS},
        {"costly-loop", VulnClass::DoS},           {"msg-value-loop", VulnClass::DoS},
        {"delegatecall-loop", VulnClass::DoS},     {"locked-ether", VulnClass::DoS},
        {"weak-prng", VulnClass::BR},              {"timestamp", VulnClass::TM},
        {"solc-version", VulnClass::OTHER},        {"pragma", VulnClass::OTHER},
        {"naming-convention", VulnClass::OTHER},
    };
    return map;
}

DetectorMap load_detector_map(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read detector map " + path.string());
    DetectorMap map;
    const auto table = nlohmann::json::parse(in);
    for (const auto& [id, cls] : table.items()) map[id] = parse_class(cls.get<std::string>());
    return map;
}

AdapterResult map_slither_report(std::string_view json_text, const DetectorMap& map, std::size_t source_size) {
    nlohmann::json report;
    try {
        report = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw ToolSpawnError(std::string("unreadable analyzer report: ") + e.what());
    }
    if (report.contains("success") && !report["success"].get<bool>()) {
        throw ToolSpawnError("analyzer reported failure: " + report.value("error", std::string("unknown")));
    }
    AdapterResult out;
    if (!report.contains("results") || !report["results"].contains("detectors")) return out;
    for (const auto& d : report["results"]["detectors"]) {
        const std::string id = d.value("check", std::string());
        VulnClass cls = VulnClass::OTHER;
        if (auto it = map.find(id); it != map.end()) {
            cls = it->second;
        } else {
            spdlog::warn("analyzer detector '{}' has no class mapping; recorded as OTHER", id);
            out.mapping_gaps.push_back(id);
        }
        sol::Span span{0, 0};
        if (d.contains("elements") && !d["elements"].empty()) {
            const auto& sm = d["elements"][0].value("source_mapping", nlohmann::json::object());
            const std::size_t start = std::min<std::size_t>(sm.value("start", std::size_t{0}), source_size);
            const std::size_t length = sm.value("length", std::size_t{0});
            span = {start, std::min(source_size, start + length)};
        }
        out.findings.push_back({cls, span, id, Confidence::High});
    }
    return out;
}

AdapterResult slither_adapter(std::string_view source, const ToolConfig& cfg) {
    if (cfg.slither_path.empty()) throw ToolSpawnError("no analyzer configured");
    const DetectorMap map = cfg.detector_map.empty() ? builtin_detector_map() : load_detector_map(cfg.detector_map);
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
        pr = run_process({cfg.slither_path, name, "--json", "-"});
    } catch (const SpawnError& e) {
        std::filesystem::remove(name);
        throw ToolSpawnError(e.what());
    }
    std::filesystem::remove(name);
    return map_slither_report(pr.out, map, source.size());
}

DetectResult analyze(std::string_view source, const ToolConfig& cfg) {
    if (cfg.slither_path.empty()) return detect(source);
    try {
        return {slither_adapter(source, cfg).findings, false};
    } catch (const ToolSpawnError& e) {
        spdlog::warn("external analysis failed: {}", e.what());
        return {{}, true};
    }
}

}  // namespace forge::security
