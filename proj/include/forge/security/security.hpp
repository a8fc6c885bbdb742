#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "forge/dataset/builders.hpp"
#include "forge/frontend/ast.hpp"

namespace forge::security {

enum class VulnClass { RE, AC, AR, ULLC, DoS, BR, FR, TM, OTHER };
inline constexpr VulnClass kAllClasses[] = {VulnClass::RE, VulnClass::AC, VulnClass::AR, VulnClass::ULLC, VulnClass::DoS,
                                            VulnClass::BR, VulnClass::FR, VulnClass::TM, VulnClass::OTHER};

std::string_view to_string(VulnClass c);
VulnClass parse_class(std::string_view text);

enum class Confidence { High, Heuristic };
std::string_view to_string(Confidence c);

struct VulnFinding {
    VulnClass vuln_class = VulnClass::OTHER;
    sol::Span span;
    std::string detector;
    Confidence confidence = Confidence::High;

    friend bool operator==(const VulnFinding&, const VulnFinding&) = default;
};

struct DetectResult {
    std::vector<VulnFinding> findings;
    bool analysis_failed = false;
};

enum class CompileTool { ExternalSolc, InternalParser };
std::string_view to_string(CompileTool t);

struct CompileResult {
    bool compiled = false;
    CompileTool tool = CompileTool::InternalParser;
    std::vector<std::string> diagnostics;

    bool approximate() const { return tool == CompileTool::InternalParser; }
};

class ToolSpawnError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class EmptyResults : public std::invalid_argument {
public:
    EmptyResults() : std::invalid_argument("no results to summarize") {}
};

struct Version {
    int major = 0, minor = 0, patch = 0;
    friend auto operator<=>(const Version&, const Version&) = default;
};
std::optional<Version> parse_version(std::string_view text);
std::string to_string(const Version& v);

/// A pragma's constraint list, e.g. "^0.8.0" or ">=0.4.22 <0.9.0".
struct VersionConstraint {
    std::vector<std::pair<std::string, Version>> terms;  // (operator, version); operator "" means exact
    bool satisfied_by(const Version& v) const;
    /// Smallest version allowed by the lower-bound terms, if any.
    std::optional<Version> minimum() const;
};
/// The `pragma solidity` constraint of a source; nullopt when there is none.
std::optional<VersionConstraint> solidity_pragma(std::string_view source);

struct ToolConfig {
    std::string solc_path;           // empty: internal parser only; "{version}" is substituted
    std::vector<std::string> solc_versions;  // candidates tried in order
    std::string solc_default_version = "0.8.19";
    std::string slither_path;        // empty: internal detectors only
    std::filesystem::path detector_map;  // empty: built-in table
    std::size_t max_processes = 4;
};

CompileResult internal_compile_check(std::string_view source);
CompileResult compile_check(std::string_view source, const ToolConfig& cfg = {});

/// Internal pattern detectors, in source order.
DetectResult detect(std::string_view source);
DetectResult detect(const sol::ContractAst& ast);

// External analyzer.
using DetectorMap = std::map<std::string, VulnClass>;
const DetectorMap& builtin_detector_map();
DetectorMap load_detector_map(const std::filesystem::path& path);

struct AdapterResult {
    std::vector<VulnFinding> findings;
    std::vector<std::string> mapping_gaps;  // unknown detector ids
};
/// Maps an analyzer JSON report onto findings; `source_size` bounds the spans.
AdapterResult map_slither_report(std::string_view json_text, const DetectorMap& map, std::size_t source_size);
AdapterResult slither_adapter(std::string_view source, const ToolConfig& cfg);

/// External analyzer when configured, internal detectors otherwise.
DetectResult analyze(std::string_view source, const ToolConfig& cfg);

struct LabelOutcome {
    std::string id;
    std::optional<data::Tag> label;  // nullopt: analysis failed, excluded
};
std::vector<LabelOutcome> label_corpus(const std::vector<std::pair<std::string, std::string>>& id_and_source,
                                       const ToolConfig& cfg);
void write_labels(const std::filesystem::path& path, const std::vector<LabelOutcome>& labels);

struct SampleAnalysis {
    std::string task_id;
    int sample_index = 0;
    CompileResult compile;
    DetectResult detection;
};

struct SecuritySummary {
    std::size_t total = 0;
    std::size_t compiled = 0;
    std::size_t compiled_with_findings = 0;
    double com_pass = 0;   // percentages, unrounded
    double vul_rate = 0;
    double safe_aval = 0;
    bool approximate = false;
    std::map<std::string, std::size_t> per_class;  // findings in compiled samples
};

SecuritySummary security_metrics(const std::vector<SampleAnalysis>& results);
double round2(double percent);

void write_findings(const std::filesystem::path& path, const std::vector<SampleAnalysis>& results);
void write_security_summary(const std::filesystem::path& path, const SecuritySummary& summary);
SecuritySummary read_security_summary(const std::filesystem::path& path);

}  // namespace forge::security
