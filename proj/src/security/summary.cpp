#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "forge/security/security.hpp"
#include "json.hpp"

namespace forge::security {

double round2(double percent) { return std::round(percent * 100.0) / 100.0; }

SecuritySummary security_metrics(const std::vector<SampleAnalysis>& results) {
    if (results.empty()) throw EmptyResults();
    SecuritySummary s;
    s.total = results.size();
    for (VulnClass c : kAllClasses) s.per_class[std::string(to_string(c))] = 0;
    for (const auto& r : results) {
        if (r.compile.approximate()) s.approximate = true;
        if (!r.compile.compiled) continue;
        ++s.compiled;
        if (!r.detection.findings.empty()) ++s.compiled_with_findings;
        for (const auto& f : r.detection.findings) ++s.per_class[std::string(to_string(f.vuln_class))];
    }
    const double total = static_cast<double>(s.total);
    s.com_pass = 100.0 * static_cast<double>(s.compiled) / total;
    s.vul_rate = s.compiled == 0 ? 0.0 : 100.0 * static_cast<double>(s.compiled_with_findings) / static_cast<double>(s.compiled);
    s.safe_aval = 100.0 * static_cast<double>(s.compiled - s.compiled_with_findings) / total;
    return s;
}

std::vector<LabelOutcome> label_corpus(const std::vector<std::pair<std::string, std::string>>& id_and_source,
                                       const ToolConfig& cfg) {
    std::vector<LabelOutcome> out;
    out.reserve(id_and_source.size());
    for (const auto& [id, source] : id_and_source) {
        const auto result = analyze(source, cfg);
        if (result.analysis_failed) {
            spdlog::warn("label: analysis failed for {}; excluded", id);
            out.push_back({id, std::nullopt});
            continue;
        }
        out.push_back({id, result.findings.empty() ? data::Tag::Security : data::Tag::Vulnerable});
    }
    return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<LabelOutcome>& labels) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& l : labels) {
        if (!l.label) continue;
        out << nlohmann::ordered_json{{"id", l.id}, {"label", data::to_string(*l.label)}}.dump() << '\n';
    }
}

void write_findings(const std::filesystem::path& path, const std::vector<SampleAnalysis>& results) {
    std::ofstream out(path, std::ios::binary);
    for (const auto& r : results) {
        nlohmann::ordered_json findings = nlohmann::ordered_json::array();
        for (const auto& f : r.detection.findings) {
            findings.push_back({{"class", to_string(f.vuln_class)},
                                {"detector", f.detector},
                                {"confidence", to_string(f.confidence)},
                                {"begin", f.span.begin},
                                {"end", f.span.end}});
        }
        out << nlohmann::ordered_json{{"task_id", r.task_id},
                                      {"sample_index", r.sample_index},
                                      {"compiled", r.compile.compiled},
                                      {"compile_tool", to_string(r.compile.tool)},
                                      {"analysis_failed", r.detection.analysis_failed},
                                      {"findings", findings}}
                   .dump()
            << '\n';
    }
}

void write_security_summary(const std::filesystem::path& path, const SecuritySummary& s) {
    std::ofstream out(path, std::ios::binary);
    nlohmann::ordered_json per_class(s.per_class);
    out << nlohmann::ordered_json{{"total", s.total},
                                  {"compiled", s.compiled},
                                  {"compiled_with_findings", s.compiled_with_findings},
                                  {"ComPass", round2(s.com_pass)},
                                  {"VulRate", round2(s.vul_rate)},
                                  {"SafeAval", round2(s.safe_aval)},
                                  {"approximate", s.approximate},
                                  {"per_class", per_class}}
               .dump(2)
        << '\n';
}

SecuritySummary read_security_summary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    auto j = nlohmann::json::parse(in);
    SecuritySummary s;
    s.total = j.at("total").get<std::size_t>();
    s.compiled = j.at("compiled").get<std::size_t>();
    s.compiled_with_findings = j.at("compiled_with_findings").get<std::size_t>();
    s.com_pass = j.at("ComPass").get<double>();
    s.vul_rate = j.at("VulRate").get<double>();
    s.safe_aval = j.at("SafeAval").get<double>();
    s.approximate = j.at("approximate").get<bool>();
    for (const auto& [k, v] : j.at("per_class").items()) s.per_class[k] = v.get<std::size_t>();
    return s;
}

}  // namespace forge::security
