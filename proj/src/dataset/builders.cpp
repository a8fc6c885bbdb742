#include "forge/dataset/builders.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include <spdlog/spdlog.h>

namespace forge::data {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> comment_lines(std::string_view comment) {
    std::vector<std::string> lines;
    if (comment.starts_with("//")) {
        comment.remove_prefix(comment.starts_with("///") ? 3 : 2);
        lines.push_back(trim(comment));
        return lines;
    }
    comment.remove_prefix(comment.starts_with("/**") ? 3 : 2);
    if (comment.ends_with("*/")) comment.remove_suffix(2);
    std::istringstream in{std::string(comment)};
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        while (!t.empty() && t.front() == '*') t = trim(std::string_view(t).substr(1));
        lines.push_back(t);
    }
    return lines;
}

std::string clean_line(std::string line) {
    if (line.starts_with("@")) {
        const auto space = line.find(' ');
        line = space == std::string::npos ? std::string() : trim(std::string_view(line).substr(space + 1));
    }
    return line;
}

}  // namespace

std::pair<std::size_t, std::size_t> split_five_segments(std::size_t n, Rng& rng) {
    if (n < 10) throw TooShort("infilling needs at least 10 tokens, got " + std::to_string(n));
    const std::size_t s = n / 5;
    const std::size_t j = s + static_cast<std::size_t>(uniform_below(rng, s));
    const std::size_t k = 3 * s + static_cast<std::size_t>(uniform_below(rng, s));
    return {j, k};
}

std::pair<std::size_t, std::size_t> split_five_segments(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    return split_five_segments(n, rng);
}

InfillExample make_infill(const sol::TokenStream& tokens, std::size_t j, std::size_t k, InfillMode mode,
                          std::string source_id) {
    const auto& t = tokens.tokens;
    if (!(0 < j && j < k && k < t.size())) throw std::invalid_argument("infill cut points out of range");
    InfillExample ex;
    ex.pre.assign(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(j));
    ex.mid.assign(t.begin() + static_cast<std::ptrdiff_t>(j), t.begin() + static_cast<std::ptrdiff_t>(k));
    ex.suf.assign(t.begin() + static_cast<std::ptrdiff_t>(k), t.end());
    const std::size_t mid_begin = t[j].span.begin;
    const std::size_t suf_begin = t[k].span.begin;
    ex.pre_text = tokens.source.substr(0, mid_begin);
    ex.mid_text = tokens.source.substr(mid_begin, suf_begin - mid_begin);
    ex.suf_text = tokens.source.substr(suf_begin);
    ex.mode = mode;
    ex.j = j;
    ex.k = k;
    ex.source_id = std::move(source_id);
    return ex;
}

std::pair<std::string, std::string> render_infill(const InfillExample& ex) {
    std::string input;
    if (ex.mode == InfillMode::PSM) {
        input.append(kPre).append(ex.pre_text).append(kSuf).append(ex.suf_text).append(kMid);
    } else {
        input.append(kPre).append(kSuf).append(ex.suf_text).append(kMid).append(ex.pre_text);
    }
    return {std::move(input), ex.mid_text};
}

bool contains_reserved(std::string_view text) {
    for (std::string_view atom : {kPre, kSuf, kMid, kTagOpen, kTagClose}) {
        if (text.find(atom) != std::string_view::npos) return true;
    }
    return text.find("<EOT>") != std::string_view::npos;
}

std::vector<TrainingRecord> build_ci_dataset(const std::vector<LabeledContract>& corpus, std::uint64_t seed) {
    std::vector<TrainingRecord> records;
    records.reserve(corpus.size() * kInfillDrawsPerContract);
    std::size_t vulnerable = 0;
    for (const auto& entry : corpus) {
        if (entry.label != Tag::Security) {
            spdlog::debug("ci: skipping {} (not labeled security)", entry.id);
            ++vulnerable;
            continue;
        }
        const std::string code = sol::strip_comments(entry.source.text);
        if (contains_reserved(code)) {
            spdlog::warn("ci: skipping {} (contains a reserved sentinel)", entry.id);
            continue;
        }
        const sol::TokenStream tokens = sol::tokenize(code);
        Rng rng(derive_seed(seed, entry.id));
        try {
            for (int draw = 0; draw < kInfillDrawsPerContract; ++draw) {
                auto [j, k] = split_five_segments(tokens.size(), rng);
                const InfillMode mode = (rng() >> 63) == 0 ? InfillMode::PSM : InfillMode::SPM;
                auto [input, target] = render_infill(make_infill(tokens, j, k, mode, entry.id));
                records.push_back({Stage::CI, std::move(input), std::move(target), Tag::None, entry.id});
            }
        } catch (const TooShort& e) {
            spdlog::warn("ci: skipping {} ({})", entry.id, e.what());
        }
    }
    if (vulnerable > 0) spdlog::info("ci: skipped {} contracts not labeled security", vulnerable);
    Rng rng(derive_seed(seed, "ci_shuffle"));
    shuffle(records, rng);
    return records;
}

std::vector<TrainingRecord> build_vd_dataset(const std::vector<LabeledContract>& corpus) {
    std::vector<TrainingRecord> records;
    records.reserve(corpus.size());
    for (const auto& entry : corpus) {
        if (entry.label == Tag::None) throw std::invalid_argument("vd: unlabeled contract " + entry.id);
        std::string code = sol::strip_comments(entry.source.text);
        if (contains_reserved(code)) {
            spdlog::warn("vd: skipping {} (contains a reserved sentinel)", entry.id);
            continue;
        }
        std::string input = std::move(code);
        input += '\n';
        input += kDetectPrompt;
        records.push_back({Stage::VD, std::move(input), tag_block(entry.label), entry.label, entry.id});
    }
    return records;
}

std::string instruction_prompt(std::string_view instruction, Tag tag) {
    std::string input(instruction);
    input += '\n';
    input += kGeneratePrompt;
    input += '\n';
    input += tag_block(tag);
    return input;
}

TrainingRecord make_ti_record(const InstructionSample& sample) {
    if (trim(sample.instruction).empty()) throw MissingInstruction("no instruction for " + sample.id);
    return {Stage::TI, instruction_prompt(sample.instruction, sample.label), sample.code, sample.label, sample.id};
}

std::vector<TrainingRecord> build_ti_dataset(const std::vector<InstructionSample>& samples) {
    std::vector<TrainingRecord> records;
    records.reserve(samples.size());
    for (const auto& s : samples) records.push_back(make_ti_record(s));
    return records;
}

std::string extract_instruction(std::string_view source) {
    const sol::TokenStream ts = sol::tokenize(source);
    auto is_decl = [](const sol::Token& t) {
        return t.kind == sol::TokenKind::Keyword &&
               (t.lexeme == "contract" || t.lexeme == "library" || t.lexeme == "interface" || t.lexeme == "abstract");
    };
    // Adjacent: only whitespace in between and no blank line.
    auto adjacent = [&](std::size_t from, std::size_t to) {
        const auto gap = source.substr(from, to - from);
        return gap.find_first_not_of(" \t\r\n") == std::string_view::npos &&
               std::count(gap.begin(), gap.end(), '\n') <= 1;
    };

    std::vector<sol::Span> block;
    auto decl = std::find_if(ts.tokens.begin(), ts.tokens.end(), is_decl);
    if (decl != ts.tokens.end()) {
        std::size_t anchor = decl->span.begin;
        for (auto it = ts.comments.rbegin(); it != ts.comments.rend(); ++it) {
            if (it->end > anchor) continue;
            if (!adjacent(it->end, anchor)) break;
            block.insert(block.begin(), *it);
            anchor = it->begin;
        }
    }
    if (block.empty()) {
        const std::size_t first = ts.tokens.empty() ? source.size() : ts.tokens.front().span.begin;
        for (const auto& c : ts.comments) {
            if (c.end <= first) block.push_back(c);
        }
    }

    std::string out;
    for (const auto& span : block) {
        for (auto& raw : comment_lines(source.substr(span.begin, span.size()))) {
            if (raw.starts_with("SPDX-License-Identifier")) continue;
            std::string line = clean_line(raw);
            if (line.empty()) continue;
            if (!out.empty()) out += ' ';
            out += line;
        }
    }
    return out;
}

std::vector<InstructionSample> instruction_samples(const std::vector<LabeledContract>& corpus) {
    std::vector<InstructionSample> out;
    for (const auto& entry : corpus) {
        std::string instruction = extract_instruction(entry.source.text);
        if (instruction.empty()) {
            spdlog::info("ti: dropping {} (no leading comment block)", entry.id);
            continue;
        }
        std::string code = sol::strip_comments(entry.source.text);
        if (contains_reserved(code) || contains_reserved(instruction)) {
            spdlog::warn("ti: skipping {} (contains a reserved sentinel)", entry.id);
            continue;
        }
        out.push_back({entry.id, std::move(instruction), std::move(code), entry.label});
    }
    return out;
}

std::vector<LabeledContract> load_corpus(const std::filesystem::path& dir, const std::filesystem::path& labels) {
    namespace fs = std::filesystem;
    std::map<std::string, Tag> label_of;
    {
        std::ifstream in(labels, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read labels file " + labels.string());
        std::string line;
        while (std::getline(in, line)) {
            if (trim(line).empty()) continue;
            auto j = nlohmann::json::parse(line);
            label_of[j.at("id").get<std::string>()] = parse_tag(j.at("label").get<std::string>());
        }
    }
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".sol") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<LabeledContract> corpus;
    for (const auto& path : files) {
        std::string id = fs::relative(path, dir).replace_extension().generic_string();
        auto it = label_of.find(id);
        if (it == label_of.end()) {
            spdlog::warn("corpus: no label for {}", id);
            continue;
        }
        std::ifstream in(path, std::ios::binary);
        std::stringstream buf;
        buf << in.rdbuf();
        corpus.push_back({id, sol::ContractSource::make(buf.str(), path.generic_string()), it->second});
    }
    return corpus;
}

}  // namespace forge::data
