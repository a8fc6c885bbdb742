#include "forge/dataset/records.hpp"

#include <fstream>

#include "json.hpp"

namespace forge::data {

std::string_view to_string(Stage stage) {
    switch (stage) {
        case Stage::CI: return "CI";
        case Stage::VD: return "VD";
        case Stage::TI: return "TI";
    }
    return "?";
}

std::string_view to_string(Tag tag) {
    switch (tag) {
        case Tag::Security: return "security";
        case Tag::Vulnerable: return "vulnerable";
        case Tag::None: return "none";
    }
    return "?";
}

std::string_view to_string(InfillMode mode) { return mode == InfillMode::PSM ? "PSM" : "SPM"; }

Stage parse_stage(std::string_view text) {
    if (text == "CI" || text == "ci") return Stage::CI;
    if (text == "VD" || text == "vd") return Stage::VD;
    if (text == "TI" || text == "ti") return Stage::TI;
    throw std::invalid_argument("unknown stage: " + std::string(text));
}

Tag parse_tag(std::string_view text) {
    if (text == "security") return Tag::Security;
    if (text == "vulnerable") return Tag::Vulnerable;
    if (text == "none") return Tag::None;
    throw std::invalid_argument("unknown tag: " + std::string(text));
}

std::string tag_block(Tag tag) {
    if (tag == Tag::None) throw std::invalid_argument("tag block needs security or vulnerable");
    std::string out(kTagOpen);
    out += '<';
    out += to_string(tag);
    out += '>';
    out += kTagClose;
    return out;
}

void validate(const TrainingRecord& r) {
    switch (r.stage) {
        case Stage::CI:
            if (r.tag != Tag::None) throw std::invalid_argument("CI record must not carry a tag");
            break;
        case Stage::VD:
            if (r.target_text != tag_block(Tag::Security) && r.target_text != tag_block(Tag::Vulnerable)) {
                throw std::invalid_argument("VD target must be a tag block");
            }
            if (r.target_text != tag_block(r.tag)) throw std::invalid_argument("VD target disagrees with tag");
            break;
        case Stage::TI:
            if (r.tag == Tag::None) throw std::invalid_argument("TI record needs a tag");
            if (!r.input_text.ends_with(tag_block(r.tag))) throw std::invalid_argument("TI input must end with its tag block");
            break;
    }
}

DatasetSplit split_811(std::vector<TrainingRecord> records, std::uint64_t seed) {
    const std::size_t n = records.size();
    if (n < 10) throw TooFew("split needs at least 10 records, got " + std::to_string(n));
    Rng rng(derive_seed(seed, "split_811"));
    shuffle(records, rng);
    const std::size_t tenth = n / 10;
    DatasetSplit split;
    split.seed = seed;
    const auto train_end = records.begin() + static_cast<std::ptrdiff_t>(n - 2 * tenth);
    const auto valid_end = train_end + static_cast<std::ptrdiff_t>(tenth);
    split.train.assign(std::make_move_iterator(records.begin()), std::make_move_iterator(train_end));
    split.valid.assign(std::make_move_iterator(train_end), std::make_move_iterator(valid_end));
    split.test.assign(std::make_move_iterator(valid_end), std::make_move_iterator(records.end()));
    return split;
}

std::string to_jsonl(const TrainingRecord& r) {
    nlohmann::ordered_json j;
    j["stage"] = to_string(r.stage);
    j["input_text"] = r.input_text;
    j["target_text"] = r.target_text;
    j["tag"] = to_string(r.tag);
    j["source_id"] = r.source_id;
    return j.dump();
}

TrainingRecord record_from_json_line(std::string_view line) {
    auto j = nlohmann::json::parse(line);
    TrainingRecord r;
    r.stage = parse_stage(j.at("stage").get<std::string>());
    r.input_text = j.at("input_text").get<std::string>();
    r.target_text = j.at("target_text").get<std::string>();
    r.tag = parse_tag(j.at("tag").get<std::string>());
    r.source_id = j.at("source_id").get<std::string>();
    return r;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<TrainingRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) out << to_jsonl(r) << '\n';
}

std::vector<TrainingRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<TrainingRecord> out;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) out.push_back(record_from_json_line(line));
    }
    return out;
}

}  // namespace forge::data
