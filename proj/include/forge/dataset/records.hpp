#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "forge/common/random.hpp"
#include "forge/frontend/lexer.hpp"

namespace forge::data {

enum class Stage { CI, VD, TI };
enum class Tag { Security, Vulnerable, None };
enum class InfillMode { PSM, SPM };

// Sentinels and prompt strings of the three training formats.
inline constexpr std::string_view kPre = "<PRE>";
inline constexpr std::string_view kSuf = "<SUF>";
inline constexpr std::string_view kMid = "<MID>";
inline constexpr std::string_view kTagOpen = "[Tag]";
inline constexpr std::string_view kTagClose = "[/Tag]";
inline constexpr std::string_view kDetectPrompt = "whether this smart contract Code is a correct solution:";
inline constexpr std::string_view kGeneratePrompt = "Please give the contract code";

std::string_view to_string(Stage stage);
std::string_view to_string(Tag tag);
std::string_view to_string(InfillMode mode);
Stage parse_stage(std::string_view text);  // accepts "CI"/"ci", ...
Tag parse_tag(std::string_view text);

/// "[Tag]<security>[/Tag]" or "[Tag]<vulnerable>[/Tag]".
std::string tag_block(Tag tag);

struct TrainingRecord {
    Stage stage = Stage::CI;
    std::string input_text;
    std::string target_text;
    Tag tag = Tag::None;
    std::string source_id;

    friend bool operator==(const TrainingRecord&, const TrainingRecord&) = default;
};

/// Throws std::invalid_argument when the record breaks its stage's format contract.
void validate(const TrainingRecord& record);

struct DatasetSplit {
    std::vector<TrainingRecord> train;
    std::vector<TrainingRecord> valid;
    std::vector<TrainingRecord> test;
    std::uint64_t seed = 0;
};

class TooShort : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class TooFew : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
class MissingInstruction : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shuffles under `seed`, then |valid| = |test| = floor(N/10) and the rest is train.
DatasetSplit split_811(std::vector<TrainingRecord> records, std::uint64_t seed);

// JSONL line schema: {"stage","input_text","target_text","tag","source_id"}.
std::string to_jsonl(const TrainingRecord& record);
TrainingRecord record_from_json_line(std::string_view line);
void write_jsonl(const std::filesystem::path& path, const std::vector<TrainingRecord>& records);
std::vector<TrainingRecord> read_jsonl(const std::filesystem::path& path);

}  // namespace forge::data
