#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "forge/dataset/records.hpp"
#include "forge/frontend/lexer.hpp"

namespace forge::data {

/// One corpus entry with its security label.
struct LabeledContract {
    std::string id;
    sol::ContractSource source;
    Tag label = Tag::Security;
};

/// A fill-in-the-middle split of one token sequence.
///
/// `pre`, `mid` and `suf` partition the tokens at indices `j` and `k`; the text
/// forms keep the inter-token whitespace so that pre + mid + suf is the source.
struct InfillExample {
    std::vector<sol::Token> pre;
    std::vector<sol::Token> mid;
    std::vector<sol::Token> suf;
    std::string pre_text;
    std::string mid_text;
    std::string suf_text;
    InfillMode mode = InfillMode::PSM;
    std::size_t j = 0;
    std::size_t k = 0;
    std::string source_id;
};

/// Cut points for an n-token sequence: with s = floor(n/5), j is uniform in
/// [s, 2s) and k uniform in [3s, 4s). Throws TooShort when n < 10.
std::pair<std::size_t, std::size_t> split_five_segments(std::size_t n, Rng& rng);
std::pair<std::size_t, std::size_t> split_five_segments(std::size_t n, std::uint64_t seed);

InfillExample make_infill(const sol::TokenStream& tokens, std::size_t j, std::size_t k, InfillMode mode,
                          std::string source_id);

/// (input_text, target_text) of an infilling example.
/// PSM: "<PRE>" pre "<SUF>" suf "<MID>" -> mid.  SPM: "<PRE><SUF>" suf "<MID>" pre -> mid.
std::pair<std::string, std::string> render_infill(const InfillExample& example);

/// True if the text contains any reserved sentinel or tag atom.
bool contains_reserved(std::string_view text);

inline constexpr int kInfillDrawsPerContract = 5;

/// Five infilling records per (secure) contract with independent cut points and a
/// fair PSM/SPM coin, shuffled under `seed`. Short or sentinel-bearing sources are skipped.
std::vector<TrainingRecord> build_ci_dataset(const std::vector<LabeledContract>& corpus, std::uint64_t seed);

/// Detection records: comment-stripped code, newline, detection prompt -> tag block.
std::vector<TrainingRecord> build_vd_dataset(const std::vector<LabeledContract>& corpus);

struct InstructionSample {
    std::string id;
    std::string instruction;
    std::string code;
    Tag label = Tag::Security;
};

/// instruction + "\n" + prompt + "\n" + tag block -> code. Throws MissingInstruction.
TrainingRecord make_ti_record(const InstructionSample& sample);
std::vector<TrainingRecord> build_ti_dataset(const std::vector<InstructionSample>& samples);

/// The prompt used at generation time for an instruction and a guiding tag.
std::string instruction_prompt(std::string_view instruction, Tag tag);

/// Leading comment block of a contract as plain text: the comments directly above
/// the first contract declaration (or at the top of the file), markers and NatSpec
/// tags removed, SPDX lines dropped. Empty when there is none.
std::string extract_instruction(std::string_view source);

/// Instruction samples for every contract that has a leading comment block;
/// code is comment-stripped. Contracts without one are dropped with a log line.
std::vector<InstructionSample> instruction_samples(const std::vector<LabeledContract>& corpus);

/// `.sol` files under `dir` (sorted, id = relative path without extension) joined with
/// `labels.jsonl` lines {"id","label"}. Files without a label are skipped.
std::vector<LabeledContract> load_corpus(const std::filesystem::path& dir, const std::filesystem::path& labels);

}  // namespace forge::data
