#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "forge/dataset/builders.hpp"

namespace forge::synth {

/// Deterministic synthetic Solidity corpus for desk-scale runs.
///
/// Every contract is a single-contract ether vault with a leading NatSpec
/// instruction. Vulnerable variants pay out before updating balances and guard
/// the admin function with `tx.origin`; secure variants follow
/// checks-effects-interactions and guard with `msg.sender`.
struct ToyContract {
    std::string id;
    std::string instruction;
    std::string source;  // full file text, including the leading comment
    std::string secure_twin;  // same contract in its secure form, comment included
    data::Tag label = data::Tag::Security;
};

struct ToyTask {
    std::string task_id;
    std::string instruction;
    std::string reference_code;
};

/// The token sequence planted in vulnerable variants only.
inline constexpr std::string_view kVulnerableMarker = "tx.origin";

std::vector<ToyContract> make_toy_corpus(std::size_t count, std::uint64_t seed, double vulnerable_fraction = 0.5);
std::vector<ToyTask> make_toy_tasks(std::size_t count, std::uint64_t seed);

std::vector<data::LabeledContract> as_labeled(const std::vector<ToyContract>& corpus);

/// Writes `<dir>/contracts/<id>.sol`, `<dir>/labels.jsonl` and, when tasks are
/// given, `<dir>/tasks.jsonl`. `multi_contract_extras` adds files holding two
/// contracts (labeled security) that an ingest filter must drop.
void write_toy_corpus(const std::filesystem::path& dir, const std::vector<ToyContract>& corpus,
                      const std::vector<ToyTask>& tasks, std::size_t multi_contract_extras = 0);

}  // namespace forge::synth
