#include "forge/synth/toy_corpus.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "json.hpp"

namespace forge::synth {

namespace {

constexpr std::array<std::string_view, 8> kPrefixes = {"Simple", "Ether", "Shared", "Family", "Club", "Team", "City", "Open"};
constexpr std::array<std::string_view, 10> kBases = {"Vault", "Bank", "Treasury", "Escrow", "Wallet",
                                                     "Fund", "Safe", "Reserve", "Pool", "Jar"};
constexpr std::array<std::string_view, 4> kBalanceVars = {"balances", "deposits", "credits", "funds"};
constexpr std::array<std::string_view, 4> kDepositFns = {"deposit", "fund", "addFunds", "topUp"};
constexpr std::array<std::string_view, 4> kWithdrawFns = {"withdraw", "cashOut", "redeem", "claim"};
constexpr std::array<std::string_view, 3> kOwnerFns = {"setOwner", "changeOwner", "transferOwnership"};

template <std::size_t N>
std::string pick(const std::array<std::string_view, N>& pool, Rng& rng) {
    return std::string(pool[uniform_below(rng, N)]);
}

struct Shape {
    std::string name, balances, deposit, withdraw, set_owner;
    bool has_view = false;
    bool has_event = false;
};

Shape draw_shape(Rng& rng) {
    Shape s;
    s.name = pick(kPrefixes, rng) + pick(kBases, rng);
    s.balances = pick(kBalanceVars, rng);
    s.deposit = pick(kDepositFns, rng);
    s.withdraw = pick(kWithdrawFns, rng);
    s.set_owner = pick(kOwnerFns, rng);
    s.has_view = (rng() & 1) != 0;
    s.has_event = (rng() & 1) != 0;
    return s;
}

std::string instruction_for(const Shape& s) {
    std::string text = s.name + " keeps ether for its users. Users call " + s.deposit + " to add ether and " +
                       s.withdraw + " to take out an amount. The owner can hand over control with " + s.set_owner + ".";
    if (s.has_view) text += " Anyone can read a balance with balanceOf.";
    if (s.has_event) text += " Every withdrawal emits an event.";
    return text;
}

std::string code_for(const Shape& s, bool vulnerable) {
    std::string c;
    c += "pragma solidity ^0.8.0;\n\n";
    c += "contract " + s.name + " {\n";
    c += "    mapping(address => uint256) public " + s.balances + ";\n";
    c += "    address public owner;\n";
    if (s.has_event) c += "    event Withdrawn(address who, uint256 amount);\n";
    c += "\n    constructor() {\n        owner = msg.sender;\n    }\n\n";
    c += "    function " + s.set_owner + "(address newOwner) external {\n";
    c += vulnerable ? "        require(tx.origin == owner);\n" : "        require(msg.sender == owner);\n";
    c += "        owner = newOwner;\n    }\n\n";
    c += "    function " + s.deposit + "() external payable {\n";
    c += "        " + s.balances + "[msg.sender] += msg.value;\n    }\n\n";
    c += "    function " + s.withdraw + "(uint256 amount) external {\n";
    c += "        require(" + s.balances + "[msg.sender] >= amount);\n";
    const std::string pay = "        (bool ok, ) = msg.sender.call{value: amount}(\"\");\n        require(ok);\n";
    const std::string debit = "        " + s.balances + "[msg.sender] -= amount;\n";
    c += vulnerable ? pay + debit : debit + pay;
    if (s.has_event) c += "        emit Withdrawn(msg.sender, amount);\n";
    c += "    }\n";
    if (s.has_view) {
        c += "\n    function balanceOf(address who) external view returns (uint256) {\n";
        c += "        return " + s.balances + "[who];\n    }\n";
    }
    c += "}\n";
    return c;
}

}  // namespace

std::vector<ToyContract> make_toy_corpus(std::size_t count, std::uint64_t seed, double vulnerable_fraction) {
    std::vector<ToyContract> out;
    out.reserve(count);
    Rng rng(derive_seed(seed, "toy_corpus"));
    for (std::size_t i = 0; i < count; ++i) {
        Shape shape = draw_shape(rng);
        const bool vulnerable = uniform_unit(rng) < vulnerable_fraction;
        ToyContract tc;
        char id[32];
        std::snprintf(id, sizeof id, "toy_%04zu", i);
        tc.id = id;
        tc.instruction = instruction_for(shape);
        const std::string header = "// SPDX-License-Identifier: MIT\n";
        const std::string doc = "/// @notice " + tc.instruction + "\n";
        std::string code = code_for(shape, vulnerable);
        // The doc comment sits directly above the contract keyword.
        auto contract_pos = code.find("contract ");
        tc.source = header + code.substr(0, contract_pos) + doc + code.substr(contract_pos);
        std::string twin = code_for(shape, false);
        auto twin_pos = twin.find("contract ");
        tc.secure_twin = header + twin.substr(0, twin_pos) + doc + twin.substr(twin_pos);
        tc.label = vulnerable ? data::Tag::Vulnerable : data::Tag::Security;
        out.push_back(std::move(tc));
    }
    return out;
}

std::vector<ToyTask> make_toy_tasks(std::size_t count, std::uint64_t seed) {
    std::vector<ToyTask> out;
    Rng rng(derive_seed(seed, "toy_tasks"));
    for (std::size_t i = 0; i < count; ++i) {
        Shape shape = draw_shape(rng);
        char id[32];
        std::snprintf(id, sizeof id, "task_%02zu", i);
        out.push_back({id, instruction_for(shape), code_for(shape, false)});
    }
    return out;
}

std::vector<data::LabeledContract> as_labeled(const std::vector<ToyContract>& corpus) {
    std::vector<data::LabeledContract> out;
    out.reserve(corpus.size());
    for (const auto& c : corpus) out.push_back({c.id, sol::ContractSource::make(c.source, c.id), c.label});
    return out;
}

void write_toy_corpus(const std::filesystem::path& dir, const std::vector<ToyContract>& corpus,
                      const std::vector<ToyTask>& tasks, std::size_t multi_contract_extras) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "contracts");
    std::ofstream labels(dir / "labels.jsonl", std::ios::binary);
    for (const auto& c : corpus) {
        std::ofstream(dir / "contracts" / (c.id + ".sol"), std::ios::binary) << c.source;
        labels << nlohmann::ordered_json{{"id", c.id}, {"label", data::to_string(c.label)}}.dump() << '\n';
    }
    for (std::size_t i = 0; i < multi_contract_extras; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "multi_%02zu", i);
        std::string text = "pragma solidity ^0.8.0;\n\ninterface IReceiver" + std::to_string(i) +
                           " {\n    function onReceive(uint256 amount) external;\n}\n\n" + "contract Sender" +
                           std::to_string(i) + " {\n    function ping(IReceiver" + std::to_string(i) +
                           " r) external {\n        r.onReceive(1);\n    }\n}\n";
        std::ofstream(dir / "contracts" / (std::string(id) + ".sol"), std::ios::binary) << text;
        labels << nlohmann::ordered_json{{"id", id}, {"label", "security"}}.dump() << '\n';
    }
    if (!tasks.empty()) {
        std::ofstream out(dir / "tasks.jsonl", std::ios::binary);
        for (const auto& t : tasks) {
            out << nlohmann::ordered_json{{"task_id", t.task_id}, {"instruction", t.instruction}, {"reference_code", t.reference_code}}
                       .dump()
                << '\n';
        }
    }
}

}  // namespace forge::synth
