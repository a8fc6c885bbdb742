// Writes a synthetic vault corpus: contracts/, labels.jsonl and tasks.jsonl.
#include <iostream>

#include "CLI11.hpp"
#include "forge/synth/toy_corpus.hpp"

int main(int argc, char** argv) {
    CLI::App app{"forge-toy: write a synthetic contract corpus"};
    std::string dir = "corpus";
    std::size_t contracts = 200, tasks = 10;
    std::uint64_t seed = 0;
    double vulnerable = 0.5;
    app.add_option("dir", dir, "output directory");
    app.add_option("--contracts", contracts, "number of contracts");
    app.add_option("--tasks", tasks, "number of evaluation tasks");
    app.add_option("--seed", seed, "generator seed");
    app.add_option("--vulnerable", vulnerable, "fraction of vulnerable contracts")->check(CLI::Range(0.0, 1.0));
    CLI11_PARSE(app, argc, argv);
    forge::synth::write_toy_corpus(dir, forge::synth::make_toy_corpus(contracts, seed, vulnerable),
                                   forge::synth::make_toy_tasks(tasks, seed + 1));
    std::cout << "wrote " << contracts << " contracts and " << tasks << " tasks to " << dir << "\n";
    return 0;
}
