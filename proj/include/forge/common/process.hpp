#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace forge {

class SpawnError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ProcessResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

/// Runs argv[0] (looked up on PATH) with stdin closed and both output streams
/// captured. Throws SpawnError when the program cannot be started.
ProcessResult run_process(const std::vector<std::string>& argv);

/// Caps the number of concurrently running child processes.
void set_process_limit(std::size_t limit);

}  // namespace forge
