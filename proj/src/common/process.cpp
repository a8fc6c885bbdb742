#include "forge/common/process.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <mutex>

extern char** environ;

namespace forge {

namespace {

std::mutex limit_mu;
std::condition_variable limit_cv;
std::size_t limit = 4;
std::size_t running = 0;

struct Slot {
    Slot() {
        std::unique_lock lock(limit_mu);
        limit_cv.wait(lock, [] { return running < limit; });
        ++running;
    }
    ~Slot() {
        {
            std::lock_guard lock(limit_mu);
            --running;
        }
        limit_cv.notify_one();
    }
};

std::string slurp_fd(int fd) {
    std::string out;
    lseek(fd, 0, SEEK_SET);
    char buf[4096];
    ssize_t n;
    while ((n = read(fd, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(n));
    return out;
}

int temp_fd() {
    char name[] = "/tmp/forge-proc-XXXXXX";
    int fd = mkstemp(name);
    if (fd < 0) throw SpawnError(std::string("mkstemp: ") + std::strerror(errno));
    unlink(name);
    return fd;
}

}  // namespace

void set_process_limit(std::size_t n) {
    std::lock_guard lock(limit_mu);
    limit = n == 0 ? 1 : n;
    limit_cv.notify_all();
}

ProcessResult run_process(const std::vector<std::string>& argv) {
    if (argv.empty()) throw SpawnError("empty command line");
    Slot slot;
    const int out_fd = temp_fd();
    const int err_fd = temp_fd();

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
    posix_spawn_file_actions_adddup2(&actions, out_fd, 1);
    posix_spawn_file_actions_adddup2(&actions, err_fd, 2);

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) {
        close(out_fd);
        close(err_fd);
        throw SpawnError("cannot start " + argv[0] + ": " + std::strerror(rc));
    }
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) {
            close(out_fd);
            close(err_fd);
            throw SpawnError("waitpid failed for " + argv[0]);
        }
    }
    ProcessResult result;
    result.out = slurp_fd(out_fd);
    result.err = slurp_fd(err_fd);
    close(out_fd);
    close(err_fd);
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else {
        throw SpawnError(argv[0] + " terminated by signal " + std::to_string(WTERMSIG(status)));
    }
    return result;
}

}  // namespace forge
