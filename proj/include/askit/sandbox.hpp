#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "askit/error.hpp"

namespace askit {

/// Executable not found on PATH.
class ToolNotFound : public Error {
public:
    using Error::Error;
};

/// Child did not answer before its deadline. The child has been killed.
class ProcessTimeout : public Error {
public:
    using Error::Error;
};

/// Temporary directory removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& parent = std::filesystem::temp_directory_path(),
                        std::string_view prefix = "askit-");
    ~ScratchDir();
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;
    ScratchDir(ScratchDir&& other) noexcept;
    ScratchDir& operator=(ScratchDir&&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

struct SandboxOptions {
    /// Only directory the child may create, modify or delete files in.
    std::filesystem::path writable_dir;
    std::chrono::milliseconds timeout{10'000};
    std::size_t max_output_bytes = 16 * 1024 * 1024;
    std::size_t max_file_bytes = 64 * 1024 * 1024;
};

struct ProcessResult {
    int exit_code = -1;
    int term_signal = 0;
    std::string out;
    std::string err;
};

/// True when the kernel supports Landlock filesystem restrictions.
bool filesystem_isolation_available();

/// Absolute path of `program` (searched on PATH unless it contains '/'),
/// or throws ToolNotFound.
std::filesystem::path find_executable(const std::string& program);

/// Runs `argv` to completion in the sandbox, feeding `input` on stdin.
/// Throws ProcessTimeout when the deadline passes.
ProcessResult run_sandboxed(const std::vector<std::string>& argv, std::string_view input,
                            const SandboxOptions& options);

/// Long-lived sandboxed child speaking a line protocol: one request line in,
/// one response line out.
class WorkerProcess {
public:
    WorkerProcess(const std::vector<std::string>& argv, SandboxOptions options);
    ~WorkerProcess();
    WorkerProcess(const WorkerProcess&) = delete;
    WorkerProcess& operator=(const WorkerProcess&) = delete;

    /// Sends one line and waits for one line back. Returns nullopt when the
    /// child exits before answering. Throws ProcessTimeout (and kills the child).
    std::optional<std::string> request(std::string_view line, std::chrono::milliseconds timeout);

    bool alive() const noexcept { return pid_ > 0; }
    /// Exit code/signal after the child ended, and its stderr so far.
    ProcessResult finish();
    std::string stderr_text() const;

private:
    void kill_child();

    SandboxOptions options_;
    pid_t pid_ = -1;
    int in_fd_ = -1;
    int out_fd_ = -1;
    std::string buffer_;
    std::filesystem::path stderr_path_;
    int exit_code_ = -1;
    int term_signal_ = 0;
};

} // namespace askit
