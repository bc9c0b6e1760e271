#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "askit/llm_client.hpp"
#include "askit/prompt_codec.hpp"
#include "askit/sandbox.hpp"
#include "askit/task.hpp"

namespace askit {

/// Executables used to check and run generated code.
struct Toolchain {
    std::string tsc = "tsc";
    std::string node = "node";
    std::string python = "python3";
    /// Passed to tsc as --typeRoots so generated code can use Node APIs.
    std::filesystem::path type_roots = "/usr/lib/node_modules/@types";
};

/// Which `define`d tasks may be compiled. Units group functions by name prefix.
struct CodableAllowlist {
    std::set<std::string> functions;
    std::set<std::string> units;

    bool permits(const std::string& name) const;
};

struct CodegenConfig {
    int max_retries = 9;
    double temperature = 1.0;
    std::filesystem::path cache_dir = "askit";
    std::optional<CodableAllowlist> codable_allowlist;
    bool require_param_schemas = true;
    Toolchain toolchain;
    std::chrono::milliseconds check_timeout{60'000};
    std::chrono::milliseconds test_timeout{10'000};
    std::filesystem::path scratch_root = std::filesystem::temp_directory_path();

    void check() const;
};

struct GeneratedFunction {
    std::string source;
    std::string entry;
    Target language = Target::TypeScript;
    std::filesystem::path cache_path;
    int retries_used = 0;
    /// What the harness loads: the compiled `.cjs` for TypeScript, the source for Python.
    std::filesystem::path runnable_path;
};

/// The checker or runtime for the target language is not installed.
class ToolchainUnavailable : public Error {
public:
    using Error::Error;
};

/// Generated code exited abnormally or raised.
class ExecutionError : public Error {
public:
    ExecutionError(const std::string& what, std::string diagnostics)
        : Error(what), diagnostics_(std::move(diagnostics))
    {
    }
    const std::string& diagnostics() const noexcept { return diagnostics_; }

private:
    std::string diagnostics_;
};

class InvokeTimeout : public Error {
public:
    using Error::Error;
};

/// The harness answered with something that is not a protocol document.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class GenerationFailed : public Error {
public:
    GenerationFailed(Violation last, std::vector<std::string> transcript, int attempts);
    const Violation& violation() const noexcept { return last_; }
    const std::vector<std::string>& transcript() const noexcept { return transcript_; }
    int attempts() const noexcept { return attempts_; }

private:
    Violation last_;
    std::vector<std::string> transcript_;
    int attempts_;
};

class NotCodable : public Error {
public:
    using Error::Error;
};

/// Result of checking a candidate: a violation, or the loadable artifact.
struct CheckedSource {
    std::optional<Violation> violation;
    std::filesystem::path runnable_path;
};

/// Parses (TypeScript: type-checks and emits `<entry>.cjs`) the source in a
/// sandboxed child, writing artifacts into `out_dir`.
/// Throws ToolchainUnavailable when the checker is missing.
CheckedSource check_source(const std::string& source, const std::string& entry, Target language,
                           const std::filesystem::path& out_dir, const CodegenConfig& config);

/// Syntax check in a throwaway directory; nullopt means the source is accepted.
std::optional<Violation> syntax_check(const std::string& source, Target language, const CodegenConfig& config = {});

/// Harness request line: `{"entry":<name>,"args":{...}}`.
std::string harness_request(const std::string& entry, const ArgBinding& args);
/// Decodes a harness reply line; throws ExecutionError or ProtocolError.
Json decode_harness_reply(const std::string& line, const std::string& diagnostics);

/// Runs the function once in a fresh sandboxed child.
Json invoke(const GeneratedFunction& fn, const ArgBinding& args, std::chrono::milliseconds timeout,
            const CodegenConfig& config = {});

/// Keeps one sandboxed harness child alive across calls. Calls are serialized.
class FunctionRunner {
public:
    FunctionRunner(GeneratedFunction fn, CodegenConfig config);
    Json call(const ArgBinding& args, std::chrono::milliseconds timeout);
    Json call(const ArgBinding& args) { return call(args, config_.test_timeout); }
    const GeneratedFunction& function() const noexcept { return fn_; }

private:
    void start();

    GeneratedFunction fn_;
    CodegenConfig config_;
    std::mutex mu_;
    std::unique_ptr<ScratchDir> scratch_;
    std::unique_ptr<WorkerProcess> worker_;
};

/// Structural equality; non-integral numbers compare with relative tolerance 1e-6.
bool output_equal(const Json& expected, const Json& actual);

/// `<slug>_<8 hex>` naming a task's cache entry.
std::string cache_stem(const TaskSpec& spec);
/// Full hex digest over template, task name, return/param schemas and target language.
std::string cache_digest(const TaskSpec& spec);

std::filesystem::path cache_store(const TaskSpec& spec, const std::string& source, int retries_used,
                                  const CodegenConfig& config);
std::optional<GeneratedFunction> cache_lookup(const TaskSpec& spec, const CodegenConfig& config);

/// Generates, validates and caches code for the task. Does not consult the cache.
GeneratedFunction generate(LlmClient& client, const TaskSpec& spec, const CodegenConfig& config);

/// cache_lookup, else generate, holding a per-entry file lock so that
/// concurrent callers for the same task generate once.
GeneratedFunction compile_task(LlmClient& client, const TaskSpec& spec, const CodegenConfig& config);

/// Number of non-blank, non-comment-only lines.
int count_loc(const std::string& source, Target language);

} // namespace askit
