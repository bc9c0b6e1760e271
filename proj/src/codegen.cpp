#include "askit/codegen.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <sstream>

#include "askit/digest.hpp"

namespace askit {

namespace fs = std::filesystem;

namespace {

// Reads one request per line, answers one reply per line on the original
// stdout. User output is diverted to stderr so it cannot corrupt the protocol.
constexpr std::string_view kNodeHarness = R"JS('use strict';
const out = process.stdout.write.bind(process.stdout);
const toErr = (...a) => process.stderr.write(a.map(String).join(' ') + '\n');
console.log = toErr; console.info = toErr; console.debug = toErr; console.warn = toErr;
let mod = null;
let loadError = null;
try { mod = require(process.argv[2]); } catch (e) { loadError = e; }
const describe = (e) => String(e && e.stack ? e.stack : e);
async function handle(line) {
  let reply;
  try {
    const req = JSON.parse(line);
    if (loadError) throw loadError;
    const fn = mod[req.entry];
    if (typeof fn !== 'function') throw new Error(`entry '${req.entry}' is not an exported function`);
    let result = await fn(req.args);
    if (result === undefined) result = null;
    reply = JSON.stringify({ ok: true, result: result });
  } catch (e) {
    reply = JSON.stringify({ ok: false, error: describe(e) });
  }
  out(reply + '\n');
}
let queue = Promise.resolve();
require('readline').createInterface({ input: process.stdin, terminal: false })
  .on('line', (line) => { if (line.trim()) queue = queue.then(() => handle(line)); });
)JS";

constexpr std::string_view kPythonHarness = R"PY(import json
import sys
import traceback

out = sys.stdout
sys.stdout = sys.stderr
namespace = {"__name__": "askit_generated"}
load_error = None
try:
    exec("from typing import *", namespace)
    with open(sys.argv[1]) as f:
        source = f.read()
    exec(compile(source, sys.argv[1], "exec"), namespace)
except BaseException:
    load_error = traceback.format_exc()

for line in sys.stdin:
    if not line.strip():
        continue
    try:
        request = json.loads(line)
        if load_error:
            raise RuntimeError(load_error)
        fn = namespace.get(request["entry"])
        if not callable(fn):
            raise NameError("entry '%s' is not defined" % request["entry"])
        reply = json.dumps({"ok": True, "result": fn(**request["args"])}, separators=(",", ":"))
    except BaseException:
        reply = json.dumps({"ok": False, "error": traceback.format_exc()}, separators=(",", ":"))
    out.write(reply + "\n")
    out.flush()
)PY";

constexpr std::string_view kPythonChecker =
    "import ast, sys\nwith open(sys.argv[1]) as f:\n    ast.parse(f.read(), sys.argv[1])\n";

void write_text(const fs::path& path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out.flush()) throw IoError("write failed for " + path.string());
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string tool_for(Target language, const Toolchain& tc, bool checker)
{
    if (language == Target::Python) return tc.python;
    return checker ? tc.tsc : tc.node;
}

std::vector<std::string> harness_argv(const GeneratedFunction& fn, const fs::path& scratch, const Toolchain& tc)
{
    if (fn.language == Target::Python) {
        auto script = scratch / "harness.py";
        write_text(script, kPythonHarness);
        return {tc.python, "-I", script.string(), fs::absolute(fn.runnable_path).string()};
    }
    auto script = scratch / "harness.cjs";
    write_text(script, kNodeHarness);
    return {tc.node, script.string(), fs::absolute(fn.runnable_path).string()};
}

bool defines_entry(const std::string& source, const std::string& entry, Target language)
{
    const std::string pattern = language == Target::Python
                                    ? "(^|\\n)\\s*(async\\s+)?def\\s+" + entry + "\\s*\\("
                                    : "function\\s*\\*?\\s*" + entry + "\\b|(const|let|var)\\s+" + entry + "\\b";
    return std::regex_search(source, std::regex(pattern));
}

std::string slugify(const std::string& raw)
{
    std::string head = raw.substr(0, std::min<std::size_t>(40, raw.size()));
    std::string out;
    bool in_run = false;
    for (char c : head) {
        auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) && u < 0x80) {
            out += static_cast<char>(std::tolower(u));
            in_run = false;
        } else if (!in_run) {
            out += '_';
            in_run = true;
        }
    }
    return out;
}

bool is_integral_number(const Json& v)
{
    if (v.is_number_integer() || v.is_number_unsigned()) return true;
    if (!v.is_number_float()) return false;
    double d = v.get<double>();
    return std::isfinite(d) && std::trunc(d) == d;
}

class FileLock {
public:
    explicit FileLock(const fs::path& path)
    {
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
        if (fd_ < 0) throw IoError("cannot open lock file " + path.string());
        while (::flock(fd_, LOCK_EX) != 0) {
            if (errno != EINTR) {
                ::close(fd_);
                throw IoError("cannot lock " + path.string());
            }
        }
    }
    ~FileLock()
    {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    FileLock(const FileLock&) = delete;
    FileLock& operator=(const FileLock&) = delete;

private:
    int fd_ = -1;
};

} // namespace

// ---------------------------------------------------------------------------

bool CodableAllowlist::permits(const std::string& name) const
{
    if (functions.count(name)) return true;
    return std::any_of(units.begin(), units.end(),
                       [&](const std::string& unit) { return name.rfind(unit, 0) == 0; });
}

void CodegenConfig::check() const
{
    if (max_retries < 0) throw Error("max_retries must be >= 0");
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error("temperature must be within [0.0, 2.0]");
}

GenerationFailed::GenerationFailed(Violation last, std::vector<std::string> transcript, int attempts)
    : Error("code generation failed after " + std::to_string(attempts) + " attempts; last violation " +
            std::string(violation_name(last.kind)) + ": " + last.detail),
      last_(std::move(last)),
      transcript_(std::move(transcript)),
      attempts_(attempts)
{
}

// ---------------------------------------------------------------------------
// Checking

CheckedSource check_source(const std::string& source, const std::string& entry, Target language,
                           const fs::path& out_dir, const CodegenConfig& config)
{
    const auto& tc = config.toolchain;
    const std::string tool = tool_for(language, tc, true);
    try {
        find_executable(tool);
    } catch (const ToolNotFound& e) {
        throw ToolchainUnavailable(std::string(target_name(language)) + " checker unavailable: " + e.what());
    }

    fs::create_directories(out_dir);
    SandboxOptions opts;
    opts.writable_dir = out_dir;
    opts.timeout = config.check_timeout;

    CheckedSource checked;
    std::vector<std::string> argv;
    const std::string stem = entry.empty() ? "candidate" : entry;
    fs::path src_path = out_dir / (stem + "." + std::string(file_extension(language)));
    write_text(src_path, source);
    if (language == Target::Python) {
        auto checker = out_dir / ".check.py";
        write_text(checker, kPythonChecker);
        argv = {tc.python, "-I", checker.string(), src_path.string()};
        checked.runnable_path = src_path;
    } else {
        auto emit_dir = out_dir / ".emit";
        argv = {tc.tsc,          src_path.string(), "--outDir", emit_dir.string(), "--module", "commonjs",
                "--target",      "es2020",          "--noEmitOnError", "--skipLibCheck", "--pretty", "false"};
        if (!tc.type_roots.empty() && fs::is_directory(tc.type_roots / "node")) {
            argv.insert(argv.end(), {"--types", "node", "--typeRoots", tc.type_roots.string()});
        }
        checked.runnable_path = out_dir / (stem + ".cjs");
    }

    ProcessResult result;
    try {
        result = run_sandboxed(argv, {}, opts);
    } catch (const ProcessTimeout& e) {
        checked.violation = Violation{Violation::Kind::SyntaxError, std::string("checker timed out: ") + e.what(), {}};
        return checked;
    }
    if (result.exit_code != 0) {
        std::string diag = result.out + result.err;
        if (diag.empty()) diag = "checker exited with status " + std::to_string(result.exit_code);
        checked.violation = Violation{Violation::Kind::SyntaxError, diag, {}};
        return checked;
    }
    if (!entry.empty() && !defines_entry(source, entry, language)) {
        checked.violation =
            Violation{Violation::Kind::SyntaxError, "the code does not define function '" + entry + "'", {}};
        return checked;
    }
    if (language == Target::TypeScript) {
        auto emitted = out_dir / ".emit" / (stem + ".js");
        if (!fs::exists(emitted)) {
            checked.violation = Violation{Violation::Kind::SyntaxError, "compiler produced no output", {}};
            return checked;
        }
        fs::rename(emitted, checked.runnable_path);
        fs::remove_all(out_dir / ".emit");
    }
    return checked;
}

std::optional<Violation> syntax_check(const std::string& source, Target language, const CodegenConfig& config)
{
    ScratchDir scratch(config.scratch_root, "askit-check-");
    return check_source(source, {}, language, scratch.path(), config).violation;
}

// ---------------------------------------------------------------------------
// Execution

std::string harness_request(const std::string& entry, const ArgBinding& args)
{
    Json req = Json::object();
    req["entry"] = entry;
    req["args"] = args.is_null() ? Json::object() : args;
    return req.dump();
}

Json decode_harness_reply(const std::string& line, const std::string& diagnostics)
{
    auto reply = Json::parse(line, nullptr, false);
    if (reply.is_discarded() || !reply.is_object() || !reply.contains("ok") || !reply["ok"].is_boolean()) {
        throw ProtocolError("harness reply is not a protocol document: " + line.substr(0, 200));
    }
    if (reply["ok"].get<bool>()) {
        if (!reply.contains("result")) throw ProtocolError("harness reply lacks 'result'");
        return reply["result"];
    }
    std::string error = reply.value("error", std::string("unknown error"));
    throw ExecutionError("generated function raised: " + error, diagnostics);
}

Json invoke(const GeneratedFunction& fn, const ArgBinding& args, std::chrono::milliseconds timeout,
            const CodegenConfig& config)
{
    const std::string runtime = tool_for(fn.language, config.toolchain, false);
    try {
        find_executable(runtime);
    } catch (const ToolNotFound& e) {
        throw ToolchainUnavailable(e.what());
    }
    ScratchDir scratch(config.scratch_root, "askit-run-");
    SandboxOptions opts;
    opts.writable_dir = scratch.path();
    opts.timeout = timeout;
    auto argv = harness_argv(fn, scratch.path(), config.toolchain);
    ProcessResult result;
    try {
        result = run_sandboxed(argv, harness_request(fn.entry, args) + "\n", opts);
    } catch (const ProcessTimeout& e) {
        throw InvokeTimeout(fn.entry + ": " + e.what());
    }
    auto nl = result.out.find('\n');
    std::string line = result.out.substr(0, nl);
    if (line.empty()) {
        throw ExecutionError(fn.entry + ": harness exited with status " + std::to_string(result.exit_code) +
                                 (result.term_signal ? " (signal " + std::to_string(result.term_signal) + ")" : ""),
                             result.err);
    }
    return decode_harness_reply(line, result.err);
}

FunctionRunner::FunctionRunner(GeneratedFunction fn, CodegenConfig config)
    : fn_(std::move(fn)), config_(std::move(config))
{
    const std::string runtime = tool_for(fn_.language, config_.toolchain, false);
    try {
        find_executable(runtime);
    } catch (const ToolNotFound& e) {
        throw ToolchainUnavailable(e.what());
    }
}

void FunctionRunner::start()
{
    worker_.reset();
    scratch_ = std::make_unique<ScratchDir>(config_.scratch_root, "askit-worker-");
    SandboxOptions opts;
    opts.writable_dir = scratch_->path();
    opts.timeout = config_.test_timeout;
    worker_ = std::make_unique<WorkerProcess>(harness_argv(fn_, scratch_->path(), config_.toolchain), opts);
}

Json FunctionRunner::call(const ArgBinding& args, std::chrono::milliseconds timeout)
{
    std::lock_guard lock(mu_);
    if (!worker_ || !worker_->alive()) start();
    std::optional<std::string> line;
    try {
        line = worker_->request(harness_request(fn_.entry, args), timeout);
    } catch (const ProcessTimeout& e) {
        worker_.reset();
        throw InvokeTimeout(fn_.entry + ": " + e.what());
    }
    if (!line) {
        auto status = worker_->finish();
        worker_.reset();
        throw ExecutionError(fn_.entry + ": harness exited with status " + std::to_string(status.exit_code) +
                                 (status.term_signal ? " (signal " + std::to_string(status.term_signal) + ")" : ""),
                             status.err);
    }
    return decode_harness_reply(*line, worker_->stderr_text());
}

// ---------------------------------------------------------------------------

bool output_equal(const Json& expected, const Json& actual)
{
    if (expected.is_number() && actual.is_number()) {
        if (is_integral_number(expected) && is_integral_number(actual)) {
            if (expected.is_number_float() || actual.is_number_float()) {
                return expected.get<double>() == actual.get<double>();
            }
            return expected == actual;
        }
        double a = expected.get<double>();
        double b = actual.get<double>();
        if (a == b) return true;
        return std::fabs(a - b) <= 1e-6 * std::max(std::fabs(a), std::fabs(b));
    }
    if (expected.type() != actual.type()) return false;
    if (expected.is_array()) {
        if (expected.size() != actual.size()) return false;
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (!output_equal(expected[i], actual[i])) return false;
        }
        return true;
    }
    if (expected.is_object()) {
        if (expected.size() != actual.size()) return false;
        for (const auto& [key, value] : expected.items()) {
            auto it = actual.find(key);
            if (it == actual.end() || !output_equal(value, *it)) return false;
        }
        return true;
    }
    return expected == actual;
}

// ---------------------------------------------------------------------------
// Cache

std::string cache_digest(const TaskSpec& spec)
{
    DigestBuilder d;
    d.add(spec.tpl.raw());
    // The entry name appears in the prompt's signature, so it is part of the key.
    d.add(spec.name);
    d.add(spec.return_schema ? to_constructor_text(*spec.return_schema) : "void");
    if (spec.param_schemas) {
        for (const auto& [name, schema] : *spec.param_schemas) d.add(name + ": " + to_constructor_text(schema));
    } else {
        d.add("<untyped>");
    }
    d.add(target_name(spec.target));
    return d.hex();
}

std::string cache_stem(const TaskSpec& spec)
{
    return slugify(spec.tpl.raw()) + "_" + cache_digest(spec).substr(0, 8);
}

namespace {

fs::path source_path(const TaskSpec& spec, const CodegenConfig& config)
{
    return config.cache_dir / (cache_stem(spec) + "." + std::string(file_extension(spec.target)));
}

fs::path sidecar_path(const TaskSpec& spec, const CodegenConfig& config)
{
    return config.cache_dir / (cache_stem(spec) + ".json");
}

void atomic_write(const fs::path& path, std::string_view text)
{
    auto tmp = path;
    tmp += ".tmp" + std::to_string(::getpid());
    write_text(tmp, text);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

} // namespace

fs::path cache_store(const TaskSpec& spec, const std::string& source, int retries_used,
                     const CodegenConfig& config)
{
    std::error_code ec;
    fs::create_directories(config.cache_dir, ec);
    if (ec) throw IoError("cannot create cache directory " + config.cache_dir.string() + ": " + ec.message());
    auto path = source_path(spec, config);
    atomic_write(path, source);

    Json params = Json::object();
    if (spec.param_schemas) {
        for (const auto& [name, schema] : *spec.param_schemas) params[name] = to_constructor_text(schema);
    }
    Json meta = Json::object();
    meta["entry"] = spec.name;
    meta["template"] = spec.tpl.raw();
    meta["return_schema"] = spec.return_schema ? to_constructor_text(*spec.return_schema) : "void";
    meta["param_schemas"] = spec.param_schemas ? params : Json(nullptr);
    meta["target"] = target_name(spec.target);
    meta["digest"] = cache_digest(spec);
    meta["retries_used"] = retries_used;
    meta["source_file"] = path.filename().string();
    atomic_write(sidecar_path(spec, config), meta.dump(2) + "\n");
    return path;
}

std::optional<GeneratedFunction> cache_lookup(const TaskSpec& spec, const CodegenConfig& config)
{
    auto path = source_path(spec, config);
    auto meta_path = sidecar_path(spec, config);
    if (!fs::exists(path) || !fs::exists(meta_path)) return std::nullopt;
    auto meta = Json::parse(read_text(meta_path), nullptr, false);
    if (meta.is_discarded() || meta.value("digest", std::string()) != cache_digest(spec)) return std::nullopt;

    GeneratedFunction fn;
    fn.source = read_text(path);
    fn.entry = meta.value("entry", spec.name);
    fn.language = spec.target;
    fn.cache_path = path;
    fn.retries_used = meta.value("retries_used", 0);
    if (spec.target == Target::Python) {
        fn.runnable_path = path;
    } else {
        auto built = config.cache_dir / (cache_stem(spec) + ".cjs");
        if (!fs::exists(built) || fs::last_write_time(built) < fs::last_write_time(path)) {
            ScratchDir scratch(config.scratch_root, "askit-build-");
            auto checked = check_source(fn.source, fn.entry, fn.language, scratch.path(), config);
            if (checked.violation) {
                throw Error("cached source " + path.string() + " no longer compiles: " + checked.violation->detail);
            }
            auto bytes = read_text(checked.runnable_path);
            atomic_write(built, bytes);
        }
        fn.runnable_path = built;
    }
    return fn;
}

// ---------------------------------------------------------------------------
// Generation

namespace {

std::optional<std::string> extract_code(const std::string& response, Target language)
{
    std::vector<std::string_view> tags = language == Target::TypeScript
                                             ? std::vector<std::string_view>{"typescript", "ts"}
                                             : std::vector<std::string_view>{"python", "py"};
    std::optional<std::string> best;
    std::size_t best_pos = std::string::npos;
    for (auto tag : tags) {
        auto pos = response.find("```" + std::string(tag));
        while (pos != std::string::npos) {
            auto after = pos + 3 + tag.size();
            if (after >= response.size() || std::isspace(static_cast<unsigned char>(response[after]))) break;
            pos = response.find("```" + std::string(tag), after);
        }
        if (pos != std::string::npos && pos < best_pos) {
            best_pos = pos;
            best = extract_block(response, tag);
        }
    }
    return best;
}

std::optional<Violation> run_tests(const GeneratedFunction& fn, const TaskSpec& spec, const CodegenConfig& config)
{
    if (spec.tests.empty()) return std::nullopt;
    FunctionRunner runner(fn, config);
    for (const auto& test : spec.tests) {
        Json actual;
        try {
            actual = runner.call(test.input, config.test_timeout);
        } catch (const Error& e) {
            return Violation{Violation::Kind::TestFailure,
                             spec.name + "(" + compact_json(test.input) + ") failed: " + e.what(), {}};
        }
        if (!output_equal(test.output, actual)) {
            return Violation{Violation::Kind::TestFailure,
                             spec.name + "(" + compact_json(test.input) + ") returned " + compact_json(actual) +
                                 ", expected " + compact_json(test.output),
                             {}};
        }
    }
    return std::nullopt;
}

} // namespace

GeneratedFunction generate(LlmClient& client, const TaskSpec& spec, const CodegenConfig& config)
{
    spec.check();
    config.check();
    if (config.require_param_schemas && !spec.param_schemas && !spec.tpl.params().empty()) {
        throw SpecError("task '" + spec.name + "' needs parameter types for code generation");
    }
    const auto prompt = build_codegen(spec);
    std::vector<std::string> transcript;
    Violation last{Violation::Kind::NoCodeBlock, "no attempt made", {}};
    const int attempts = config.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        Dialogue dialogue(prompt.text);
        auto response = client.complete(dialogue, config.temperature);
        transcript.push_back(response);

        auto code = extract_code(response, spec.target);
        if (!code) {
            last = Violation{Violation::Kind::NoCodeBlock,
                             "no ```" + std::string(fence_tag(spec.target)) + " code block in the response", {}};
            continue;
        }
        ScratchDir scratch(config.scratch_root, "askit-gen-");
        auto checked = check_source(*code, spec.name, spec.target, scratch.path(), config);
        if (checked.violation) {
            last = *checked.violation;
            continue;
        }
        GeneratedFunction candidate;
        candidate.source = *code;
        candidate.entry = spec.name;
        candidate.language = spec.target;
        candidate.runnable_path = checked.runnable_path;
        if (auto failure = run_tests(candidate, spec, config)) {
            last = *failure;
            continue;
        }
        candidate.retries_used = attempt;
        candidate.cache_path = cache_store(spec, candidate.source, attempt, config);
        if (spec.target == Target::TypeScript) {
            auto built = config.cache_dir / (cache_stem(spec) + ".cjs");
            atomic_write(built, read_text(checked.runnable_path));
            candidate.runnable_path = built;
        } else {
            candidate.runnable_path = candidate.cache_path;
        }
        return candidate;
    }
    throw GenerationFailed(std::move(last), std::move(transcript), attempts);
}

GeneratedFunction compile_task(LlmClient& client, const TaskSpec& spec, const CodegenConfig& config)
{
    if (auto hit = cache_lookup(spec, config)) return *hit;
    std::error_code ec;
    fs::create_directories(config.cache_dir, ec);
    if (ec) throw IoError("cannot create cache directory " + config.cache_dir.string() + ": " + ec.message());
    FileLock lock(config.cache_dir / (cache_stem(spec) + ".lock"));
    if (auto hit = cache_lookup(spec, config)) return *hit;
    return generate(client, spec, config);
}

int count_loc(const std::string& source, Target language)
{
    std::istringstream in(source);
    std::string line;
    int loc = 0;
    bool in_block_comment = false;
    while (std::getline(in, line)) {
        auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        std::string_view body(line.c_str() + first);
        if (language == Target::Python) {
            if (body.front() == '#') continue;
        } else {
            if (in_block_comment) {
                if (body.find("*/") != std::string_view::npos) in_block_comment = false;
                continue;
            }
            if (body.rfind("//", 0) == 0) continue;
            if (body.rfind("/*", 0) == 0) {
                if (body.find("*/") == std::string_view::npos) in_block_comment = true;
                continue;
            }
        }
        ++loc;
    }
    return loc;
}

} // namespace askit
