#include "cli.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <future>
#include <iomanip>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "askit/api.hpp"
#include "askit/offline.hpp"
#include "askit/taskfile.hpp"

namespace askit::cli {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

class UsageError : public Error {
public:
    using Error::Error;
};

struct BackendOptions {
    std::string backend = "live";
    std::string fixtures;
    std::string model;
    std::string base_url;
    int delay_ms = 0;
};

void add_backend_options(CLI::App& cmd, BackendOptions& opts)
{
    cmd.add_option("--backend", opts.backend, "Model backend")
        ->check(CLI::IsMember({"live", "replay", "record"}))
        ->capture_default_str();
    cmd.add_option("--fixtures", opts.fixtures, "Fixture file (JSONL) for replay or record");
    cmd.add_option("--model", opts.model, "Model id (default: $ASKIT_MODEL or gpt-3.5-turbo-16k)");
    cmd.add_option("--base-url", opts.base_url, "Chat-completions endpoint prefix");
}

ClientConfig client_config(const BackendOptions& opts)
{
    auto config = ClientConfig::from_environment();
    if (!opts.model.empty()) config.model_id = opts.model;
    if (!opts.base_url.empty()) config.base_url = opts.base_url;
    return config;
}

std::shared_ptr<LlmClient> make_client(const BackendOptions& opts, const Hooks& hooks)
{
    auto config = client_config(opts);
    if (opts.backend == "replay") {
        if (opts.fixtures.empty()) throw UsageError("--backend replay needs --fixtures");
        if (hooks.guard_network) forbid_network();
        return ReplayClient::open(opts.fixtures, config.model_id, std::chrono::milliseconds(opts.delay_ms));
    }
    config.check();
    auto live = std::make_shared<HttpClient>(config);
    if (opts.backend == "record") {
        if (opts.fixtures.empty()) throw UsageError("--backend record needs --fixtures");
        return std::make_shared<RecordingClient>(live, opts.fixtures, config.model_id);
    }
    return live;
}

Json parse_args_json(const std::string& text)
{
    auto args = Json::parse(text, nullptr, false);
    if (args.is_discarded() || !args.is_object()) throw UsageError("--args must be a JSON object");
    return args;
}

const TaskEntry& find_task(const TaskFile& file, const std::string& name)
{
    const auto* entry = file.find(name);
    if (!entry) throw UsageError("no task named '" + name + "'");
    return *entry;
}

fs::path default_cache_dir(const std::string& task_file) { return fs::path(task_file).parent_path() / "askit"; }

Target target_or(const std::string& text, Target fallback)
{
    if (text.empty()) return fallback;
    try {
        return parse_target(text);
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
}

std::vector<const TaskEntry*> select_tasks(const TaskFile& file, const std::vector<std::string>& only)
{
    std::vector<const TaskEntry*> out;
    if (!only.empty()) {
        for (const auto& name : only) out.push_back(&find_task(file, name));
        return out;
    }
    for (const auto& t : file.tasks) {
        if (t.codable) out.push_back(&t);
    }
    return out;
}

int cmd_show_prompt(const std::string& file, const std::string& name, const std::string& args_text,
                    const std::string& mode, const std::string& target, std::ostream& out)
{
    auto tasks = TaskFile::load(file);
    auto spec = find_task(tasks, name).spec;
    if (mode == "codegen") {
        spec.target = target_or(target, spec.target);
        out << build_codegen(spec).text;
        return kOk;
    }
    if (!spec.return_schema) throw UsageError("task '" + name + "' returns nothing; only --mode codegen applies");
    out << build_direct(spec.tpl, parse_args_json(args_text), *spec.return_schema, spec.fewshot).text;
    return kOk;
}

int cmd_ask(const std::string& file, const std::string& name, const std::string& args_text,
            const BackendOptions& backend, int max_retries, const Hooks& hooks, std::ostream& out)
{
    auto tasks = TaskFile::load(file);
    const auto& spec = find_task(tasks, name).spec;
    auto args = parse_args_json(args_text);
    auto client = make_client(backend, hooks);
    EngineConfig config;
    config.max_direct_retries = max_retries;
    config.temperature = client_config(backend).temperature;
    DefinedFunction fn(spec, client, config);
    auto answer = fn(args);
    Json doc = Json::object();
    doc["answer"] = answer.value;
    doc["reason"] = answer.reason;
    doc["attempts"] = answer.attempts;
    out << doc.dump() << '\n';
    return kOk;
}

struct CodegenOutcome {
    std::string name;
    std::optional<GeneratedFunction> generated;
    bool cache_hit = false;
    int exit_code = kOk;
    std::string error;
};

CodegenOutcome compile_one(LlmClient& client, const TaskSpec& spec, const CodegenConfig& config)
{
    CodegenOutcome outcome;
    outcome.name = spec.name;
    try {
        if (auto hit = cache_lookup(spec, config)) {
            outcome.cache_hit = true;
            outcome.generated = std::move(*hit);
        } else {
            outcome.generated = compile_task(client, spec, config);
        }
    } catch (const GenerationFailed& e) {
        outcome.exit_code = kRetriesExhausted;
        outcome.error = e.what();
    } catch (const FixtureMiss& e) {
        outcome.exit_code = kFixtureMiss;
        outcome.error = e.what();
    } catch (const ToolchainUnavailable& e) {
        outcome.exit_code = kToolchainUnavailable;
        outcome.error = e.what();
    } catch (const std::exception& e) {
        outcome.exit_code = kFailure;
        outcome.error = e.what();
    }
    return outcome;
}

int cmd_codegen(const std::string& file, const std::vector<std::string>& only, const BackendOptions& backend,
                std::string cache_dir, const std::string& target, int jobs, int max_retries, const Hooks& hooks,
                std::ostream& out, std::ostream& err)
{
    if (jobs < 1) throw UsageError("--jobs must be at least 1");
    auto tasks = TaskFile::load(file);
    auto selected = select_tasks(tasks, only);
    CodegenConfig config;
    config.max_retries = max_retries;
    config.cache_dir = cache_dir.empty() ? default_cache_dir(file) : fs::path(cache_dir);
    config.temperature = client_config(backend).temperature;
    config.check();
    auto counting = std::make_shared<CountingClient>(make_client(backend, hooks));

    std::vector<TaskSpec> specs;
    for (const auto* entry : selected) {
        specs.push_back(entry->spec);
        specs.back().target = target_or(target, specs.back().target);
    }
    std::vector<CodegenOutcome> outcomes(specs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < specs.size(); i = next++) {
            outcomes[i] = compile_one(*counting, specs[i], config);
        }
    };
    std::vector<std::future<void>> pool;
    for (int j = 1; j < jobs; ++j) pool.push_back(std::async(std::launch::async, worker));
    worker();
    for (auto& f : pool) f.get();

    int code = kOk;
    Json rows = Json::array();
    err << std::left << std::setw(28) << "task" << std::setw(9) << "retries" << std::setw(6) << "loc"
        << "cache\n";
    for (const auto& o : outcomes) {
        Json row = Json::object();
        row["name"] = o.name;
        if (o.generated) {
            row["retries_used"] = o.generated->retries_used;
            row["cache_path"] = o.generated->cache_path.string();
            row["loc"] = count_loc(o.generated->source, o.generated->language);
            row["cache_hit"] = o.cache_hit;
            err << std::setw(28) << o.name << std::setw(9) << o.generated->retries_used << std::setw(6)
                << count_loc(o.generated->source, o.generated->language) << o.generated->cache_path.string()
                << (o.cache_hit ? " (hit)" : "") << '\n';
        } else {
            row["error"] = o.error;
            err << std::setw(28) << o.name << "FAILED: " << o.error << '\n';
            // The most specific failure wins; generation failures outrank the rest.
            if (code == kOk || o.exit_code == kRetriesExhausted) code = o.exit_code;
        }
        rows.push_back(std::move(row));
    }
    Json doc = Json::object();
    doc["tasks"] = std::move(rows);
    doc["client_calls"] = counting->calls();
    out << doc.dump() << '\n';
    return code;
}

int cmd_run(const std::string& file, const std::string& name, const std::string& args_text,
            const BackendOptions& backend, std::string cache_dir, int max_retries, const Hooks& hooks,
            std::ostream& out)
{
    auto tasks = TaskFile::load(file);
    const auto& spec = find_task(tasks, name).spec;
    auto args = parse_args_json(args_text);
    CodegenConfig config;
    config.max_retries = max_retries;
    config.cache_dir = cache_dir.empty() ? default_cache_dir(file) : fs::path(cache_dir);
    config.check();
    auto generated = cache_lookup(spec, config);
    if (!generated) generated = compile_task(*make_client(backend, hooks), spec, config);
    CompiledFunction fn(spec, std::move(*generated), config);
    Json doc = Json::object();
    doc["result"] = fn(args);
    out << doc.dump() << '\n';
    return kOk;
}

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct BenchRow {
    std::string name;
    double latency_s = 0;
    double execution_time_us = 0;
    double compile_time_s = 0;
};

BenchRow bench_task(const TaskSpec& spec, const BackendOptions& backend, const CodegenConfig& config, int repeat)
{
    if (!spec.return_schema) throw UsageError("task '" + spec.name + "' returns nothing and cannot be benchmarked");
    auto inputs = spec.tests.empty() ? spec.fewshot : spec.tests;
    if (inputs.empty()) throw UsageError("task '" + spec.name + "' has no test inputs to benchmark with");
    auto model = client_config(backend).model_id;
    auto delay = std::chrono::milliseconds(backend.delay_ms);
    BenchRow row;
    row.name = spec.name;

    auto compile_client = ReplayClient::open(backend.fixtures, model, delay);
    auto start = Clock::now();
    auto generated = compile_task(*compile_client, spec, config);
    row.compile_time_s = seconds_since(start);

    EngineConfig engine;
    engine.temperature = config.temperature;
    double direct_total = 0;
    for (int r = 0; r < repeat; ++r) {
        // Replay cursors are consumed per call, so every repeat starts from a fresh store.
        auto client = ReplayClient::open(backend.fixtures, model, delay);
        for (const auto& ex : inputs) {
            auto t0 = Clock::now();
            ask_until_valid(*client, spec.tpl, ex.input, *spec.return_schema, spec.fewshot, engine);
            direct_total += seconds_since(t0);
        }
    }
    row.latency_s = direct_total / (repeat * static_cast<double>(inputs.size()));

    FunctionRunner runner(generated, config);
    for (const auto& ex : inputs) runner.call(ex.input);
    double exec_total = 0;
    for (int r = 0; r < repeat; ++r) {
        for (const auto& ex : inputs) {
            auto t0 = Clock::now();
            runner.call(ex.input);
            exec_total += seconds_since(t0);
        }
    }
    row.execution_time_us = exec_total * 1e6 / (repeat * static_cast<double>(inputs.size()));
    return row;
}

int cmd_bench(const std::string& file, const std::vector<std::string>& only, BackendOptions backend,
              std::string cache_dir, int repeat, const Hooks& hooks, std::ostream& out, std::ostream& err)
{
    if (repeat < 1) throw UsageError("--repeat must be at least 1");
    if (backend.delay_ms < 0) throw UsageError("--delay-ms must not be negative");
    if (backend.fixtures.empty()) throw UsageError("bench needs --fixtures");
    if (hooks.guard_network) forbid_network();
    auto tasks = TaskFile::load(file);
    auto selected = select_tasks(tasks, only);
    if (selected.empty()) throw UsageError("no codable tasks to benchmark");

    std::optional<ScratchDir> scratch;
    CodegenConfig config;
    if (cache_dir.empty()) {
        // A private cache so compile time measures generation rather than a lookup.
        scratch.emplace();
        config.cache_dir = scratch->path();
    } else {
        config.cache_dir = cache_dir;
    }
    config.temperature = client_config(backend).temperature;
    config.check();

    std::vector<BenchRow> rows;
    for (const auto* entry : selected) rows.push_back(bench_task(entry->spec, backend, config, repeat));

    double latency = 0, exec = 0, compile = 0, speedup = 0;
    err << std::left << std::setw(28) << "task" << std::setw(14) << "latency_s" << std::setw(20)
        << "execution_time_us" << std::setw(16) << "compile_time_s" << "speedup\n";
    for (const auto& r : rows) {
        double ratio = r.latency_s * 1e6 / r.execution_time_us;
        err << std::setw(28) << r.name << std::setw(14) << r.latency_s << std::setw(20) << r.execution_time_us
            << std::setw(16) << r.compile_time_s << ratio << '\n';
        latency += r.latency_s;
        exec += r.execution_time_us;
        compile += r.compile_time_s;
        speedup += ratio;
    }
    const double n = static_cast<double>(rows.size());
    Json doc = Json::object();
    doc["latency_s"] = latency / n;
    doc["execution_time_us"] = exec / n;
    doc["compile_time_s"] = compile / n;
    doc["speedup"] = speedup / n;
    out << doc.dump() << '\n';
    return kOk;
}

} // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Hooks& hooks)
{
    CLI::App app{"Typed prompt tasks answered by a language model or by generated code"};
    app.require_subcommand(1);

    std::string file, name, args_text = "{}", mode = "direct", target, cache_dir;
    std::vector<std::string> only;
    BackendOptions backend;
    int max_retries = 9, jobs = 1, repeat = 10;

    auto* show = app.add_subcommand("show-prompt", "Print the prompt a task sends");
    show->add_option("task-file", file)->required();
    show->add_option("name", name)->required();
    show->add_option("--args", args_text, "Arguments as a JSON object");
    show->add_option("--mode", mode)->check(CLI::IsMember({"direct", "codegen"}))->capture_default_str();
    show->add_option("--target", target, "Code generation language (ts or py)");

    auto* ask = app.add_subcommand("ask", "Answer a task directly with the model");
    ask->add_option("task-file", file)->required();
    ask->add_option("name", name)->required();
    ask->add_option("--args", args_text, "Arguments as a JSON object");
    ask->add_option("--max-retries", max_retries)->capture_default_str();
    add_backend_options(*ask, backend);

    auto* gen = app.add_subcommand("codegen", "Generate code for codable tasks");
    gen->add_option("task-file", file)->required();
    gen->add_option("--only", only, "Restrict to these task names");
    gen->add_option("--cache-dir", cache_dir, "Default: askit/ next to the task file");
    gen->add_option("--target", target, "Override the task's language (ts or py)");
    gen->add_option("--jobs", jobs)->capture_default_str();
    gen->add_option("--max-retries", max_retries)->capture_default_str();
    add_backend_options(*gen, backend);

    auto* run_cmd = app.add_subcommand("run", "Call a task's generated code");
    run_cmd->add_option("task-file", file)->required();
    run_cmd->add_option("name", name)->required();
    run_cmd->add_option("--args", args_text, "Arguments as a JSON object");
    run_cmd->add_option("--cache-dir", cache_dir, "Default: askit/ next to the task file");
    run_cmd->add_option("--max-retries", max_retries)->capture_default_str();
    add_backend_options(*run_cmd, backend);

    auto* bench = app.add_subcommand("bench", "Compare direct answers with generated code");
    bench->add_option("task-file", file)->required();
    bench->add_option("--fixtures", backend.fixtures, "Fixture file (JSONL)")->required();
    bench->add_option("--repeat", repeat)->capture_default_str();
    bench->add_option("--delay-ms", backend.delay_ms, "Simulated model latency per call")->capture_default_str();
    bench->add_option("--only", only, "Restrict to these task names");
    bench->add_option("--cache-dir", cache_dir, "Default: a temporary directory");
    bench->add_option("--model", backend.model, "Model id the fixtures were recorded with");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*show) return cmd_show_prompt(file, name, args_text, mode, target, out);
        if (*ask) return cmd_ask(file, name, args_text, backend, max_retries, hooks, out);
        if (*gen) return cmd_codegen(file, only, backend, cache_dir, target, jobs, max_retries, hooks, out, err);
        if (*run_cmd) return cmd_run(file, name, args_text, backend, cache_dir, max_retries, hooks, out);
        if (*bench) return cmd_bench(file, only, backend, cache_dir, repeat, hooks, out, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const TemplateError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const RetriesExhausted& e) {
        err << "error: " << e.what() << '\n';
        return kRetriesExhausted;
    } catch (const GenerationFailed& e) {
        err << "error: " << e.what() << '\n';
        return kRetriesExhausted;
    } catch (const FixtureMiss& e) {
        err << "error: no recorded response for key " << e.key() << '\n';
        return kFixtureMiss;
    } catch (const ToolchainUnavailable& e) {
        err << "error: " << e.what() << '\n';
        return kToolchainUnavailable;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

} // namespace askit::cli
