// Regenerates tests/data/fixtures/intersecting.jsonl.
//
//   make_fixtures <task-file> <out.jsonl>
//
// Every response is hand-written below; the tool only replays them through the
// real prompt builders so that the recorded keys match what the runtime sends.

#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "askit/api.hpp"
#include "askit/taskfile.hpp"

using namespace askit;

namespace {

std::string envelope(const std::string& reason, const Json& answer)
{
    Json doc = Json::object();
    doc["reason"] = reason;
    doc["answer"] = answer;
    return "Here is my answer.\n```json\n" + doc.dump() + "\n```";
}

std::string ts_block(const std::string& code) { return "```typescript\n" + code + "\n```"; }

const std::map<std::string, std::vector<std::string>> kCandidates = {
    {"reverseString", {ts_block("export function reverseString({s}: {s: string}): string {\n"
                                "  return s.split('').reverse().join('');\n"
                                "}")}},
    {"calculateFactorial", {ts_block("export function calculateFactorial({n}: {n: number}): number {\n"
                                     "  let result = 1;\n"
                                     "  for (let i = 2; i <= n; i++) {\n"
                                     "    result *= i;\n"
                                     "  }\n"
                                     "  return result;\n"
                                     "}")}},
    {"sortNumbers", {ts_block("export function sortNumbers({ns}: {ns: number[]}): number[] {\n"
                              "  return [...ns].sort((a, b) => a - b);\n"
                              "}")}},
    {"isPalindrome", {ts_block("export function isPalindrome({n}: {n: number}): boolean {\n"
                               "  const s = String(n);\n"
                               "  return s === s.split('').reverse().join('');\n"
                               "}")}},
    {"sumNumbers", {ts_block("export function sumNumbers({ns}: {ns: number[]}): number {\n"
                             "  return ns.reduce((acc, x) => acc + x, 0);\n"
                             "}")}},
    // First candidate stops one step late, as in the failure the retry gate is meant to catch.
    {"fibonacciSequence",
     {ts_block("export function fibonacciSequence({n}: {n: number}): number[] {\n"
               "  const seq = [0, 1];\n"
               "  while (seq.length < n + 2) {\n"
               "    seq.push(seq[seq.length - 1] + seq[seq.length - 2]);\n"
               "  }\n"
               "  return seq;\n"
               "}"),
      ts_block("export function fibonacciSequence({n}: {n: number}): number[] {\n"
               "  const seq = [0, 1];\n"
               "  while (seq.length < n + 1) {\n"
               "    seq.push(seq[seq.length - 1] + seq[seq.length - 2]);\n"
               "  }\n"
               "  return seq.slice(0, n + 1);\n"
               "}")}},
};

struct DirectScript {
    Json args;
    std::vector<std::string> responses;
    int max_retries = 9;
};

std::map<std::string, std::vector<DirectScript>> direct_scripts()
{
    std::map<std::string, std::vector<DirectScript>> out;
    out["reviewSentiment"] = {
        {Json{{"review", "The battery lasts all week and it looks great."}},
         {envelope("The reviewer praises the battery and the design.", "positive")}},
        {Json{{"review", "It broke after a day."}},
         {"The review sounds negative to me.", envelope("Breaking after one day is a complaint.", "negative")}},
        {Json{{"review", "meh"}}, {"Hard to say.", "Still hard to say."}, 1},
    };
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    if (argc != 3) {
        std::cerr << "usage: make_fixtures <task-file> <out.jsonl>\n";
        return 2;
    }
    const std::filesystem::path out = argv[2];
    std::filesystem::remove(out);
    auto file = TaskFile::load(argv[1]);
    const std::string model = ClientConfig{}.model_id;
    ScratchDir cache;
    auto scripts = direct_scripts();

    for (const auto& entry : file.tasks) {
        const auto& spec = entry.spec;
        // Direct answers echo the expected outputs of the task's tests.
        for (const auto& ex : spec.tests) {
            auto scripted = std::make_shared<ScriptedClient>(
                std::vector<std::string>{envelope("Worked through the request step by step.", ex.output)});
            RecordingClient recorder(scripted, out, model);
            ask_until_valid(recorder, spec.tpl, ex.input, *spec.return_schema, spec.fewshot);
        }
        for (const auto& script : scripts[spec.name]) {
            auto scripted = std::make_shared<ScriptedClient>(script.responses);
            RecordingClient recorder(scripted, out, model);
            EngineConfig config;
            config.max_direct_retries = script.max_retries;
            try {
                ask_until_valid(recorder, spec.tpl, script.args, *spec.return_schema, spec.fewshot, config);
            } catch (const RetriesExhausted&) {
            }
        }
        auto it = kCandidates.find(spec.name);
        if (it == kCandidates.end()) continue;
        auto scripted = std::make_shared<ScriptedClient>(it->second);
        RecordingClient recorder(scripted, out, model);
        CodegenConfig config;
        config.cache_dir = cache.path();
        auto fn = generate(recorder, spec, config);
        std::cerr << spec.name << ": retries_used=" << fn.retries_used << '\n';
    }
    return 0;
}
