#include <gtest/gtest.h>

#include <atomic>
#include <thread>

#include "askit/codegen.hpp"
#include "test_support.hpp"

using namespace askit;
using namespace std::chrono_literals;

namespace {

std::string ts_block(const std::string& code) { return "Here you go.\n```typescript\n" + code + "\n```\n"; }
std::string py_block(const std::string& code) { return "```python\n" + code + "\n```"; }

const std::string kAdd = "export function add({x, y}: {x: number, y: number}): number {\n"
                         "  return x + y;\n"
                         "}";

const std::string kFactorial = "export function calculateFactorial({n}: {n: number}): number {\n"
                               "  let r = 1;\n"
                               "  for (let i = 2; i <= n; i++) r *= i;\n"
                               "  return r;\n"
                               "}";

TaskSpec add_spec(std::vector<Example> tests = {{Json{{"x", 1}, {"y", 2}}, 3}})
{
    TaskSpec spec;
    spec.name = "add";
    spec.tpl = PromptTemplate::parse("add {{x}} and {{y}}");
    spec.return_schema = TypeSchema::integer();
    spec.param_schemas = ParamSchemas{{"x", TypeSchema::integer()}, {"y", TypeSchema::integer()}};
    spec.tests = std::move(tests);
    return spec;
}

TaskSpec factorial_spec()
{
    TaskSpec spec;
    spec.name = "calculateFactorial";
    spec.tpl = PromptTemplate::parse("Calculate the factorial of {{n}}");
    spec.return_schema = TypeSchema::integer();
    spec.param_schemas = ParamSchemas{{"n", TypeSchema::integer()}};
    spec.tests = {{Json{{"n", 5}}, 120}};
    return spec;
}

TaskSpec fibonacci_spec()
{
    TaskSpec spec;
    spec.name = "fibonacciSequence";
    spec.tpl = PromptTemplate::parse("Generate the Fibonacci sequence up to the {{n}}th number.");
    spec.return_schema = TypeSchema::list(TypeSchema::integer());
    spec.param_schemas = ParamSchemas{{"n", TypeSchema::integer()}};
    spec.tests = {{Json{{"n", 5}}, Json::array({0, 1, 1, 2, 3, 5})}};
    return spec;
}

std::string fib_candidate(bool correct)
{
    return "export function fibonacciSequence({n}: {n: number}): number[] {\n"
           "  const seq = [0, 1];\n"
           "  while (seq.length < n + " +
           std::string(correct ? "1" : "2") +
           ") seq.push(seq[seq.length - 1] + seq[seq.length - 2]);\n"
           "  return " +
           std::string(correct ? "seq.slice(0, n + 1)" : "seq") +
           ";\n"
           "}";
}

class CodegenTest : public ::testing::Test {
protected:
    void SetUp() override { config_.cache_dir = cache_.path() / "askit"; }

    GeneratedFunction built(const TaskSpec& spec, const std::string& code)
    {
        ScriptedClient client({ts_block(code)});
        return generate(client, spec, config_);
    }

    ScratchDir cache_;
    CodegenConfig config_;
};

} // namespace

TEST_F(CodegenTest, AddFunctionFirstTry)
{
    ScriptedClient client({ts_block(kAdd)});
    auto fn = generate(client, add_spec(), config_);
    EXPECT_EQ(fn.retries_used, 0);
    EXPECT_EQ(fn.entry, "add");
    EXPECT_EQ(fn.source, kAdd);
    EXPECT_EQ(client.call_count(), 1u);
    EXPECT_TRUE(std::filesystem::exists(fn.cache_path));
    EXPECT_TRUE(std::filesystem::exists(fn.runnable_path));
    EXPECT_EQ(askit::testing::read_file(fn.cache_path), kAdd);
}

TEST_F(CodegenTest, FailingTestTriggersRetryWithSamePrompt)
{
    ScriptedClient client({ts_block(fib_candidate(false)), ts_block(fib_candidate(true))});
    auto spec = fibonacci_spec();
    auto fn = generate(client, spec, config_);
    EXPECT_EQ(fn.retries_used, 1);
    auto requests = client.requests();
    ASSERT_EQ(requests.size(), 2u);
    EXPECT_EQ(requests[0].size(), 1u);
    EXPECT_EQ(requests[1].size(), 1u);
    EXPECT_EQ(requests[0].messages()[0].content, requests[1].messages()[0].content);
    EXPECT_EQ(requests[0].messages()[0].content, build_codegen(spec).text);
    FunctionRunner runner(fn, config_);
    EXPECT_EQ(runner.call(Json{{"n", 5}}), Json::array({0, 1, 1, 2, 3, 5}));
}

TEST_F(CodegenTest, WrongOnlyCandidateReportsTestFailure)
{
    config_.max_retries = 0;
    ScriptedClient client({ts_block(fib_candidate(false))});
    try {
        generate(client, fibonacci_spec(), config_);
        FAIL() << "expected GenerationFailed";
    } catch (const GenerationFailed& e) {
        EXPECT_EQ(e.violation().kind, Violation::Kind::TestFailure);
        EXPECT_NE(e.violation().detail.find("[0,1,1,2,3,5,8]"), std::string::npos) << e.violation().detail;
        EXPECT_EQ(e.attempts(), 1);
    }
}

TEST_F(CodegenTest, UnparseableForeverFailsAfterBound)
{
    config_.max_retries = 2;
    ScriptedClient client(std::vector<std::string>(5, ts_block("function f( {")));
    try {
        generate(client, add_spec(), config_);
        FAIL() << "expected GenerationFailed";
    } catch (const GenerationFailed& e) {
        EXPECT_EQ(e.attempts(), 3);
        EXPECT_EQ(e.violation().kind, Violation::Kind::SyntaxError);
        EXPECT_EQ(e.transcript().size(), 3u);
    }
    EXPECT_EQ(client.call_count(), 3u);
    EXPECT_FALSE(cache_lookup(add_spec(), config_));
}

TEST_F(CodegenTest, MissingBlockAndMissingEntry)
{
    config_.max_retries = 1;
    ScriptedClient client({"I would write a loop.", ts_block("export function other(): number { return 1; }")});
    try {
        generate(client, add_spec(), config_);
        FAIL() << "expected GenerationFailed";
    } catch (const GenerationFailed& e) {
        EXPECT_EQ(e.violation().kind, Violation::Kind::SyntaxError);
        EXPECT_NE(e.violation().detail.find("'add'"), std::string::npos);
    }
}

TEST_F(CodegenTest, TypeErrorIsRejected)
{
    EXPECT_TRUE(syntax_check("export function f(): number { return 'text'; }", Target::TypeScript, config_));
}

TEST_F(CodegenTest, EmptyTestsAcceptFirstValidCandidate)
{
    ScriptedClient client({ts_block("function broken( {"), ts_block(kAdd)});
    auto fn = generate(client, add_spec({}), config_);
    EXPECT_EQ(fn.retries_used, 1);
}

TEST_F(CodegenTest, UntypedParamsRejected)
{
    auto spec = add_spec();
    spec.param_schemas.reset();
    ScriptedClient client({ts_block(kAdd)});
    EXPECT_THROW(generate(client, spec, config_), SpecError);
    EXPECT_EQ(client.call_count(), 0u);
}

TEST_F(CodegenTest, SyntaxCheck)
{
    EXPECT_EQ(syntax_check(kAdd, Target::TypeScript, config_), std::nullopt);
    auto v = syntax_check("function f( {", Target::TypeScript, config_);
    ASSERT_TRUE(v);
    EXPECT_EQ(v->kind, Violation::Kind::SyntaxError);
    EXPECT_FALSE(v->detail.empty());

    EXPECT_EQ(syntax_check("def f(x):\n    return x\n", Target::Python, config_), std::nullopt);
    EXPECT_TRUE(syntax_check("def f(:\n", Target::Python, config_));
}

TEST_F(CodegenTest, MissingCheckerIsToolchainUnavailable)
{
    config_.toolchain.tsc = "/nonexistent/tsc";
    EXPECT_THROW(syntax_check(kAdd, Target::TypeScript, config_), ToolchainUnavailable);
    config_.toolchain.python = "/nonexistent/python3";
    EXPECT_THROW(syntax_check("x = 1\n", Target::Python, config_), ToolchainUnavailable);
}

TEST_F(CodegenTest, InvokeOneShot)
{
    auto add = built(add_spec(), kAdd);
    EXPECT_EQ(invoke(add, Json{{"x", 2}, {"y", 3}}, 10s, config_), 5);
    auto fact = built(factorial_spec(), kFactorial);
    EXPECT_EQ(invoke(fact, Json{{"n", 5}}, 10s, config_), 120);
}

TEST_F(CodegenTest, ThrowingCodeIsExecutionError)
{
    auto fn = built(add_spec({}), "export function add({x, y}: {x: number, y: number}): number {\n"
                                  "  throw new Error('nope ' + x + y);\n"
                                  "}");
    try {
        invoke(fn, Json{{"x", 1}, {"y", 2}}, 10s, config_);
        FAIL() << "expected ExecutionError";
    } catch (const ExecutionError& e) {
        EXPECT_NE(std::string(e.what()).find("nope 12"), std::string::npos) << e.what();
    }
    FunctionRunner runner(fn, config_);
    EXPECT_THROW(runner.call(Json{{"x", 1}, {"y", 2}}), ExecutionError);
    // The worker survives a thrown error.
    EXPECT_THROW(runner.call(Json{{"x", 1}, {"y", 2}}), ExecutionError);
}

TEST_F(CodegenTest, InfiniteLoopTimesOutAndRunnerRecovers)
{
    auto fn = built(add_spec({}), "export function add({x, y}: {x: number, y: number}): number {\n"
                                  "  if (x < 0) { while (true) {} }\n"
                                  "  return x + y;\n"
                                  "}");
    FunctionRunner runner(fn, config_);
    EXPECT_THROW(runner.call(Json{{"x", -1}, {"y", 0}}, 300ms), InvokeTimeout);
    EXPECT_EQ(runner.call(Json{{"x", 4}, {"y", 5}}), 9);
}

TEST_F(CodegenTest, ConsoleOutputDoesNotCorruptProtocol)
{
    auto fn = built(add_spec(), "export function add({x, y}: {x: number, y: number}): number {\n"
                                "  console.log('{\"ok\":true,\"result\":0}');\n"
                                "  return x + y;\n"
                                "}");
    FunctionRunner runner(fn, config_);
    EXPECT_EQ(runner.call(Json{{"x", 20}, {"y", 22}}), 42);
}

TEST_F(CodegenTest, HostileCandidateCannotWriteOutsideScratch)
{
    if (!filesystem_isolation_available()) GTEST_SKIP() << "kernel lacks Landlock";
    ScratchDir outside;
    auto target = outside.path() / "escaped.txt";
    std::string code = "import * as fs from 'fs';\n"
                       "export function add({x, y}: {x: number, y: number}): number {\n"
                       "  fs.writeFileSync('" +
                       target.string() +
                       "', 'pwned');\n"
                       "  return x + y;\n"
                       "}";
    ScriptedClient client({ts_block(code)});
    config_.max_retries = 0;
    try {
        generate(client, add_spec(), config_);
        FAIL() << "expected GenerationFailed";
    } catch (const GenerationFailed& e) {
        EXPECT_EQ(e.violation().kind, Violation::Kind::TestFailure);
    }
    EXPECT_FALSE(std::filesystem::exists(target));
}

TEST_F(CodegenTest, HostilePythonCannotWriteOutsideScratch)
{
    if (!filesystem_isolation_available()) GTEST_SKIP() << "kernel lacks Landlock";
    ScratchDir outside;
    auto target = outside.path() / "escaped.txt";
    auto spec = add_spec();
    spec.target = Target::Python;
    ScriptedClient client({py_block("def add(x: int, y: int) -> int:\n"
                                    "    open('" +
                                    target.string() +
                                    "', 'w').write('pwned')\n"
                                    "    return x + y\n")});
    config_.max_retries = 0;
    EXPECT_THROW(generate(client, spec, config_), GenerationFailed);
    EXPECT_FALSE(std::filesystem::exists(target));
}

TEST_F(CodegenTest, PythonTarget)
{
    auto spec = add_spec();
    spec.target = Target::Python;
    ScriptedClient client({"```python\ndef add(x: int, y: int) -> int:\n    return x + y\n```"});
    auto fn = generate(client, spec, config_);
    EXPECT_EQ(fn.language, Target::Python);
    EXPECT_EQ(fn.cache_path.extension(), ".py");
    EXPECT_EQ(invoke(fn, Json{{"x", 40}, {"y", 2}}, 10s, config_), 42);
}

TEST_F(CodegenTest, GenerateOnceThenManyCalls)
{
    auto spec = factorial_spec();
    ScriptedClient client({ts_block(kFactorial)});
    auto fn = compile_task(client, spec, config_);
    ASSERT_EQ(client.call_count(), 1u);
    FunctionRunner runner(fn, config_);
    auto factorial = [](int n) {
        long long r = 1;
        for (int i = 2; i <= n; ++i) r *= i;
        return r;
    };
    for (int i = 0; i < 100; ++i) {
        int n = i % 15;
        EXPECT_EQ(runner.call(Json{{"n", n}}), factorial(n));
    }
    EXPECT_EQ(client.call_count(), 1u);

    auto again = compile_task(client, spec, config_);
    EXPECT_EQ(client.call_count(), 1u);
    EXPECT_EQ(again.source, fn.source);
}

TEST_F(CodegenTest, ConcurrentCompileGeneratesOnce)
{
    auto spec = factorial_spec();
    ScriptedClient client(std::vector<std::string>(4, ts_block(kFactorial)));
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int i = 0; i < 4; ++i) {
        threads.emplace_back([&] {
            auto fn = compile_task(client, spec, config_);
            if (fn.source == kFactorial) ++ok;
        });
    }
    for (auto& t : threads) t.join();
    EXPECT_EQ(ok.load(), 4);
    EXPECT_EQ(client.call_count(), 1u);
}

TEST_F(CodegenTest, CacheNamingAndRoundTrip)
{
    auto spec = factorial_spec();
    auto stem = cache_stem(spec);
    EXPECT_EQ(stem.rfind("calculate_the_factorial_of_n__", 0), 0u) << stem;
    EXPECT_EQ(stem.size(), std::string("calculate_the_factorial_of_n__").size() + 8);
    EXPECT_EQ(stem.substr(stem.size() - 8), cache_digest(spec).substr(0, 8));

    EXPECT_FALSE(cache_lookup(spec, config_));
    auto path = cache_store(spec, kFactorial, 2, config_);
    EXPECT_EQ(path.filename(), stem + ".ts");
    auto meta = Json::parse(askit::testing::read_file(config_.cache_dir / (stem + ".json")));
    EXPECT_EQ(meta["entry"], "calculateFactorial");
    EXPECT_EQ(meta["return_schema"], "int");
    EXPECT_EQ(meta["param_schemas"]["n"], "int");
    EXPECT_EQ(meta["retries_used"], 2);

    auto hit = cache_lookup(spec, config_);
    ASSERT_TRUE(hit);
    EXPECT_EQ(hit->source, kFactorial);
    EXPECT_EQ(hit->retries_used, 2);
    EXPECT_EQ(invoke(*hit, Json{{"n", 6}}, 10s, config_), 720);
}

TEST_F(CodegenTest, CacheDigestTracksSignature)
{
    auto base = factorial_spec();
    EXPECT_EQ(cache_digest(base), cache_digest(factorial_spec()));
    EXPECT_EQ(cache_digest(base).size(), 64u);

    auto changed_return = base;
    changed_return.return_schema = TypeSchema::floating();
    auto changed_param = base;
    changed_param.param_schemas = ParamSchemas{{"n", TypeSchema::floating()}};
    auto changed_target = base;
    changed_target.target = Target::Python;
    auto changed_name = base;
    changed_name.name = "factorial";
    auto changed_template = base;
    changed_template.tpl = PromptTemplate::parse("Calculate the factorial of {{n}}.");
    for (const auto* other : {&changed_return, &changed_param, &changed_target, &changed_template, &changed_name}) {
        EXPECT_NE(cache_digest(base), cache_digest(*other));
    }
    // Tests and few-shot examples do not affect the entry.
    auto changed_tests = base;
    changed_tests.tests.clear();
    EXPECT_EQ(cache_digest(base), cache_digest(changed_tests));

    cache_store(base, kFactorial, 0, config_);
    EXPECT_FALSE(cache_lookup(changed_return, config_));
}

TEST(OutputEqualTest, Cases)
{
    EXPECT_TRUE(output_equal(120, 120));
    EXPECT_TRUE(output_equal(120, 120.0));
    EXPECT_FALSE(output_equal(120, 121));
    EXPECT_TRUE(output_equal(0.3, 0.1 + 0.2));
    EXPECT_FALSE(output_equal(0.3, 0.3001));
    EXPECT_FALSE(output_equal(Json::array({1, 2}), Json::array({2, 1})));
    EXPECT_TRUE(output_equal(Json{{"a", Json::array({1.5, "x"})}}, Json{{"a", Json::array({1.5000000001, "x"})}}));
    EXPECT_FALSE(output_equal(Json{{"a", 1}}, Json{{"a", 1}, {"b", 2}}));
    EXPECT_FALSE(output_equal(true, 1));
    EXPECT_FALSE(output_equal("1", 1));
    EXPECT_TRUE(output_equal(nullptr, nullptr));
}

TEST(HarnessProtocolTest, RequestAndReply)
{
    EXPECT_EQ(harness_request("add", Json{{"x", 1}, {"y", 2}}), R"({"entry":"add","args":{"x":1,"y":2}})");
    EXPECT_EQ(harness_request("f", Json()), R"({"entry":"f","args":{}})");
    EXPECT_EQ(decode_harness_reply(R"({"ok":true,"result":[1,2]})", ""), Json::array({1, 2}));
    EXPECT_THROW(decode_harness_reply(R"({"ok":false,"error":"boom"})", ""), ExecutionError);
    EXPECT_THROW(decode_harness_reply("garbage", ""), ProtocolError);
    EXPECT_THROW(decode_harness_reply(R"({"ok":true})", ""), ProtocolError);
}

TEST(CountLocTest, SkipsBlankAndComments)
{
    EXPECT_EQ(count_loc("// c\n\nfunction f() {\n  /* a\n   b */\n  return 1; // trailing\n}\n", Target::TypeScript),
              3);
    EXPECT_EQ(count_loc("# c\ndef f():\n\n    return 1\n", Target::Python), 2);
    EXPECT_EQ(count_loc("", Target::TypeScript), 0);
}
