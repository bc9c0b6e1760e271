#include <gtest/gtest.h>

#include "askit/engine.hpp"
#include "schema_gen.hpp"
#include "test_support.hpp"

using namespace askit;

namespace {

std::string envelope(const Json& answer, const std::string& reason = "because")
{
    Json doc = Json::object();
    doc["reason"] = reason;
    doc["answer"] = answer;
    return "```json\n" + doc.dump() + "\n```";
}

const PromptTemplate& sentiment_tpl()
{
    static const auto tpl = PromptTemplate::parse("What is the sentiment of {{review}}?");
    return tpl;
}

TypeSchema sentiment()
{
    return TypeSchema::union_of({TypeSchema::literal("positive"), TypeSchema::literal("negative")});
}

const Json kArgs{{"review", "Great phone"}};

} // namespace

TEST(FeedbackTextTest, FixedSentences)
{
    EXPECT_EQ(feedback_text({Violation::Kind::NoJsonBlock, "", {}}),
              askit::testing::read_file(askit::testing::data_dir() / "golden" / "feedback_no_json_block.txt"));
    EXPECT_EQ(feedback_text({Violation::Kind::MissingAnswerField, "", {}}),
              askit::testing::read_file(askit::testing::data_dir() / "golden" / "feedback_missing_answer.txt"));
}

TEST(FeedbackTextTest, TypeMismatchEmbedsPath)
{
    Violation v{Violation::Kind::TypeMismatch, "", ValidationReport{false, "answer[0].year", "number", "string"}};
    EXPECT_EQ(feedback_text(v),
              "The 'answer' field did not match the required type at answer[0].year: expected number, found string. "
              "Respond again with a conforming 'answer'.");
}

TEST(FeedbackTextTest, CodegenKindsHaveNoFeedback)
{
    EXPECT_THROW(feedback_text({Violation::Kind::SyntaxError, "", {}}), Error);
}

TEST(EngineTest, ValidFirstResponseIsOneCall)
{
    ScriptedClient client({envelope("positive")});
    auto r = ask_until_valid(client, sentiment_tpl(), kArgs, sentiment(), {});
    EXPECT_EQ(r.value, "positive");
    EXPECT_EQ(r.reason, "because");
    EXPECT_EQ(r.attempts, 1);
    EXPECT_EQ(client.call_count(), 1u);
    EXPECT_EQ(r.dialogue.size(), 1u);
}

TEST(EngineTest, ProseThenValid)
{
    ScriptedClient client({"I think it is positive.", envelope("positive")});
    auto r = ask_until_valid(client, sentiment_tpl(), kArgs, sentiment(), {});
    EXPECT_EQ(r.attempts, 2);
    auto second = client.requests().at(1).messages();
    ASSERT_EQ(second.size(), 3u);
    EXPECT_EQ(second[1].role, Role::Assistant);
    EXPECT_EQ(second[1].content, "I think it is positive.");
    EXPECT_EQ(second[2].role, Role::User);
    EXPECT_EQ(second[2].content, feedback_text({Violation::Kind::NoJsonBlock, "", {}}));
}

TEST(EngineTest, TypeMismatchFeedbackNamesThePath)
{
    ScriptedClient client({envelope("neutral"), envelope("negative")});
    auto r = ask_until_valid(client, sentiment_tpl(), kArgs, sentiment(), {});
    EXPECT_EQ(r.value, "negative");
    auto feedback = client.requests().at(1).messages().at(2).content;
    EXPECT_EQ(feedback, "The 'answer' field did not match the required type at answer: expected 'positive' | "
                        "'negative', found \"neutral\". Respond again with a conforming 'answer'.");
}

TEST(EngineTest, RetriesExhaustedAfterBound)
{
    ScriptedClient client(std::vector<std::string>(10, "prose"));
    try {
        ask_until_valid(client, sentiment_tpl(), kArgs, sentiment(), {});
        FAIL() << "expected RetriesExhausted";
    } catch (const RetriesExhausted& e) {
        EXPECT_EQ(e.attempts(), 10);
        EXPECT_EQ(e.violation().kind, Violation::Kind::NoJsonBlock);
        EXPECT_EQ(e.dialogue().size(), 21u);
    }
    EXPECT_EQ(client.call_count(), 10u);
}

TEST(EngineTest, ZeroRetriesMeansOneAttempt)
{
    ScriptedClient client({"prose", envelope("positive")});
    EngineConfig config;
    config.max_direct_retries = 0;
    EXPECT_THROW(ask_until_valid(client, sentiment_tpl(), kArgs, sentiment(), {}, config), RetriesExhausted);
    EXPECT_EQ(client.call_count(), 1u);
}

TEST(EngineTest, UnboundArgumentBeforeAnyCall)
{
    ScriptedClient client({envelope("positive")});
    EXPECT_THROW(ask_until_valid(client, sentiment_tpl(), Json::object(), sentiment(), {}), TemplateError);
    EXPECT_EQ(client.call_count(), 0u);
}

TEST(EngineTest, ClientErrorsPropagate)
{
    ScriptedClient client({});
    EXPECT_THROW(ask_until_valid(client, sentiment_tpl(), kArgs, sentiment(), {}), ScriptExhausted);
}

TEST(EngineTest, ConfigValidation)
{
    EngineConfig config;
    config.max_direct_retries = -1;
    EXPECT_THROW(config.check(), Error);
    config.max_direct_retries = 0;
    config.temperature = -0.1;
    EXPECT_THROW(config.check(), Error);
}

TEST(EngineTest, TemperatureReachesClient)
{
    class Probe : public LlmClient {
    public:
        double seen = -1;
        std::string complete(const Dialogue&, double temperature) override
        {
            seen = temperature;
            return envelope(1);
        }
    } probe;
    EngineConfig config;
    config.temperature = 0.2;
    ask_until_valid(probe, PromptTemplate::parse("one"), Json::object(), TypeSchema::integer(), {}, config);
    EXPECT_DOUBLE_EQ(probe.seen, 0.2);
}

TEST(EngineProperty, DialogueGrowsByTwoAndAnswerValidates)
{
    askit::testing::SchemaSampler sampler(123);
    const std::vector<std::string> bad = {"prose", "```json\n{\"reason\": \"r\"}\n```", "```json\nnot json\n```"};
    for (int trial = 0; trial < 100; ++trial) {
        auto schema = sampler.schema(2);
        int failures = sampler.pick(0, 9);
        std::vector<std::string> script;
        for (int i = 0; i < failures; ++i) script.push_back(bad[sampler.pick(0, 2)]);
        auto answer = sampler.value(schema);
        script.push_back(envelope(answer));
        ScriptedClient client(script);
        auto r = ask_until_valid(client, PromptTemplate::parse("go"), Json::object(), schema, {});
        EXPECT_EQ(r.attempts, failures + 1);
        EXPECT_LE(r.attempts, 10);
        EXPECT_TRUE(validate(schema, r.value).ok);
        auto requests = client.requests();
        for (std::size_t i = 1; i < requests.size(); ++i) {
            ASSERT_EQ(requests[i].size(), requests[i - 1].size() + 2);
            for (std::size_t m = 0; m < requests[i - 1].size(); ++m) {
                EXPECT_EQ(requests[i].messages()[m].content, requests[i - 1].messages()[m].content);
            }
        }
    }
}
