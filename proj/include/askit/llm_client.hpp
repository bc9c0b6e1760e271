#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "askit/error.hpp"

namespace askit {

enum class Role { System, User, Assistant };

std::string_view role_name(Role role) noexcept;

struct Message {
    Role role;
    std::string content;
};

/// Messages exchanged with the model. Starts with the user prompt; assistant
/// and user turns alternate after that.
class Dialogue {
public:
    explicit Dialogue(std::string prompt);

    void add_assistant(std::string content);
    void add_user(std::string content);

    const std::vector<Message>& messages() const noexcept { return messages_; }
    std::size_t size() const noexcept { return messages_.size(); }
    const Message& back() const { return messages_.back(); }

private:
    std::vector<Message> messages_;
};

class ClientError : public Error {
public:
    using Error::Error;
};

class HttpError : public ClientError {
public:
    HttpError(int status, std::string excerpt);
    int status() const noexcept { return status_; }
    const std::string& body_excerpt() const noexcept { return excerpt_; }

private:
    int status_;
    std::string excerpt_;
};

class ClientTimeout : public ClientError {
public:
    using ClientError::ClientError;
};

class ResponseTooLarge : public ClientError {
public:
    using ClientError::ClientError;
};

class FixtureMiss : public ClientError {
public:
    explicit FixtureMiss(std::string key);
    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class ScriptExhausted : public ClientError {
public:
    using ClientError::ClientError;
};

struct ClientConfig {
    std::string model_id = "gpt-3.5-turbo-16k";
    std::string api_key;
    std::string base_url = "https://api.openai.com/v1";
    double temperature = 1.0;
    std::chrono::milliseconds timeout{120'000};
    std::size_t max_response_bytes = 4 * 1024 * 1024;

    /// Defaults overridden by `ASKIT_MODEL`, `OPENAI_API_KEY` and
    /// `OPENAI_BASE_URL` when set.
    static ClientConfig from_environment();
    /// Throws Error when temperature is outside [0, 2] or timeout is not positive.
    void check() const;
};

/// Boundary to the language model. Implementations are safe to share
/// between concurrent callers.
class LlmClient {
public:
    virtual ~LlmClient() = default;
    /// Returns the text of a single completion for the dialogue.
    virtual std::string complete(const Dialogue& dialogue, double temperature) = 0;
};

/// Temperature participates in fixture keys at one-decimal resolution.
int temperature_bucket(double temperature) noexcept;

/// Hex SHA-256 over model id, temperature bucket and the ordered message contents.
std::string fixture_key(const std::string& model_id, double temperature, const Dialogue& dialogue);

/// Request body in the chat-completions shape; also stored in fixtures.
Json chat_request(const std::string& model_id, double temperature, const Dialogue& dialogue);

/// Recorded responses, one JSON object per line:
/// `{"key": ..., "request": ..., "response": ...}`. Each key keeps an ordered
/// response list consumed through a per-key cursor.
class FixtureStore {
public:
    FixtureStore() = default;
    FixtureStore(FixtureStore&& other) noexcept;
    FixtureStore& operator=(FixtureStore&&) = delete;
    static FixtureStore load(const std::filesystem::path& path);

    void add(const std::string& key, std::string response);
    /// Next unread response for the key, or nullopt.
    std::optional<std::string> next(const std::string& key);
    std::size_t size() const;

    static void append_record(const std::filesystem::path& path, const std::string& key, const Json& request,
                              const std::string& response);

private:
    mutable std::mutex mu_;
    std::map<std::string, std::deque<std::string>> responses_;
};

/// OpenAI-compatible chat-completions over HTTP(S).
class HttpClient : public LlmClient {
public:
    explicit HttpClient(ClientConfig config);
    std::string complete(const Dialogue& dialogue, double temperature) override;
    const ClientConfig& config() const noexcept { return config_; }

private:
    ClientConfig config_;
};

/// Serves recorded responses; never touches the network.
class ReplayClient : public LlmClient {
public:
    ReplayClient(FixtureStore store, std::string model_id,
                 std::chrono::microseconds simulated_delay = std::chrono::microseconds{0});
    static std::shared_ptr<ReplayClient> open(const std::filesystem::path& path, std::string model_id,
                                              std::chrono::microseconds simulated_delay = {});

    std::string complete(const Dialogue& dialogue, double temperature) override;

private:
    FixtureStore store_;
    std::string model_id_;
    std::chrono::microseconds delay_;
};

/// Forwards to another client and appends every exchange to a fixture file.
class RecordingClient : public LlmClient {
public:
    RecordingClient(std::shared_ptr<LlmClient> inner, std::filesystem::path fixture_path, std::string model_id);
    std::string complete(const Dialogue& dialogue, double temperature) override;

private:
    std::shared_ptr<LlmClient> inner_;
    std::filesystem::path path_;
    std::string model_id_;
    std::mutex mu_;
};

/// Test double: pops responses in order regardless of the request.
class ScriptedClient : public LlmClient {
public:
    explicit ScriptedClient(std::vector<std::string> responses);
    std::string complete(const Dialogue& dialogue, double temperature) override;

    std::size_t call_count() const;
    /// Copies of every dialogue received, in call order.
    std::vector<Dialogue> requests() const;

private:
    mutable std::mutex mu_;
    std::deque<std::string> responses_;
    std::vector<Dialogue> requests_;
};

/// Counts completions forwarded to the wrapped client.
class CountingClient : public LlmClient {
public:
    explicit CountingClient(std::shared_ptr<LlmClient> inner) : inner_(std::move(inner)) {}
    std::string complete(const Dialogue& dialogue, double temperature) override
    {
        ++calls_;
        return inner_->complete(dialogue, temperature);
    }
    long calls() const noexcept { return calls_.load(); }

private:
    std::shared_ptr<LlmClient> inner_;
    std::atomic<long> calls_{0};
};

} // namespace askit
