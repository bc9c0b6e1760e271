#include "askit/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"

#include "askit/digest.hpp"

namespace askit {

std::string_view role_name(Role role) noexcept
{
    switch (role) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "user";
}

Dialogue::Dialogue(std::string prompt) { messages_.push_back({Role::User, std::move(prompt)}); }

void Dialogue::add_assistant(std::string content)
{
    if (messages_.back().role == Role::Assistant) throw Error("dialogue: two consecutive assistant messages");
    messages_.push_back({Role::Assistant, std::move(content)});
}

void Dialogue::add_user(std::string content)
{
    if (messages_.back().role == Role::User) throw Error("dialogue: two consecutive user messages");
    messages_.push_back({Role::User, std::move(content)});
}

HttpError::HttpError(int status, std::string excerpt)
    : ClientError("HTTP " + std::to_string(status) + ": " + excerpt), status_(status), excerpt_(std::move(excerpt))
{
}

FixtureMiss::FixtureMiss(std::string key)
    : ClientError("no recorded response for fixture key " + key), key_(std::move(key))
{
}

ClientConfig ClientConfig::from_environment()
{
    ClientConfig cfg;
    if (const char* model = std::getenv("ASKIT_MODEL"); model && *model) cfg.model_id = model;
    if (const char* key = std::getenv("OPENAI_API_KEY"); key) cfg.api_key = key;
    if (const char* url = std::getenv("OPENAI_BASE_URL"); url && *url) cfg.base_url = url;
    return cfg;
}

void ClientConfig::check() const
{
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error("temperature must be within [0.0, 2.0]");
    if (timeout.count() <= 0) throw Error("timeout must be positive");
}

int temperature_bucket(double temperature) noexcept { return static_cast<int>(std::lround(temperature * 10.0)); }

std::string fixture_key(const std::string& model_id, double temperature, const Dialogue& dialogue)
{
    DigestBuilder d;
    d.add(model_id).add(std::to_string(temperature_bucket(temperature)));
    for (const auto& m : dialogue.messages()) d.add(m.content);
    return d.hex();
}

Json chat_request(const std::string& model_id, double temperature, const Dialogue& dialogue)
{
    Json messages = Json::array();
    for (const auto& m : dialogue.messages()) {
        messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    }
    return Json{{"model", model_id}, {"messages", std::move(messages)}, {"temperature", temperature}, {"n", 1}};
}

// ---------------------------------------------------------------------------
// FixtureStore

FixtureStore::FixtureStore(FixtureStore&& other) noexcept
{
    std::lock_guard lock(other.mu_);
    responses_ = std::move(other.responses_);
}

FixtureStore FixtureStore::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fixture file " + path.string());
    FixtureStore store;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto rec = Json::parse(line, nullptr, false);
        if (rec.is_discarded() || !rec.is_object() || !rec.contains("key") || !rec.contains("response") ||
            !rec["key"].is_string() || !rec["response"].is_string()) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed fixture record");
        }
        store.add(rec["key"].get<std::string>(), rec["response"].get<std::string>());
    }
    return store;
}

void FixtureStore::add(const std::string& key, std::string response)
{
    std::lock_guard lock(mu_);
    responses_[key].push_back(std::move(response));
}

std::optional<std::string> FixtureStore::next(const std::string& key)
{
    std::lock_guard lock(mu_);
    auto it = responses_.find(key);
    if (it == responses_.end() || it->second.empty()) return std::nullopt;
    std::string out = std::move(it->second.front());
    it->second.pop_front();
    return out;
}

std::size_t FixtureStore::size() const
{
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (const auto& [_, q] : responses_) n += q.size();
    return n;
}

void FixtureStore::append_record(const std::filesystem::path& path, const std::string& key, const Json& request,
                                 const std::string& response)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot append to fixture file " + path.string());
    Json rec{{"key", key}, {"request", request}, {"response", response}};
    out << rec.dump() << '\n';
    if (!out.flush()) throw IoError("write failed for fixture file " + path.string());
}

// ---------------------------------------------------------------------------
// HttpClient

namespace {

struct Endpoint {
    std::string scheme_host_port;
    std::string path_prefix;
};

Endpoint split_base_url(const std::string& url)
{
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error("base URL must include a scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    Endpoint ep;
    ep.scheme_host_port = url.substr(0, path_start);
    ep.path_prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    return ep;
}

std::string excerpt(const std::string& body) { return body.size() <= 512 ? body : body.substr(0, 512) + "..."; }

} // namespace

HttpClient::HttpClient(ClientConfig config) : config_(std::move(config)) { config_.check(); }

std::string HttpClient::complete(const Dialogue& dialogue, double temperature)
{
    auto ep = split_base_url(config_.base_url);
    httplib::Client cli(ep.scheme_host_port);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    cli.set_connection_timeout(secs.count(), usecs.count());
    cli.set_read_timeout(secs.count(), usecs.count());
    cli.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
    const std::string body = chat_request(config_.model_id, temperature, dialogue).dump();
    const std::string path = ep.path_prefix + "/chat/completions";

    bool transport_retry = true;
    bool rate_limit_retry = true;
    while (true) {
        auto res = cli.Post(path, headers, body, "application/json");
        if (!res) {
            auto err = res.error();
            if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
                throw ClientTimeout("request to " + config_.base_url + " timed out");
            }
            if (transport_retry) {
                transport_retry = false;
                continue;
            }
            throw ClientError("request to " + config_.base_url + " failed: " + httplib::to_string(err));
        }
        if (res->status == 429 && rate_limit_retry) {
            rate_limit_retry = false;
            long wait = 1;
            if (res->has_header("Retry-After")) wait = std::strtol(res->get_header_value("Retry-After").c_str(), nullptr, 10);
            std::this_thread::sleep_for(std::chrono::seconds(std::clamp(wait, 0L, 30L)));
            continue;
        }
        if (res->body.size() > config_.max_response_bytes) {
            throw ResponseTooLarge("response of " + std::to_string(res->body.size()) + " bytes exceeds limit of " +
                                   std::to_string(config_.max_response_bytes));
        }
        if (res->status < 200 || res->status >= 300) throw HttpError(res->status, excerpt(res->body));
        auto doc = Json::parse(res->body, nullptr, false);
        if (doc.is_discarded()) throw HttpError(res->status, "invalid JSON body: " + excerpt(res->body));
        try {
            return doc.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const Json::exception&) {
            throw HttpError(res->status, "missing choices[0].message.content: " + excerpt(res->body));
        }
    }
}

// ---------------------------------------------------------------------------
// Replay / record / scripted

ReplayClient::ReplayClient(FixtureStore store, std::string model_id, std::chrono::microseconds simulated_delay)
    : store_(std::move(store)), model_id_(std::move(model_id)), delay_(simulated_delay)
{
}

std::shared_ptr<ReplayClient> ReplayClient::open(const std::filesystem::path& path, std::string model_id,
                                                 std::chrono::microseconds simulated_delay)
{
    return std::make_shared<ReplayClient>(FixtureStore::load(path), std::move(model_id), simulated_delay);
}

std::string ReplayClient::complete(const Dialogue& dialogue, double temperature)
{
    auto key = fixture_key(model_id_, temperature, dialogue);
    auto response = store_.next(key);
    if (!response) throw FixtureMiss(key);
    if (delay_.count() > 0) std::this_thread::sleep_for(delay_);
    return *response;
}

RecordingClient::RecordingClient(std::shared_ptr<LlmClient> inner, std::filesystem::path fixture_path,
                                 std::string model_id)
    : inner_(std::move(inner)), path_(std::move(fixture_path)), model_id_(std::move(model_id))
{
}

std::string RecordingClient::complete(const Dialogue& dialogue, double temperature)
{
    auto response = inner_->complete(dialogue, temperature);
    std::lock_guard lock(mu_);
    FixtureStore::append_record(path_, fixture_key(model_id_, temperature, dialogue),
                                chat_request(model_id_, temperature, dialogue), response);
    return response;
}

ScriptedClient::ScriptedClient(std::vector<std::string> responses)
    : responses_(std::make_move_iterator(responses.begin()), std::make_move_iterator(responses.end()))
{
}

std::string ScriptedClient::complete(const Dialogue& dialogue, double /*temperature*/)
{
    std::lock_guard lock(mu_);
    requests_.push_back(dialogue);
    if (responses_.empty()) {
        throw ScriptExhausted("scripted client has no response left for call " + std::to_string(requests_.size()));
    }
    std::string out = std::move(responses_.front());
    responses_.pop_front();
    return out;
}

std::size_t ScriptedClient::call_count() const
{
    std::lock_guard lock(mu_);
    return requests_.size();
}

std::vector<Dialogue> ScriptedClient::requests() const
{
    std::lock_guard lock(mu_);
    return requests_;
}

} // namespace askit
