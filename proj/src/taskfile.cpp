#include "askit/taskfile.hpp"

#include <fstream>
#include <set>

namespace askit {

namespace {

std::vector<Example> parse_examples(const Json& arr, const std::string& task, const char* field)
{
    std::vector<Example> out;
    if (arr.is_null()) return out;
    if (!arr.is_array()) throw SpecError("task '" + task + "': '" + field + "' must be an array");
    for (const auto& item : arr) {
        if (!item.is_object() || !item.contains("input") || !item.contains("output") || !item["input"].is_object()) {
            throw SpecError("task '" + task + "': each '" + field + "' entry needs an object 'input' and an 'output'");
        }
        out.push_back(Example{item["input"], item["output"]});
    }
    return out;
}

TaskEntry parse_entry(const Json& j)
{
    if (!j.is_object()) throw SpecError("task entries must be objects");
    auto get_string = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_string()) throw SpecError(std::string("task entry lacks string '") + key + "'");
        return j[key].get<std::string>();
    };
    TaskEntry entry;
    auto& spec = entry.spec;
    spec.name = get_string("name");
    spec.tpl = PromptTemplate::parse(get_string("template"));
    auto ret = get_string("return_schema");
    if (ret != "void") spec.return_schema = parse_schema(ret);
    if (j.contains("param_schemas") && !j["param_schemas"].is_null()) {
        const auto& ps = j["param_schemas"];
        if (!ps.is_object()) throw SpecError("task '" + spec.name + "': 'param_schemas' must be an object");
        ParamSchemas params;
        for (const auto& [pname, text] : ps.items()) {
            if (!text.is_string()) throw SpecError("task '" + spec.name + "': schema of '" + pname + "' must be text");
            params.emplace_back(pname, parse_schema(text.get<std::string>()));
        }
        spec.param_schemas = std::move(params);
    }
    spec.fewshot = parse_examples(j.value("fewshot", Json()), spec.name, "fewshot");
    spec.tests = parse_examples(j.value("tests", Json()), spec.name, "tests");
    if (j.contains("target")) spec.target = parse_target(j["target"].get<std::string>());
    entry.codable = j.value("codable", false);
    spec.check();
    return entry;
}

} // namespace

TaskFile TaskFile::parse(const Json& doc)
{
    if (!doc.is_object() || doc.value("version", 0) != 1) throw SpecError("task file must be an object with \"version\": 1");
    if (!doc.contains("tasks") || !doc["tasks"].is_array()) throw SpecError("task file needs a 'tasks' array");
    TaskFile file;
    std::set<std::string> names;
    for (const auto& item : doc["tasks"]) {
        auto entry = parse_entry(item);
        if (!names.insert(entry.spec.name).second) throw SpecError("duplicate task name '" + entry.spec.name + "'");
        file.tasks.push_back(std::move(entry));
    }
    return file;
}

TaskFile TaskFile::load(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open task file " + path.string());
    auto doc = Json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw SpecError("task file " + path.string() + " is not valid JSON");
    return parse(doc);
}

const TaskEntry* TaskFile::find(const std::string& name) const
{
    for (const auto& t : tasks) {
        if (t.spec.name == name) return &t;
    }
    return nullptr;
}

} // namespace askit
