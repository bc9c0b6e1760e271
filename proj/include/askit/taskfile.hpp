#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "askit/task.hpp"

namespace askit {

struct TaskEntry {
    TaskSpec spec;
    bool codable = false;
};

/// Declarative list of `define` calls:
///
///     {"version": 1, "tasks": [{"name": "calculateFactorial",
///       "template": "Calculate the factorial of {{n}}", "return_schema": "int",
///       "param_schemas": {"n": "int"}, "fewshot": [], "tests": [{"input": {"n": 5}, "output": 120}],
///       "codable": true}]}
///
/// Schemas use the constructor syntax of parse_schema; `"void"` marks no result.
struct TaskFile {
    std::vector<TaskEntry> tasks;

    static TaskFile parse(const Json& doc);
    static TaskFile load(const std::filesystem::path& path);

    /// nullptr when absent.
    const TaskEntry* find(const std::string& name) const;
};

} // namespace askit
