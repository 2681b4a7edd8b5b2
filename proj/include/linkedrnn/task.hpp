#pragma once

#include <string>

#include "linkedrnn/errors.hpp"

namespace linkedrnn {

enum class TaskKind { classification, regression };

inline std::string task_name(TaskKind t) {
    return t == TaskKind::classification ? "classification" : "regression";
}

inline TaskKind parse_task(const std::string& s) {
    if (s == "classification") return TaskKind::classification;
    if (s == "regression") return TaskKind::regression;
    throw DataError("unknown task kind: \"" + s + "\"");
}

} // namespace linkedrnn
