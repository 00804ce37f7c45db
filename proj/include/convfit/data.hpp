#pragma once

#include <string>
#include <vector>

// Dataset records and their JSONL file formats. Task data is one object
// per line {"id","text","label"}; response-ranking data is
// {"context","response"}.

namespace convfit {

struct LabeledUtterance {
    std::string id;
    std::string text;
    std::string label;

    bool operator==(const LabeledUtterance&) const = default;
};

struct ResponsePair {
    std::string context;
    std::string response;

    bool operator==(const ResponsePair&) const = default;
};

// Both loaders validate as they read: ids must be unique, labels and
// pair sides nonempty. Errors name the offending line.
std::vector<LabeledUtterance> load_task_jsonl(const std::string& path);
void save_task_jsonl(const std::string& path,
                     const std::vector<LabeledUtterance>& data);

std::vector<ResponsePair> load_response_jsonl(const std::string& path);
void save_response_jsonl(const std::string& path,
                         const std::vector<ResponsePair>& data);

}  // namespace convfit
