#include "convfit/data.hpp"

#include <fstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace convfit {

namespace {

using nlohmann::json;

json parse_line(const std::string& line, const std::string& path,
                std::size_t lineno) {
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": not a JSON object");
    return j;
}

std::string field(const json& j, const char* key, const std::string& path,
                  std::size_t lineno) {
    if (!j.contains(key) || !j[key].is_string())
        throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                 ": missing string field \"" + key + "\"");
    return j[key].get<std::string>();
}

}  // namespace

std::vector<LabeledUtterance> load_task_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<LabeledUtterance> out;
    std::unordered_set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = parse_line(line, path, lineno);
        LabeledUtterance u{field(j, "id", path, lineno),
                           field(j, "text", path, lineno),
                           field(j, "label", path, lineno)};
        if (u.label.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": empty label");
        if (!seen.insert(u.id).second)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": duplicate id '" + u.id + "'");
        out.push_back(std::move(u));
    }
    return out;
}

void save_task_jsonl(const std::string& path,
                     const std::vector<LabeledUtterance>& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& u : data) {
        json j;
        j["id"] = u.id;
        j["text"] = u.text;
        j["label"] = u.label;
        out << j.dump() << "\n";
    }
}

std::vector<ResponsePair> load_response_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<ResponsePair> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = parse_line(line, path, lineno);
        ResponsePair p{field(j, "context", path, lineno),
                       field(j, "response", path, lineno)};
        if (p.context.empty() || p.response.empty())
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": empty context or response");
        out.push_back(std::move(p));
    }
    return out;
}

void save_response_jsonl(const std::string& path,
                         const std::vector<ResponsePair>& data) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& p : data) {
        json j;
        j["context"] = p.context;
        j["response"] = p.response;
        out << j.dump() << "\n";
    }
}

}  // namespace convfit
