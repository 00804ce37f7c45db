#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "convfit/data.hpp"

using namespace convfit;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& p, const std::string& content)
        : path(p) {
        std::ofstream out(path);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("task jsonl round-trips") {
    std::vector<LabeledUtterance> data = {
        {"u1", "pay my bill", "pay_bill"},
        {"u2", "what's my balance?", "check_balance"},
        {"u3", "unicode caf\xc3\xa9 \"quoted\"", "pay_bill"},
    };
    const std::string path = "test_task_roundtrip.jsonl";
    save_task_jsonl(path, data);
    CHECK(load_task_jsonl(path) == data);
    std::remove(path.c_str());
}

TEST_CASE("task jsonl rejects duplicates and bad rows") {
    TempFile dup("test_task_dup.jsonl",
                 R"({"id":"a","text":"x","label":"l1"}
{"id":"a","text":"y","label":"l2"}
)");
    CHECK_THROWS_WITH_AS(load_task_jsonl(dup.path),
                         "test_task_dup.jsonl:2: duplicate id 'a'",
                         std::runtime_error);

    TempFile missing("test_task_missing.jsonl", R"({"id":"a","text":"x"}
)");
    CHECK_THROWS_AS(load_task_jsonl(missing.path), std::runtime_error);

    TempFile garbage("test_task_garbage.jsonl", "not json at all\n");
    CHECK_THROWS_AS(load_task_jsonl(garbage.path), std::runtime_error);

    TempFile empty_label("test_task_empty_label.jsonl",
                         R"({"id":"a","text":"x","label":""}
)");
    CHECK_THROWS_AS(load_task_jsonl(empty_label.path), std::runtime_error);

    CHECK_THROWS_AS(load_task_jsonl("test_task_nonexistent.jsonl"),
                    std::runtime_error);
}

TEST_CASE("task jsonl skips blank lines") {
    TempFile f("test_task_blank.jsonl",
               "\n{\"id\":\"a\",\"text\":\"x\",\"label\":\"l\"}\n\n");
    CHECK(load_task_jsonl(f.path).size() == 1);
}

TEST_CASE("response jsonl round-trips and validates") {
    std::vector<ResponsePair> pairs = {
        {"how do i pay", "use the app"},
        {"card is blocked", "contact support"},
    };
    const std::string path = "test_resp_roundtrip.jsonl";
    save_response_jsonl(path, pairs);
    CHECK(load_response_jsonl(path) == pairs);
    std::remove(path.c_str());

    TempFile empty_side("test_resp_empty.jsonl",
                        R"({"context":"","response":"r"}
)");
    CHECK_THROWS_AS(load_response_jsonl(empty_side.path), std::runtime_error);
}

TEST_SUITE_END();
