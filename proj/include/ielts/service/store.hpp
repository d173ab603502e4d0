#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ielts/corpus/band.hpp"
#include "ielts/feedback/feedback.hpp"
#include "ielts/rubric/rule_scorer.hpp"
#include "ielts/service/dialogue.hpp"

struct sqlite3;

namespace ielts::service {

inline constexpr int kMaxAttempts = 3;

struct Session {
    std::string id;
    std::optional<std::string> candidate_name;
    std::optional<int> candidate_age;
    Section selected_section = Section::full;
    DialogueStage stage = DialogueStage::greeting;
    std::string task_id;
    int attempts_remaining = kMaxAttempts;
    std::vector<std::string> history;  // submission ids by attempt
    std::string created_at;

    DialogueState dialogue() const;
    bool completed() const { return attempts_remaining == 0; }

    friend bool operator==(const Session&, const Session&) = default;
};

struct SubmissionRecord {
    std::string id;
    std::string session_id;
    std::string text;
    rubric::RubricScores rubric;
    std::optional<double> neural_raw;
    double raw = 0;
    corpus::Band band;
    double percentage = 0;
    feedback::FeedbackReport feedback;
    int attempt_index = 1;
    std::string model_digest;
    std::string created_at;

    bool final() const { return attempt_index == kMaxAttempts; }
    nlohmann::json to_json() const;
};

struct TranscriptTurn {
    std::string role;  // "bot" or "user"
    std::string text;
};

// Persistence contract. Implementations must make `append_submission`
// atomic: the attempt counter moves only when the record is written, and
// only if it still holds `expected_remaining`.
class Store {
public:
    virtual ~Store() = default;

    virtual void create_session(const Session& s) = 0;
    virtual std::optional<Session> find_session(const std::string& id) const = 0;
    virtual void update_dialogue(const std::string& id, const DialogueState& state) = 0;

    // False when the counter no longer equals `expected_remaining`.
    virtual bool append_submission(const SubmissionRecord& r, int expected_remaining) = 0;
    virtual std::vector<SubmissionRecord> submissions(const std::string& session_id) const = 0;
    virtual std::optional<SubmissionRecord> find_submission(const std::string& id) const = 0;

    virtual void append_turn(const std::string& session_id, const TranscriptTurn& turn) = 0;
    virtual std::vector<TranscriptTurn> transcript(const std::string& session_id) const = 0;
};

// File-backed SQLite store; ":memory:" gives a private in-memory database.
// Tables: sessions, submissions, feedback_items, dialogue_turns.
class SqliteStore final : public Store {
public:
    explicit SqliteStore(const std::filesystem::path& path);
    ~SqliteStore() override;
    SqliteStore(const SqliteStore&) = delete;
    SqliteStore& operator=(const SqliteStore&) = delete;

    void create_session(const Session& s) override;
    std::optional<Session> find_session(const std::string& id) const override;
    void update_dialogue(const std::string& id, const DialogueState& state) override;

    bool append_submission(const SubmissionRecord& r, int expected_remaining) override;
    std::vector<SubmissionRecord> submissions(const std::string& session_id) const override;
    std::optional<SubmissionRecord> find_submission(const std::string& id) const override;

    void append_turn(const std::string& session_id, const TranscriptTurn& turn) override;
    std::vector<TranscriptTurn> transcript(const std::string& session_id) const override;

    static const char* schema_sql();

private:
    std::vector<SubmissionRecord> query_submissions(const char* where, const std::string& key) const;

    sqlite3* db_ = nullptr;
    mutable std::mutex mu_;
};

}  // namespace ielts::service
