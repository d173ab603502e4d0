#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ielts/scoring/scorer.hpp"
#include "ielts/service/dialogue.hpp"
#include "ielts/service/store.hpp"

namespace ielts::service {

inline constexpr std::size_t kMaxSubmissionWords = 10000;

struct Task {
    std::string id;
    std::string title;
    std::string prompt;
    std::string instructions;
    std::string reference_image_uri;
    int required_word_count = 250;

    // Payload with the word target scaled to `section`.
    nlohmann::json to_json(Section section = Section::full) const;
};

std::vector<Task> load_tasks(const std::filesystem::path& path);

struct NewSession {
    std::optional<std::string> name;
    std::optional<int> age;
    std::optional<Section> section;
    std::optional<std::string> task_id;
};

struct DialogueTurnResult {
    std::string reply;
    Session session;
};

struct SubmissionResult {
    SubmissionRecord record;
    int attempts_remaining = 0;
};

struct ProgressEntry {
    int attempt_index = 0;
    corpus::Band band;
    double raw = 0;
    double percentage = 0;
    std::optional<double> delta;  // raw minus the previous attempt's raw
};

nlohmann::json session_to_json(const Session& s, const std::vector<TranscriptTurn>& transcript, int required_words);
nlohmann::json progress_to_json(const std::vector<ProgressEntry>& entries);

// Sessions, onboarding dialogue, scoring and progress. Writes to one session
// are serialised; different sessions proceed in parallel.
class Platform {
public:
    Platform(std::shared_ptr<Store> store, scoring::EssayScorer scorer, std::vector<Task> tasks,
             const ReplyCatalog& replies = ReplyCatalog::default_catalog());

    // With no name and age the session opens at GREETING; with both it goes
    // straight to WRITING (section defaults to full).
    Session create_session(const NewSession& request);
    Session session(const std::string& id) const;
    std::vector<TranscriptTurn> transcript(const std::string& id) const;

    DialogueTurnResult dialogue(const std::string& id, std::string_view input);

    const Task& task(const std::string& task_id) const;
    const std::vector<Task>& tasks() const { return tasks_; }
    int required_words(const Session& s) const;

    SubmissionResult submit(const std::string& session_id, std::string_view text);
    std::vector<ProgressEntry> progress(const std::string& session_id) const;
    std::vector<SubmissionRecord> submissions(const std::string& session_id) const;

    const scoring::EssayScorer& scorer() const { return scorer_; }

private:
    std::mutex& session_lock(const std::string& id);
    std::string new_id();

    std::shared_ptr<Store> store_;
    scoring::EssayScorer scorer_;
    std::vector<Task> tasks_;
    const ReplyCatalog& replies_;

    std::mutex locks_mu_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
    std::mutex rng_mu_;
    std::mt19937_64 rng_;
};

std::string utc_timestamp();

}  // namespace ielts::service
