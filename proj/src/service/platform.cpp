#include "ielts/service/platform.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/text/tokenizer.hpp"

namespace ielts::service {

using nlohmann::json;

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto secs = std::chrono::system_clock::to_time_t(now);
    const auto ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

json Task::to_json(Section section) const {
    return {{"id", id},
            {"title", title},
            {"prompt", prompt},
            {"instructions", instructions},
            {"reference_image_uri", reference_image_uri},
            {"section", to_string(section)},
            {"required_word_count", section_word_target(section, required_word_count)}};
}

std::vector<Task> load_tasks(const std::filesystem::path& path) {
    std::vector<Task> out;
    try {
        for (const auto& j : json::parse(read_file(path))) {
            Task t;
            t.id = j.at("id").get<std::string>();
            t.title = j.value("title", t.id);
            t.prompt = j.at("prompt").get<std::string>();
            t.instructions = j.value("instructions", "");
            t.reference_image_uri = j.value("reference_image_uri", "");
            t.required_word_count = j.value("required_word_count", 250);
            if (t.required_word_count <= 0) throw InvalidInput("task " + t.id + ": required_word_count must be positive");
            out.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
    if (out.empty()) throw InvalidInput(path.string() + ": no tasks");
    return out;
}

json session_to_json(const Session& s, const std::vector<TranscriptTurn>& transcript, int required_words) {
    json turns = json::array();
    for (const auto& t : transcript) turns.push_back({{"role", t.role}, {"text", t.text}});
    return {{"id", s.id},
            {"candidate_name", s.candidate_name ? json(*s.candidate_name) : json(nullptr)},
            {"candidate_age", s.candidate_age ? json(*s.candidate_age) : json(nullptr)},
            {"selected_section", to_string(s.selected_section)},
            {"dialogue_state", to_string(s.stage)},
            {"task_id", s.task_id},
            {"required_word_count", required_words},
            {"attempts_remaining", s.attempts_remaining},
            {"completed", s.completed()},
            {"history", s.history},
            {"created_at", s.created_at},
            {"transcript", turns}};
}

json progress_to_json(const std::vector<ProgressEntry>& entries) {
    json out = json::array();
    for (const auto& e : entries) {
        out.push_back({{"attempt_index", e.attempt_index},
                       {"band", e.band.value()},
                       {"raw_score", e.raw},
                       {"percentage", e.percentage},
                       {"delta", e.delta ? json(*e.delta) : json(nullptr)}});
    }
    return out;
}

Platform::Platform(std::shared_ptr<Store> store, scoring::EssayScorer scorer, std::vector<Task> tasks,
                   const ReplyCatalog& replies)
    : store_(std::move(store)), scorer_(std::move(scorer)), tasks_(std::move(tasks)), replies_(replies),
      rng_(std::random_device{}()) {
    if (!store_) throw InvalidInput("platform needs a store");
    if (tasks_.empty()) throw InvalidInput("platform needs at least one task");
}

std::string Platform::new_id() {
    std::lock_guard lock(rng_mu_);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
    return buf;
}

std::mutex& Platform::session_lock(const std::string& id) {
    std::lock_guard lock(locks_mu_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
}

const Task& Platform::task(const std::string& task_id) const {
    for (const auto& t : tasks_) {
        if (t.id == task_id) return t;
    }
    throw NotFound("task '" + task_id + "' not found");
}

int Platform::required_words(const Session& s) const {
    return section_word_target(s.selected_section, task(s.task_id).required_word_count);
}

Session Platform::create_session(const NewSession& req) {
    Session s;
    s.id = new_id();
    s.task_id = req.task_id ? task(*req.task_id).id : tasks_.front().id;
    s.created_at = utc_timestamp();
    if (req.name.has_value() != req.age.has_value()) throw InvalidInput("name and age must be given together");
    if (req.name) {
        auto name = parse_name(*req.name);
        if (!name) throw InvalidInput("invalid name");
        if (*req.age < 5 || *req.age > 120) throw InvalidInput("invalid age: expected 5 to 120");
        s.candidate_name = *name;
        s.candidate_age = *req.age;
        s.selected_section = req.section.value_or(Section::full);
        s.stage = DialogueStage::writing;
    } else if (req.section) {
        throw InvalidInput("section requires name and age");
    }
    store_->create_session(s);
    if (s.stage == DialogueStage::greeting) store_->append_turn(s.id, {"bot", opening_message(replies_)});
    return session(s.id);
}

Session Platform::session(const std::string& id) const {
    auto s = store_->find_session(id);
    if (!s) throw NotFound("session '" + id + "' not found");
    return *s;
}

std::vector<TranscriptTurn> Platform::transcript(const std::string& id) const {
    session(id);
    return store_->transcript(id);
}

DialogueTurnResult Platform::dialogue(const std::string& id, std::string_view input) {
    std::lock_guard lock(session_lock(id));
    const auto s = session(id);
    const auto step = dialogue_step(s.dialogue(), input, replies_, task(s.task_id).required_word_count);
    store_->append_turn(id, {"user", std::string(input)});
    store_->append_turn(id, {"bot", step.reply});
    if (!(step.next == s.dialogue())) store_->update_dialogue(id, step.next);
    return {step.reply, session(id)};
}

SubmissionResult Platform::submit(const std::string& session_id, std::string_view text) {
    std::lock_guard lock(session_lock(session_id));
    const auto s = session(session_id);
    if (s.attempts_remaining <= 0) throw AttemptLimitReached();
    if (s.stage != DialogueStage::writing) {
        throw Error("onboarding_incomplete", "finish the onboarding dialogue before submitting");
    }
    const auto words = text::count_words(text);
    if (words == 0) throw InvalidInput("empty_text", "submission text is empty");
    if (words > kMaxSubmissionWords) {
        throw InvalidInput("text_too_long", "submission exceeds " + std::to_string(kMaxSubmissionWords) + " words");
    }

    const auto& t = task(s.task_id);
    const auto scored = scorer_.score(text, t.prompt, required_words(s));

    SubmissionRecord r;
    r.id = new_id();
    r.session_id = session_id;
    r.text = std::string(text);
    r.rubric = scored.rubric;
    r.neural_raw = scored.neural_raw;
    r.raw = scored.raw;
    r.band = scored.band;
    r.percentage = scored.percentage;
    r.feedback = scored.feedback;
    r.attempt_index = kMaxAttempts - s.attempts_remaining + 1;
    r.model_digest = scorer_.model_digest();
    r.created_at = utc_timestamp();
    if (!store_->append_submission(r, s.attempts_remaining)) throw AttemptLimitReached();
    return {std::move(r), s.attempts_remaining - 1};
}

std::vector<SubmissionRecord> Platform::submissions(const std::string& session_id) const {
    session(session_id);
    return store_->submissions(session_id);
}

std::vector<ProgressEntry> Platform::progress(const std::string& session_id) const {
    session(session_id);
    std::vector<ProgressEntry> out;
    for (const auto& r : store_->submissions(session_id)) {
        ProgressEntry e{r.attempt_index, r.band, r.raw, r.percentage, std::nullopt};
        if (!out.empty()) e.delta = r.raw - out.back().raw;
        out.push_back(e);
    }
    return out;
}

}  // namespace ielts::service
