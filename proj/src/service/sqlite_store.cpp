#include <sqlite3.h>

#include "ielts/common/error.hpp"
#include "ielts/service/store.hpp"

namespace ielts::service {

using nlohmann::json;

namespace {

class Stmt {
public:
    Stmt(sqlite3* db, const char* sql) : db_(db) {
        if (sqlite3_prepare_v2(db, sql, -1, &st_, nullptr) != SQLITE_OK) {
            throw IoError(std::string("sqlite prepare: ") + sqlite3_errmsg(db));
        }
    }
    ~Stmt() { sqlite3_finalize(st_); }
    Stmt(const Stmt&) = delete;
    Stmt& operator=(const Stmt&) = delete;

    Stmt& bind(int i, const std::string& v) {
        check(sqlite3_bind_text(st_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT));
        return *this;
    }
    Stmt& bind(int i, double v) {
        check(sqlite3_bind_double(st_, i, v));
        return *this;
    }
    Stmt& bind(int i, int v) {
        check(sqlite3_bind_int(st_, i, v));
        return *this;
    }
    Stmt& bind_null(int i) {
        check(sqlite3_bind_null(st_, i));
        return *this;
    }
    template <class T>
    Stmt& bind(int i, const std::optional<T>& v) {
        return v ? bind(i, *v) : bind_null(i);
    }

    // True while rows remain.
    bool step() {
        const int rc = sqlite3_step(st_);
        if (rc == SQLITE_ROW) return true;
        if (rc == SQLITE_DONE) return false;
        throw IoError(std::string("sqlite step: ") + sqlite3_errmsg(db_));
    }

    std::string text(int c) const {
        const auto* p = sqlite3_column_text(st_, c);
        return p ? std::string(reinterpret_cast<const char*>(p), sqlite3_column_bytes(st_, c)) : std::string();
    }
    bool null(int c) const { return sqlite3_column_type(st_, c) == SQLITE_NULL; }
    double real(int c) const { return sqlite3_column_double(st_, c); }
    int integer(int c) const { return sqlite3_column_int(st_, c); }

private:
    void check(int rc) const {
        if (rc != SQLITE_OK) throw IoError(std::string("sqlite bind: ") + sqlite3_errmsg(db_));
    }

    sqlite3* db_;
    sqlite3_stmt* st_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
    char* err = nullptr;
    if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown";
        sqlite3_free(err);
        throw IoError("sqlite: " + msg);
    }
}

class Transaction {
public:
    explicit Transaction(sqlite3* db) : db_(db) { exec(db_, "BEGIN IMMEDIATE"); }
    ~Transaction() {
        if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
    }
    void commit() {
        exec(db_, "COMMIT");
        done_ = true;
    }

private:
    sqlite3* db_;
    bool done_ = false;
};

}  // namespace

DialogueState Session::dialogue() const {
    DialogueState d;
    d.stage = stage;
    d.name = candidate_name;
    d.age = candidate_age;
    if (stage == DialogueStage::writing) d.section = selected_section;
    return d;
}

json SubmissionRecord::to_json() const {
    return {{"id", id},
            {"session_id", session_id},
            {"attempt_index", attempt_index},
            {"final", final()},
            {"text", text},
            {"rubric",
             {{"TA", rubric.ta},
              {"CC", rubric.cc},
              {"LR", rubric.lr},
              {"GRA", rubric.gra},
              {"overall", rubric.overall.value()},
              {"percentage", rubric.percentage}}},
            {"neural_raw", neural_raw ? json(*neural_raw) : json(nullptr)},
            {"raw_score", raw},
            {"band", band.value()},
            {"percentage", percentage},
            {"feedback", feedback.to_json()},
            {"model_digest", model_digest},
            {"created_at", created_at}};
}

const char* SqliteStore::schema_sql() {
    return R"sql(
CREATE TABLE IF NOT EXISTS sessions (
  id TEXT PRIMARY KEY,
  candidate_name TEXT,
  candidate_age INTEGER,
  selected_section TEXT NOT NULL,
  dialogue_state TEXT NOT NULL,
  task_id TEXT NOT NULL,
  attempts_remaining INTEGER NOT NULL CHECK (attempts_remaining BETWEEN 0 AND 3),
  created_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS submissions (
  id TEXT PRIMARY KEY,
  session_id TEXT NOT NULL REFERENCES sessions(id),
  attempt_index INTEGER NOT NULL CHECK (attempt_index BETWEEN 1 AND 3),
  text TEXT NOT NULL,
  ta REAL NOT NULL,
  cc REAL NOT NULL,
  lr REAL NOT NULL,
  gra REAL NOT NULL,
  neural_raw REAL,
  raw_score REAL NOT NULL,
  band REAL NOT NULL,
  percentage REAL NOT NULL,
  model_digest TEXT NOT NULL,
  created_at TEXT NOT NULL,
  UNIQUE (session_id, attempt_index)
);
CREATE TABLE IF NOT EXISTS feedback_items (
  submission_id TEXT NOT NULL REFERENCES submissions(id),
  position INTEGER NOT NULL,
  criterion TEXT NOT NULL,
  polarity TEXT NOT NULL,
  condition TEXT NOT NULL,
  triggered TEXT NOT NULL,
  message TEXT NOT NULL,
  suggestion TEXT,
  priority REAL NOT NULL,
  PRIMARY KEY (submission_id, position)
);
CREATE TABLE IF NOT EXISTS dialogue_turns (
  session_id TEXT NOT NULL REFERENCES sessions(id),
  seq INTEGER NOT NULL,
  role TEXT NOT NULL,
  text TEXT NOT NULL,
  PRIMARY KEY (session_id, seq)
);
)sql";
}

SqliteStore::SqliteStore(const std::filesystem::path& path) {
    const int flags = SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX;
    if (sqlite3_open_v2(path.string().c_str(), &db_, flags, nullptr) != SQLITE_OK) {
        std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
        sqlite3_close(db_);
        throw IoError("cannot open store " + path.string() + ": " + msg);
    }
    sqlite3_busy_timeout(db_, 5000);
    try {
        if (path != ":memory:") exec(db_, "PRAGMA journal_mode=WAL");
        exec(db_, "PRAGMA foreign_keys=ON");
        exec(db_, schema_sql());
    } catch (...) {
        sqlite3_close(db_);
        throw;
    }
}

SqliteStore::~SqliteStore() { sqlite3_close(db_); }

void SqliteStore::create_session(const Session& s) {
    std::lock_guard lock(mu_);
    Stmt st(db_,
            "INSERT INTO sessions (id, candidate_name, candidate_age, selected_section, dialogue_state, task_id, "
            "attempts_remaining, created_at) VALUES (?, ?, ?, ?, ?, ?, ?, ?)");
    st.bind(1, s.id)
        .bind(2, s.candidate_name)
        .bind(3, s.candidate_age)
        .bind(4, std::string(to_string(s.selected_section)))
        .bind(5, std::string(to_string(s.stage)))
        .bind(6, s.task_id)
        .bind(7, s.attempts_remaining)
        .bind(8, s.created_at);
    st.step();
}

std::optional<Session> SqliteStore::find_session(const std::string& id) const {
    std::lock_guard lock(mu_);
    Stmt st(db_,
            "SELECT id, candidate_name, candidate_age, selected_section, dialogue_state, task_id, attempts_remaining, "
            "created_at FROM sessions WHERE id = ?");
    st.bind(1, id);
    if (!st.step()) return std::nullopt;
    Session s;
    s.id = st.text(0);
    if (!st.null(1)) s.candidate_name = st.text(1);
    if (!st.null(2)) s.candidate_age = st.integer(2);
    s.selected_section = section_from_string(st.text(3));
    s.stage = stage_from_string(st.text(4));
    s.task_id = st.text(5);
    s.attempts_remaining = st.integer(6);
    s.created_at = st.text(7);

    Stmt h(db_, "SELECT id FROM submissions WHERE session_id = ? ORDER BY attempt_index");
    h.bind(1, id);
    while (h.step()) s.history.push_back(h.text(0));
    return s;
}

void SqliteStore::update_dialogue(const std::string& id, const DialogueState& d) {
    std::lock_guard lock(mu_);
    Stmt st(db_,
            "UPDATE sessions SET dialogue_state = ?, candidate_name = ?, candidate_age = ?, "
            "selected_section = COALESCE(?, selected_section) WHERE id = ?");
    st.bind(1, std::string(to_string(d.stage))).bind(2, d.name).bind(3, d.age);
    if (d.section) {
        st.bind(4, std::string(to_string(*d.section)));
    } else {
        st.bind_null(4);
    }
    st.bind(5, id);
    st.step();
    if (sqlite3_changes(db_) == 0) throw NotFound("session '" + id + "' not found");
}

bool SqliteStore::append_submission(const SubmissionRecord& r, int expected_remaining) {
    if (r.attempt_index != kMaxAttempts - expected_remaining + 1) {
        throw InvalidInput("attempt index does not match the attempt counter");
    }
    std::lock_guard lock(mu_);
    Transaction tx(db_);
    {
        Stmt st(db_,
                "UPDATE sessions SET attempts_remaining = attempts_remaining - 1 "
                "WHERE id = ? AND attempts_remaining = ? AND attempts_remaining > 0");
        st.bind(1, r.session_id).bind(2, expected_remaining);
        st.step();
        if (sqlite3_changes(db_) == 0) return false;
    }
    {
        Stmt st(db_,
                "INSERT INTO submissions (id, session_id, attempt_index, text, ta, cc, lr, gra, neural_raw, raw_score, "
                "band, percentage, model_digest, created_at) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)");
        st.bind(1, r.id)
            .bind(2, r.session_id)
            .bind(3, r.attempt_index)
            .bind(4, r.text)
            .bind(5, r.rubric.ta)
            .bind(6, r.rubric.cc)
            .bind(7, r.rubric.lr)
            .bind(8, r.rubric.gra)
            .bind(9, r.neural_raw)
            .bind(10, r.raw)
            .bind(11, r.band.value())
            .bind(12, r.percentage)
            .bind(13, r.model_digest)
            .bind(14, r.created_at);
        st.step();
    }
    const auto items = r.feedback.to_json()["items"];
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& it = items[i];
        Stmt st(db_,
                "INSERT INTO feedback_items (submission_id, position, criterion, polarity, condition, triggered, "
                "message, suggestion, priority) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)");
        st.bind(1, r.id)
            .bind(2, static_cast<int>(i))
            .bind(3, it["criterion"].get<std::string>())
            .bind(4, it["polarity"].get<std::string>())
            .bind(5, it["condition"].get<std::string>())
            .bind(6, it["triggered"].dump())
            .bind(7, it["message"].get<std::string>());
        if (it["suggestion"].is_null()) {
            st.bind_null(8);
        } else {
            st.bind(8, it["suggestion"].dump());
        }
        st.bind(9, it["priority"].get<double>());
        st.step();
    }
    tx.commit();
    return true;
}

std::vector<SubmissionRecord> SqliteStore::query_submissions(const char* where, const std::string& key) const {
    std::string sql =
        "SELECT id, session_id, attempt_index, text, ta, cc, lr, gra, neural_raw, raw_score, band, percentage, "
        "model_digest, created_at FROM submissions WHERE ";
    sql += where;
    sql += " ORDER BY attempt_index";
    Stmt st(db_, sql.c_str());
    st.bind(1, key);
    std::vector<SubmissionRecord> out;
    while (st.step()) {
        SubmissionRecord r;
        r.id = st.text(0);
        r.session_id = st.text(1);
        r.attempt_index = st.integer(2);
        r.text = st.text(3);
        r.rubric = rubric::RubricScores::from_criteria(st.real(4), st.real(5), st.real(6), st.real(7));
        if (!st.null(8)) r.neural_raw = st.real(8);
        r.raw = st.real(9);
        r.band = corpus::Band::from_lattice(st.real(10));
        r.percentage = st.real(11);
        r.model_digest = st.text(12);
        r.created_at = st.text(13);
        out.push_back(std::move(r));
    }
    for (auto& r : out) {
        json items = json::array();
        Stmt it(db_,
                "SELECT criterion, polarity, condition, triggered, message, suggestion, priority FROM feedback_items "
                "WHERE submission_id = ? ORDER BY position");
        it.bind(1, r.id);
        while (it.step()) {
            items.push_back({{"criterion", it.text(0)},
                             {"polarity", it.text(1)},
                             {"condition", it.text(2)},
                             {"triggered", json::parse(it.text(3))},
                             {"message", it.text(4)},
                             {"suggestion", it.null(5) ? json(nullptr) : json::parse(it.text(5))},
                             {"priority", it.real(6)}});
        }
        const auto& s = r.rubric;
        r.feedback = feedback::FeedbackReport::from_json(
            {{"predicted_band", r.band.value()},
             {"per_criterion_scores", {{"TA", s.ta}, {"CC", s.cc}, {"LR", s.lr}, {"GRA", s.gra}}},
             {"items", items}});
    }
    return out;
}

std::vector<SubmissionRecord> SqliteStore::submissions(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    return query_submissions("session_id = ?", session_id);
}

std::optional<SubmissionRecord> SqliteStore::find_submission(const std::string& id) const {
    std::lock_guard lock(mu_);
    auto rows = query_submissions("id = ?", id);
    if (rows.empty()) return std::nullopt;
    return std::move(rows.front());
}

void SqliteStore::append_turn(const std::string& session_id, const TranscriptTurn& turn) {
    std::lock_guard lock(mu_);
    Stmt st(db_,
            "INSERT INTO dialogue_turns (session_id, seq, role, text) VALUES "
            "(?, (SELECT COALESCE(MAX(seq), -1) + 1 FROM dialogue_turns WHERE session_id = ?), ?, ?)");
    st.bind(1, session_id).bind(2, session_id).bind(3, turn.role).bind(4, turn.text);
    st.step();
}

std::vector<TranscriptTurn> SqliteStore::transcript(const std::string& session_id) const {
    std::lock_guard lock(mu_);
    Stmt st(db_, "SELECT role, text FROM dialogue_turns WHERE session_id = ? ORDER BY seq");
    st.bind(1, session_id);
    std::vector<TranscriptTurn> out;
    while (st.step()) out.push_back({st.text(0), st.text(1)});
    return out;
}

}  // namespace ielts::service
