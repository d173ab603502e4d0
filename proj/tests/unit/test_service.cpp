#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <random>
#include <thread>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/neural/trainer.hpp"
#include "ielts/service/http.hpp"
#include "ielts/service/platform.hpp"
#include "ielts/synth/generator.hpp"
#include "test_util.hpp"

// After Eigen: <resolv.h> defines a _res macro.
#include <httplib.h>

using namespace ielts;
using namespace ielts::service;
using nlohmann::json;

namespace {

const scoring::EssayScorer& rule_scorer() {
    static const scoring::EssayScorer s(nullptr, text::BuiltinGrammarBackend::shared_default());
    return s;
}

// A briefly trained mini model, enough to exercise the neural path.
const scoring::EssayScorer& neural_scorer() {
    static const scoring::EssayScorer s = [] {
        const auto train = synth::generate_records({24, 5, "svc"});
        const auto val = synth::generate_records({6, 6, "svv"});
        neural::EncoderConfig enc;
        enc.encoder_id = "mini";
        enc.max_tokens = 128;
        enc.frozen_layer_count = 4;
        neural::TrainConfig cfg;
        cfg.learning_rate = 2e-3;
        cfg.max_epochs = 1;
        cfg.target_jitter_sigma = 0.0;
        cfg.seed = 3;
        auto result = neural::train(train, val, enc, cfg, text::TextAnalyzer::builtin());
        return scoring::EssayScorer(std::make_shared<const neural::HybridModel>(std::move(result.model)),
                                    text::BuiltinGrammarBackend::shared_default());
    }();
    return s;
}

const std::vector<Task>& tasks() {
    static const auto t = load_tasks(data_file("tasks.json"));
    return t;
}

std::string essay(double quality, std::uint64_t seed) {
    return synth::generate_one(quality, seed, "e" + std::to_string(seed)).record.body;
}

Platform memory_platform(const scoring::EssayScorer& scorer = rule_scorer()) {
    return Platform(std::make_shared<SqliteStore>(":memory:"), scorer, tasks());
}

NewSession ready(Section sec = Section::full) { return NewSession{"Ana", 24, sec, std::nullopt}; }

template <class Fn>
std::string error_code(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return "";
}

DialogueState at(DialogueStage st) {
    DialogueState d;
    d.stage = st;
    if (st != DialogueStage::greeting && st != DialogueStage::ask_name) d.name = "Ana";
    if (st == DialogueStage::offer_exercise || st == DialogueStage::section_select || st == DialogueStage::writing) {
        d.age = 24;
    }
    if (st == DialogueStage::writing) d.section = Section::full;
    return d;
}

}  // namespace

TEST_CASE("dialogue examples") {
    SUBCASE("unparseable age re-prompts") {
        const auto r = dialogue_step(at(DialogueStage::ask_age), "twenty");
        CHECK(r.next == at(DialogueStage::ask_age));
        CHECK(r.reply == ReplyCatalog::default_catalog().at("ask_age_retry"));
    }
    SUBCASE("section choice opens the writing stage") {
        const auto r = dialogue_step(at(DialogueStage::section_select), "introduction");
        CHECK(r.next.stage == DialogueStage::writing);
        CHECK(r.next.section == Section::introduction);
        CHECK(r.reply.find("50 words") != std::string::npos);
    }
    SUBCASE("greeting always moves to the name prompt") {
        for (const char* input : {"", "hi", "12345", "???"}) {
            const auto r = dialogue_step(at(DialogueStage::greeting), input);
            CHECK(r.next.stage == DialogueStage::ask_name);
            CHECK(r.reply == "Hello! What is your name?");
        }
    }
    SUBCASE("declining the offer loops back") {
        const auto r = dialogue_step(at(DialogueStage::offer_exercise), "not now");
        CHECK(r.next.stage == DialogueStage::offer_exercise);
        CHECK(r.reply == ReplyCatalog::default_catalog().at("offer_declined"));
        CHECK(dialogue_step(r.next, "yes").next.stage == DialogueStage::section_select);
    }
}

TEST_CASE("dialogue walk fills slots") {
    DialogueState s;
    for (const char* input : {"hello", "My name is Ana", "abc", "24", "maybe", "no", "yes", "the middle bit", "body"}) {
        s = dialogue_step(s, input).next;
    }
    CHECK(s.stage == DialogueStage::writing);
    CHECK(s.name == "Ana");
    CHECK(s.age == 24);
    CHECK(s.section == Section::body);
    CHECK(dialogue_step(s, "anything").next == s);
}

TEST_CASE("slot parsers") {
    CHECK(parse_age("5") == 5);
    CHECK(parse_age(" 120 ") == 120);
    CHECK_FALSE(parse_age("4"));
    CHECK_FALSE(parse_age("121"));
    CHECK_FALSE(parse_age("24.5"));
    CHECK_FALSE(parse_age("-3"));
    CHECK(parse_name("I'm Jo-Ann O'Neil.") == "Jo-Ann O'Neil");
    CHECK_FALSE(parse_name("   "));
    CHECK_FALSE(parse_name("1234"));
    CHECK_FALSE(parse_name("<script>"));
    CHECK(parse_section("the full essay") == Section::full);
    CHECK_FALSE(parse_section("introduction and conclusion"));
    CHECK(parse_yes_no("Yes!") == true);
    CHECK(parse_yes_no("No thanks") == false);
}

TEST_CASE("dialogue replies are deterministic") {
    const auto a = dialogue_step(at(DialogueStage::ask_name), "Ana");
    const auto b = dialogue_step(at(DialogueStage::ask_name), "Ana");
    CHECK(a.reply == b.reply);
    CHECK(a.reply == "Nice to meet you, Ana. How old are you?");
}

TEST_CASE("dialogue graph has no unreachable states or dead ends") {
    CHECK(check_dialogue_graph().ok());

    auto edges = declared_transitions();
    std::erase(edges, std::pair{DialogueStage::section_select, DialogueStage::writing});
    const auto broken = check_dialogue_graph(edges);
    CHECK(broken.unreachable == std::vector{DialogueStage::writing});
    CHECK(broken.dead_ends.size() == 5);

    auto cut = declared_transitions();
    std::erase(cut, std::pair{DialogueStage::greeting, DialogueStage::ask_name});
    CHECK(check_dialogue_graph(cut).unreachable.size() == 5);
}

TEST_CASE("random input never leaves the declared machine") {
    const std::vector<std::string> pool = {"", "hi", "Ana", "My name is Bo", "twenty", "24", "200", "yes", "no",
                                           "maybe", "body", "conclusion", "intro", "full", "42!", "?", "later"};
    const auto& edges = declared_transitions();
    std::mt19937_64 rng(7);
    for (int walk = 0; walk < 300; ++walk) {
        DialogueState s;
        for (int step = 0; step < 30; ++step) {
            const auto r = dialogue_step(s, pool[rng() % pool.size()]);
            CHECK(std::find(edges.begin(), edges.end(), std::pair{s.stage, r.next.stage}) != edges.end());
            if (r.next.stage >= DialogueStage::ask_age) CHECK(r.next.name.has_value());
            if (r.next.stage >= DialogueStage::offer_exercise) CHECK(r.next.age.has_value());
            if (r.next.stage == DialogueStage::writing) CHECK(r.next.section.has_value());
            CHECK_FALSE(r.reply.empty());
            s = r.next;
        }
    }
}

TEST_CASE("section word targets") {
    CHECK(section_word_target(Section::introduction) == 50);
    CHECK(section_word_target(Section::body) == 150);
    CHECK(section_word_target(Section::conclusion) == 50);
    CHECK(section_word_target(Section::full) == 250);
    CHECK(tasks().front().to_json()["required_word_count"] == 250);
    CHECK(tasks().front().to_json(Section::body)["required_word_count"] == 150);
}

TEST_CASE("session creation and lookup") {
    auto p = memory_platform();
    const auto s = p.create_session(ready());
    CHECK(s.attempts_remaining == 3);
    CHECK(p.session(s.id) == s);
    CHECK(p.session(s.id).stage == DialogueStage::writing);
    CHECK(error_code([&] { p.session("nope"); }) == "not_found");
    CHECK(error_code([&] { p.create_session({"Ana", 4, std::nullopt, std::nullopt}); }) == "invalid_input");
    CHECK(error_code([&] { p.create_session({"Ana", 121, std::nullopt, std::nullopt}); }) == "invalid_input");
    CHECK(error_code([&] { p.create_session({"Ana", std::nullopt, std::nullopt, std::nullopt}); }) == "invalid_input");
    CHECK(error_code([&] { p.create_session({std::nullopt, std::nullopt, std::nullopt, "task-99"}); }) == "not_found");

    const auto chat = p.create_session({});
    CHECK(chat.stage == DialogueStage::greeting);
    CHECK(p.transcript(chat.id).size() == 1);
    CHECK(error_code([&] { p.submit(chat.id, essay(0.5, 1)); }) == "onboarding_incomplete");
}

TEST_CASE("onboarding through the platform") {
    auto p = memory_platform();
    const auto s = p.create_session({});
    for (const char* m : {"hi", "Ana", "24", "yes", "conclusion"}) p.dialogue(s.id, m);
    const auto done = p.session(s.id);
    CHECK(done.stage == DialogueStage::writing);
    CHECK(done.selected_section == Section::conclusion);
    CHECK(p.required_words(done) == 50);
    CHECK(p.transcript(s.id).size() == 11);
}

TEST_CASE("three attempts then final") {
    auto p = memory_platform();
    const auto s = p.create_session(ready());
    for (int i = 1; i <= 3; ++i) {
        const auto r = p.submit(s.id, essay(0.3 + 0.2 * i, i));
        CHECK(r.record.attempt_index == i);
        CHECK(r.record.final() == (i == 3));
        CHECK(r.attempts_remaining == 3 - i);
        CHECK(r.record.percentage > 0);
        CHECK(r.record.feedback.items.size() == 4);
    }
    CHECK(error_code([&] { p.submit(s.id, essay(0.5, 9)); }) == "attempt_limit");
    const auto after = p.session(s.id);
    CHECK(after.attempts_remaining == 0);
    CHECK(after.completed());
    CHECK(after.history.size() == 3);
    CHECK(p.submissions(s.id).size() == 3);
}

TEST_CASE("submission text limits") {
    auto p = memory_platform();
    const auto s = p.create_session(ready());
    CHECK(error_code([&] { p.submit(s.id, ""); }) == "empty_text");
    CHECK(error_code([&] { p.submit(s.id, " \n\t "); }) == "empty_text");
    std::string huge;
    for (int i = 0; i < 10001; ++i) huge += "word ";
    CHECK(error_code([&] { p.submit(s.id, huge); }) == "text_too_long");
    CHECK(p.session(s.id).attempts_remaining == 3);
    CHECK(error_code([&] { p.submit("missing", "text"); }) == "not_found");
}

TEST_CASE("progress deltas are taken on raw scores") {
    auto store = std::make_shared<SqliteStore>(":memory:");
    Platform p(store, rule_scorer(), tasks());
    const auto s = p.create_session(ready());
    CHECK(p.progress(s.id).empty());

    const auto base = p.submit(s.id, essay(0.5, 1)).record;
    auto fake = base;
    fake.id = "fake-2";
    fake.attempt_index = 2;
    fake.raw = base.raw + 0.5;
    REQUIRE(store->append_submission(fake, 2));
    const auto prog = p.progress(s.id);
    REQUIRE(prog.size() == 2);
    CHECK_FALSE(prog[0].delta.has_value());
    CHECK(*prog[1].delta == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(progress_to_json(prog)[0]["delta"].is_null());
}

TEST_CASE("store round trip preserves every field") {
    auto store = std::make_shared<SqliteStore>(":memory:");
    Platform p(store, neural_scorer(), tasks());
    const auto s = p.create_session(ready(Section::body));
    const auto written = p.submit(s.id, essay(0.6, 4)).record;
    const auto read = store->find_submission(written.id);
    REQUIRE(read.has_value());
    CHECK(read->to_json().dump() == written.to_json().dump());
    CHECK(read->raw == written.raw);
    REQUIRE(read->neural_raw.has_value());
    CHECK(*read->neural_raw == *written.neural_raw);
    CHECK(read->band == written.band);
    CHECK(read->rubric.overall == written.rubric.overall);
    CHECK(read->feedback.to_json() == written.feedback.to_json());
    CHECK_FALSE(store->find_submission("absent").has_value());
}

TEST_CASE("state survives a restart") {
    test_util::TempDir dir;
    const auto db = dir / "platform.db";
    std::string id;
    nlohmann::json before;
    {
        Platform p(std::make_shared<SqliteStore>(db), rule_scorer(), tasks());
        id = p.create_session({}).id;
        for (const char* m : {"hi", "Ana", "24", "yes", "full"}) p.dialogue(id, m);
        p.submit(id, essay(0.4, 1));
        p.submit(id, essay(0.7, 2));
        before = progress_to_json(p.progress(id));
    }
    Platform p(std::make_shared<SqliteStore>(db), rule_scorer(), tasks());
    CHECK(progress_to_json(p.progress(id)) == before);
    CHECK(p.session(id).attempts_remaining == 1);
    CHECK(p.session(id).candidate_name == "Ana");
    CHECK(p.transcript(id).size() == 11);
    CHECK(p.submit(id, essay(0.8, 3)).record.final());
}

TEST_CASE("concurrent submissions on the last attempt") {
    SUBCASE("one platform") {
        auto p = memory_platform();
        const auto s = p.create_session(ready());
        p.submit(s.id, essay(0.5, 1));
        p.submit(s.id, essay(0.5, 2));
        std::atomic<int> ok{0}, limited{0};
        std::vector<std::thread> threads;
        for (int i = 0; i < 6; ++i) {
            threads.emplace_back([&, i] {
                try {
                    p.submit(s.id, essay(0.5, 10 + i));
                    ++ok;
                } catch (const AttemptLimitReached&) {
                    ++limited;
                }
            });
        }
        for (auto& t : threads) t.join();
        CHECK(ok == 1);
        CHECK(limited == 5);
        CHECK(p.submissions(s.id).size() == 3);
    }
    SUBCASE("two platforms sharing one database file") {
        test_util::TempDir dir;
        const auto db = dir / "shared.db";
        Platform a(std::make_shared<SqliteStore>(db), rule_scorer(), tasks());
        Platform b(std::make_shared<SqliteStore>(db), rule_scorer(), tasks());
        const auto s = a.create_session(ready());
        a.submit(s.id, essay(0.5, 1));
        a.submit(s.id, essay(0.5, 2));
        std::atomic<int> ok{0}, limited{0};
        auto run = [&](Platform& p, std::uint64_t seed) {
            try {
                p.submit(s.id, essay(0.5, seed));
                ++ok;
            } catch (const AttemptLimitReached&) {
                ++limited;
            }
        };
        std::thread t1(run, std::ref(a), 21), t2(run, std::ref(b), 22);
        t1.join();
        t2.join();
        CHECK(ok == 1);
        CHECK(limited == 1);
        CHECK(a.session(s.id).attempts_remaining == 0);
        CHECK(b.submissions(s.id).size() == 3);
    }
}

TEST_CASE("submission scoring matches the offline scorer") {
    for (const auto* scorer : {&rule_scorer(), &neural_scorer()}) {
        auto p = memory_platform(*scorer);
        for (auto sec : {Section::full, Section::body}) {
            const auto s = p.create_session(ready(sec));
            const auto text = essay(0.55, 8);
            const auto rec = p.submit(s.id, text).record;
            const auto offline = scorer->score(text, tasks().front().prompt, section_word_target(sec));
            CHECK(rec.raw == offline.raw);
            CHECK(rec.band == offline.band);
            CHECK(rec.neural_raw == offline.neural_raw);
            CHECK(rec.feedback.to_json() == offline.feedback.to_json());
            CHECK(rec.model_digest == scorer->model_digest());
        }
    }
    CHECK(neural_scorer().model() != nullptr);
}

TEST_CASE("http api") {
    auto p = memory_platform(neural_scorer());
    HttpService svc(p);
    const int port = svc.start();
    httplib::Client c("127.0.0.1", port);
    auto post = [&](const std::string& path, const json& body) {
        auto r = c.Post(path, body.dump(), "application/json");
        REQUIRE(r);
        return std::pair{r->status, json::parse(r->body)};
    };
    auto get = [&](const std::string& path) {
        auto r = c.Get(path);
        REQUIRE(r);
        return std::pair{r->status, json::parse(r->body)};
    };

    CHECK(get("/health").second["status"] == "ok");

    auto [st, sess] = post("/sessions", json::object());
    CHECK(st == 201);
    const std::string id = sess["id"];
    CHECK(sess["dialogue_state"] == "GREETING");
    CHECK(sess["attempts_remaining"] == 3);

    for (const char* m : {"hi", "Ana", "twenty"}) post("/sessions/" + id + "/dialogue", {{"message", m}});
    auto [dst, turn] = post("/sessions/" + id + "/dialogue", {{"message", "24"}});
    CHECK(dst == 200);
    CHECK(turn["dialogue_state"] == "OFFER_EXERCISE");
    post("/sessions/" + id + "/dialogue", {{"message", "yes"}});
    auto [bst, body] = post("/sessions/" + id + "/dialogue", {{"message", "body"}});
    CHECK(body["session"]["required_word_count"] == 150);

    auto [gst, restored] = get("/sessions/" + id);
    CHECK(gst == 200);
    CHECK(restored["transcript"].size() == 13);
    CHECK(restored["candidate_age"] == 24);

    CHECK(get("/tasks/task-1").second["required_word_count"] == 250);
    CHECK(get("/tasks/task-1?section=introduction").second["required_word_count"] == 50);
    CHECK(get("/tasks").second.size() == tasks().size());

    json last;
    for (int i = 0; i < 3; ++i) {
        auto [sst, sub] = post("/sessions/" + id + "/submissions", {{"text", essay(0.4 + 0.1 * i, 30 + i)}});
        CHECK(sst == 201);
        CHECK(sub["attempt_index"] == i + 1);
        CHECK(sub["final"] == (i == 2));
        CHECK(sub["band"].is_number());
        CHECK(sub["percentage"].is_number());
        CHECK(sub["feedback"]["items"].size() == 4);
        last = sub;
    }
    CHECK(last["attempts_remaining"] == 0);
    auto [lst, lim] = post("/sessions/" + id + "/submissions", {{"text", "One more try."}});
    CHECK(lst == 409);
    CHECK(lim == json{{"code", "attempt_limit"}, {"message", "attempt limit reached"}});

    auto [pst, prog] = get("/sessions/" + id + "/progress");
    CHECK(pst == 200);
    REQUIRE(prog["submissions"].size() == 3);
    CHECK(prog["submissions"][0]["delta"].is_null());
    CHECK(prog["submissions"][1]["delta"].get<double>() ==
          prog["submissions"][1]["raw_score"].get<double>() - prog["submissions"][0]["raw_score"].get<double>());
    CHECK(get("/sessions/" + id + "/submissions").second.size() == 3);

    SUBCASE("error shapes") {
        auto [nst, nf] = get("/sessions/unknown");
        CHECK(nst == 404);
        CHECK(nf["code"] == "not_found");
        CHECK(nf.contains("message"));
        CHECK(get("/no/such/route").second["code"] == "not_found");
        auto bad = c.Post("/sessions", "{not json", "application/json");
        REQUIRE(bad);
        CHECK(bad->status == 400);
        CHECK(json::parse(bad->body)["code"] == "bad_request");
        auto [ast, age] = post("/sessions", {{"name", "Ana"}, {"age", 3}});
        CHECK(ast == 400);
        CHECK(age["code"] == "invalid_input");
        auto [fresh_st, fresh] = post("/sessions", {{"name", "Bo"}, {"age", 30}});
        CHECK(fresh_st == 201);
        auto [est, empty] = post("/sessions/" + fresh["id"].get<std::string>() + "/submissions", {{"text", ""}});
        CHECK(est == 400);
        CHECK(empty["code"] == "empty_text");
        CHECK(get("/tasks/task-404").first == 404);
    }
}

TEST_CASE("submission latency with a preloaded model") {
    auto p = memory_platform(neural_scorer());
    HttpService svc(p);
    const int port = svc.start();
    httplib::Client c("127.0.0.1", port);
    std::vector<double> secs;
    for (int i = 0; i < 8; ++i) {
        auto s = json::parse(c.Post("/sessions", json{{"name", "Ana"}, {"age", 24}}.dump(), "application/json")->body);
        for (int k = 0; k < 3; ++k) {
            const auto body = json{{"text", essay(0.2 + 0.08 * i, 100 + 3 * i + k)}}.dump();
            const auto t0 = std::chrono::steady_clock::now();
            auto r = c.Post("/sessions/" + s["id"].get<std::string>() + "/submissions", body, "application/json");
            secs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
            REQUIRE(r);
            CHECK(r->status == 201);
        }
    }
    std::sort(secs.begin(), secs.end());
    const double p95 = secs[static_cast<std::size_t>(0.95 * (secs.size() - 1))];
    MESSAGE("p95 submission latency " << p95 << " s");
    CHECK(p95 < 2.0);
}
