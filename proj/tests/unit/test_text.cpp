#include <doctest.h>

#include <algorithm>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "ielts/common/error.hpp"
#include "ielts/text/features.hpp"
#include "ielts/text/grammar.hpp"
#include "ielts/text/lexicon.hpp"
#include "ielts/text/tokenizer.hpp"
#include "ielts/text/unicode.hpp"

using namespace ielts;
using namespace ielts::text;

namespace {

std::vector<std::string> texts(std::span<const Token> words) {
    std::vector<std::string> out;
    for (const auto& w : words) out.push_back(w.text);
    return out;
}

const GrammarBackend& builtin() { return *BuiltinGrammarBackend::shared_default(); }

bool has_issue(const std::vector<GrammarIssue>& issues, std::string_view text, std::string_view covered,
               IssueCategory cat) {
    for (const auto& i : issues) {
        if (i.category == cat && text.substr(i.start, i.end - i.start) == covered) return true;
    }
    return false;
}

const char* kCleanEssay =
    "Many people believe that technology has changed the way we live. However, others argue that its "
    "influence is often exaggerated.\n\n"
    "On the one hand, computers allow students to find information quickly. For example, a student can "
    "read about history in minutes.\n\n"
    "In conclusion, I think technology is useful when it is used carefully.";

}  // namespace

TEST_CASE("tokenize examples") {
    auto t = tokenize("The cat sat.");
    CHECK(t.words.size() == 3);
    CHECK(t.sentences.size() == 1);
    CHECK(t.paragraphs.size() == 1);

    t = tokenize("A.\n\nB.");
    CHECK(t.paragraphs.size() == 2);

    try {
        tokenize("???");
        FAIL("expected error");
    } catch (const InvalidInput& e) {
        CHECK(std::string(e.what()) == "no word tokens");
    }
}

TEST_CASE("tokenize sentence and word rules") {
    const std::string s = "Dr. Smith didn't go. He stayed home! Did 'she' leave? yes.";
    const auto t = tokenize(s);
    CHECK(texts(t.words) ==
          std::vector<std::string>{"Dr", "Smith", "didn't", "go", "He", "stayed", "home", "Did", "she", "leave", "yes"});
    // "? yes" has no uppercase after it, so it does not split.
    REQUIRE(t.sentences.size() == 3);
    CHECK(texts(t.sentence_words(0)) == std::vector<std::string>{"Dr", "Smith", "didn't", "go"});
    CHECK(s.substr(t.words[2].begin, t.words[2].end - t.words[2].begin) == "didn't");
}

TEST_CASE("tokenize nesting invariants hold on random text") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> pieces = {"word", "Word", ".", "!", "?", " ", " ", " ", "\n", "\n\n",
                                             ",", "it's", "\xE2\x80\x99", "caf\xC3\xA9", "Mr.", "42"};
    for (int trial = 0; trial < 300; ++trial) {
        std::string s = "Start";
        const int n = 1 + static_cast<int>(rng() % 60);
        for (int i = 0; i < n; ++i) s += pieces[rng() % pieces.size()];
        const auto t = tokenize(s);
        std::size_t w = 0;
        for (const auto& sent : t.sentences) {
            CHECK(sent.first_word == w);
            CHECK(sent.end_word > sent.first_word);
            w = sent.end_word;
        }
        CHECK(w == t.words.size());
        std::size_t si = 0;
        for (const auto& p : t.paragraphs) {
            CHECK(p.first_sentence == si);
            CHECK(p.end_sentence > p.first_sentence);
            si = p.end_sentence;
        }
        CHECK(si == t.sentences.size());
        for (const auto& tok : t.words) {
            CHECK(tok.begin < tok.end);
            CHECK(tok.end <= s.size());
            CHECK(s.substr(tok.begin, tok.end - tok.begin) == tok.text);
        }
        CHECK(count_words(s) == t.words.size());
    }
}

TEST_CASE("unicode helpers") {
    CHECK(fold("CAF\xC3\x89") == "caf\xC3\xA9");
    CHECK(fold("don\xE2\x80\x99t") == "don't");
    const auto cp = decode_utf8("\xC3\xA9", 0);
    CHECK(cp.value == 0xE9);
    CHECK(cp.length == 2);
}

TEST_CASE("builtin grammar: agreement") {
    const std::string s = "He go to school.";
    const auto issues = builtin().check(s);
    REQUIRE_FALSE(issues.empty());
    CHECK(has_issue(issues, s, "go", IssueCategory::grammar));
    for (const auto& i : issues) {
        if (s.substr(i.start, i.end - i.start) == "go") CHECK(i.suggestion == std::optional<std::string>("goes"));
    }
    const std::string t = "They goes home and she don't care.";
    const auto ti = builtin().check(t);
    CHECK(has_issue(ti, t, "goes", IssueCategory::grammar));
    CHECK(has_issue(ti, t, "don't", IssueCategory::grammar));
}

TEST_CASE("builtin grammar: clean text has no issues") {
    CHECK(builtin().check("He goes to school every day.").empty());
    CHECK(builtin().check("She can go to the market.").empty());
    CHECK(builtin().check(kCleanEssay).empty());
}

TEST_CASE("builtin grammar: other rules") {
    std::string s = "This is a apple and the the end.";
    auto issues = builtin().check(s);
    CHECK(has_issue(issues, s, "a", IssueCategory::grammar));
    bool repeated = false;
    for (const auto& i : issues) {
        if (i.message.find("epeat") != std::string::npos) repeated = true;
    }
    CHECK(repeated);

    s = "It is good..  Really ,yes.";
    issues = builtin().check(s);
    CHECK(std::count_if(issues.begin(), issues.end(),
                        [](const auto& i) { return i.category == IssueCategory::punctuation; }) >= 2);

    s = "The goverment is recieving money.";
    issues = builtin().check(s);
    CHECK(has_issue(issues, s, "goverment", IssueCategory::spelling));
    CHECK(has_issue(issues, s, "recieving", IssueCategory::spelling));

    s = "Yesterday i went home.";
    CHECK(has_issue(builtin().check(s), s, "i", IssueCategory::grammar));
}

TEST_CASE("builtin grammar: spans valid, sorted, deterministic") {
    std::mt19937_64 rng(11);
    const std::vector<std::string> pieces = {"he", "go", "the", "the", "a", "apple", ". ", ", ", "  ", "teh",
                                             "They", "goes", "\n\n", "i", "..", "!", "caf\xC3\xA9", "it's"};
    for (int trial = 0; trial < 200; ++trial) {
        std::string s;
        const int n = 1 + static_cast<int>(rng() % 40);
        for (int i = 0; i < n; ++i) s += pieces[rng() % pieces.size()] + (rng() % 2 ? " " : "");
        const auto a = builtin().check(s);
        const auto b = builtin().check(s);
        CHECK(a == b);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].start < a[i].end);
            CHECK(a[i].end <= s.size());
            if (i > 0) CHECK(a[i - 1].start <= a[i].start);
        }
    }
}

TEST_CASE("languagetool response parsing converts utf-16 offsets") {
    // "café \U0001F600 he go" : the emoji is two UTF-16 units and four bytes.
    const std::string text = "caf\xC3\xA9 \xF0\x9F\x98\x80 he go";
    const std::string body = R"({"matches":[
        {"offset":11,"length":2,"message":"agreement","replacements":[{"value":"goes"}],
         "rule":{"id":"X","category":{"id":"GRAMMAR"}}},
        {"offset":0,"length":4,"message":"typo","replacements":[],
         "rule":{"id":"MORFOLOGIK_RULE_EN_US","issueType":"misspelling","category":{"id":"TYPOS"}}}]})";
    const auto issues = LanguageToolBackend::parse_response(text, body);
    REQUIRE(issues.size() == 2);
    CHECK(issues[0].start == 0);
    CHECK(issues[0].end == 5);
    CHECK(issues[0].category == IssueCategory::spelling);
    CHECK_FALSE(issues[0].suggestion.has_value());
    CHECK(text.substr(issues[1].start, issues[1].end - issues[1].start) == "go");
    CHECK(issues[1].suggestion == std::optional<std::string>("goes"));
    CHECK_THROWS_AS(LanguageToolBackend::parse_response(text, "not json"), BackendUnavailable);
}

TEST_CASE("languagetool adapter against a local server") {
    httplib::Server server;
    server.Post("/v2/check", [](const httplib::Request& req, httplib::Response& res) {
        const auto text = req.get_param_value("text");
        const auto pos = text.find("go");
        nlohmann::json matches = nlohmann::json::array();
        if (pos != std::string::npos) {
            matches.push_back({{"offset", pos}, {"length", 2}, {"message", "m"},
                               {"replacements", {{{"value", "goes"}}}},
                               {"rule", {{"category", {{"id", "GRAMMAR"}}}}}});
        }
        res.set_content(nlohmann::json{{"matches", matches}}.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto backend = make_grammar_backend("languagetool", "http://127.0.0.1:" + std::to_string(port));
    CHECK(backend->name() == "languagetool");
    const auto issues = backend->check("He go home.");
    REQUIRE(issues.size() == 1);
    CHECK(issues[0].start == 3);
    CHECK(backend->check("Fine.").empty());

    server.stop();
    t.join();
    CHECK_THROWS_AS(backend->check("He go home."), BackendUnavailable);
    CHECK_THROWS_AS(make_grammar_backend("nope"), InvalidInput);
}

TEST_CASE("sophistication_ratio") {
    FrequencyLexicon lex({"the", "cat", "sat", "on", "mat", "a", "dog", "ran"}, 8);
    CHECK(sophistication_ratio(word_tokens("The cat sat on the mat"), lex) == 0.0);
    CHECK(sophistication_ratio(word_tokens("Ubiquitous paradigms"), lex) == 1.0);
    CHECK(sophistication_ratio(word_tokens("the cat sat on the mat a dog ubiquitous paradigms"), lex) ==
          doctest::Approx(0.2));
    CHECK_THROWS_AS(sophistication_ratio(std::vector<Token>{}, lex), InvalidInput);

    std::mt19937_64 rng(3);
    auto words = word_tokens("The cat ubiquitously sat on a very esoteric mat while dogs ran");
    const double base = sophistication_ratio(words, lex);
    for (int i = 0; i < 20; ++i) {
        std::shuffle(words.begin(), words.end(), rng);
        CHECK(sophistication_ratio(words, lex) == base);
    }
    CHECK(lex.with_top_k(2).contains("cat"));
    CHECK_FALSE(lex.with_top_k(2).contains("sat"));
}

TEST_CASE("default lexicons load") {
    const auto& lex = FrequencyLexicon::default_lexicon();
    CHECK(lex.top_k() == 2000);
    CHECK(lex.contains("the"));
    CHECK(lex.contains("The"));
    CHECK_FALSE(lex.contains("ubiquitous"));
    const auto& conn = ConnectorLexicon::default_lexicon();
    CHECK(conn.count(word_tokens("However, on the other hand, in addition it works.")) == 3);
}

TEST_CASE("extract_features examples") {
    const auto& lex = FrequencyLexicon::default_lexicon();
    auto f = extract_features("The cat sat.", lex, builtin());
    CHECK(f.word_count == 3);
    CHECK(f.lexical_diversity == 1.0);
    CHECK(f.paragraph_count == 1);
    CHECK(f.mean_sentence_length == 3.0);
    CHECK(f.punctuation_density == doctest::Approx(100.0 / 3));

    f = extract_features("word word word word.", lex, builtin());
    CHECK(f.lexical_diversity == 0.25);

    f = extract_features("The cat sat", lex, builtin());
    CHECK(f.punctuation_density == 0.0);
}

TEST_CASE("feature invariants") {
    const auto& analyzer = TextAnalyzer::builtin();
    std::mt19937_64 rng(9);
    const std::vector<std::string> pieces = {"He go to school.", "However, it is good.", "\n\n",
                                             "The the cat sat on teh mat.", "Ubiquitous paradigms abound!",
                                             "In addition, we agree.", "Word word word."};
    for (int trial = 0; trial < 100; ++trial) {
        std::string s = "Start here.";
        const int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) s += " " + pieces[rng() % pieces.size()];
        const auto a = analyzer.analyze(s);
        for (double v : a.features.as_array()) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
        CHECK(a.features.lexical_diversity > 0.0);
        CHECK(a.features.lexical_diversity <= 1.0);
        CHECK(a.features.sophistication_ratio <= 1.0);
        CHECK(a.features.grammar_error_density ==
              static_cast<double>(a.issues.size()) * 100.0 / a.features.word_count);

        const auto dup = analyzer.analyze(s + " " + a.tokens.words.front().text + ".");
        CHECK(dup.features.lexical_diversity <= a.features.lexical_diversity);
    }
}

TEST_CASE("lexical diversity is 1 exactly when words are distinct") {
    CHECK(lexical_diversity(word_tokens("alpha beta gamma")) == 1.0);
    CHECK(lexical_diversity(word_tokens("alpha beta Alpha")) < 1.0);
}
