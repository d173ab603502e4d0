#include "ielts/service/dialogue.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <deque>
#include <set>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/feedback/feedback.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::service {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Lowercased words with punctuation removed.
std::vector<std::string> words_of(std::string_view input) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text::fold(input)) {
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '\'' || (ch & 0x80)) {
            cur.push_back(ch);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::string joined(const std::vector<std::string>& words) {
    std::string s;
    for (const auto& w : words) s += (s.empty() ? "" : " ") + w;
    return s;
}

const std::vector<std::string> kReplyKeys = {
    "greeting",      "ask_name",       "ask_name_retry", "ask_age",        "ask_age_retry", "offer",
    "offer_declined", "offer_retry",   "section_select", "section_retry",  "writing",       "writing_idle"};

}  // namespace

std::string_view to_string(Section s) {
    switch (s) {
        case Section::introduction: return "introduction";
        case Section::body: return "body";
        case Section::conclusion: return "conclusion";
        case Section::full: return "full";
    }
    return "full";
}

Section section_from_string(std::string_view s) {
    for (auto sec : {Section::introduction, Section::body, Section::conclusion, Section::full}) {
        if (to_string(sec) == s) return sec;
    }
    throw InvalidInput("unknown section '" + std::string(s) + "'");
}

int section_word_target(Section s, int full_task_words) {
    switch (s) {
        case Section::introduction:
        case Section::conclusion: return static_cast<int>(full_task_words * 0.2 + 0.5);
        case Section::body: return static_cast<int>(full_task_words * 0.6 + 0.5);
        case Section::full: return full_task_words;
    }
    return full_task_words;
}

std::string_view to_string(DialogueStage s) {
    switch (s) {
        case DialogueStage::greeting: return "GREETING";
        case DialogueStage::ask_name: return "ASK_NAME";
        case DialogueStage::ask_age: return "ASK_AGE";
        case DialogueStage::offer_exercise: return "OFFER_EXERCISE";
        case DialogueStage::section_select: return "SECTION_SELECT";
        case DialogueStage::writing: return "WRITING";
    }
    return "GREETING";
}

DialogueStage stage_from_string(std::string_view s) {
    for (auto st : kStages) {
        if (to_string(st) == s) return st;
    }
    throw InvalidInput("unknown dialogue state '" + std::string(s) + "'");
}

const std::vector<std::pair<DialogueStage, DialogueStage>>& declared_transitions() {
    using S = DialogueStage;
    static const std::vector<std::pair<S, S>> edges = {
        {S::greeting, S::ask_name},
        {S::ask_name, S::ask_name},
        {S::ask_name, S::ask_age},
        {S::ask_age, S::ask_age},
        {S::ask_age, S::offer_exercise},
        {S::offer_exercise, S::offer_exercise},
        {S::offer_exercise, S::section_select},
        {S::section_select, S::section_select},
        {S::section_select, S::writing},
        {S::writing, S::writing},
    };
    return edges;
}

GraphCheck check_dialogue_graph(const std::vector<std::pair<DialogueStage, DialogueStage>>& edges) {
    auto search = [&](DialogueStage start, bool forward) {
        std::set<DialogueStage> seen{start};
        std::deque<DialogueStage> queue{start};
        while (!queue.empty()) {
            const auto cur = queue.front();
            queue.pop_front();
            for (const auto& [from, to] : edges) {
                const auto src = forward ? from : to;
                const auto dst = forward ? to : from;
                if (src == cur && seen.insert(dst).second) queue.push_back(dst);
            }
        }
        return seen;
    };
    const auto reachable = search(DialogueStage::greeting, true);
    const auto finishing = search(DialogueStage::writing, false);
    GraphCheck out;
    for (auto s : kStages) {
        if (!reachable.count(s)) out.unreachable.push_back(s);
        if (!finishing.count(s)) out.dead_ends.push_back(s);
    }
    return out;
}

ReplyCatalog ReplyCatalog::from_json(const nlohmann::json& j) {
    ReplyCatalog c;
    for (const auto& key : kReplyKeys) {
        if (!j.contains(key) || !j[key].is_string()) throw InvalidInput("reply catalog is missing '" + key + "'");
        c.replies_[key] = j[key].get<std::string>();
    }
    return c;
}

ReplyCatalog ReplyCatalog::load(const std::filesystem::path& path) {
    try {
        return from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(path.string() + ": " + e.what());
    }
}

const ReplyCatalog& ReplyCatalog::default_catalog() {
    static const ReplyCatalog c = load(data_file("dialogue/replies.json"));
    return c;
}

const std::string& ReplyCatalog::at(const std::string& key) const {
    auto it = replies_.find(key);
    if (it == replies_.end()) throw NotFound("reply '" + key + "'");
    return it->second;
}

std::optional<std::string> parse_name(std::string_view input) {
    std::string_view s = trim(input);
    const auto lower = text::fold(s);
    for (std::string_view prefix : {"my name is ", "my name's ", "i am ", "i'm ", "call me ", "it's ", "this is "}) {
        if (lower.rfind(prefix, 0) == 0) {
            s = trim(s.substr(prefix.size()));
            break;
        }
    }
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == ',')) s.remove_suffix(1);
    s = trim(s);
    if (s.empty() || s.size() > 60) return std::nullopt;
    bool letter = false;
    for (unsigned char ch : s) {
        if (std::isalpha(ch) || ch >= 0x80) {
            letter = true;
        } else if (!(ch == ' ' || ch == '-' || ch == '\'' || ch == '.')) {
            return std::nullopt;
        }
    }
    if (!letter) return std::nullopt;
    return std::string(s);
}

std::optional<int> parse_age(std::string_view input) {
    const auto s = trim(input);
    int age = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), age);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    if (age < 5 || age > 120) return std::nullopt;
    return age;
}

std::optional<bool> parse_yes_no(std::string_view input) {
    static const std::set<std::string> yes = {"yes", "y", "yeah", "yep", "sure", "ok", "okay", "ready",
                                              "start", "yes please", "let's go", "let's start", "of course"};
    static const std::set<std::string> no = {"no", "n", "nope", "not now", "later", "no thanks",
                                             "not yet", "no thank you", "maybe later"};
    const auto s = joined(words_of(input));
    if (yes.count(s)) return true;
    if (no.count(s)) return false;
    return std::nullopt;
}

std::optional<Section> parse_section(std::string_view input) {
    std::set<Section> hits;
    for (const auto& w : words_of(input)) {
        if (w == "introduction" || w == "intro") hits.insert(Section::introduction);
        if (w == "body" || w == "bodies") hits.insert(Section::body);
        if (w == "conclusion" || w == "conclude") hits.insert(Section::conclusion);
        if (w == "full" || w == "whole" || w == "essay" || w == "all") hits.insert(Section::full);
    }
    if (hits.size() != 1) return std::nullopt;
    return *hits.begin();
}

DialogueReply dialogue_step(const DialogueState& state, std::string_view input, const ReplyCatalog& catalog,
                            int full_task_words) {
    using S = DialogueStage;
    DialogueReply out{{}, state};
    std::map<std::string, std::string> vars;
    if (state.name) vars["name"] = *state.name;
    auto say = [&](const std::string& key) { out.reply = feedback::render(catalog.at(key), vars); };

    switch (state.stage) {
        case S::greeting:
            out.next.stage = S::ask_name;
            say("ask_name");
            break;
        case S::ask_name:
            if (auto name = parse_name(input)) {
                out.next.name = *name;
                out.next.stage = S::ask_age;
                vars["name"] = *name;
                say("ask_age");
            } else {
                say("ask_name_retry");
            }
            break;
        case S::ask_age:
            if (auto age = parse_age(input)) {
                out.next.age = *age;
                out.next.stage = S::offer_exercise;
                say("offer");
            } else {
                say("ask_age_retry");
            }
            break;
        case S::offer_exercise:
            if (auto yes = parse_yes_no(input)) {
                if (*yes) {
                    out.next.stage = S::section_select;
                    say("section_select");
                } else {
                    say("offer_declined");
                }
            } else {
                say("offer_retry");
            }
            break;
        case S::section_select:
            if (auto sec = parse_section(input)) {
                out.next.section = *sec;
                out.next.stage = S::writing;
                vars["section"] = std::string(to_string(*sec));
                vars["words"] = std::to_string(section_word_target(*sec, full_task_words));
                say("writing");
            } else {
                say("section_retry");
            }
            break;
        case S::writing:
            vars["section"] = std::string(to_string(state.section.value_or(Section::full)));
            say("writing_idle");
            break;
    }
    const auto& edges = declared_transitions();
    if (std::find(edges.begin(), edges.end(), std::pair{state.stage, out.next.stage}) == edges.end()) {
        throw std::logic_error("undeclared dialogue transition");
    }
    return out;
}

std::string opening_message(const ReplyCatalog& catalog) { return catalog.at("greeting"); }

}  // namespace ielts::service
