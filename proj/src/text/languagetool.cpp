#include <httplib.h>

#include <json.hpp>

#include "ielts/common/error.hpp"
#include "ielts/text/grammar.hpp"
#include "ielts/text/unicode.hpp"

namespace ielts::text {

namespace {

// Byte offset for every UTF-16 code-unit index, plus one past the end.
std::vector<std::size_t> utf16_to_byte_offsets(std::string_view text) {
    std::vector<std::size_t> map;
    map.reserve(text.size() + 1);
    for (std::size_t i = 0; i < text.size();) {
        const auto cp = decode_utf8(text, i);
        map.push_back(i);
        if (cp.value >= 0x10000) map.push_back(i);
        i += cp.length;
    }
    map.push_back(text.size());
    return map;
}

IssueCategory category_of(const nlohmann::json& match) {
    const auto& rule = match.value("rule", nlohmann::json::object());
    const std::string issue_type = rule.value("issueType", "");
    std::string category_id;
    if (rule.contains("category") && rule["category"].is_object()) {
        category_id = rule["category"].value("id", "");
    }
    if (issue_type == "misspelling" || category_id == "TYPOS") return IssueCategory::spelling;
    if (category_id == "PUNCTUATION" || category_id == "TYPOGRAPHY" || issue_type == "typographical" ||
        issue_type == "whitespace") {
        return IssueCategory::punctuation;
    }
    return IssueCategory::grammar;
}

}  // namespace

LanguageToolBackend::LanguageToolBackend(Options options) : options_(std::move(options)) {
    std::string url = options_.base_url;
    const std::string scheme = "http://";
    if (url.rfind(scheme, 0) != 0) {
        throw InvalidInput("LanguageTool URL must start with http:// (got '" + url + "')");
    }
    url = url.substr(scheme.size());
    const auto slash = url.find('/');
    std::string authority = url.substr(0, slash);
    path_prefix_ = slash == std::string::npos ? "" : url.substr(slash);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    const auto colon = authority.rfind(':');
    if (colon != std::string::npos) {
        host_ = authority.substr(0, colon);
        port_ = std::stoi(authority.substr(colon + 1));
    } else {
        host_ = authority;
    }
    if (host_.empty()) throw InvalidInput("LanguageTool URL has no host");
}

std::vector<GrammarIssue> LanguageToolBackend::parse_response(std::string_view text, std::string_view body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
        throw BackendUnavailable(std::string("LanguageTool returned invalid JSON: ") + e.what());
    }
    if (!doc.contains("matches") || !doc["matches"].is_array()) {
        throw BackendUnavailable("LanguageTool response has no 'matches' array");
    }
    const auto offsets = utf16_to_byte_offsets(text);
    const std::size_t units = offsets.size() - 1;

    std::vector<GrammarIssue> issues;
    for (const auto& m : doc["matches"]) {
        const auto offset = m.value("offset", std::size_t{0});
        const auto length = m.value("length", std::size_t{0});
        if (length == 0 || offset + length > units) continue;
        GrammarIssue issue;
        issue.start = offsets[offset];
        issue.end = offsets[offset + length];
        if (issue.end <= issue.start) continue;
        issue.category = category_of(m);
        issue.message = m.value("message", "");
        if (m.contains("replacements") && m["replacements"].is_array() && !m["replacements"].empty()) {
            issue.suggestion = m["replacements"][0].value("value", "");
        }
        issues.push_back(std::move(issue));
    }
    sort_issues(issues);
    return issues;
}

std::vector<GrammarIssue> LanguageToolBackend::check(std::string_view text) const {
    // One client per call keeps concurrent checks independent.
    httplib::Client client(host_, port_);
    client.set_connection_timeout(options_.timeout_seconds, 0);
    client.set_read_timeout(options_.timeout_seconds, 0);
    httplib::Params params{{"text", std::string(text)}, {"language", options_.language}};
    auto res = client.Post(path_prefix_ + "/v2/check", params);
    if (!res) {
        throw BackendUnavailable("LanguageTool unreachable at " + options_.base_url + ": " +
                                 httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw BackendUnavailable("LanguageTool returned HTTP " + std::to_string(res->status));
    }
    return parse_response(text, res->body);
}

std::shared_ptr<const GrammarBackend> make_grammar_backend(const std::string& kind,
                                                           const std::string& languagetool_url) {
    if (kind == "builtin") return BuiltinGrammarBackend::shared_default();
    if (kind == "languagetool") {
        LanguageToolBackend::Options options;
        if (!languagetool_url.empty()) options.base_url = languagetool_url;
        return std::make_shared<const LanguageToolBackend>(options);
    }
    throw InvalidInput("unknown grammar backend '" + kind + "' (expected builtin or languagetool)");
}

}  // namespace ielts::text
