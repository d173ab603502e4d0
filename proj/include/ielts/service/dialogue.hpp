#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace ielts::service {

enum class Section { introduction, body, conclusion, full };

std::string_view to_string(Section s);
Section section_from_string(std::string_view s);  // throws InvalidInput

// Word target for a section: 20% / 60% / 20% / 100% of the full task.
int section_word_target(Section s, int full_task_words = 250);

enum class DialogueStage { greeting, ask_name, ask_age, offer_exercise, section_select, writing };

inline constexpr std::array<DialogueStage, 6> kStages = {
    DialogueStage::greeting,       DialogueStage::ask_name,       DialogueStage::ask_age,
    DialogueStage::offer_exercise, DialogueStage::section_select, DialogueStage::writing};

std::string_view to_string(DialogueStage s);  // "GREETING", ...
DialogueStage stage_from_string(std::string_view s);

struct DialogueState {
    DialogueStage stage = DialogueStage::greeting;
    std::optional<std::string> name;
    std::optional<int> age;
    std::optional<Section> section;

    friend bool operator==(const DialogueState&, const DialogueState&) = default;
};

// Every edge the machine may take, self-loops included.
const std::vector<std::pair<DialogueStage, DialogueStage>>& declared_transitions();

struct GraphCheck {
    std::vector<DialogueStage> unreachable;  // not reachable from GREETING
    std::vector<DialogueStage> dead_ends;    // cannot reach WRITING
    bool ok() const { return unreachable.empty() && dead_ends.empty(); }
};

GraphCheck check_dialogue_graph(const std::vector<std::pair<DialogueStage, DialogueStage>>& edges =
                                    declared_transitions());

class ReplyCatalog {
public:
    static ReplyCatalog from_json(const nlohmann::json& j);
    static ReplyCatalog load(const std::filesystem::path& path);
    static const ReplyCatalog& default_catalog();

    const std::string& at(const std::string& key) const;

private:
    std::map<std::string, std::string> replies_;
};

struct DialogueReply {
    std::string reply;
    DialogueState next;
};

// Parsers used by the machine; nullopt means re-prompt.
std::optional<std::string> parse_name(std::string_view input);
std::optional<int> parse_age(std::string_view input);
std::optional<bool> parse_yes_no(std::string_view input);
std::optional<Section> parse_section(std::string_view input);

DialogueReply dialogue_step(const DialogueState& state, std::string_view user_input,
                            const ReplyCatalog& catalog = ReplyCatalog::default_catalog(),
                            int full_task_words = 250);

// The message shown when a conversation opens.
std::string opening_message(const ReplyCatalog& catalog = ReplyCatalog::default_catalog());

}  // namespace ielts::service
