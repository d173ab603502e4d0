#include "ielts/synth/generator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/common/rng.hpp"
#include "ielts/corpus/band.hpp"

namespace ielts::synth {

namespace {

struct Topic {
    const char* prompt;
    const char* subject;  // {T}
    const char* group;    // {G}
    const char* place;    // {P}
    const char* restate;  // uses prompt vocabulary
};

const Topic kTopics[] = {
    {"Some people believe that technology has made learning easier for students, while others think it has "
     "created new distractions. Discuss both views and give your own opinion.",
     "technology", "students", "schools",
     "Technology has changed learning for students, and it has also created new distractions."},
    {"Traffic congestion is becoming a serious problem in many cities. What are the causes of this problem and "
     "what measures could governments take to reduce it?",
     "traffic", "drivers", "big cities",
     "Traffic congestion is a serious problem in cities, and governments must reduce it."},
    {"More and more employees are working from home instead of travelling to an office. Do the advantages of "
     "this development outweigh the disadvantages?",
     "working from home", "employees", "the office",
     "Working from home instead of travelling to an office is popular among employees."},
    {"Some people think that governments should spend money on public transport rather than on roads. To what "
     "extent do you agree or disagree?",
     "public transport", "passengers", "the city centre",
     "Governments should spend money on public transport rather than building new roads."},
    {"Many young people today spend a lot of time on social media. Is this a positive or negative "
     "development?",
     "social media", "young people", "modern society",
     "Young people spend a lot of time on social media, which is a new development."},
    {"Some argue that international tourism brings more problems than benefits to local communities. Discuss "
     "both views and give your opinion.",
     "tourism", "local communities", "popular destinations",
     "International tourism brings both problems and benefits to local communities."},
};

const char* const kBasic[] = {
    "Many people think that {T} is good for {G}.",
    "{T} can help {G} in many ways.",
    "It is important to think about how {T} changes the lives of {G}.",
    "Some people say that {T} is bad for society.",
    "For example, {G} in {P} use {T} every day.",
    "This shows that {T} has a big effect on our lives.",
    "Many {G} need to understand the problems that come with {T}.",
    "There are lots of reasons why {T} is important today.",
    "It is hard to say whether {T} is always good.",
    "Governments should start to look at {T} more carefully.",
    "In my opinion, the benefits of {T} are bigger than the problems.",
    "Many {G} often get new skills because of {T}.",
    "Families buy things that are linked to {T}.",
    "This thing is very important for the future of {P}.",
    "If we use {T} in a good way, everyone can benefit.",
    "The main problem is that {T} can make {G} lazy.",
    "People who live in {P} have seen big changes.",
    "Schools and companies need enough time to adapt to {T}.",
    "We should not forget that {T} also has a cost.",
    "It is clear that {T} will stay with us for many years.",
    "It makes life easier for {G} in {P}.",
    "She works in {P} and thinks about {T} at her job.",
    "He believes that {T} is useful for {G}.",
    "It takes time to change old habits.",
    "My friend says that {T} helps him every day.",
    "It needs more attention from the government.",
};

const char* const kAdvanced[] = {
    "This phenomenon has profound ramifications for contemporary society.",
    "Consequently, policymakers must examine the long-term implications with great care.",
    "Such developments are arguably unprecedented in their scope.",
    "Nevertheless, critics contend that these benefits are frequently overstated.",
    "An equitable approach would mitigate the most detrimental consequences.",
    "Empirical evidence suggests that the advantages outweigh the drawbacks.",
    "Admittedly, the transition imposes considerable burdens on vulnerable households.",
    "These considerations illustrate why a nuanced perspective is indispensable.",
};

const char* const kConnectors[] = {"However",   "Furthermore",     "Moreover",    "In addition", "Therefore",
                                   "For instance", "As a result", "On the other hand", "Similarly", "Consequently"};

const char* const kAgreement[][2] = {{"It makes", "It make"},         {"She works", "She work"},
                                     {"He believes", "He believe"},   {"It takes", "It take"},
                                     {"says that", "say that"},       {"It needs", "It need"},
                                     {"helps him", "help him"}};

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
    return s;
}

std::string capitalise(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string decapitalise(std::string s) {
    if (s.size() > 1 && s[0] >= 'A' && s[0] <= 'Z' && !(s[1] == ' ' || s[1] == '\'')) {
        s[0] = static_cast<char>(s[0] - 'A' + 'a');
    }
    return s;
}

std::size_t word_count(const std::string& s) {
    std::size_t n = 0;
    bool in = false;
    for (char c : s) {
        const bool w = c != ' ' && c != '\n';
        if (w && !in) ++n;
        in = w;
    }
    return n;
}

struct Resources {
    std::vector<std::pair<std::string, std::string>> upgrades;  // basic -> advanced
    std::vector<std::pair<std::string, std::string>> misspell;  // correct -> wrong, file order
};

const Resources& resources() {
    static const Resources r = [] {
        Resources res;
        for (const auto& line : read_lines(data_file("lexicon/lexical_upgrades.tsv"))) {
            const auto tab = line.find('\t');
            if (tab != std::string::npos) res.upgrades.emplace_back(line.substr(0, tab), line.substr(tab + 1));
        }
        for (const auto& line : read_lines(data_file("lexicon/misspellings.tsv"))) {
            const auto tab = line.find('\t');
            if (tab == std::string::npos) continue;
            const auto right = line.substr(tab + 1);
            if (right.find(' ') == std::string::npos) res.misspell.emplace_back(right, line.substr(0, tab));
        }
        return res;
    }();
    return r;
}

// Replaces whole words only.
std::string replace_word(const std::string& s, const std::string& from, const std::string& to) {
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto pos = s.find(from, i);
        if (pos == std::string::npos) break;
        const bool left = pos == 0 || !std::isalpha(static_cast<unsigned char>(s[pos - 1]));
        const std::size_t end = pos + from.size();
        const bool right = end >= s.size() || !std::isalpha(static_cast<unsigned char>(s[end]));
        out += s.substr(i, pos - i);
        out += (left && right) ? to : from;
        i = end;
    }
    out += s.substr(i);
    return out;
}

class Writer {
public:
    Writer(double q, std::uint64_t seed) : q_(q), rng_(seed) {}

    double u() { return uniform01(rng_); }
    std::size_t pick(std::size_t n) { return static_cast<std::size_t>(uniform_below(rng_, n)); }

    std::string sentence(const Topic& topic) {
        std::string s;
        if (u() < 0.12 + 0.45 * q_) {
            s = kAdvanced[pick(std::size(kAdvanced))];
        } else {
            s = kBasic[pick(std::size(kBasic))];
            s = replace_all(s, "{T}", topic.subject);
            s = replace_all(s, "{G}", topic.group);
            s = replace_all(s, "{P}", topic.place);
            s = capitalise(s);
            for (const auto& [basic, adv] : resources().upgrades) {
                if (u() < 0.8 * q_) s = replace_word(s, basic, adv);
            }
            if (u() < 0.45 * q_) {
                std::string other = kBasic[pick(std::size(kBasic))];
                other = replace_all(replace_all(replace_all(other, "{T}", topic.subject), "{G}", topic.group), "{P}",
                                    topic.place);
                s.pop_back();
                s += ", and " + decapitalise(other);
            }
        }
        const bool has_connector = s.find(',') < s.find(' ');
        if (!has_connector && u() < 0.05 + 0.5 * q_) s = std::string(kConnectors[pick(std::size(kConnectors))]) + ", " + decapitalise(s);
        return inject_errors(s);
    }

    std::string inject_errors(std::string s) {
        const double rate = 0.55 * std::pow(1.0 - q_, 1.5) + 0.01;
        if (u() >= rate) return s;
        switch (pick(5)) {
            case 0:
                for (const auto& pair : kAgreement) {
                    if (s.find(pair[0]) != std::string::npos) return replace_all(s, pair[0], pair[1]);
                }
                [[fallthrough]];
            case 1: {
                std::vector<const std::pair<std::string, std::string>*> hits;
                for (const auto& entry : resources().misspell) {
                    if (replace_word(s, entry.first, entry.second) != s) hits.push_back(&entry);
                }
                if (!hits.empty()) {
                    const auto* hit = hits[pick(hits.size())];
                    return replace_word(s, hit->first, hit->second);
                }
                const auto sp = s.find(' ');
                return sp == std::string::npos ? s : s.substr(0, sp) + " alot" + s.substr(sp);
            }
            case 2: {
                const auto pos = s.find(" the ");
                if (pos != std::string::npos) return s.substr(0, pos) + " the the " + s.substr(pos + 5);
                return s.substr(0, s.size() - 1) + " in a easy way.";
            }
            case 3: {
                const auto pos = s.find(", ");
                if (pos != std::string::npos) return s.substr(0, pos) + " ," + s.substr(pos + 2);
                return s.substr(0, s.size() - 1) + "..";
            }
            default: {
                const auto pos = s.find(" is ");
                if (pos != std::string::npos) return s.substr(0, pos) + " are " + s.substr(pos + 4);
                return s + " i think so.";
            }
        }
    }

private:
    double q_;
    std::mt19937_64 rng_;
};

}  // namespace

SynthEssay generate_one(double quality, std::uint64_t seed, const std::string& id, double label_noise) {
    const double q = std::clamp(quality, 0.0, 1.0);
    Writer w(q, seed);
    const Topic& topic = kTopics[w.pick(std::size(kTopics))];

    std::mt19937_64 length_rng(mix64(seed));
    const double gauss = normal01(length_rng);
    const auto target_words = static_cast<std::size_t>(std::max(50.0, 100.0 + 240.0 * q + 25.0 * gauss));
    std::size_t n_par;
    if (q < 0.3) {
        n_par = 1 + w.pick(2);
    } else if (q < 0.6) {
        n_par = 2 + w.pick(3);
    } else {
        n_par = 4 + w.pick(2);
    }

    std::vector<std::vector<std::string>> paragraphs(n_par);
    std::size_t words = 0;
    if (w.u() < 0.25 + 0.75 * q) {
        std::string opener = topic.restate;
        paragraphs[0].push_back(opener);
        words += word_count(opener);
    }
    std::size_t p = 0;
    const std::size_t per_par = std::max<std::size_t>(1, target_words / n_par);
    while (words < target_words) {
        auto s = w.sentence(topic);
        words += word_count(s);
        paragraphs[p].push_back(std::move(s));
        std::size_t par_words = 0;
        for (const auto& x : paragraphs[p]) par_words += word_count(x);
        if (par_words >= per_par && p + 1 < n_par) ++p;
    }
    for (auto& par : paragraphs) {
        if (par.empty()) par.push_back(w.sentence(topic));
    }
    if (n_par >= 2 && w.u() < q) {
        auto& first = paragraphs.back().front();
        first = "In conclusion, " + decapitalise(first);
    }

    std::string body;
    for (std::size_t i = 0; i < paragraphs.size(); ++i) {
        if (i) body += "\n\n";
        for (std::size_t j = 0; j < paragraphs[i].size(); ++j) {
            if (j) body += ' ';
            body += paragraphs[i][j];
        }
    }

    std::mt19937_64 label_rng(mix64(seed ^ 0x6c6162656cULL));
    const double raw = 3.5 + 5.0 * q + label_noise * normal01(label_rng);
    SynthEssay out;
    out.quality = q;
    out.record.id = id;
    out.record.prompt = topic.prompt;
    out.record.body = std::move(body);
    out.record.label = corpus::round_to_band(raw);
    return out;
}

std::vector<SynthEssay> generate(const SynthConfig& config) {
    if (config.label_noise < 0) throw InvalidInput("label_noise must be nonnegative");
    std::vector<SynthEssay> out;
    out.reserve(config.count);
    std::mt19937_64 rng(config.seed);
    for (std::size_t i = 0; i < config.count; ++i) {
        const double q = uniform01(rng);
        const std::uint64_t essay_seed = rng();
        char id[64];
        std::snprintf(id, sizeof id, "%s-%05zu", config.id_prefix.c_str(), i + 1);
        out.push_back(generate_one(q, essay_seed, id, config.label_noise));
    }
    return out;
}

std::vector<corpus::EssayRecord> generate_records(const SynthConfig& config) {
    std::vector<corpus::EssayRecord> out;
    for (auto& e : generate(config)) out.push_back(std::move(e.record));
    return out;
}

}  // namespace ielts::synth
