#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ielts/corpus/essay.hpp"

namespace ielts::synth {

struct SynthConfig {
    std::size_t count = 200;
    std::uint64_t seed = 1;
    std::string id_prefix = "synth";
    double label_noise = 0.45;  // sd of the band noise around the latent quality
};

struct SynthEssay {
    corpus::EssayRecord record;
    double quality = 0.0;  // latent quality in [0, 1]
};

// Seeded generator of labelled Task 2 style essays. A latent quality drives
// length, paragraphing, connectors, vocabulary level, prompt relevance and
// the rate of injected grammar, spelling and punctuation errors; the label
// is round_to_band(3.5 + 5q + noise).
std::vector<SynthEssay> generate(const SynthConfig& config);
std::vector<corpus::EssayRecord> generate_records(const SynthConfig& config);

// One essay at a fixed quality.
SynthEssay generate_one(double quality, std::uint64_t seed, const std::string& id, double label_noise = 0.45);

}  // namespace ielts::synth
