#include "ielts/neural/registry.hpp"

#include <map>
#include <mutex>

#include "ielts/common/data_dir.hpp"
#include "ielts/common/error.hpp"
#include "ielts/neural/safetensors.hpp"

namespace ielts::neural {

EncoderWeights<float> weights_from_safetensors(const EncoderSpec& spec, const std::filesystem::path& file) {
    const auto st = read_safetensors(file);
    auto w = EncoderWeights<float>::zeros(spec);
    w.visit([&](const std::string& name, auto& t, bool) {
        auto it = st.tensors.find("distilbert." + name);
        if (it == st.tensors.end()) it = st.tensors.find(name);
        if (it == st.tensors.end()) throw InvalidInput("checkpoint " + file.string() + " lacks tensor " + name);
        const auto& src = it->second;
        if (src.numel() != static_cast<std::size_t>(t.size())) {
            throw InvalidInput("checkpoint tensor " + name + " has an unexpected shape");
        }
        const auto values = src.to_float();
        std::copy(values.begin(), values.end(), t.data());
    });
    return w;
}

EncoderWeights<float> EncoderBundle::load_weights() const {
    if (!has_weights) return EncoderWeights<float>::random(spec);
    return weights_from_safetensors(spec, dir / "model.safetensors");
}

std::shared_ptr<const EncoderBundle> resolve_encoder(const std::string& id) {
    static std::mutex mu;
    static std::map<std::string, std::shared_ptr<const EncoderBundle>> cache;
    std::lock_guard lock(mu);
    if (auto it = cache.find(id); it != cache.end()) return it->second;

    std::filesystem::path dir = id;
    if (id.empty() || !std::filesystem::is_directory(dir)) dir = data_dir() / "encoders" / id;
    if (id.empty() || !std::filesystem::exists(dir / "config.json")) {
        throw NotFound("unknown encoder_id '" + id + "'");
    }
    auto b = std::make_shared<EncoderBundle>();
    b->id = id;
    b->dir = dir;
    auto config = nlohmann::json::parse(read_file(dir / "config.json"));
    if (std::filesystem::exists(dir / "tokenizer_config.json")) {
        const auto tc = nlohmann::json::parse(read_file(dir / "tokenizer_config.json"));
        if (tc.contains("do_lower_case")) config["do_lower_case"] = tc["do_lower_case"];
    }
    b->spec = EncoderSpec::from_json(config);
    b->tokenizer = std::make_shared<WordPieceTokenizer>(WordPieceTokenizer::load(dir / "vocab.txt", b->spec.lowercase));
    if (static_cast<int>(b->tokenizer->vocab().size()) != b->spec.vocab_size) {
        throw InvalidInput("encoder " + id + ": vocab.txt size does not match vocab_size");
    }
    b->has_weights = std::filesystem::exists(dir / "model.safetensors");
    cache.emplace(id, b);
    return b;
}

}  // namespace ielts::neural
