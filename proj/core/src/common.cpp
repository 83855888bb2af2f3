#include "stylebank/common.hpp"

namespace stylebank {

const char* to_string(StyleTag style) {
    switch (style) {
        case StyleTag::natural: return "natural";
        case StyleTag::sketch: return "sketch";
        case StyleTag::art: return "art";
        case StyleTag::lowres: return "lowres";
        case StyleTag::text: return "text";
    }
    throw std::invalid_argument("invalid StyleTag value");
}

const char* to_string(Modality modality) {
    return modality == Modality::image ? "image" : "text";
}

StyleTag parse_style(std::string_view name) {
    if (name == "natural") return StyleTag::natural;
    if (name == "sketch") return StyleTag::sketch;
    if (name == "art") return StyleTag::art;
    if (name == "lowres") return StyleTag::lowres;
    if (name == "text") return StyleTag::text;
    throw std::invalid_argument("unknown style tag: '" + std::string(name) + "'");
}

uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t derive_seed(uint64_t base, std::string_view tag) {
    uint64_t state = base ^ 0x1f83d9abfb41bd6bULL;
    uint64_t out = splitmix64(state);
    for (char c : tag) {
        state ^= static_cast<uint64_t>(static_cast<unsigned char>(c));
        out = splitmix64(state);
    }
    return out;
}

}  // namespace stylebank
