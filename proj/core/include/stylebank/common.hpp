#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stylebank {

// Query/sample styles. 'text' is the text modality, everything else is an image style.
enum class StyleTag : uint8_t {
    natural = 0,
    sketch = 1,
    art = 2,
    lowres = 3,
    text = 4,
};

enum class Modality : uint8_t {
    image = 0,
    text = 1,
};

inline constexpr int kNumStyles = 5;

const char* to_string(StyleTag style);
const char* to_string(Modality modality);

// Throws std::invalid_argument for anything outside the closed enumeration.
StyleTag parse_style(std::string_view name);

inline Modality modality_of(StyleTag style) {
    return style == StyleTag::text ? Modality::text : Modality::image;
}

// splitmix64 step; also the basis for deriving per-module seeds from one root seed.
uint64_t splitmix64(uint64_t& state);
uint64_t derive_seed(uint64_t base, std::string_view tag);

}  // namespace stylebank
