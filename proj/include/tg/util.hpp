#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tg {

// All load/validation failures surface as tg::Error with a message naming
// the offending entity.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Lowercase hex, no 0x prefix (debugger-style address rendering).
std::string to_hex(uint64_t value);

// Accepts an optional 0x/0X prefix; returns nullopt on any non-hex input.
std::optional<uint64_t> parse_hex(std::string_view text);

std::string base64_encode(const uint8_t* data, size_t len);
std::vector<uint8_t> base64_decode(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);

// Deterministic 64-bit generator (splitmix64). The synthesizer depends on
// identical seeds reproducing identical dump bytes on every platform, so
// std::uniform_int_distribution is out.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, bound); bound > 0
    uint64_t below(uint64_t bound) { return next() % bound; }

private:
    uint64_t state_;
};

}  // namespace tg
