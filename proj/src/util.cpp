#include "tg/util.hpp"

#include <fstream>
#include <sstream>

namespace tg {

std::string to_hex(uint64_t value) {
    static const char digits[] = "0123456789abcdef";
    if (value == 0) return "0";
    char buf[16];
    int n = 0;
    while (value != 0) {
        buf[n++] = digits[value & 0xf];
        value >>= 4;
    }
    std::string out;
    out.reserve(n);
    while (n > 0) out.push_back(buf[--n]);
    return out;
}

std::optional<uint64_t> parse_hex(std::string_view text) {
    if (text.size() >= 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'X'))
        text.remove_prefix(2);
    if (text.empty() || text.size() > 16) return std::nullopt;
    uint64_t value = 0;
    for (char c : text) {
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else return std::nullopt;
        value = (value << 4) | static_cast<uint64_t>(d);
    }
    return value;
}

namespace {
const char b64_alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const uint8_t* data, size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8) | data[i + 2];
        out.push_back(b64_alphabet[(v >> 18) & 0x3f]);
        out.push_back(b64_alphabet[(v >> 12) & 0x3f]);
        out.push_back(b64_alphabet[(v >> 6) & 0x3f]);
        out.push_back(b64_alphabet[v & 0x3f]);
    }
    if (i + 1 == len) {
        uint32_t v = uint32_t(data[i]) << 16;
        out.push_back(b64_alphabet[(v >> 18) & 0x3f]);
        out.push_back(b64_alphabet[(v >> 12) & 0x3f]);
        out.append("==");
    } else if (i + 2 == len) {
        uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8);
        out.push_back(b64_alphabet[(v >> 18) & 0x3f]);
        out.push_back(b64_alphabet[(v >> 12) & 0x3f]);
        out.push_back(b64_alphabet[(v >> 6) & 0x3f]);
        out.push_back('=');
    }
    return out;
}

std::vector<uint8_t> base64_decode(std::string_view text) {
    std::vector<uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    uint32_t acc = 0;
    int bits = 0;
    size_t pad = 0;
    for (char c : text) {
        if (c == '\n' || c == '\r' || c == ' ') continue;
        if (c == '=') {
            pad++;
            continue;
        }
        if (pad != 0) throw Error("base64: data after padding");
        int v = b64_value(c);
        if (v < 0) throw Error("base64: invalid character");
        acc = (acc << 6) | static_cast<uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<uint8_t>((acc >> bits) & 0xff));
        }
    }
    if (pad > 2) throw Error("base64: bad padding");
    return out;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write file: " + path);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed: " + path);
}

}  // namespace tg
