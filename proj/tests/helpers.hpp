#pragma once

#include <json.hpp>

#include <string>

#include "tg/dumpio.hpp"
#include "tg/typecat.hpp"

namespace tgtest {

using nlohmann::json;

// Assembles catalog documents without JSON noise in the tests.
struct CatalogBuilder {
    json types = json::array();
    uint32_t ptr_size = 8;

    CatalogBuilder& base(const std::string& id, uint64_t size) {
        types.push_back({{"id", id}, {"kind", "base"}, {"name", id}, {"size", size}});
        return *this;
    }
    CatalogBuilder& pointer(const std::string& id, const std::string& pointee) {
        types.push_back({{"id", id},
                         {"kind", "pointer"},
                         {"name", id},
                         {"size", ptr_size},
                         {"pointee", pointee}});
        return *this;
    }
    CatalogBuilder& opaque(const std::string& id) {
        types.push_back({{"id", id}, {"kind", "pointer"}, {"name", id}, {"size", ptr_size}});
        return *this;
    }
    CatalogBuilder& record(const std::string& id, uint64_t size,
                           std::initializer_list<std::tuple<const char*, uint64_t, const char*>>
                               members,
                           bool sync = false, const char* kind = "struct") {
        json ms = json::array();
        for (const auto& [name, offset, type] : members)
            ms.push_back({{"name", name}, {"offset", offset}, {"type", type}});
        json entry = {{"id", id}, {"kind", kind}, {"name", id}, {"size", size}, {"members", ms}};
        if (sync) entry["flags"] = json::array({"sync_primitive"});
        types.push_back(std::move(entry));
        return *this;
    }
    CatalogBuilder& array(const std::string& id, const std::string& element, uint64_t count,
                          uint64_t size) {
        types.push_back({{"id", id},
                         {"kind", "array"},
                         {"name", id},
                         {"size", size},
                         {"element_type", element},
                         {"element_count", count}});
        return *this;
    }
    CatalogBuilder& tdef(const std::string& id, const std::string& target, uint64_t size) {
        types.push_back(
            {{"id", id}, {"kind", "typedef"}, {"name", id}, {"size", size}, {"target", target}});
        return *this;
    }

    std::string text() const { return json{{"types", types}}.dump(); }
    tg::TypeCatalog load() const { return tg::TypeCatalog::load(text()); }
};

// A small 32-bit world: foo_t with three pointers and an int.
inline CatalogBuilder foo_chain_catalog() {
    CatalogBuilder cb;
    cb.ptr_size = 4;
    cb.base("int", 4).base("char", 1);
    cb.pointer("foo_ptr", "foo");
    cb.pointer("char_ptr", "char");
    cb.pointer("bar_ptr", "bar");
    cb.record("foo", 16,
              {{"foo_next", 0x0, "foo_ptr"},
               {"foo_str", 0x4, "char_ptr"},
               {"foo_bar", 0x8, "bar_ptr"},
               {"foo_flags", 0xc, "int"}});
    cb.record("bar", 8, {{"bar_x", 0, "int"}, {"bar_str", 4, "char_ptr"}});
    cb.tdef("foo_t", "foo", 16);
    return cb;
}

// Assembles dump documents with explicit segment bytes.
struct DumpBuilder {
    uint32_t ptr_size = 8;
    std::string endianness = "little";
    json segments = json::array();
    json caches = json::array();
    json objects = json::array();
    json statics = json::array();

    DumpBuilder& segment(uint64_t base, const std::vector<uint8_t>& bytes) {
        segments.push_back({{"base", "0x" + tg::to_hex(base)},
                            {"data", tg::base64_encode(bytes.data(), bytes.size())}});
        return *this;
    }
    DumpBuilder& cache(const std::string& id, uint64_t object_size, bool gp) {
        caches.push_back(
            {{"id", id}, {"name", id}, {"object_size", object_size}, {"general_purpose", gp}});
        return *this;
    }
    DumpBuilder& object(uint64_t base, uint64_t size, const std::string& cache) {
        objects.push_back({{"base", "0x" + tg::to_hex(base)}, {"size", size}, {"cache", cache}});
        return *this;
    }
    DumpBuilder& static_obj(const std::string& symbol, uint64_t base, const std::string& type) {
        statics.push_back(
            {{"symbol", symbol}, {"base", "0x" + tg::to_hex(base)}, {"type", type}});
        return *this;
    }

    std::string text() const {
        json doc = {{"format_version", 1}, {"pointer_size", ptr_size},
                    {"endianness", endianness}, {"segments", segments},
                    {"caches", caches},       {"objects", objects},
                    {"statics", statics}};
        return doc.dump();
    }
    tg::DumpImage load(const tg::TypeCatalog& cat) const {
        return tg::DumpImage::load(text(), cat);
    }
};

// Little/big-endian word writer for hand-built segments.
inline void put_word(std::vector<uint8_t>& bytes, uint64_t offset, uint64_t value, uint32_t width,
                     bool little = true) {
    for (uint32_t i = 0; i < width; i++) {
        uint8_t b = little ? uint8_t(value >> (8 * i)) : uint8_t(value >> (8 * (width - 1 - i)));
        bytes[offset + i] = b;
    }
}

}  // namespace tgtest
