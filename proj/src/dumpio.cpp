#include "tg/dumpio.hpp"

#include <algorithm>

#include <json.hpp>

namespace tg {

using json = nlohmann::json;

namespace {

uint64_t parse_addr(const json& value, const std::string& what) {
    if (!value.is_string()) throw Error(what + ": address must be a hex string");
    auto parsed = parse_hex(value.get<std::string>());
    if (!parsed) throw Error(what + ": bad address '" + value.get<std::string>() + "'");
    return *parsed;
}

void check_fields(const json& obj, std::initializer_list<const char*> allowed,
                  const std::string& what) {
    for (auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw Error(what + ": unknown field '" + key + "'");
    }
}

}  // namespace

DumpImage DumpImage::load_file(const std::string& path, const TypeCatalog& catalog) {
    return load(read_text_file(path), catalog);
}

DumpImage DumpImage::load(const std::string& text, const TypeCatalog& catalog) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("dump: parse error: ") + e.what());
    }
    if (!doc.is_object()) throw Error("dump: expected a top-level object");
    check_fields(doc, {"format_version", "pointer_size", "endianness", "segments", "caches",
                       "objects", "statics"},
                 "dump");

    DumpImage img;
    if (!doc.contains("format_version") || doc["format_version"] != 1)
        throw Error("dump: unsupported format_version");
    if (!doc.contains("pointer_size") || !doc["pointer_size"].is_number_unsigned())
        throw Error("dump: missing pointer_size");
    img.pointer_size_ = doc["pointer_size"].get<uint32_t>();
    if (img.pointer_size_ != 4 && img.pointer_size_ != 8)
        throw Error("dump: pointer_size must be 4 or 8");

    std::string endian = doc.value("endianness", "");
    if (endian == "little") img.endianness_ = Endian::Little;
    else if (endian == "big") img.endianness_ = Endian::Big;
    else throw Error("dump: endianness must be 'little' or 'big'");

    for (const json& s : doc.value("segments", json::array())) {
        check_fields(s, {"base", "data"}, "dump segment");
        Segment seg;
        seg.base = parse_addr(s.at("base"), "segment");
        if (!s.contains("data") || !s["data"].is_string())
            throw Error("dump segment: missing data");
        seg.bytes = base64_decode(s["data"].get<std::string>());
        img.segments_.push_back(std::move(seg));
    }

    for (const json& c : doc.value("caches", json::array())) {
        check_fields(c, {"id", "name", "object_size", "general_purpose"}, "dump cache");
        Cache cache;
        if (!c.contains("id") || !c["id"].is_string()) throw Error("dump cache: missing id");
        cache.id = c["id"].get<std::string>();
        cache.name = c.value("name", cache.id);
        if (!c.contains("object_size") || !c["object_size"].is_number_unsigned())
            throw Error("cache " + cache.id + ": missing object_size");
        cache.object_size = c["object_size"].get<uint64_t>();
        if (cache.object_size == 0) throw Error("cache " + cache.id + ": object_size 0");
        cache.general_purpose = c.value("general_purpose", false);
        img.caches_.push_back(std::move(cache));
    }

    for (const json& o : doc.value("objects", json::array())) {
        check_fields(o, {"base", "size", "cache"}, "dump object");
        HeapObject obj;
        obj.base = parse_addr(o.at("base"), "object");
        if (!o.contains("size") || !o["size"].is_number_unsigned())
            throw Error("object at " + to_hex(obj.base) + ": missing size");
        obj.size = o["size"].get<uint64_t>();
        std::string cache_id = o.value("cache", "");
        auto it = std::find_if(img.caches_.begin(), img.caches_.end(),
                               [&](const Cache& c) { return c.id == cache_id; });
        if (it == img.caches_.end())
            throw Error("object at " + to_hex(obj.base) + ": unknown cache '" + cache_id + "'");
        obj.cache = static_cast<uint32_t>(it - img.caches_.begin());
        img.objects_.push_back(obj);
    }

    for (const json& s : doc.value("statics", json::array())) {
        check_fields(s, {"symbol", "base", "type"}, "dump static");
        StaticObject st;
        st.symbol = s.value("symbol", "");
        st.base = parse_addr(s.at("base"), "static " + st.symbol);
        std::string type_id = s.value("type", "");
        auto tid = catalog.find_by_id(type_id);
        if (!tid) tid = catalog.find_by_name(type_id);
        if (!tid) throw Error("static " + st.symbol + ": unknown type '" + type_id + "'");
        st.type = *tid;
        st.size = catalog.size_of(*tid);
        img.statics_.push_back(std::move(st));
    }

    img.validate(catalog);
    return img;
}

void DumpImage::validate(const TypeCatalog&) {
    std::sort(segments_.begin(), segments_.end(),
              [](const Segment& a, const Segment& b) { return a.base < b.base; });
    for (size_t i = 0; i < segments_.size(); i++) {
        if (segments_[i].base % pointer_size_ != 0)
            throw Error("segment at " + to_hex(segments_[i].base) + ": base not aligned");
        if (i > 0 && segments_[i - 1].base + segments_[i - 1].bytes.size() > segments_[i].base)
            throw Error("segments overlap at " + to_hex(segments_[i].base));
    }

    std::sort(objects_.begin(), objects_.end(),
              [](const HeapObject& a, const HeapObject& b) { return a.base < b.base; });
    for (size_t i = 0; i < objects_.size(); i++) {
        const HeapObject& o = objects_[i];
        std::string where = "object at " + to_hex(o.base);
        if (o.size == 0) throw Error(where + ": size 0");
        if (o.base % pointer_size_ != 0) throw Error(where + ": base not aligned");
        if (i > 0 && objects_[i - 1].base + objects_[i - 1].size > o.base)
            throw Error(where + ": overlaps previous object");
        if (!is_mapped(o.base, o.size)) throw Error(where + ": not inside any segment");
        if (o.size > caches_[o.cache].object_size)
            throw Error(where + ": larger than its cache object_size");
    }

    for (const StaticObject& st : statics_) {
        if (!is_mapped(st.base, st.size))
            throw Error("static " + st.symbol + ": not inside any segment");
    }

    for (const Cache& c : caches_) {
        if (!c.general_purpose) continue;
        if (std::find(gp_sizes_.begin(), gp_sizes_.end(), c.object_size) != gp_sizes_.end())
            throw Error("cache " + c.id + ": duplicate general-purpose object_size");
        gp_sizes_.push_back(c.object_size);
    }
    std::sort(gp_sizes_.begin(), gp_sizes_.end());
}

std::optional<uint32_t> DumpImage::find_cache(const std::string& name) const {
    for (uint32_t i = 0; i < caches_.size(); i++)
        if (caches_[i].name == name) return i;
    return std::nullopt;
}

bool DumpImage::is_mapped(uint64_t addr, uint64_t len) const {
    if (len == 0) return true;
    // First segment with base > addr; the candidate is its predecessor.
    auto it = std::upper_bound(segments_.begin(), segments_.end(), addr,
                               [](uint64_t a, const Segment& s) { return a < s.base; });
    if (it == segments_.begin()) return false;
    --it;
    return addr - it->base + len <= it->bytes.size();
}

uint64_t DumpImage::read_word(uint64_t addr) const {
    if (addr % pointer_size_ != 0)
        throw Error("read_word: misaligned address " + to_hex(addr));
    auto it = std::upper_bound(segments_.begin(), segments_.end(), addr,
                               [](uint64_t a, const Segment& s) { return a < s.base; });
    if (it == segments_.begin()) throw Error("read_word: unmapped address " + to_hex(addr));
    --it;
    uint64_t off = addr - it->base;
    if (off + pointer_size_ > it->bytes.size())
        throw Error("read_word: unmapped address " + to_hex(addr));
    uint64_t value = 0;
    if (endianness_ == Endian::Little) {
        for (uint32_t i = 0; i < pointer_size_; i++)
            value |= uint64_t(it->bytes[off + i]) << (8 * i);
    } else {
        for (uint32_t i = 0; i < pointer_size_; i++)
            value = (value << 8) | it->bytes[off + i];
    }
    return value;
}

std::optional<std::pair<uint32_t, uint64_t>> DumpImage::object_containing(uint64_t addr) const {
    auto it = std::upper_bound(objects_.begin(), objects_.end(), addr,
                               [](uint64_t a, const HeapObject& o) { return a < o.base; });
    if (it == objects_.begin()) return std::nullopt;
    --it;
    if (addr >= it->base + it->size) return std::nullopt;  // half-open interval
    return std::make_pair(static_cast<uint32_t>(it - objects_.begin()), addr - it->base);
}

std::optional<uint64_t> DumpImage::next_smaller_gp_cache(uint64_t size) const {
    auto it = std::lower_bound(gp_sizes_.begin(), gp_sizes_.end(), size);
    if (it == gp_sizes_.begin()) return std::nullopt;
    return *(it - 1);
}

}  // namespace tg
