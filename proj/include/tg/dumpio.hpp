#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tg/typecat.hpp"

namespace tg {

enum class Endian : uint8_t { Little, Big };

struct Segment {
    uint64_t base = 0;
    std::vector<uint8_t> bytes;
};

struct Cache {
    std::string id;
    std::string name;
    uint64_t object_size = 0;
    bool general_purpose = false;
};

struct HeapObject {
    uint64_t base = 0;
    uint64_t size = 0;   // allocated (cache slot) size
    uint32_t cache = 0;  // index into caches()
};

struct StaticObject {
    std::string symbol;
    uint64_t base = 0;
    uint64_t size = 0;  // == size_of(type)
    TypeId type = kNoType;
};

// Immutable after load; safe for concurrent readers.
class DumpImage {
public:
    static DumpImage load(const std::string& text, const TypeCatalog& catalog);
    static DumpImage load_file(const std::string& path, const TypeCatalog& catalog);

    uint32_t pointer_size() const { return pointer_size_; }
    Endian endianness() const { return endianness_; }
    const std::vector<Segment>& segments() const { return segments_; }
    const std::vector<Cache>& caches() const { return caches_; }
    const std::vector<HeapObject>& heap_objects() const { return objects_; }
    const std::vector<StaticObject>& statics() const { return statics_; }

    std::optional<uint32_t> find_cache(const std::string& name) const;

    bool is_mapped(uint64_t addr, uint64_t len) const;

    // Pointer-width load, decoded per the image's endianness. Throws on a
    // misaligned or unmapped address.
    uint64_t read_word(uint64_t addr) const;

    // The unique heap object with base <= addr < base+size, with the offset
    // of addr inside it. Total: returns nullopt for any unowned address.
    std::optional<std::pair<uint32_t, uint64_t>> object_containing(uint64_t addr) const;

    // Largest general-purpose cache object size strictly below `size`.
    std::optional<uint64_t> next_smaller_gp_cache(uint64_t size) const;

private:
    void validate(const TypeCatalog& catalog);

    uint32_t pointer_size_ = 8;
    Endian endianness_ = Endian::Little;
    std::vector<Segment> segments_;  // sorted by base, disjoint
    std::vector<Cache> caches_;
    std::vector<HeapObject> objects_;  // sorted by base, disjoint
    std::vector<StaticObject> statics_;
    std::vector<uint64_t> gp_sizes_;  // sorted ascending
};

}  // namespace tg
