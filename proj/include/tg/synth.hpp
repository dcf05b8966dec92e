#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tg/typegraph.hpp"

namespace tg {

struct Directive {
    enum class Op { Alloc, Static, Link, HoldLock, InjectCast, InjectStale, LeaveUnrooted };
    Op op = Op::Alloc;
    std::string name;         // alloc/static: unique object name
    std::string type;         // alloc/static: type spelling
    uint64_t count = 1;       // alloc: array element count (1 = single object)
    int64_t fam_trailing = -1;  // alloc: trailing FAM elements; -1 = not a FAM alloc
    std::string symbol;       // static
    std::string src, dst;     // link / inject_cast
    std::string object;       // hold_lock / inject_stale / leave_unrooted
    std::string referrer;     // inject_stale
    std::string path;         // member path "a.b[2].c"; "" = the object itself
    std::string dst_path;     // link: interior target inside dst
    uint64_t owner = 0;       // hold_lock
};

// A replayable allocation scenario: identical (spec, seed) pairs generate
// byte-identical dump documents.
struct SynthSpec {
    std::vector<uint64_t> gp_sizes;  // general-purpose cache ladder
    struct TypedCache {
        std::string name;
        std::string type;
        uint64_t object_size = 0;  // 0 = size of the type
    };
    std::vector<TypedCache> typed_caches;
    std::vector<Directive> script;
    uint64_t seed = 0;
    uint32_t pointer_size = 8;
    Endian endianness = Endian::Little;
    // Fill integer members with values that collide with object addresses
    // instead of small odd values.
    bool adversarial = false;

    // Script-building helpers; alloc names are auto-generated.
    std::string alloc(const std::string& type, uint64_t count = 1);
    std::string alloc_fam(const std::string& type, uint64_t trailing);
    std::string add_static(const std::string& symbol, const std::string& type);
    void link(const std::string& src, const std::string& path, const std::string& dst,
              const std::string& dst_path = "");
    void hold_lock(const std::string& object, const std::string& path, uint64_t owner);
    void inject_cast(const std::string& src, const std::string& path, const std::string& dst);
    void inject_stale(const std::string& object, const std::string& referrer,
                      const std::string& path);
    void leave_unrooted(const std::string& object);

    static SynthSpec load(const std::string& text);
    static SynthSpec load_file(const std::string& path);

private:
    uint64_t next_name_ = 0;
};

struct TruthObject {
    uint64_t base = 0;
    std::string type;  // catalog document id
    uint64_t element_count = 1;
    bool rooted = true;
};

struct GroundTruth {
    std::vector<TruthObject> objects;  // one per heap object, base order
    std::vector<std::pair<uint64_t, uint64_t>> held_locks;  // lock addr, masked owner
    struct Injected {
        uint64_t base = 0;
        std::string stale_type;
        std::string true_type;
    };
    std::vector<Injected> injected;

    std::string to_json() const;
    static GroundTruth load(const std::string& text);
    static GroundTruth load_file(const std::string& path);
};

struct Generated {
    std::string dump_text;
    GroundTruth truth;
    // Cache/type pairs implied by the spec's typed caches, ready to feed
    // TypeGraph.
    CacheTypeTable cache_table;
};

Generated generate(const SynthSpec& spec, const TypeCatalog& catalog);

struct EvalReport {
    uint64_t nodes = 0;
    uint64_t correct = 0;        // single inference equal to truth (count included)
    uint64_t misidentified = 0;  // single inference differing from truth
    uint64_t conflicts = 0;
    uint64_t fragments = 0;
    uint64_t fragments_consistent = 0;
    uint64_t unknown = 0;
    uint64_t expected_unknown = 0;  // unrooted per the truth sidecar
    double recognition_rate = 0.0;
    double misidentification_rate = 0.0;
};

EvalReport evaluate(const TypeGraph& graph, const GroundTruth& truth);
std::string render_eval(const EvalReport& report);

}  // namespace tg
