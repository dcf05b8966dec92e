#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tg/typegraph.hpp"

namespace tg {

// System-specific owner extraction: where the owner word lives inside a
// lock and which bits of it are the thread address. The defaults model an
// adaptive mutex whose low three bits carry state.
struct LockModel {
    std::vector<TypeId> lock_types;
    uint64_t owner_word_offset = 0;
    uint64_t owner_mask = ~uint64_t(7);

    // Every sync_primitive-flagged type in the catalog.
    static LockModel all_sync(const TypeCatalog& catalog);
};

struct LockRecord {
    uint64_t lock_addr = 0;
    std::string descriptor;  // symbol or "struct X.member"; empty for whole-object locks
    uint64_t owner = 0;      // masked, nonzero
};

struct FalseSharingRecord {
    uint64_t addr = 0;
    std::string symbol;  // empty for heap nodes
    TypeId element = kNoType;
    uint64_t element_size = 0;
    uint64_t total_size = 0;
};

struct ConflictRecord {
    uint32_t node = kNoNode;
    uint64_t base = 0;
    std::vector<Inference> inferences;
};

// Held locks inside every identified node (and every static), sorted by
// lock address. A lock is held when its masked owner word is nonzero.
std::vector<LockRecord> findlocks(const TypeGraph& graph, const LockModel& model);

// Arrays of small lock-bearing structs spanning more than one coherence
// line. Statics first, then heap, each by ascending address.
std::vector<FalseSharingRecord> findfalse(const TypeGraph& graph, uint64_t granularity);

// Nodes left with two or more distinct inferences, ascending base address.
std::vector<ConflictRecord> conflicts(const TypeGraph& graph);

std::string render_findlocks(const TypeGraph& graph, const std::vector<LockRecord>& records);
std::string render_findfalse(const TypeGraph& graph, const std::vector<FalseSharingRecord>& records);
std::string render_conflicts(const TypeGraph& graph, const std::vector<ConflictRecord>& records);

}  // namespace tg
