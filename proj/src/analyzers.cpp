#include "tg/analyzers.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

namespace tg {

LockModel LockModel::all_sync(const TypeCatalog& catalog) {
    LockModel model;
    for (TypeId i = 0; i < catalog.count(); i++) {
        if (catalog.type(i).kind == TypeKind::Typedef) continue;
        if (catalog.type(i).sync_primitive) model.lock_types.push_back(i);
    }
    return model;
}

namespace {

bool in_lock_set(const LockModel& model, TypeId resolved) {
    return std::find(model.lock_types.begin(), model.lock_types.end(), resolved) !=
           model.lock_types.end();
}

// Member chain without the leading type name ("serial_lock", "slots[3].lk").
std::string member_chain(const MemberPath& path) {
    std::string out;
    for (const PathStep& step : path.steps) {
        if (step.member_name.empty()) continue;
        if (!out.empty() && step.member_name[0] != '[') out.push_back('.');
        out += step.member_name;
    }
    return out;
}

struct LockSite {
    uint64_t offset;
    std::string descriptor;
};

// All lock locations within one instance of `type` placed at `base_offset`,
// given a descriptor prefix ("" for bare addresses, a symbol, or a type
// display name).
void collect_lock_sites(const TypeCatalog& cat, const LockModel& model, TypeId type,
                        uint64_t base_offset, const std::string& prefix,
                        std::vector<LockSite>& out) {
    TypeId resolved = cat.resolve(type);
    if (in_lock_set(model, resolved)) {
        out.push_back({base_offset, prefix});
        return;
    }
    for (const SyncLoc& loc : cat.sync_members(resolved)) {
        if (!in_lock_set(model, loc.type)) continue;
        std::string desc = prefix;
        std::string chain = member_chain(loc.path);
        if (!chain.empty()) {
            if (!desc.empty() && chain[0] != '[') desc += ".";
            desc += chain;
        }
        out.push_back({base_offset + loc.offset, desc});
    }
}

}  // namespace

std::vector<LockRecord> findlocks(const TypeGraph& graph, const LockModel& model) {
    const TypeCatalog& cat = graph.catalog();
    const DumpImage& img = graph.image();
    std::vector<LockRecord> records;

    for (const Node& n : graph.nodes()) {
        // Only nodes whose type authority is solid: known, pinned or a single
        // conjecture. Fragment-only and conflicted nodes are skipped.
        if (n.inferences.size() != 1) continue;
        TypeId tid = n.inferences[0].type;

        // Heap descriptors name the containing type; a node that is itself a
        // lock gets a bare address. Statics use their symbol.
        std::string prefix;
        if (n.is_static)
            prefix = img.statics()[n.static_index].symbol;
        else if (!in_lock_set(model, cat.resolve(tid)))
            prefix = cat.display_name(cat.resolve(tid));

        std::vector<LockSite> sites;
        if (n.verdict == ArrayVerdict::Array) {
            uint64_t esize = cat.size_of(tid);
            for (uint64_t k = 0; k < n.element_count; k++)
                collect_lock_sites(cat, model, tid, k * esize, prefix, sites);
        } else if (n.verdict == ArrayVerdict::Fam) {
            collect_lock_sites(cat, model, tid, 0, prefix, sites);
            uint64_t head = cat.size_of(tid);
            uint64_t msize = cat.size_of(n.fam_element);
            uint64_t trailing = msize ? (n.size - head) / msize : 0;
            std::string eprefix = in_lock_set(model, cat.resolve(n.fam_element))
                                      ? std::string()
                                      : cat.display_name(cat.resolve(n.fam_element));
            for (uint64_t j = 0; j < trailing; j++)
                collect_lock_sites(cat, model, n.fam_element, head + j * msize, eprefix, sites);
        } else {
            collect_lock_sites(cat, model, tid, 0, prefix, sites);
        }

        for (const LockSite& site : sites) {
            uint64_t lock_addr = n.base + site.offset;
            uint64_t word;
            try {
                word = img.read_word(lock_addr + model.owner_word_offset);
            } catch (const Error& e) {
                std::cerr << "findlocks: skipping lock at " << to_hex(lock_addr) << ": "
                          << e.what() << "\n";
                continue;
            }
            uint64_t owner = word & model.owner_mask;
            if (owner == 0) continue;
            records.push_back({lock_addr, site.descriptor, owner});
        }
    }

    std::sort(records.begin(), records.end(),
              [](const LockRecord& a, const LockRecord& b) { return a.lock_addr < b.lock_addr; });
    return records;
}

std::vector<FalseSharingRecord> findfalse(const TypeGraph& graph, uint64_t granularity) {
    const TypeCatalog& cat = graph.catalog();
    const DumpImage& img = graph.image();
    std::vector<FalseSharingRecord> statics, heap;

    auto element_qualifies = [&](TypeId element) {
        const TypeDef& td = cat.type(element);
        if (td.kind != TypeKind::Struct) return false;
        if (td.size >= granularity) return false;
        return td.sync_primitive || !cat.sync_members(element).empty();
    };

    for (const Node& n : graph.nodes()) {
        if (n.is_static) {
            // Statics qualify through a declared array type.
            TypeId tid = cat.resolve(img.statics()[n.static_index].type);
            const TypeDef& td = cat.type(tid);
            if (td.kind != TypeKind::Array) continue;
            TypeId element = cat.resolve(td.element_type);
            if (!element_qualifies(element)) continue;
            if (n.size <= granularity) continue;
            statics.push_back({n.base, img.statics()[n.static_index].symbol, element,
                               cat.size_of(element), n.size});
        } else {
            if (n.verdict != ArrayVerdict::Array) continue;
            if (n.inferences.size() != 1) continue;
            TypeId element = n.inferences[0].type;
            if (!element_qualifies(element)) continue;
            if (n.size <= granularity) continue;
            heap.push_back({n.base, "", element, cat.size_of(element), n.size});
        }
    }

    auto by_addr = [](const FalseSharingRecord& a, const FalseSharingRecord& b) {
        return a.addr < b.addr;
    };
    std::sort(statics.begin(), statics.end(), by_addr);
    std::sort(heap.begin(), heap.end(), by_addr);
    statics.insert(statics.end(), heap.begin(), heap.end());
    return statics;
}

std::vector<ConflictRecord> conflicts(const TypeGraph& graph) {
    std::vector<ConflictRecord> out;
    for (const Node& n : graph.nodes()) {
        if (n.inferences.size() < 2) continue;
        out.push_back({n.id, n.base, n.inferences});
    }
    std::sort(out.begin(), out.end(),
              [](const ConflictRecord& a, const ConflictRecord& b) { return a.base < b.base; });
    return out;
}

std::string render_findlocks(const TypeGraph&, const std::vector<LockRecord>& records) {
    std::string out;
    for (const LockRecord& r : records) {
        out += to_hex(r.lock_addr);
        if (!r.descriptor.empty()) out += " (" + r.descriptor + ")";
        out += " is owned by " + to_hex(r.owner) + "\n";
    }
    return out;
}

std::string render_findfalse(const TypeGraph& graph, const std::vector<FalseSharingRecord>& records) {
    const TypeCatalog& cat = graph.catalog();
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%16s %-28s %-22s %4s %8s\n", "ADDR", "SYMBOL", "TYPE", "SZ",
                  "TOTSIZE");
    std::string out = buf;
    for (const FalseSharingRecord& r : records) {
        std::snprintf(buf, sizeof(buf), "%16s %-28s %-22s %4llu %8llu\n", to_hex(r.addr).c_str(),
                      r.symbol.empty() ? "-" : r.symbol.c_str(),
                      cat.display_name(r.element).c_str(),
                      static_cast<unsigned long long>(r.element_size),
                      static_cast<unsigned long long>(r.total_size));
        out += buf;
    }
    return out;
}

std::string render_conflicts(const TypeGraph& graph, const std::vector<ConflictRecord>& records) {
    std::string out;
    for (const ConflictRecord& r : records)
        out += graph.render_report(graph.whattype(r.base));
    return out;
}

}  // namespace tg
