#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tg/dumpio.hpp"
#include "tg/typecat.hpp"

namespace tg {

constexpr uint32_t kNoNode = 0xffffffffu;

// One base-offset type inference, with enough provenance to render the
// conflict lines of ::whattype ("from <addr>+<off>, type <referrer type>").
struct Inference {
    TypeId type = kNoType;  // resolved
    uint32_t referrer = kNoNode;
    uint64_t referrer_offset = 0;  // source offset within the referrer
    TypeId referrer_type = kNoType;  // authority the referrer was propagated under
    MemberPath via;  // referring pointer member; meaningful for base types
};

// An interior interpretation (nonzero destination offset). Never enters the
// node's base-offset inference list.
struct FragmentNote {
    uint64_t offset = 0;
    TypeId type = kNoType;  // resolved
    MemberPath via;
    uint32_t referrer = kNoNode;
};

enum class ArrayVerdict : uint8_t { Undetermined, Array, Fam, NotArray };

struct Node {
    uint32_t id = 0;
    uint64_t base = 0;
    uint64_t size = 0;
    bool is_static = false;
    int32_t static_index = -1;  // into image.statics()
    int32_t object_index = -1;  // into image.heap_objects()
    bool known = false;   // typed by the cache table or a static symbol
    bool pinned = false;  // typed manually via istype
    bool marked = false;  // propagated through (or queued for propagation)
    ArrayVerdict verdict = ArrayVerdict::Undetermined;
    uint64_t element_count = 0;    // array/fam verdicts
    TypeId fam_element = kNoType;  // fam verdict
    std::vector<Inference> inferences;  // distinct types, insertion order
    std::vector<FragmentNote> fragments;
    std::vector<uint32_t> out_edges;  // edge ids, ascending src_offset
    std::vector<uint32_t> in_edges;

    bool conflicted() const { return inferences.size() >= 2; }
    TypeId single_type() const {
        return inferences.size() == 1 ? inferences[0].type : kNoType;
    }
    bool untyped() const { return inferences.empty() && fragments.empty(); }
};

struct Edge {
    uint32_t id = 0;
    uint32_t src = 0;
    uint64_t src_offset = 0;
    uint32_t dst = 0;
    uint64_t dst_offset = 0;
};

struct PassStats {
    std::string label;  // "initial", "1", "2", ...
    // Initial-row fields.
    uint64_t max_nodes = 0;       // total slot capacity across caches
    uint64_t actual_nodes = 0;    // heap objects
    uint64_t anchored_nodes = 0;  // statics
    // Counter block (heap + static nodes).
    uint64_t nodes = 0;
    uint64_t unmarked = 0;
    uint64_t known = 0;
    uint64_t conjectured = 0;
    uint64_t conjectured_fragments = 0;
    uint64_t known_or_conjectured = 0;
    uint64_t conflicts = 0;
    uint64_t candidates = 0;
    double elapsed = 0.0;
    double elapsed_total = 0.0;
};

struct CacheTypeTable {
    std::vector<std::pair<std::string, std::string>> entries;  // cache name, type spelling

    static CacheTypeTable load(const std::string& text);
    static CacheTypeTable load_file(const std::string& path);
};

enum class Certainty : uint8_t { Known, Conjectured, Fragment, Conflict, Unknown };

struct TypeReport {
    bool found = false;
    uint64_t query = 0;
    uint64_t base = 0;
    uint64_t offset = 0;
    uint32_t node = kNoNode;
    Certainty certainty = Certainty::Unknown;
    TypeId type = kNoType;              // known/conjectured/fragment
    MemberPath via;                     // base-type and fragment reports
    std::vector<Inference> conflicts;   // conflict reports
};

class TypeGraph {
public:
    // Builds the object/pointer graph: one node per heap object and per
    // static, one edge per discovered pointer word. Nodes from caches named
    // in the table start known with the table's type.
    TypeGraph(const DumpImage& image, const TypeCatalog& catalog, const CacheTypeTable& table);

    const std::vector<Node>& nodes() const { return nodes_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const TypeCatalog& catalog() const { return catalog_; }
    const DumpImage& image() const { return image_; }
    const std::vector<PassStats>& stats() const { return stats_; }
    bool ran() const { return ran_; }

    std::optional<uint32_t> node_at(uint64_t addr) const;

    // Full pipeline: initial snapshot, conservative propagation, array
    // determination (iterated to fixpoint), coalescence, non-array
    // inference, then a final array + conservative sweep.
    const std::vector<PassStats>& run();

    PassStats pass_conservative();
    PassStats pass_array();
    PassStats pass_coalesce();
    PassStats pass_nonarray();

    // Slab-model rule: v = object_size - (object_size mod type_size); the object
    // is not an array iff v would have fit in the next-smaller cache.
    static bool check_array(uint64_t object_size, uint64_t type_size,
                            std::optional<uint64_t> next_smaller);

    // Every pointer member of every hypothesized element must hold NULL or
    // a mapped address.
    bool verify_array(const Node& node, TypeId element_type, uint64_t start_offset,
                      uint64_t count) const;

    TypeReport whattype(uint64_t addr) const;
    std::string render_report(const TypeReport& report) const;

    // Pins the node to the given type and reprocesses the whole graph.
    // Known and pinned assignments survive; every other inference, fragment,
    // mark and verdict is recomputed.
    const std::vector<PassStats>& istype(uint64_t addr, TypeId type);

    // reach(n) = number of untyped nodes (no inference, no fragment)
    // reachable from n via out-edges, n itself excluded. Ties broken by
    // lowest base address.
    std::pair<uint32_t, uint64_t> greatest_reach() const;
    uint64_t reach_of(uint32_t node) const;

private:
    struct PropagationContext {
        std::deque<uint32_t> queue;
        std::set<std::tuple<uint32_t, TypeId, uint64_t>> visited;  // recursion guard, per pass
    };

    const Edge* edge_at(const Node& node, uint64_t src_offset) const;
    bool add_fragment(Node& dst, uint64_t offset, TypeId type, const MemberPath& via,
                      uint32_t referrer);
    void add_inference(Node& dst, TypeId type, uint32_t referrer, uint64_t referrer_offset,
                       TypeId referrer_type, const MemberPath& via, PropagationContext& ctx,
                       bool enqueue);
    void through_propagate(uint32_t node_id, TypeId authority, uint64_t base_offset,
                           PropagationContext& ctx);
    void drain(PropagationContext& ctx);
    std::vector<uint32_t> base_order() const;
    PassStats snapshot(const std::string& label, double elapsed) const;
    void reset_derived_state();

    const DumpImage& image_;
    const TypeCatalog& catalog_;
    std::vector<Node> nodes_;
    std::vector<Edge> edges_;
    std::vector<std::pair<uint32_t, TypeId>> cache_types_;  // cache index -> type
    std::vector<PassStats> stats_;
    uint64_t mutations_ = 0;  // bumped on every inference/fragment/verdict change
    double build_elapsed_ = 0.0;
    double elapsed_total_ = 0.0;
    bool ran_ = false;
};

// Debugger-style stats block: "typegraph: <field> => <value>" lines, percentage
// annotations over the node total, pass labels "initial", "1", "2", ...
std::string render_stats(const PassStats& stats);
std::string render_stats(const std::vector<PassStats>& stats);

}  // namespace tg
