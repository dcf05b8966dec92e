#include "tg/typegraph.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

#include <json.hpp>

namespace tg {

using json = nlohmann::json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

CacheTypeTable CacheTypeTable::load_file(const std::string& path) {
    return load(read_text_file(path));
}

CacheTypeTable CacheTypeTable::load(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("cache table: parse error: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
        throw Error("cache table: expected object with an 'entries' list");
    CacheTypeTable table;
    for (const json& e : doc["entries"]) {
        if (!e.is_object() || !e.contains("cache") || !e.contains("type"))
            throw Error("cache table: entry needs 'cache' and 'type'");
        table.entries.emplace_back(e["cache"].get<std::string>(), e["type"].get<std::string>());
    }
    return table;
}

// --- build -------------------------------------------------------------------

TypeGraph::TypeGraph(const DumpImage& image, const TypeCatalog& catalog,
                     const CacheTypeTable& table)
    : image_(image), catalog_(catalog) {
    auto t0 = std::chrono::steady_clock::now();

    for (const auto& [cache_name, type_spelling] : table.entries) {
        auto cache = image.find_cache(cache_name);
        if (!cache) throw Error("cache table: unknown cache '" + cache_name + "'");
        auto tid = catalog.find(type_spelling);
        if (!tid) throw Error("cache table: unknown type '" + type_spelling + "'");
        for (const auto& existing : cache_types_)
            if (existing.first == *cache)
                throw Error("cache table: duplicate cache '" + cache_name + "'");
        cache_types_.emplace_back(*cache, catalog.resolve(*tid));
    }

    nodes_.reserve(image.heap_objects().size() + image.statics().size());
    for (uint32_t i = 0; i < image.heap_objects().size(); i++) {
        const HeapObject& obj = image.heap_objects()[i];
        Node n;
        n.id = static_cast<uint32_t>(nodes_.size());
        n.base = obj.base;
        n.size = obj.size;
        n.object_index = static_cast<int32_t>(i);
        for (const auto& [cache, tid] : cache_types_) {
            if (cache == obj.cache) {
                n.known = true;
                n.inferences.push_back(Inference{tid, kNoNode, 0, kNoType, {}});
                break;
            }
        }
        nodes_.push_back(std::move(n));
    }

    std::vector<uint32_t> static_order(image.statics().size());
    for (uint32_t i = 0; i < static_order.size(); i++) static_order[i] = i;
    std::sort(static_order.begin(), static_order.end(), [&](uint32_t a, uint32_t b) {
        uint64_t ab = image.statics()[a].base, bb = image.statics()[b].base;
        return ab != bb ? ab < bb : a < b;
    });
    for (uint32_t si : static_order) {
        const StaticObject& st = image.statics()[si];
        Node n;
        n.id = static_cast<uint32_t>(nodes_.size());
        n.base = st.base;
        n.size = st.size;
        n.is_static = true;
        n.static_index = static_cast<int32_t>(si);
        n.known = true;
        n.inferences.push_back(Inference{catalog.resolve(st.type), kNoNode, 0, kNoType, {}});
        nodes_.push_back(std::move(n));
    }

    // Pointer scan: every aligned word in every object that lands inside a
    // heap object becomes an edge. NULL never creates an edge; pointers into
    // statics do not either (statics are sources only).
    const uint64_t ptr = image.pointer_size();
    for (Node& n : nodes_) {
        uint64_t first = (n.base % ptr == 0) ? 0 : ptr - (n.base % ptr);
        for (uint64_t off = first; off + ptr <= n.size; off += ptr) {
            uint64_t word = image.read_word(n.base + off);
            if (word == 0) continue;
            auto hit = image.object_containing(word);
            if (!hit) continue;
            Edge e;
            e.src = n.id;
            e.src_offset = off;
            e.dst = hit->first;  // heap node ids coincide with object indexes
            e.dst_offset = hit->second;
            edges_.push_back(e);
        }
    }
    std::sort(edges_.begin(), edges_.end(), [&](const Edge& a, const Edge& b) {
        uint64_t ab = nodes_[a.src].base, bb = nodes_[b.src].base;
        return ab != bb ? ab < bb : a.src_offset < b.src_offset;
    });
    for (uint32_t i = 0; i < edges_.size(); i++) {
        edges_[i].id = i;
        nodes_[edges_[i].src].out_edges.push_back(i);
        nodes_[edges_[i].dst].in_edges.push_back(i);
    }

    build_elapsed_ = seconds_since(t0);
}

std::optional<uint32_t> TypeGraph::node_at(uint64_t addr) const {
    if (auto hit = image_.object_containing(addr)) return hit->first;
    uint32_t heap_count = static_cast<uint32_t>(image_.heap_objects().size());
    // Static nodes are base-sorted after the heap nodes.
    auto begin = nodes_.begin() + heap_count;
    auto it = std::upper_bound(begin, nodes_.end(), addr,
                               [](uint64_t a, const Node& n) { return a < n.base; });
    if (it == begin) return std::nullopt;
    --it;
    if (addr >= it->base + it->size) return std::nullopt;
    return it->id;
}

const Edge* TypeGraph::edge_at(const Node& node, uint64_t src_offset) const {
    auto it = std::lower_bound(node.out_edges.begin(), node.out_edges.end(), src_offset,
                               [this](uint32_t eid, uint64_t off) {
                                   return edges_[eid].src_offset < off;
                               });
    if (it == node.out_edges.end() || edges_[*it].src_offset != src_offset) return nullptr;
    return &edges_[*it];
}

// --- propagation -------------------------------------------------------------

bool TypeGraph::add_fragment(Node& dst, uint64_t offset, TypeId type, const MemberPath& via,
                             uint32_t referrer) {
    const TypeDef& td = catalog_.type(type);
    // Interior base types may extend to the object's end; anything else must
    // fit inside the node.
    if (td.kind != TypeKind::Base && offset + td.size > dst.size) return false;
    for (const FragmentNote& f : dst.fragments)
        if (f.offset == offset && f.type == type && f.referrer == referrer) return false;
    dst.fragments.push_back(FragmentNote{offset, type, via, referrer});
    mutations_++;
    return true;
}

void TypeGraph::add_inference(Node& dst, TypeId type, uint32_t referrer, uint64_t referrer_offset,
                              TypeId referrer_type, const MemberPath& via, PropagationContext& ctx,
                              bool enqueue) {
    if (dst.known || dst.pinned) return;  // never overwritten
    for (const Inference& inf : dst.inferences)
        if (inf.type == type) return;
    dst.inferences.push_back(Inference{type, referrer, referrer_offset, referrer_type, via});
    mutations_++;
    if (dst.inferences.size() >= 2) {
        // Conflict: frozen from any further processing.
        dst.marked = false;
        return;
    }
    if (enqueue && !dst.marked) {
        dst.marked = true;
        ctx.queue.push_back(dst.id);
    }
}

void TypeGraph::through_propagate(uint32_t node_id, TypeId authority, uint64_t base_offset,
                                  PropagationContext& ctx) {
    const TypeDef& auth = catalog_.type(authority);
    Node& n = nodes_[node_id];
    if (base_offset + auth.size > n.size) return;
    if (!ctx.visited.insert({node_id, authority, base_offset}).second) return;

    for (const PointerLoc& pm : catalog_.pointer_members(authority)) {
        const Edge* e = edge_at(n, base_offset + pm.offset);
        if (!e) continue;
        Node& d = nodes_[e->dst];
        TypeId rid = catalog_.resolve(pm.pointee);
        const TypeDef& rd = catalog_.type(rid);

        if (e->dst_offset != 0) {
            // (c) interior reference: note the interpretation and keep
            // propagating under it, without touching d's inference list.
            if (rd.kind != TypeKind::Base && e->dst_offset + rd.size > d.size) continue;
            add_fragment(d, e->dst_offset, rid, pm.path, node_id);
            through_propagate(e->dst, rid, e->dst_offset, ctx);
            continue;
        }
        if (rd.kind == TypeKind::Union || rd.size > d.size) {
            // (d) unions and oversized types are recorded as interior-style
            // notes only; nothing is enqueued.
            add_fragment(d, 0, rid, pm.path, node_id);
            continue;
        }
        if (d.size < 2 * rd.size) {
            // (a) the size window holds: a genuine base-offset inference.
            add_inference(d, rid, node_id, e->src_offset, authority, pm.path, ctx, true);
        } else {
            // (b) object is at least twice the type: array-pass candidate.
            add_inference(d, rid, node_id, e->src_offset, authority, pm.path, ctx, false);
        }
    }
}

void TypeGraph::drain(PropagationContext& ctx) {
    while (!ctx.queue.empty()) {
        uint32_t id = ctx.queue.front();
        ctx.queue.pop_front();
        Node& n = nodes_[id];
        if (n.inferences.size() != 1) continue;  // conflicted while queued
        through_propagate(id, n.inferences[0].type, 0, ctx);
    }
}

PassStats TypeGraph::pass_conservative() {
    auto t0 = std::chrono::steady_clock::now();
    PropagationContext ctx;
    // Seeds, ascending base address: known and pinned nodes always; on
    // re-sweeps also every non-conflicted single-inference node that either
    // already propagated or fits the conservative size window (coalescence
    // can produce these mid-pipeline).
    std::vector<uint32_t> seeds;
    for (uint32_t id : base_order()) {
        const Node& n = nodes_[id];
        if (n.inferences.size() != 1) continue;
        bool eligible = n.known || n.pinned || n.marked;
        if (!eligible) {
            const TypeDef& td = catalog_.type(n.inferences[0].type);
            eligible = td.size <= n.size && n.size < 2 * td.size;
        }
        if (eligible) seeds.push_back(id);
    }
    for (uint32_t id : seeds) {
        nodes_[id].marked = true;
        ctx.queue.push_back(id);
    }
    drain(ctx);
    return snapshot("", seconds_since(t0));
}

bool TypeGraph::check_array(uint64_t object_size, uint64_t type_size,
                            std::optional<uint64_t> next_smaller) {
    uint64_t v = object_size - (object_size % type_size);
    if (next_smaller && v <= *next_smaller) return false;
    return true;
}

bool TypeGraph::verify_array(const Node& node, TypeId element_type, uint64_t start_offset,
                             uint64_t count) const {
    const uint64_t esize = catalog_.size_of(element_type);
    const auto& pointers = catalog_.pointer_members(element_type);
    if (pointers.empty()) return true;
    for (uint64_t i = 0; i < count; i++) {
        for (const PointerLoc& pm : pointers) {
            uint64_t addr = node.base + start_offset + i * esize + pm.offset;
            uint64_t word;
            try {
                word = image_.read_word(addr);
            } catch (const Error&) {
                return false;
            }
            if (word == 0) continue;  // NULL is acceptable
            if (!image_.is_mapped(word, 1)) return false;
        }
    }
    return true;
}

PassStats TypeGraph::pass_array() {
    auto t0 = std::chrono::steady_clock::now();
    PropagationContext ctx;
    // Repeats until a full sweep yields no new verdicts or inferences:
    // element propagation can surface fresh candidates.
    uint64_t last_mutations = mutations_ - 1;
    while (mutations_ != last_mutations) {
        last_mutations = mutations_;
        for (uint32_t id : base_order()) {
            Node& n = nodes_[id];
            if (n.known || n.pinned || n.marked) continue;
            if (n.verdict != ArrayVerdict::Undetermined) continue;
            if (n.inferences.size() != 1) continue;
            TypeId tid = n.inferences[0].type;
            const TypeDef& td = catalog_.type(tid);
            if (td.size == 0 || n.size < 2 * td.size) continue;

            std::optional<FamShape> fam;
            if (td.kind == TypeKind::Struct) fam = catalog_.detect_fam(tid);
            if (fam) {
                uint64_t msize = catalog_.size_of(fam->element_type);
                uint64_t trailing = (n.size - td.size) / msize;
                n.verdict = ArrayVerdict::Fam;
                n.fam_element = fam->element_type;
                n.element_count = fam->inline_count + trailing;
                n.marked = true;
                mutations_++;
                through_propagate(id, tid, 0, ctx);
                for (uint64_t j = 0; j < trailing; j++)
                    through_propagate(id, fam->element_type, td.size + j * msize, ctx);
                drain(ctx);
                continue;
            }

            bool gp = n.object_index >= 0 &&
                      image_.caches()[image_.heap_objects()[n.object_index].cache].general_purpose;
            uint64_t count = n.size / td.size;
            if (gp && check_array(n.size, td.size, image_.next_smaller_gp_cache(n.size)) &&
                verify_array(n, tid, 0, count)) {
                n.verdict = ArrayVerdict::Array;
                n.element_count = count;
                n.marked = true;
                mutations_++;
                for (uint64_t k = 0; k < count; k++)
                    through_propagate(id, tid, k * td.size, ctx);
                drain(ctx);
            } else {
                n.verdict = ArrayVerdict::NotArray;  // left for the non-array pass
            }
        }
    }
    return snapshot("", seconds_since(t0));
}

PassStats TypeGraph::pass_coalesce() {
    auto t0 = std::chrono::steady_clock::now();
    for (Node& n : nodes_) {
        if (n.inferences.size() < 2) continue;
        bool has_struct = false, has_other = false;
        for (const Inference& inf : n.inferences) {
            if (catalog_.type(inf.type).kind == TypeKind::Struct) has_struct = true;
            else has_other = true;
        }
        if (!has_struct || !has_other) continue;
        std::erase_if(n.inferences, [this](const Inference& inf) {
            return catalog_.type(inf.type).kind != TypeKind::Struct;
        });
        mutations_++;
    }
    return snapshot("", seconds_since(t0));
}

PassStats TypeGraph::pass_nonarray() {
    auto t0 = std::chrono::steady_clock::now();
    PropagationContext ctx;
    for (uint32_t id : base_order()) {
        Node& n = nodes_[id];
        if (n.marked || n.known || n.pinned) continue;
        if (n.inferences.size() != 1) continue;
        if (n.verdict != ArrayVerdict::NotArray) continue;
        const TypeDef& td = catalog_.type(n.inferences[0].type);
        if (2 * td.size >= n.size) continue;  // type must be under half the object
        n.marked = true;
        mutations_++;
        through_propagate(id, n.inferences[0].type, 0, ctx);
        drain(ctx);
    }
    return snapshot("", seconds_since(t0));
}

const std::vector<PassStats>& TypeGraph::run() {
    stats_.clear();
    elapsed_total_ = build_elapsed_;

    PassStats initial = snapshot("initial", build_elapsed_);
    initial.elapsed_total = elapsed_total_;
    stats_.push_back(std::move(initial));

    auto record = [this](PassStats s) {
        s.label = std::to_string(stats_.size());
        elapsed_total_ += s.elapsed;
        s.elapsed_total = elapsed_total_;
        stats_.push_back(std::move(s));
    };
    record(pass_conservative());
    record(pass_array());
    record(pass_coalesce());
    record(pass_nonarray());
    // A final sweep absorbs nodes the later passes made eligible.
    record(pass_array());
    record(pass_conservative());
    ran_ = true;
    return stats_;
}

void TypeGraph::reset_derived_state() {
    for (Node& n : nodes_) {
        n.marked = false;
        n.verdict = ArrayVerdict::Undetermined;
        n.element_count = 0;
        n.fam_element = kNoType;
        n.fragments.clear();
        if (n.known || n.pinned) {
            // The anchoring inference survives; there is never more than one.
            if (n.inferences.size() > 1) n.inferences.resize(1);
        } else {
            n.inferences.clear();
        }
    }
}

const std::vector<PassStats>& TypeGraph::istype(uint64_t addr, TypeId type) {
    auto id = node_at(addr);
    if (!id) throw Error("istype: no memory object contains " + to_hex(addr));
    catalog_.type(type);  // validates
    TypeId resolved = catalog_.resolve(type);
    Node& n = nodes_[*id];
    if (n.known && n.inferences[0].type != resolved)
        throw Error("istype: " + to_hex(n.base) + " is already known to be " +
                    catalog_.display_name(n.inferences[0].type));
    n.pinned = true;
    n.inferences.clear();
    n.inferences.push_back(Inference{resolved, kNoNode, 0, kNoType, {}});
    reset_derived_state();
    return run();
}

// --- queries -----------------------------------------------------------------

TypeReport TypeGraph::whattype(uint64_t addr) const {
    TypeReport r;
    r.query = addr;
    auto id = node_at(addr);
    if (!id) return r;
    const Node& n = nodes_[*id];
    r.found = true;
    r.node = *id;
    r.base = n.base;
    r.offset = addr - n.base;

    if (n.conflicted()) {
        r.certainty = Certainty::Conflict;
        r.conflicts = n.inferences;
        return r;
    }
    if (n.inferences.size() == 1) {
        r.certainty = (n.known || n.pinned) ? Certainty::Known : Certainty::Conjectured;
        r.type = n.inferences[0].type;
        r.via = n.inferences[0].via;
        return r;
    }
    // Fragment-only node: report the interpretation covering the queried
    // offset, if any.
    for (const FragmentNote& f : n.fragments) {
        const TypeDef& td = catalog_.type(f.type);
        uint64_t end = td.kind == TypeKind::Base ? n.size : f.offset + td.size;
        if (r.offset >= f.offset && r.offset < end) {
            r.certainty = Certainty::Fragment;
            r.type = f.type;
            r.via = f.via;
            return r;
        }
    }
    r.certainty = Certainty::Unknown;
    return r;
}

std::string TypeGraph::render_report(const TypeReport& r) const {
    std::string out = to_hex(r.query);
    if (!r.found) return out + " is not contained in any memory object\n";
    out += " is " + to_hex(r.base) + "+" + to_hex(r.offset) + ", ";
    switch (r.certainty) {
        case Certainty::Known:
            out += catalog_.display_name(r.type);
            break;
        case Certainty::Conjectured:
        case Certainty::Fragment: {
            out += "possibly " + catalog_.display_name(r.type);
            bool base_kind = catalog_.type(r.type).kind == TypeKind::Base;
            if ((base_kind || r.certainty == Certainty::Fragment) && !r.via.empty())
                out += " (" + r.via.display() + ")";
            break;
        }
        case Certainty::Conflict: {
            out += "possibly one of the following:";
            for (const Inference& inf : r.conflicts) {
                out += "\n  " + catalog_.display_name(inf.type);
                if (inf.referrer != kNoNode) {
                    const Node& ref = nodes_[inf.referrer];
                    out += " (from " + to_hex(ref.base) + "+" + to_hex(inf.referrer_offset) +
                           ", type " + catalog_.display_name(inf.referrer_type) + ")";
                }
            }
            break;
        }
        case Certainty::Unknown:
            out += "unknown type";
            break;
    }
    out += "\n";
    return out;
}

uint64_t TypeGraph::reach_of(uint32_t node) const {
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<uint32_t> stack{node};
    seen[node] = 1;
    uint64_t count = 0;
    while (!stack.empty()) {
        uint32_t cur = stack.back();
        stack.pop_back();
        if (cur != node && nodes_[cur].untyped()) count++;
        for (uint32_t eid : nodes_[cur].out_edges) {
            uint32_t dst = edges_[eid].dst;
            if (!seen[dst]) {
                seen[dst] = 1;
                stack.push_back(dst);
            }
        }
    }
    return count;
}

std::pair<uint32_t, uint64_t> TypeGraph::greatest_reach() const {
    uint32_t best = kNoNode;
    uint64_t best_reach = 0;
    for (uint32_t id : base_order()) {
        uint64_t r = reach_of(id);
        if (best == kNoNode || r > best_reach) {
            best = id;
            best_reach = r;
        }
    }
    return {best, best_reach};
}

// --- stats -------------------------------------------------------------------

std::vector<uint32_t> TypeGraph::base_order() const {
    std::vector<uint32_t> order(nodes_.size());
    for (uint32_t i = 0; i < order.size(); i++) order[i] = i;
    std::sort(order.begin(), order.end(), [this](uint32_t a, uint32_t b) {
        return nodes_[a].base != nodes_[b].base ? nodes_[a].base < nodes_[b].base : a < b;
    });
    return order;
}

PassStats TypeGraph::snapshot(const std::string& label, double elapsed) const {
    PassStats s;
    s.label = label;
    s.actual_nodes = image_.heap_objects().size();
    s.anchored_nodes = image_.statics().size();
    s.nodes = nodes_.size();
    s.elapsed = elapsed;

    // Slot capacity: each heap segment is carved for one cache, so its
    // capacity is its byte count over that cache's object size.
    for (const Segment& seg : image_.segments()) {
        auto hit = image_.object_containing(seg.base);
        if (!hit) {
            // Scan for the first object inside this segment.
            for (const HeapObject& o : image_.heap_objects()) {
                if (o.base >= seg.base && o.base < seg.base + seg.bytes.size()) {
                    hit = std::make_pair(uint32_t(&o - image_.heap_objects().data()), uint64_t(0));
                    break;
                }
            }
        }
        if (!hit) continue;
        uint64_t slot = image_.caches()[image_.heap_objects()[hit->first].cache].object_size;
        s.max_nodes += seg.bytes.size() / slot;
    }

    for (const Node& n : nodes_) {
        if (!n.marked) s.unmarked++;
        if (n.known) s.known++;
        else if (n.inferences.size() == 1) s.conjectured++;
        if (n.inferences.empty() && !n.fragments.empty()) s.conjectured_fragments++;
        if (n.inferences.size() >= 2) s.conflicts++;
        if (!n.marked && !n.known && !n.pinned && n.inferences.size() == 1) {
            const TypeDef& td = catalog_.type(n.inferences[0].type);
            if (td.size > 0 && n.size >= 2 * td.size) s.candidates++;
        }
    }
    s.known_or_conjectured = s.known + s.conjectured + s.conjectured_fragments;
    return s;
}

namespace {

void stat_line(std::string& out, const char* label, const std::string& value) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "typegraph: %30s => %s\n", label, value.c_str());
    out += buf;
}

std::string with_pct(uint64_t value, uint64_t total) {
    char buf[64];
    double pct = total ? 100.0 * double(value) / double(total) : 0.0;
    std::snprintf(buf, sizeof(buf), "%-14llu(%4.1f%%)", static_cast<unsigned long long>(value),
                  pct);
    return buf;
}

std::string seconds(double v) {
    return std::to_string(static_cast<long long>(v)) + " seconds";
}

}  // namespace

std::string render_stats(const PassStats& s) {
    std::string out;
    stat_line(out, "pass", s.label);
    if (s.label == "initial") {
        stat_line(out, "maximum nodes", std::to_string(s.max_nodes));
        stat_line(out, "actual nodes", std::to_string(s.actual_nodes));
        stat_line(out, "anchored nodes", std::to_string(s.anchored_nodes));
        stat_line(out, "known", with_pct(s.known, s.nodes));
    } else {
        stat_line(out, "nodes", std::to_string(s.nodes));
        stat_line(out, "unmarked", with_pct(s.unmarked, s.nodes));
        stat_line(out, "known", with_pct(s.known, s.nodes));
        stat_line(out, "conjectured", with_pct(s.conjectured, s.nodes));
        stat_line(out, "conjectured fragments", with_pct(s.conjectured_fragments, s.nodes));
        stat_line(out, "known or conjectured", with_pct(s.known_or_conjectured, s.nodes));
        stat_line(out, "conflicts", std::to_string(s.conflicts));
        stat_line(out, "candidates", std::to_string(s.candidates));
    }
    stat_line(out, "time elapsed, this pass", seconds(s.elapsed));
    stat_line(out, "time elapsed, total", seconds(s.elapsed_total));
    out += "typegraph:\n";
    return out;
}

std::string render_stats(const std::vector<PassStats>& stats) {
    std::string out;
    for (const PassStats& s : stats) out += render_stats(s);
    return out;
}

}  // namespace tg
