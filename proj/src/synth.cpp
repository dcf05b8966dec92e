#include "tg/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include <json.hpp>

namespace tg {

using json = nlohmann::json;

// --- script building ---------------------------------------------------------

std::string SynthSpec::alloc(const std::string& type, uint64_t count) {
    Directive d;
    d.op = Directive::Op::Alloc;
    d.name = "o" + std::to_string(next_name_++);
    d.type = type;
    d.count = count;
    script.push_back(d);
    return script.back().name;
}

std::string SynthSpec::alloc_fam(const std::string& type, uint64_t trailing) {
    Directive d;
    d.op = Directive::Op::Alloc;
    d.name = "o" + std::to_string(next_name_++);
    d.type = type;
    d.fam_trailing = static_cast<int64_t>(trailing);
    script.push_back(d);
    return script.back().name;
}

std::string SynthSpec::add_static(const std::string& symbol, const std::string& type) {
    Directive d;
    d.op = Directive::Op::Static;
    d.name = symbol;  // statics are addressed by their symbol
    d.symbol = symbol;
    d.type = type;
    script.push_back(d);
    return script.back().name;
}

void SynthSpec::link(const std::string& src, const std::string& path, const std::string& dst,
                     const std::string& dst_path) {
    Directive d;
    d.op = Directive::Op::Link;
    d.src = src;
    d.path = path;
    d.dst = dst;
    d.dst_path = dst_path;
    script.push_back(d);
}

void SynthSpec::hold_lock(const std::string& object, const std::string& path, uint64_t owner) {
    Directive d;
    d.op = Directive::Op::HoldLock;
    d.object = object;
    d.path = path;
    d.owner = owner;
    script.push_back(d);
}

void SynthSpec::inject_cast(const std::string& src, const std::string& path,
                            const std::string& dst) {
    Directive d;
    d.op = Directive::Op::InjectCast;
    d.src = src;
    d.path = path;
    d.dst = dst;
    script.push_back(d);
}

void SynthSpec::inject_stale(const std::string& object, const std::string& referrer,
                             const std::string& path) {
    Directive d;
    d.op = Directive::Op::InjectStale;
    d.object = object;
    d.referrer = referrer;
    d.path = path;
    script.push_back(d);
}

void SynthSpec::leave_unrooted(const std::string& object) {
    Directive d;
    d.op = Directive::Op::LeaveUnrooted;
    d.object = object;
    script.push_back(d);
}

// --- spec document -------------------------------------------------------------

SynthSpec SynthSpec::load_file(const std::string& path) { return load(read_text_file(path)); }

SynthSpec SynthSpec::load(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("synth spec: parse error: ") + e.what());
    }
    SynthSpec spec;
    spec.seed = doc.value("seed", uint64_t(0));
    spec.pointer_size = doc.value("pointer_size", uint32_t(8));
    spec.adversarial = doc.value("adversarial", false);
    std::string endian = doc.value("endianness", "little");
    if (endian == "big") spec.endianness = Endian::Big;
    else if (endian != "little") throw Error("synth spec: bad endianness");
    for (const json& s : doc.value("gp_caches", json::array()))
        spec.gp_sizes.push_back(s.get<uint64_t>());
    for (const json& t : doc.value("typed_caches", json::array())) {
        TypedCache tc;
        tc.name = t.at("name").get<std::string>();
        tc.type = t.at("type").get<std::string>();
        tc.object_size = t.value("object_size", uint64_t(0));
        spec.typed_caches.push_back(std::move(tc));
    }
    for (const json& j : doc.value("script", json::array())) {
        std::string op = j.at("op").get<std::string>();
        Directive d;
        if (op == "alloc") {
            d.op = Directive::Op::Alloc;
            d.name = j.at("name").get<std::string>();
            d.type = j.at("type").get<std::string>();
            d.count = j.value("count", uint64_t(1));
            d.fam_trailing = j.value("fam_trailing", int64_t(-1));
        } else if (op == "static") {
            d.op = Directive::Op::Static;
            d.name = j.at("name").get<std::string>();
            d.symbol = j.value("symbol", d.name);
            d.type = j.at("type").get<std::string>();
        } else if (op == "link") {
            d.op = Directive::Op::Link;
            d.src = j.at("src").get<std::string>();
            d.path = j.value("path", "");
            d.dst = j.at("dst").get<std::string>();
            d.dst_path = j.value("dst_path", "");
        } else if (op == "hold_lock") {
            d.op = Directive::Op::HoldLock;
            d.object = j.at("object").get<std::string>();
            d.path = j.value("path", "");
            auto owner = parse_hex(j.at("owner").get<std::string>());
            if (!owner) throw Error("synth spec: bad owner address");
            d.owner = *owner;
        } else if (op == "inject_cast") {
            d.op = Directive::Op::InjectCast;
            d.src = j.at("src").get<std::string>();
            d.path = j.value("path", "");
            d.dst = j.at("dst").get<std::string>();
        } else if (op == "inject_stale") {
            d.op = Directive::Op::InjectStale;
            d.object = j.at("object").get<std::string>();
            d.referrer = j.at("referrer").get<std::string>();
            d.path = j.value("path", "");
        } else if (op == "leave_unrooted") {
            d.op = Directive::Op::LeaveUnrooted;
            d.object = j.at("object").get<std::string>();
        } else {
            throw Error("synth spec: unknown op '" + op + "'");
        }
        spec.script.push_back(std::move(d));
    }
    return spec;
}

// --- truth document ------------------------------------------------------------

std::string GroundTruth::to_json() const {
    json doc;
    doc["objects"] = json::array();
    for (const TruthObject& o : objects) {
        json j;
        j["base"] = "0x" + to_hex(o.base);
        j["type"] = o.type;
        j["element_count"] = o.element_count;
        j["rooted"] = o.rooted;
        doc["objects"].push_back(std::move(j));
    }
    doc["held_locks"] = json::array();
    for (const auto& [addr, owner] : held_locks) {
        json j;
        j["lock"] = "0x" + to_hex(addr);
        j["owner"] = "0x" + to_hex(owner);
        doc["held_locks"].push_back(std::move(j));
    }
    doc["injected_conflicts"] = json::array();
    for (const Injected& c : injected) {
        json j;
        j["base"] = "0x" + to_hex(c.base);
        j["stale_type"] = c.stale_type;
        j["true_type"] = c.true_type;
        doc["injected_conflicts"].push_back(std::move(j));
    }
    return doc.dump(2) + "\n";
}

GroundTruth GroundTruth::load_file(const std::string& path) { return load(read_text_file(path)); }

GroundTruth GroundTruth::load(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("truth: parse error: ") + e.what());
    }
    GroundTruth truth;
    for (const json& j : doc.value("objects", json::array())) {
        TruthObject o;
        o.base = *parse_hex(j.at("base").get<std::string>());
        o.type = j.at("type").get<std::string>();
        o.element_count = j.value("element_count", uint64_t(1));
        o.rooted = j.value("rooted", true);
        truth.objects.push_back(std::move(o));
    }
    for (const json& j : doc.value("held_locks", json::array()))
        truth.held_locks.emplace_back(*parse_hex(j.at("lock").get<std::string>()),
                                      *parse_hex(j.at("owner").get<std::string>()));
    for (const json& j : doc.value("injected_conflicts", json::array())) {
        GroundTruth::Injected c;
        c.base = *parse_hex(j.at("base").get<std::string>());
        c.stale_type = j.at("stale_type").get<std::string>();
        c.true_type = j.at("true_type").get<std::string>();
        truth.injected.push_back(std::move(c));
    }
    return truth;
}

// --- generation ------------------------------------------------------------------

namespace {

struct ResolvedPath {
    uint64_t offset = 0;
    TypeId type = kNoType;
};

// "serial_lock", "slots[3].lk", "[2].next" (leading index = element grid of
// an array allocation). Trailing-FAM elements are reached by indexing past
// a size<=1 array member.
ResolvedPath resolve_path(const TypeCatalog& cat, TypeId root, uint64_t grid_count,
                          const std::string& path) {
    ResolvedPath cur{0, root};
    size_t i = 0;
    bool first = true;
    while (i < path.size()) {
        if (path[i] == '.') {
            i++;
            continue;
        }
        if (path[i] == '[') {
            size_t close = path.find(']', i);
            if (close == std::string::npos) throw Error("path '" + path + "': missing ]");
            uint64_t k = std::stoull(path.substr(i + 1, close - i - 1));
            i = close + 1;
            const TypeDef& td = cat.type(cat.resolve(cur.type));
            if (first && td.kind != TypeKind::Array) {
                // Element grid of an array allocation.
                if (k >= grid_count)
                    throw Error("path '" + path + "': index beyond allocation");
                cur.offset += k * cat.size_of(cur.type);
            } else {
                if (td.kind != TypeKind::Array)
                    throw Error("path '" + path + "': [] applied to non-array");
                if (td.element_count > 1 && k >= td.element_count)
                    throw Error("path '" + path + "': index beyond array");
                cur.offset += k * cat.size_of(td.element_type);
                cur.type = td.element_type;
            }
            first = false;
            continue;
        }
        size_t end = i;
        while (end < path.size() && path[end] != '.' && path[end] != '[') end++;
        std::string member = path.substr(i, end - i);
        i = end;
        const TypeDef& td = cat.type(cat.resolve(cur.type));
        if (td.kind != TypeKind::Struct && td.kind != TypeKind::Union)
            throw Error("path '" + path + "': " + td.name + " has no members");
        bool hit = false;
        for (const Member& m : td.members) {
            if (m.name == member) {
                cur.offset += m.offset;
                cur.type = m.type;
                hit = true;
                break;
            }
        }
        if (!hit) throw Error("path '" + path + "': no member '" + member + "' in " + td.name);
        first = false;
    }
    return cur;
}

struct Planned {
    std::string name;
    TypeId type = kNoType;
    uint64_t request = 0;
    uint64_t slot = 0;
    uint64_t count = 1;
    int64_t fam_trailing = -1;
    uint32_t cache = 0;
    uint64_t base = 0;
    bool rooted = true;
};

struct PlannedStatic {
    std::string name;
    std::string symbol;
    TypeId type = kNoType;
    uint64_t base = 0;
};

struct Builder {
    const SynthSpec& spec;
    const TypeCatalog& cat;
    Rng rng;
    uint64_t ptr;

    std::vector<Cache> caches;
    std::vector<Planned> objects;
    std::vector<PlannedStatic> statics;
    std::map<std::string, size_t> object_by_name;  // heap objects
    std::map<std::string, size_t> static_by_name;
    std::vector<Segment> segments;
    GroundTruth truth;

    TypeId resolve_spelling(const std::string& spelling) {
        auto tid = cat.find(spelling);
        if (!tid) throw Error("synth: unknown type '" + spelling + "'");
        return *tid;
    }

    uint32_t pick_cache(const Planned& p, bool plain_single) {
        if (plain_single) {
            TypeId rt = cat.resolve(p.type);
            for (uint32_t i = 0; i < spec.typed_caches.size(); i++) {
                if (cat.resolve(resolve_spelling(spec.typed_caches[i].type)) == rt)
                    return i;
            }
        }
        // Smallest general-purpose cache that satisfies the request.
        uint32_t best = 0;
        bool found = false;
        for (uint32_t i = 0; i < caches.size(); i++) {
            if (!caches[i].general_purpose || caches[i].object_size < p.request) continue;
            if (!found || caches[i].object_size < caches[best].object_size) {
                best = i;
                found = true;
            }
        }
        if (!found)
            throw Error("synth: no general-purpose cache holds " + std::to_string(p.request) +
                        " bytes (object " + p.name + ")");
        return best;
    }

    void plan() {
        for (const SynthSpec::TypedCache& tc : spec.typed_caches) {
            Cache c;
            c.id = tc.name;
            c.name = tc.name;
            uint64_t tsize = cat.size_of(cat.resolve(resolve_spelling(tc.type)));
            c.object_size = tc.object_size ? tc.object_size : tsize;
            if (c.object_size < tsize)
                throw Error("synth: typed cache " + tc.name + " is smaller than its type");
            c.general_purpose = false;
            caches.push_back(std::move(c));
        }
        std::vector<uint64_t> ladder = spec.gp_sizes;
        std::sort(ladder.begin(), ladder.end());
        for (uint64_t size : ladder) {
            Cache c;
            c.id = "kmem_alloc_" + std::to_string(size);
            c.name = c.id;
            c.object_size = size;
            c.general_purpose = true;
            caches.push_back(std::move(c));
        }

        for (const Directive& d : spec.script) {
            if (d.op == Directive::Op::Alloc) {
                if (object_by_name.count(d.name))
                    throw Error("synth: duplicate object '" + d.name + "'");
                Planned p;
                p.name = d.name;
                p.type = resolve_spelling(d.type);
                uint64_t tsize = cat.size_of(p.type);
                bool plain_single = false;
                if (d.fam_trailing >= 0) {
                    auto fam = cat.detect_fam(p.type);
                    if (!fam) throw Error("synth: " + d.type + " has no flexible array member");
                    uint64_t msize = cat.size_of(fam->element_type);
                    p.request = tsize + uint64_t(d.fam_trailing) * msize;
                    p.count = fam->inline_count + uint64_t(d.fam_trailing);
                    p.fam_trailing = d.fam_trailing;
                } else if (d.count > 1) {
                    p.request = d.count * tsize;
                    p.count = d.count;
                } else {
                    p.request = tsize;
                    p.count = 1;
                    plain_single = true;
                }
                p.cache = pick_cache(p, plain_single);
                p.slot = caches[p.cache].object_size;
                object_by_name[d.name] = objects.size();
                objects.push_back(std::move(p));
            } else if (d.op == Directive::Op::Static) {
                if (static_by_name.count(d.name))
                    throw Error("synth: duplicate static '" + d.name + "'");
                PlannedStatic st;
                st.name = d.name;
                st.symbol = d.symbol;
                st.type = resolve_spelling(d.type);
                static_by_name[d.name] = statics.size();
                statics.push_back(std::move(st));
            } else if (d.op == Directive::Op::LeaveUnrooted) {
                auto it = object_by_name.find(d.object);
                if (it == object_by_name.end())
                    throw Error("synth: leave_unrooted on undefined object '" + d.object + "'");
                objects[it->second].rooted = false;
            }
        }
    }

    void layout() {
        uint64_t cursor = spec.pointer_size == 8 ? 0x100000000ull : 0x10000000ull;
        cursor += rng.below(0x100) * 0x10000;

        // One segment per cache holding objects, whole slabs of slots.
        for (uint32_t ci = 0; ci < caches.size(); ci++) {
            uint64_t used = 0;
            for (const Planned& p : objects)
                if (p.cache == ci) used++;
            if (used == 0) continue;
            uint64_t slot = caches[ci].object_size;
            uint64_t per_slab = std::max<uint64_t>(1, 4096 / slot);
            uint64_t capacity = (used + per_slab - 1) / per_slab * per_slab;
            Segment seg;
            seg.base = cursor;
            seg.bytes.assign(capacity * slot, 0);
            uint64_t next = seg.base;
            for (Planned& p : objects) {
                if (p.cache != ci) continue;
                p.base = next;
                next += slot;
            }
            segments.push_back(std::move(seg));
            cursor += capacity * slot;
            cursor = (cursor + 0xffff) & ~0xffffull;  // gap between cache regions
        }

        // Statics in their own segment.
        if (!statics.empty()) {
            uint64_t total = 0;
            for (const PlannedStatic& st : statics)
                total += (cat.size_of(st.type) + ptr - 1) & ~(ptr - 1);
            Segment seg;
            seg.base = cursor;
            seg.bytes.assign(total, 0);
            uint64_t next = seg.base;
            for (PlannedStatic& st : statics) {
                st.base = next;
                next += (cat.size_of(st.type) + ptr - 1) & ~(ptr - 1);
            }
            segments.push_back(std::move(seg));
        }
    }

    uint8_t* byte_at(uint64_t addr) {
        for (Segment& seg : segments) {
            if (addr >= seg.base && addr < seg.base + seg.bytes.size())
                return &seg.bytes[addr - seg.base];
        }
        throw Error("synth: write outside any segment at " + to_hex(addr));
    }

    void write_scalar(uint64_t addr, uint64_t value, uint64_t width) {
        uint8_t* p = byte_at(addr);
        byte_at(addr + width - 1);
        if (spec.endianness == Endian::Little) {
            for (uint64_t i = 0; i < width; i++) p[i] = uint8_t(value >> (8 * i));
        } else {
            for (uint64_t i = 0; i < width; i++) p[i] = uint8_t(value >> (8 * (width - 1 - i)));
        }
    }

    void write_word(uint64_t addr, uint64_t value) { write_scalar(addr, value, ptr); }

    // Plausible non-pointer contents for integer members: small odd values
    // can never fall inside a segment; adversarial mode aims them at real
    // objects instead.
    uint64_t int_fill_value() {
        if (spec.adversarial && !objects.empty()) {
            const Planned& victim = objects[rng.below(objects.size())];
            return victim.base + rng.below(std::max<uint64_t>(victim.slot, 1));
        }
        return 1 + 2 * rng.below(0x20);
    }

    void fill_instance(TypeId tid, uint64_t base) {
        const TypeDef& td = cat.type(cat.resolve(tid));
        switch (td.kind) {
            case TypeKind::Base:
                if (td.size == 1 || td.size == 2 || td.size == 4 || td.size == 8)
                    write_scalar(base, int_fill_value(), td.size);
                return;
            case TypeKind::Struct:
            case TypeKind::Union: {
                if (td.sync_primitive) return;  // locks stay zero until held
                for (const Member& m : td.members) fill_instance(m.type, base + m.offset);
                return;
            }
            case TypeKind::Array: {
                uint64_t esize = cat.size_of(td.element_type);
                for (uint64_t k = 0; k < td.element_count; k++)
                    fill_instance(td.element_type, base + k * esize);
                return;
            }
            default:
                return;  // pointers stay zero unless linked
        }
    }

    void fill_object(const Planned& p) {
        TypeId rt = cat.resolve(p.type);
        const TypeDef& td = cat.type(rt);
        if (td.kind == TypeKind::Base) return;  // buffers keep zero fill
        if (p.fam_trailing >= 0) {
            fill_instance(rt, p.base);
            auto fam = cat.detect_fam(rt);
            uint64_t msize = cat.size_of(fam->element_type);
            for (int64_t j = 0; j < p.fam_trailing; j++)
                fill_instance(fam->element_type, p.base + td.size + uint64_t(j) * msize);
        } else {
            for (uint64_t k = 0; k < p.count; k++) fill_instance(rt, p.base + k * td.size);
        }
    }

    const Planned& object(const std::string& name, const char* what) {
        auto it = object_by_name.find(name);
        if (it == object_by_name.end())
            throw Error(std::string("synth: ") + what + " references undefined object '" + name +
                        "'");
        return objects[it->second];
    }

    // Source side of a link-like directive: heap object or static.
    std::pair<uint64_t, ResolvedPath> source_site(const std::string& name,
                                                  const std::string& path, const char* what) {
        if (auto it = object_by_name.find(name); it != object_by_name.end()) {
            const Planned& p = objects[it->second];
            ResolvedPath rp = resolve_path(cat, p.type, p.count, path);
            return {p.base, rp};
        }
        if (auto it = static_by_name.find(name); it != static_by_name.end()) {
            const PlannedStatic& st = statics[it->second];
            ResolvedPath rp = resolve_path(cat, st.type, 1, path);
            return {st.base, rp};
        }
        throw Error(std::string("synth: ") + what + " references undefined object '" + name + "'");
    }

    void apply_writes() {
        for (const Planned& p : objects) fill_object(p);

        for (const Directive& d : spec.script) {
            switch (d.op) {
                case Directive::Op::Link: {
                    auto [src_base, rp] = source_site(d.src, d.path, "link");
                    const TypeDef& ptd = cat.type(cat.resolve(rp.type));
                    if (ptd.kind != TypeKind::Pointer)
                        throw Error("synth: link through non-pointer member '" + d.path + "'");
                    const Planned& dst = object(d.dst, "link");
                    uint64_t target = dst.base;
                    if (!d.dst_path.empty()) {
                        ResolvedPath dp = resolve_path(cat, dst.type, dst.count, d.dst_path);
                        target += dp.offset;
                    }
                    if (ptd.pointee != kNoType) {
                        TypeId want = cat.resolve(ptd.pointee);
                        TypeId have = d.dst_path.empty()
                                          ? cat.resolve(dst.type)
                                          : cat.resolve(resolve_path(cat, dst.type, dst.count,
                                                                     d.dst_path)
                                                            .type);
                        if (want != have)
                            throw Error("synth: link type mismatch through '" + d.path +
                                        "' (use inject_cast for deliberate mismatches)");
                    }
                    write_word(src_base + rp.offset, target);
                    break;
                }
                case Directive::Op::InjectCast: {
                    auto [src_base, rp] = source_site(d.src, d.path, "inject_cast");
                    const TypeDef& ptd = cat.type(cat.resolve(rp.type));
                    if (ptd.kind != TypeKind::Pointer)
                        throw Error("synth: inject_cast through non-pointer member");
                    const Planned& dst = object(d.dst, "inject_cast");
                    write_word(src_base + rp.offset, dst.base);
                    if (ptd.pointee != kNoType) {
                        truth.injected.push_back({dst.base,
                                                  cat.type(cat.resolve(ptd.pointee)).id,
                                                  cat.type(cat.resolve(dst.type)).id});
                    }
                    break;
                }
                case Directive::Op::InjectStale: {
                    const Planned& victim = object(d.object, "inject_stale");
                    auto [ref_base, rp] = source_site(d.referrer, d.path, "inject_stale");
                    const TypeDef& ptd = cat.type(cat.resolve(rp.type));
                    if (ptd.kind != TypeKind::Pointer || ptd.pointee == kNoType)
                        throw Error("synth: inject_stale needs a typed pointer member");
                    TypeId stale = cat.resolve(ptd.pointee);
                    if (stale == cat.resolve(victim.type))
                        throw Error("synth: inject_stale types coincide; nothing stale");
                    write_word(ref_base + rp.offset, victim.base);
                    truth.injected.push_back(
                        {victim.base, cat.type(stale).id, cat.type(cat.resolve(victim.type)).id});
                    break;
                }
                case Directive::Op::HoldLock: {
                    auto [base, rp] = source_site(d.object, d.path, "hold_lock");
                    TypeId lock_type = cat.resolve(rp.type);
                    if (!cat.type(lock_type).sync_primitive)
                        throw Error("synth: hold_lock path '" + d.path +
                                    "' is not a sync primitive");
                    if (ptr < 8 && d.owner >> (8 * ptr) != 0)
                        throw Error("synth: hold_lock owner does not fit the pointer width");
                    uint64_t masked = d.owner & ~uint64_t(7);
                    if (masked == 0) throw Error("synth: hold_lock owner masks to zero");
                    write_word(base + rp.offset, d.owner);
                    truth.held_locks.emplace_back(base + rp.offset, masked);
                    break;
                }
                default:
                    break;
            }
        }
    }

    std::string emit_dump() {
        json doc;
        doc["format_version"] = 1;
        doc["pointer_size"] = spec.pointer_size;
        doc["endianness"] = spec.endianness == Endian::Little ? "little" : "big";
        doc["segments"] = json::array();
        for (const Segment& seg : segments) {
            json j;
            j["base"] = "0x" + to_hex(seg.base);
            j["data"] = base64_encode(seg.bytes.data(), seg.bytes.size());
            doc["segments"].push_back(std::move(j));
        }
        doc["caches"] = json::array();
        for (const Cache& c : caches) {
            json j;
            j["id"] = c.id;
            j["name"] = c.name;
            j["object_size"] = c.object_size;
            j["general_purpose"] = c.general_purpose;
            doc["caches"].push_back(std::move(j));
        }
        std::vector<const Planned*> by_base;
        for (const Planned& p : objects) by_base.push_back(&p);
        std::sort(by_base.begin(), by_base.end(),
                  [](const Planned* a, const Planned* b) { return a->base < b->base; });
        doc["objects"] = json::array();
        for (const Planned* p : by_base) {
            json j;
            j["base"] = "0x" + to_hex(p->base);
            j["size"] = p->slot;
            j["cache"] = caches[p->cache].id;
            doc["objects"].push_back(std::move(j));
        }
        doc["statics"] = json::array();
        for (const PlannedStatic& st : statics) {
            json j;
            j["symbol"] = st.symbol;
            j["base"] = "0x" + to_hex(st.base);
            j["type"] = cat.type(st.type).id;
            doc["statics"].push_back(std::move(j));
        }

        for (const Planned* p : by_base) {
            TruthObject t;
            t.base = p->base;
            t.type = cat.type(cat.resolve(p->type)).id;
            t.element_count = p->count;
            t.rooted = p->rooted;
            truth.objects.push_back(std::move(t));
        }
        return doc.dump(2) + "\n";
    }
};

}  // namespace

Generated generate(const SynthSpec& spec, const TypeCatalog& catalog) {
    if (spec.gp_sizes.empty() && spec.typed_caches.empty())
        throw Error("synth: no caches configured");
    Builder b{spec, catalog, Rng(spec.seed), spec.pointer_size, {}, {}, {}, {}, {}, {}, {}};
    b.plan();
    b.layout();
    b.apply_writes();
    Generated gen;
    gen.dump_text = b.emit_dump();
    gen.truth = std::move(b.truth);
    for (const SynthSpec::TypedCache& tc : spec.typed_caches)
        gen.cache_table.entries.emplace_back(tc.name, tc.type);
    return gen;
}

// --- evaluation --------------------------------------------------------------

EvalReport evaluate(const TypeGraph& graph, const GroundTruth& truth) {
    const TypeCatalog& cat = graph.catalog();
    EvalReport r;
    r.nodes = truth.objects.size();
    if (r.nodes != graph.image().heap_objects().size())
        throw Error("evaluate: truth covers " + std::to_string(r.nodes) + " objects, dump has " +
                    std::to_string(graph.image().heap_objects().size()));

    for (const TruthObject& t : truth.objects) {
        auto id = graph.node_at(t.base);
        if (!id || graph.nodes()[*id].base != t.base)
            throw Error("evaluate: truth object at " + to_hex(t.base) + " not in dump");
        const Node& n = graph.nodes()[*id];
        auto tid = cat.find_by_id(t.type);
        if (!tid) tid = cat.find(t.type);
        if (!tid) throw Error("evaluate: unknown truth type '" + t.type + "'");
        TypeId want = cat.resolve(*tid);

        if (!t.rooted) r.expected_unknown++;
        if (n.inferences.size() >= 2) {
            r.conflicts++;
        } else if (n.inferences.size() == 1) {
            bool ok = n.inferences[0].type == want;
            if (ok && (n.verdict == ArrayVerdict::Array || n.verdict == ArrayVerdict::Fam))
                ok = n.element_count == t.element_count;
            if (ok) r.correct++;
            else r.misidentified++;
        } else if (!n.fragments.empty()) {
            r.fragments++;
            bool consistent = true;
            for (const FragmentNote& f : n.fragments) {
                if (!cat.contains_at(want, f.offset, f.type)) {
                    consistent = false;
                    break;
                }
            }
            if (consistent) r.fragments_consistent++;
        } else {
            r.unknown++;
        }
    }

    if (r.nodes > 0)
        r.recognition_rate = double(r.correct + r.fragments_consistent) / double(r.nodes);
    uint64_t denom = r.nodes - r.expected_unknown;
    if (denom > 0) r.misidentification_rate = double(r.misidentified) / double(denom);
    return r;
}

namespace {
void eval_line(std::string& out, const char* label, const std::string& value) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "eval: %25s => %s\n", label, value.c_str());
    out += buf;
}
}  // namespace

std::string render_eval(const EvalReport& r) {
    char buf[64];
    std::string out;
    eval_line(out, "nodes", std::to_string(r.nodes));
    eval_line(out, "correctly identified", std::to_string(r.correct));
    eval_line(out, "misidentified", std::to_string(r.misidentified));
    eval_line(out, "conflicts", std::to_string(r.conflicts));
    std::snprintf(buf, sizeof(buf), "%llu (%llu consistent)",
                  static_cast<unsigned long long>(r.fragments),
                  static_cast<unsigned long long>(r.fragments_consistent));
    eval_line(out, "fragments", buf);
    eval_line(out, "unknown", std::to_string(r.unknown));
    std::snprintf(buf, sizeof(buf), "%.1f%%", 100.0 * r.recognition_rate);
    eval_line(out, "recognition rate", buf);
    std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * r.misidentification_rate);
    eval_line(out, "misidentification rate", buf);
    return out;
}

}  // namespace tg
