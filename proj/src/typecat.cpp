#include "tg/typecat.hpp"

#include <algorithm>
#include <unordered_set>

#include <json.hpp>

namespace tg {

using json = nlohmann::json;

std::string MemberPath::display() const {
    std::string out;
    for (size_t i = 0; i < steps.size(); i++) {
        if (i == 0) out = steps[0].type_name;
        const std::string& m = steps[i].member_name;
        if (m.empty()) continue;
        if (m[0] != '[') out.push_back('.');
        out += m;
    }
    return out;
}

const TypeDef& TypeCatalog::type(TypeId id) const {
    if (id >= types_.size()) throw Error("unknown type id #" + std::to_string(id));
    return types_[id];
}

std::optional<TypeId> TypeCatalog::find_by_id(std::string_view doc_id) const {
    auto it = by_id_.find(std::string(doc_id));
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

std::optional<TypeId> TypeCatalog::find_by_name(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

std::optional<TypeId> TypeCatalog::find(std::string_view spelling) const {
    for (std::string_view prefix : {"struct ", "union "}) {
        if (spelling.substr(0, prefix.size()) == prefix)
            return find_by_name(spelling.substr(prefix.size()));
    }
    if (auto id = find_by_name(spelling)) return id;
    return find_by_id(spelling);
}

TypeId TypeCatalog::resolve(TypeId id) const {
    const TypeDef* td = &type(id);
    while (td->kind == TypeKind::Typedef) {
        id = td->target;
        td = &type(id);
    }
    return id;
}

std::string TypeCatalog::display_name(TypeId id) const {
    const TypeDef& td = type(id);
    switch (td.kind) {
        case TypeKind::Struct: return "struct " + td.name;
        case TypeKind::Union: return "union " + td.name;
        default: return td.name;
    }
}

const std::vector<PointerLoc>& TypeCatalog::pointer_members(TypeId id) const {
    type(id);
    return pointer_locs_[resolve(id)];
}

const std::vector<SyncLoc>& TypeCatalog::sync_members(TypeId id) const {
    type(id);
    return sync_locs_[resolve(id)];
}

std::optional<FamShape> TypeCatalog::detect_fam(TypeId id) const {
    const TypeDef& td = resolved(id);
    if (td.kind != TypeKind::Struct)
        throw Error("detect_fam: " + td.name + " is not a struct");
    if (td.members.empty()) return std::nullopt;
    const Member& last = td.members.back();
    const TypeDef& mt = resolved(last.type);
    if (mt.kind != TypeKind::Array) return std::nullopt;
    if (mt.element_count > 1) return std::nullopt;
    if (size_of(mt.element_type) == 0) return std::nullopt;  // zero-size elements never count
    FamShape fam;
    fam.element_type = resolve(mt.element_type);
    fam.start_offset = last.offset;
    fam.inline_count = mt.element_count;
    return fam;
}

bool TypeCatalog::contains_at(TypeId outer, uint64_t offset, TypeId inner) const {
    TypeId rout = resolve(outer);
    TypeId rin = resolve(inner);
    if (offset == 0 && rout == rin) return true;
    const TypeDef& td = type(rout);
    switch (td.kind) {
        case TypeKind::Struct:
        case TypeKind::Union:
            for (const Member& m : td.members) {
                uint64_t msize = size_of(m.type);
                if (offset < m.offset) continue;
                if (msize == 0 || offset < m.offset + msize)
                    if (contains_at(m.type, offset - m.offset, inner)) return true;
            }
            return false;
        case TypeKind::Array: {
            uint64_t esize = size_of(td.element_type);
            if (esize == 0) return false;
            uint64_t k = offset / esize;
            if (k >= td.element_count) return false;
            return contains_at(td.element_type, offset - k * esize, inner);
        }
        default:
            return false;
    }
}

// --- loading ---------------------------------------------------------------

namespace {

TypeKind parse_kind(const std::string& s, const std::string& tname) {
    if (s == "base") return TypeKind::Base;
    if (s == "struct") return TypeKind::Struct;
    if (s == "union") return TypeKind::Union;
    if (s == "pointer") return TypeKind::Pointer;
    if (s == "array") return TypeKind::Array;
    if (s == "typedef") return TypeKind::Typedef;
    throw Error("type " + tname + ": unknown kind '" + s + "'");
}

void check_fields(const json& obj, const std::unordered_set<std::string>& allowed,
                  const std::string& what) {
    for (auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key)) throw Error(what + ": unknown field '" + key + "'");
    }
}

uint64_t get_size_field(const json& obj, const char* key, const std::string& what) {
    if (!obj.contains(key) || !obj[key].is_number_unsigned())
        throw Error(what + ": missing or non-numeric '" + std::string(key) + "'");
    return obj[key].get<uint64_t>();
}

std::string get_string_field(const json& obj, const char* key, const std::string& what) {
    if (!obj.contains(key) || !obj[key].is_string())
        throw Error(what + ": missing or non-string '" + std::string(key) + "'");
    return obj[key].get<std::string>();
}

}  // namespace

TypeCatalog TypeCatalog::load_file(const std::string& path) {
    return load(read_text_file(path));
}

TypeCatalog TypeCatalog::load(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("catalog: parse error: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("types") || !doc["types"].is_array())
        throw Error("catalog: expected top-level object with a 'types' list");
    check_fields(doc, {"types"}, "catalog");

    TypeCatalog cat;
    // First sweep interns ids so forward references resolve.
    struct Pending {
        json entry;
        std::string pointee, element_type, target;
        std::vector<std::pair<std::string, std::string>> member_types;  // name, type id
    };

    for (const json& entry : doc["types"]) {
        if (!entry.is_object()) throw Error("catalog: type entry is not an object");
        std::string tid = get_string_field(entry, "id", "catalog type");
        if (cat.by_id_.count(tid)) throw Error("type " + tid + ": duplicate id");
        cat.by_id_[tid] = static_cast<TypeId>(cat.types_.size());
        cat.types_.emplace_back();
        cat.types_.back().id = tid;
    }

    auto lookup = [&cat](const std::string& ref, const std::string& what) -> TypeId {
        auto it = cat.by_id_.find(ref);
        if (it == cat.by_id_.end())
            throw Error(what + ": dangling type reference '" + ref + "'");
        return it->second;
    };

    size_t index = 0;
    for (const json& entry : doc["types"]) {
        TypeDef& td = cat.types_[index++];
        std::string what = "type " + td.id;
        td.name = get_string_field(entry, "name", what);
        td.kind = parse_kind(get_string_field(entry, "kind", what), td.id);
        td.size = get_size_field(entry, "size", what);

        std::unordered_set<std::string> allowed = {"id", "kind", "name", "size", "flags"};
        switch (td.kind) {
            case TypeKind::Struct:
            case TypeKind::Union:
                allowed.insert("members");
                break;
            case TypeKind::Pointer:
                allowed.insert("pointee");
                break;
            case TypeKind::Array:
                allowed.insert("element_type");
                allowed.insert("element_count");
                break;
            case TypeKind::Typedef:
                allowed.insert("target");
                break;
            case TypeKind::Base:
                break;
        }
        check_fields(entry, allowed, what);

        if (entry.contains("flags")) {
            if (!entry["flags"].is_array()) throw Error(what + ": 'flags' must be a list");
            for (const json& f : entry["flags"]) {
                if (!f.is_string() || f.get<std::string>() != "sync_primitive")
                    throw Error(what + ": unknown flag");
                td.sync_primitive = true;
            }
        }

        switch (td.kind) {
            case TypeKind::Base:
                if (td.size == 0) throw Error(what + ": base type with size 0");
                break;
            case TypeKind::Pointer:
                if (td.size == 0) throw Error(what + ": pointer with size 0");
                if (entry.contains("pointee"))
                    td.pointee = lookup(get_string_field(entry, "pointee", what), what);
                break;
            case TypeKind::Array: {
                td.element_type = lookup(get_string_field(entry, "element_type", what), what);
                td.element_count = get_size_field(entry, "element_count", what);
                break;
            }
            case TypeKind::Typedef:
                td.target = lookup(get_string_field(entry, "target", what), what);
                break;
            case TypeKind::Struct:
            case TypeKind::Union: {
                if (td.size == 0) throw Error(what + ": aggregate with size 0");
                if (!entry.contains("members") || !entry["members"].is_array())
                    throw Error(what + ": missing 'members' list");
                for (const json& m : entry["members"]) {
                    if (!m.is_object()) throw Error(what + ": member is not an object");
                    check_fields(m, {"name", "offset", "type"}, what + " member");
                    Member mem;
                    mem.name = get_string_field(m, "name", what);
                    mem.offset = get_size_field(m, "offset", what);
                    mem.type = lookup(get_string_field(m, "type", what), what + "." + mem.name);
                    td.members.push_back(std::move(mem));
                }
                break;
            }
        }
    }

    for (const TypeDef& td : cat.types_) {
        if (!cat.by_name_.count(td.name))
            cat.by_name_[td.name] = cat.by_id_[td.id];
    }

    cat.validate();
    cat.flatten_all();
    return cat;
}

void TypeCatalog::validate() const {
    // Typedef chains must terminate.
    for (TypeId i = 0; i < types_.size(); i++) {
        if (types_[i].kind != TypeKind::Typedef) continue;
        std::unordered_set<TypeId> seen;
        TypeId cur = i;
        while (types_[cur].kind == TypeKind::Typedef) {
            if (!seen.insert(cur).second)
                throw Error("type " + types_[i].id + ": cyclic typedef");
            cur = types_[cur].target;
        }
        if (types_[i].size != types_[cur].size)
            throw Error("type " + types_[i].id + ": size differs from typedef target");
    }

    for (TypeId i = 0; i < types_.size(); i++) {
        const TypeDef& td = types_[i];
        std::string what = "type " + td.id;
        if (td.kind == TypeKind::Array) {
            uint64_t elem = size_of(td.element_type);
            if (td.size != td.element_count * elem)
                throw Error(what + ": array size != element_count * element size");
        }
        if (td.kind == TypeKind::Struct) {
            uint64_t prev_offset = 0;
            bool first = true;
            for (const Member& m : td.members) {
                if (!first && m.offset <= prev_offset)
                    throw Error(what + ": member offsets not strictly increasing at " + m.name);
                if (m.offset + size_of(m.type) > td.size)
                    throw Error(what + ": member " + m.name + " exceeds struct size");
                prev_offset = m.offset;
                first = false;
            }
        }
        if (td.kind == TypeKind::Union) {
            for (const Member& m : td.members) {
                if (m.offset != 0)
                    throw Error(what + ": union member " + m.name + " at nonzero offset");
                if (size_of(m.type) > td.size)
                    throw Error(what + ": union member " + m.name + " exceeds union size");
            }
        }
    }
}

namespace {

// Shared recursive walk over a type's flattened layout. `visit` is called
// for every member / array-element site with its absolute offset; it
// returns true to keep descending into that site.
struct Flattener {
    const TypeCatalog& cat;
    std::vector<TypeId> stack;  // aggregates on the descent path

    template <typename Visit>
    void descend(TypeId tid, uint64_t base, std::vector<PathStep>& steps, Visit&& visit) {
        TypeId rid = cat.resolve(tid);
        const TypeDef& td = cat.type(rid);
        switch (td.kind) {
            case TypeKind::Base:
            case TypeKind::Typedef:
            case TypeKind::Pointer:
                return;
            case TypeKind::Array: {
                uint64_t esize = cat.size_of(td.element_type);
                for (uint64_t k = 0; k < td.element_count; k++) {
                    std::string suffix = "[" + std::to_string(k) + "]";
                    bool fresh = steps.empty();
                    if (fresh)
                        steps.push_back({cat.display_name(rid), suffix});
                    else
                        steps.back().member_name += suffix;
                    site(td.element_type, base + k * esize, steps, visit);
                    if (fresh)
                        steps.pop_back();
                    else
                        steps.back().member_name.resize(steps.back().member_name.size() -
                                                        suffix.size());
                }
                return;
            }
            case TypeKind::Struct:
            case TypeKind::Union: {
                if (std::find(stack.begin(), stack.end(), rid) != stack.end())
                    throw Error("type " + td.id + ": embeds itself");
                stack.push_back(rid);
                for (const Member& m : td.members) {
                    steps.push_back({cat.display_name(rid), m.name});
                    site(m.type, base + m.offset, steps, visit);
                    steps.pop_back();
                }
                stack.pop_back();
                return;
            }
        }
    }

    template <typename Visit>
    void site(TypeId tid, uint64_t offset, std::vector<PathStep>& steps, Visit&& visit) {
        if (visit(tid, offset, steps)) descend(tid, offset, steps, visit);
    }
};

}  // namespace

void TypeCatalog::flatten_all() {
    pointer_locs_.resize(types_.size());
    sync_locs_.resize(types_.size());
    for (TypeId i = 0; i < types_.size(); i++) {
        if (types_[i].kind == TypeKind::Typedef) continue;
        auto& pointers = pointer_locs_[i];
        auto& syncs = sync_locs_[i];

        // Top-level pointer types (pointer-typed statics) are their own
        // single pointer location.
        if (types_[i].kind == TypeKind::Pointer) {
            if (types_[i].pointee != kNoType)
                pointers.push_back({0, types_[i].pointee, MemberPath{{}, types_[i].pointee, 0}});
            continue;
        }

        std::vector<PathStep> steps;
        Flattener fl{*this, {}};
        fl.descend(i, 0, steps, [&](TypeId tid, uint64_t offset, std::vector<PathStep>& path) {
            const TypeDef& td = type(resolve(tid));
            if (td.kind == TypeKind::Pointer && td.pointee != kNoType)
                pointers.push_back({offset, td.pointee, MemberPath{path, td.pointee, offset}});
            return true;
        });

        steps.clear();
        Flattener fs{*this, {}};
        fs.descend(i, 0, steps, [&](TypeId tid, uint64_t offset, std::vector<PathStep>& path) {
            TypeId rid = resolve(tid);
            if (type(rid).sync_primitive) {
                // Flagged members are leaves; their internals are not
                // enumerated again.
                syncs.push_back({offset, rid, MemberPath{path, rid, offset}});
                return false;
            }
            return true;
        });

        std::stable_sort(pointers.begin(), pointers.end(),
                         [](const PointerLoc& a, const PointerLoc& b) { return a.offset < b.offset; });
        std::stable_sort(syncs.begin(), syncs.end(),
                         [](const SyncLoc& a, const SyncLoc& b) { return a.offset < b.offset; });
    }
    // Typedefs share the flattening of their resolved target.
    for (TypeId i = 0; i < types_.size(); i++) {
        if (types_[i].kind != TypeKind::Typedef) continue;
        TypeId r = resolve(i);
        pointer_locs_[i] = pointer_locs_[r];
        sync_locs_[i] = sync_locs_[r];
    }
}

}  // namespace tg
