#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "tg/util.hpp"

namespace tg {

// Dense index into the catalog. Document-level string ids are interned at
// load time; both the id and the declared name resolve back to a TypeId.
using TypeId = uint32_t;
constexpr TypeId kNoType = 0xffffffffu;

enum class TypeKind : uint8_t { Base, Struct, Union, Pointer, Array, Typedef };

struct Member {
    std::string name;
    uint64_t offset = 0;  // bytes from the containing type's base
    TypeId type = kNoType;
};

struct TypeDef {
    std::string id;    // document identifier
    std::string name;  // declared name ("foo_t", "int", ...)
    TypeKind kind = TypeKind::Base;
    uint64_t size = 0;
    std::vector<Member> members;  // struct/union only
    TypeId pointee = kNoType;     // pointer only; kNoType = opaque (void* / function)
    TypeId element_type = kNoType;
    uint64_t element_count = 0;   // array only; 0 models the ISO C99 [] FAM syntax
    TypeId target = kNoType;      // typedef only
    bool sync_primitive = false;
};

// One nesting level of a member reference: the containing type's display
// name and the member selected inside it ("struct rnode" . "r_path").
struct PathStep {
    std::string type_name;
    std::string member_name;
};

struct MemberPath {
    std::vector<PathStep> steps;
    TypeId terminal = kNoType;
    uint64_t terminal_offset = 0;  // bytes from the outermost base

    bool empty() const { return steps.empty(); }
    // "struct anon_map.serial_lock" — outermost type name, then the member
    // chain joined with dots.
    std::string display() const;
};

// A pointer-typed location within one instance of a type, after flattening
// embedded structs and fixed arrays.
struct PointerLoc {
    uint64_t offset = 0;
    TypeId pointee = kNoType;  // unresolved (typedefs not chased)
    MemberPath path;
};

// A sync_primitive-flagged location, same flattening rules.
struct SyncLoc {
    uint64_t offset = 0;
    TypeId type = kNoType;  // resolved flagged type
    MemberPath path;
};

struct FamShape {
    TypeId element_type = kNoType;
    uint64_t start_offset = 0;  // offset of the trailing array member
    uint64_t inline_count = 0;  // 1 for the [1] idiom, 0 for the [] syntax
};

class TypeCatalog {
public:
    // Parses and validates a catalog document (see docs/formats.md for the
    // schema). Any invariant violation rejects the whole document with a
    // diagnostic naming the offending type.
    static TypeCatalog load(const std::string& text);
    static TypeCatalog load_file(const std::string& path);

    size_t count() const { return types_.size(); }
    const TypeDef& type(TypeId id) const;

    std::optional<TypeId> find_by_id(std::string_view doc_id) const;
    std::optional<TypeId> find_by_name(std::string_view name) const;
    // Command-line spelling: bare name, document id, or "struct X" / "union X".
    std::optional<TypeId> find(std::string_view spelling) const;

    // Chases typedef chains; the result's kind is never Typedef.
    TypeId resolve(TypeId id) const;
    const TypeDef& resolved(TypeId id) const { return type(resolve(id)); }
    uint64_t size_of(TypeId id) const { return type(id).size; }

    // Flattened, recursive enumeration of every pointer-typed location in
    // one instance, ascending offset order. Unions contribute every
    // alternative's pointers at their shared offsets. Opaque pointers
    // (no pointee) are treated as pointerless.
    const std::vector<PointerLoc>& pointer_members(TypeId id) const;

    // Last-member-is-array-of-size-one rule (count 0 also accepted).
    std::optional<FamShape> detect_fam(TypeId id) const;

    const std::vector<SyncLoc>& sync_members(TypeId id) const;

    // "struct foo" for struct kinds, "union u" for unions, bare name
    // otherwise.
    std::string display_name(TypeId id) const;

    // True when one instance of `outer` has a constituent of resolved type
    // `inner` at the given absolute offset (any nesting depth; offset 0 with
    // inner == outer counts).
    bool contains_at(TypeId outer, uint64_t offset, TypeId inner) const;

private:
    void validate() const;
    void flatten_all();

    std::vector<TypeDef> types_;
    std::unordered_map<std::string, TypeId> by_id_;
    std::unordered_map<std::string, TypeId> by_name_;
    // Precomputed at load; the catalog is immutable afterwards, so shared
    // readers need no locking.
    std::vector<std::vector<PointerLoc>> pointer_locs_;
    std::vector<std::vector<SyncLoc>> sync_locs_;
};

}  // namespace tg
