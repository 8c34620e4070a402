#pragma once

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tidygrid/geometry.hpp"

namespace tidygrid {

using json = nlohmann::json;

inline constexpr int kSceneSchemaVersion = 1;

enum class CellKind { Free, Wall, Furniture, DoorFrame };

inline std::string to_string(CellKind k) {
    switch (k) {
        case CellKind::Free: return "free";
        case CellKind::Wall: return "wall";
        case CellKind::Furniture: return "furniture";
        case CellKind::DoorFrame: return "door_frame";
    }
    return "free";
}

inline CellKind cell_kind_from_string(const std::string& s) {
    if (s == "free") return CellKind::Free;
    if (s == "wall") return CellKind::Wall;
    if (s == "furniture") return CellKind::Furniture;
    if (s == "door_frame") return CellKind::DoorFrame;
    throw std::runtime_error("unknown cell kind: " + s);
}

enum class ArticulationState { NotApplicable, Open, Closed };

inline std::string to_string(ArticulationState s) {
    switch (s) {
        case ArticulationState::NotApplicable: return "n/a";
        case ArticulationState::Open: return "open";
        case ArticulationState::Closed: return "closed";
    }
    return "n/a";
}

inline ArticulationState articulation_from_string(const std::string& s) {
    if (s == "n/a") return ArticulationState::NotApplicable;
    if (s == "open") return ArticulationState::Open;
    if (s == "closed") return ArticulationState::Closed;
    throw std::runtime_error("unknown articulation state: " + s);
}

enum class DoorOrientation { Horizontal, Vertical };

struct DoorSpec {
    std::string id;
    Cell center;
    int length_cells = 1;
    DoorOrientation orientation = DoorOrientation::Horizontal;
    bool open = false;
    CellRect bbox;
};

struct ObjectSpec {
    std::string id;
    std::string category;
    Cell position;
    bool articulated = false;
    ArticulationState articulation_state = ArticulationState::NotApplicable;
    std::optional<std::string> contained_in;
    std::optional<std::string> on_top_of;
    std::map<std::string, std::string> attributes;
};

// Ground-truth room annotation, used only by test oracles. `map` holds one
// row string per grid row; letters name rooms via `names`, '?' marks
// threshold cells (door frames) and anything else is unannotated.
struct RoomAnnotations {
    std::map<char, std::string> names;
    std::vector<std::string> map;

    std::optional<std::string> room_at(const Cell& c) const {
        if (c.y < 0 || c.y >= static_cast<int>(map.size())) return std::nullopt;
        const std::string& row = map[c.y];
        if (c.x < 0 || c.x >= static_cast<int>(row.size())) return std::nullopt;
        auto it = names.find(row[c.x]);
        if (it == names.end()) return std::nullopt;
        return it->second;
    }
};

struct CellDef {
    CellKind kind = CellKind::Free;
    std::string category = "floor";
};

class SceneError : public std::runtime_error {
public:
    explicit SceneError(const std::string& what) : std::runtime_error(what) {}
};

struct SceneSpec {
    std::string name;
    int width_cells = 0;
    int height_cells = 0;
    double resolution_m = kDefaultResolution;
    std::map<char, CellDef> legend;
    std::vector<std::string> cells;  // height_cells rows of width_cells chars
    std::set<std::string> free_space_categories = {"floor", "carpet", "lawn", "driveway"};
    std::vector<DoorSpec> doors;
    std::vector<ObjectSpec> objects;
    std::optional<RoomAnnotations> room_annotations;

    const CellDef& cell_def(const Cell& c) const {
        char ch = cells[c.y][c.x];
        auto it = legend.find(ch);
        if (it == legend.end()) throw SceneError(std::string("cell char not in legend: ") + ch);
        return it->second;
    }
    CellKind kind_at(const Cell& c) const { return cell_def(c).kind; }
    const std::string& category_at(const Cell& c) const { return cell_def(c).category; }
    bool in_bounds(const Cell& c) const {
        return c.x >= 0 && c.x < width_cells && c.y >= 0 && c.y < height_cells;
    }

    const ObjectSpec* find_object(const std::string& id) const {
        for (const auto& o : objects)
            if (o.id == id) return &o;
        return nullptr;
    }
    const DoorSpec* find_door(const std::string& id) const {
        for (const auto& d : doors)
            if (d.id == id) return &d;
        return nullptr;
    }

    void validate() const;
};

namespace detail {

// Walks containment links from `id`; throws on a cycle.
inline void check_containment_acyclic(const SceneSpec& spec) {
    for (const auto& o : spec.objects) {
        std::set<std::string> seen;
        const ObjectSpec* cur = &o;
        while (cur->contained_in || cur->on_top_of) {
            const std::string& next = cur->contained_in ? *cur->contained_in : *cur->on_top_of;
            if (!seen.insert(cur->id).second || next == o.id)
                throw SceneError("containment graph cyclic at object '" + o.id + "'");
            const ObjectSpec* parent = spec.find_object(next);
            if (!parent)
                throw SceneError("object '" + cur->id + "' references missing object '" + next + "'");
            cur = parent;
        }
    }
}

}  // namespace detail

inline void SceneSpec::validate() const {
    if (resolution_m <= 0.0) throw SceneError("resolution_m must be > 0");
    if (width_cells <= 0 || height_cells <= 0) throw SceneError("grid dimensions must be positive");
    if (static_cast<int>(cells.size()) != height_cells)
        throw SceneError("cells row count does not match height_cells");
    for (const auto& row : cells)
        if (static_cast<int>(row.size()) != width_cells)
            throw SceneError("cells row width does not match width_cells");

    for (int y = 0; y < height_cells; ++y)
        for (int x = 0; x < width_cells; ++x)
            cell_def({x, y});  // throws on unknown legend chars

    // Door frame cells must be covered by exactly one door bbox.
    std::set<std::string> door_ids;
    for (const auto& d : doors) {
        if (!door_ids.insert(d.id).second) throw SceneError("duplicate door id '" + d.id + "'");
        if (d.bbox.empty()) throw SceneError("door '" + d.id + "' has empty bbox");
        for (int y = d.bbox.y0; y <= d.bbox.y1; ++y)
            for (int x = d.bbox.x0; x <= d.bbox.x1; ++x) {
                Cell c{x, y};
                if (!in_bounds(c) || kind_at(c) != CellKind::DoorFrame)
                    throw SceneError("door '" + d.id + "' bbox covers a non-door-frame cell");
            }
        if (!d.bbox.contains(d.center))
            throw SceneError("door '" + d.id + "' center outside its bbox");
    }
    for (int y = 0; y < height_cells; ++y)
        for (int x = 0; x < width_cells; ++x) {
            if (kind_at({x, y}) != CellKind::DoorFrame) continue;
            int covering = 0;
            for (const auto& d : doors)
                if (d.bbox.contains({x, y})) ++covering;
            if (covering != 1)
                throw SceneError("door frame cell (" + std::to_string(x) + "," + std::to_string(y) +
                                 ") covered by " + std::to_string(covering) + " doors, expected 1");
        }

    std::set<std::string> object_ids;
    for (const auto& o : objects) {
        if (!object_ids.insert(o.id).second) throw SceneError("duplicate object id '" + o.id + "'");
        if (door_ids.count(o.id)) throw SceneError("object id '" + o.id + "' collides with a door id");
        if (!in_bounds(o.position)) throw SceneError("object '" + o.id + "' out of bounds");
        if (o.contained_in && o.on_top_of)
            throw SceneError("object '" + o.id + "' has both contained_in and on_top_of");
        if (!o.articulated && o.articulation_state != ArticulationState::NotApplicable)
            throw SceneError("non-articulated object '" + o.id + "' has an articulation state");
        if (o.articulated && o.articulation_state == ArticulationState::NotApplicable)
            throw SceneError("articulated object '" + o.id + "' needs articulation_state open/closed");
    }
    detail::check_containment_acyclic(*this);

    if (room_annotations) {
        // The free-cell subgraph of each annotated room must be 4-connected.
        const auto& ann = *room_annotations;
        if (static_cast<int>(ann.map.size()) != height_cells)
            throw SceneError("room annotation map height mismatch");
        std::map<std::string, std::vector<Cell>> room_cells;
        for (int y = 0; y < height_cells; ++y) {
            if (static_cast<int>(ann.map[y].size()) != width_cells)
                throw SceneError("room annotation map width mismatch");
            for (int x = 0; x < width_cells; ++x) {
                auto room = ann.room_at({x, y});
                if (room && kind_at({x, y}) == CellKind::Free)
                    room_cells[*room].push_back({x, y});
            }
        }
        for (const auto& [room, members] : room_cells) {
            if (members.empty()) continue;
            std::set<Cell> wanted(members.begin(), members.end());
            std::set<Cell> reached;
            std::vector<Cell> stack{members.front()};
            reached.insert(members.front());
            while (!stack.empty()) {
                Cell c = stack.back();
                stack.pop_back();
                for (int i = 0; i < 4; ++i) {
                    Cell n{c.x + kNeighborDx[i], c.y + kNeighborDy[i]};
                    if (wanted.count(n) && reached.insert(n).second) stack.push_back(n);
                }
            }
            if (reached.size() != wanted.size())
                throw SceneError("annotated room '" + room + "' free cells are not 4-connected");
        }
    }
}

// --- JSON (scene file schema, versioned) ---

inline json to_json(const DoorSpec& d) {
    return json{{"id", d.id},
                {"center", {d.center.x, d.center.y}},
                {"length_cells", d.length_cells},
                {"orientation", d.orientation == DoorOrientation::Horizontal ? "horizontal" : "vertical"},
                {"state", d.open ? "open" : "closed"},
                {"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}}};
}

inline DoorSpec door_from_json(const json& j) {
    DoorSpec d;
    d.id = j.at("id").get<std::string>();
    d.center = {j.at("center").at(0).get<int>(), j.at("center").at(1).get<int>()};
    d.length_cells = j.at("length_cells").get<int>();
    d.orientation = j.at("orientation").get<std::string>() == "horizontal"
                        ? DoorOrientation::Horizontal
                        : DoorOrientation::Vertical;
    d.open = j.at("state").get<std::string>() == "open";
    const auto& b = j.at("bbox");
    d.bbox = {b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
    return d;
}

inline json to_json(const ObjectSpec& o) {
    json j{{"id", o.id},
           {"category", o.category},
           {"position", {o.position.x, o.position.y}},
           {"articulated", o.articulated},
           {"articulation_state", to_string(o.articulation_state)}};
    if (o.contained_in) j["contained_in"] = *o.contained_in;
    if (o.on_top_of) j["on_top_of"] = *o.on_top_of;
    if (!o.attributes.empty()) j["attributes"] = o.attributes;
    return j;
}

inline ObjectSpec object_from_json(const json& j) {
    ObjectSpec o;
    o.id = j.at("id").get<std::string>();
    o.category = j.at("category").get<std::string>();
    o.position = {j.at("position").at(0).get<int>(), j.at("position").at(1).get<int>()};
    o.articulated = j.value("articulated", false);
    o.articulation_state = articulation_from_string(j.value("articulation_state", std::string("n/a")));
    if (j.contains("contained_in")) o.contained_in = j.at("contained_in").get<std::string>();
    if (j.contains("on_top_of")) o.on_top_of = j.at("on_top_of").get<std::string>();
    if (j.contains("attributes")) o.attributes = j.at("attributes").get<std::map<std::string, std::string>>();
    return o;
}

inline json to_json(const SceneSpec& s) {
    json legend = json::object();
    for (const auto& [ch, def] : s.legend)
        legend[std::string(1, ch)] = json{{"kind", to_string(def.kind)}, {"category", def.category}};
    json doors = json::array();
    for (const auto& d : s.doors) doors.push_back(to_json(d));
    json objects = json::array();
    for (const auto& o : s.objects) objects.push_back(to_json(o));
    json j{{"schema_version", kSceneSchemaVersion},
           {"name", s.name},
           {"width_cells", s.width_cells},
           {"height_cells", s.height_cells},
           {"resolution_m", s.resolution_m},
           {"free_space_categories", s.free_space_categories},
           {"legend", legend},
           {"cells", s.cells},
           {"doors", doors},
           {"objects", objects}};
    if (s.room_annotations) {
        json names = json::object();
        for (const auto& [ch, name] : s.room_annotations->names) names[std::string(1, ch)] = name;
        j["room_annotations"] = json{{"rooms", names}, {"map", s.room_annotations->map}};
    }
    return j;
}

inline SceneSpec scene_from_json(const json& j) {
    int version = j.value("schema_version", 0);
    if (version != kSceneSchemaVersion)
        throw SceneError("unsupported scene schema_version " + std::to_string(version));
    SceneSpec s;
    s.name = j.value("name", std::string("scene"));
    s.width_cells = j.at("width_cells").get<int>();
    s.height_cells = j.at("height_cells").get<int>();
    s.resolution_m = j.value("resolution_m", kDefaultResolution);
    if (j.contains("free_space_categories"))
        s.free_space_categories = j.at("free_space_categories").get<std::set<std::string>>();
    s.legend.clear();
    for (const auto& [key, def] : j.at("legend").items()) {
        if (key.size() != 1) throw SceneError("legend keys must be single characters");
        s.legend[key[0]] = CellDef{cell_kind_from_string(def.at("kind").get<std::string>()),
                                   def.at("category").get<std::string>()};
    }
    s.cells = j.at("cells").get<std::vector<std::string>>();
    for (const auto& dj : j.value("doors", json::array())) s.doors.push_back(door_from_json(dj));
    for (const auto& oj : j.value("objects", json::array())) s.objects.push_back(object_from_json(oj));
    if (j.contains("room_annotations")) {
        RoomAnnotations ann;
        for (const auto& [key, name] : j.at("room_annotations").at("rooms").items())
            ann.names[key[0]] = name.get<std::string>();
        ann.map = j.at("room_annotations").at("map").get<std::vector<std::string>>();
        s.room_annotations = ann;
    }
    s.validate();
    return s;
}

}  // namespace tidygrid
