#pragma once

#include <algorithm>
#include <random>
#include <tuple>

#include "tidygrid/scene.hpp"

namespace tidygrid {

inline constexpr double kSensorRangeM = 5.0;
inline constexpr double kSensorFovRad = kPi / 2.0;  // 90 degree cone
inline constexpr double kMaxTurnRad = 35.0 * kPi / 180.0;
inline constexpr double kForwardStepM = 0.075;
inline constexpr double kReachRadiusM = 1.5;

struct RobotState {
    Vec2 position;
    double heading = 0.0;  // [0, 2*pi)
    std::optional<std::string> gripper;
};

struct RevealedCell {
    Cell cell;
    CellKind kind = CellKind::Free;
    std::string category;
};

struct VisibleObject {
    std::string id;
    std::string category;
    Cell position;
    ArticulationState articulation_state = ArticulationState::NotApplicable;
    std::optional<std::string> contained_in;
    std::optional<std::string> on_top_of;
    std::map<std::string, std::string> attributes;
};

struct Observation {
    std::vector<RevealedCell> revealed_cells;
    std::vector<VisibleObject> visible_objects;
    RobotState robot_pose;
};

struct ActionResult {
    bool success = false;
    std::string feedback;  // empty exactly on plain success
    std::vector<std::string> world_delta;
};

enum class MotionKind { Forward, TurnLeft, TurnRight };

struct MotionAction {
    MotionKind kind = MotionKind::Forward;
    double angle = 0.0;  // radians, turns only
};

enum class MagicVerb { Open, Close, Grasp, PlaceInside, PlaceOntop };

inline std::string to_string(MagicVerb v) {
    switch (v) {
        case MagicVerb::Open: return "open";
        case MagicVerb::Close: return "close";
        case MagicVerb::Grasp: return "grasp";
        case MagicVerb::PlaceInside: return "place_inside";
        case MagicVerb::PlaceOntop: return "place_ontop";
    }
    return "?";
}

// Ground atoms {inside, ontop, open, closed} plus the instance index needed
// to expand universally quantified goal conditions.
struct RelationSet {
    std::set<std::tuple<std::string, std::string, std::string>> atoms;
    std::map<std::string, std::vector<std::string>> by_category;

    bool has(const std::string& pred, const std::string& a, const std::string& b = "") const {
        return atoms.count({pred, a, b}) > 0;
    }
    const std::vector<std::string>& instances_of(const std::string& category) const {
        static const std::vector<std::string> kEmpty;
        auto it = by_category.find(category);
        return it == by_category.end() ? kEmpty : it->second;
    }
};

class SimState {
public:
    static SimState load_scene(const SceneSpec& spec, uint64_t seed) {
        spec.validate();
        SimState sim;
        sim.spec_ = spec;
        sim.objects_ = spec.objects;
        // Doors double as articulated objects so magic actions reach them.
        for (const auto& d : spec.doors) {
            ObjectSpec door;
            door.id = d.id;
            door.category = "door";
            door.position = d.center;
            door.articulated = true;
            door.articulation_state = d.open ? ArticulationState::Open : ArticulationState::Closed;
            door.attributes["fixed"] = "true";
            sim.objects_.push_back(door);
        }
        sim.doors_ = spec.doors;

        std::vector<Cell> free_cells;
        for (int y = 0; y < spec.height_cells; ++y)
            for (int x = 0; x < spec.width_cells; ++x)
                if (spec.kind_at({x, y}) == CellKind::Free) free_cells.push_back({x, y});
        if (free_cells.empty()) throw SceneError("scene has no free cells to place the robot");
        std::mt19937_64 rng(seed);
        Cell start = free_cells[rng() % free_cells.size()];
        sim.robot_.position = cell_center(start, spec.resolution_m);
        sim.robot_.heading = wrap_angle((rng() % 360) * kPi / 180.0);
        return sim;
    }

    const SceneSpec& scene() const { return spec_; }
    const RobotState& robot() const { return robot_; }
    double resolution() const { return spec_.resolution_m; }

    const ObjectSpec* object(const std::string& id) const {
        for (const auto& o : objects_)
            if (o.id == id) return &o;
        return nullptr;
    }
    const std::vector<ObjectSpec>& objects() const { return objects_; }
    const std::vector<DoorSpec>& doors() const { return doors_; }

    bool door_open_at(const Cell& c) const {
        for (const auto& d : doors_)
            if (d.bbox.contains(c)) return d.open;
        return false;
    }

    bool traversable(const Cell& c) const {
        if (!spec_.in_bounds(c)) return false;
        CellKind k = spec_.kind_at(c);
        if (k == CellKind::Free) return true;
        if (k == CellKind::DoorFrame) return door_open_at(c);
        return false;
    }

    Observation sense() const {
        Observation obs;
        obs.robot_pose = robot_;
        std::set<Cell> revealed;
        Cell robot_cell = point_to_cell(robot_.position, spec_.resolution_m);
        reveal(robot_cell, revealed, obs);

        const double step = spec_.resolution_m / 2.0;
        for (int deg = -45; deg <= 45; ++deg) {
            double angle = robot_.heading + deg_to_rad(deg);
            Vec2 dir{std::cos(angle), std::sin(angle)};
            Cell last = robot_cell;
            for (double t = step; t <= kSensorRangeM; t += step) {
                Vec2 p = robot_.position + dir * t;
                Cell c = point_to_cell(p, spec_.resolution_m);
                if (!spec_.in_bounds(c)) break;
                if (c == last) continue;
                last = c;
                reveal(c, revealed, obs);
                if (blocks_ray(c)) break;
            }
        }

        for (const auto& o : objects_) {
            if (robot_.gripper && *robot_.gripper == o.id) continue;
            if (!object_visible(o, revealed)) continue;
            VisibleObject v;
            v.id = o.id;
            v.category = o.category;
            v.position = o.position;
            v.articulation_state = o.articulation_state;
            v.contained_in = o.contained_in;
            v.on_top_of = o.on_top_of;
            v.attributes = o.attributes;
            obs.visible_objects.push_back(v);
        }
        std::sort(obs.visible_objects.begin(), obs.visible_objects.end(),
                  [](const VisibleObject& a, const VisibleObject& b) { return a.id < b.id; });
        return obs;
    }

    ActionResult step_motion(const MotionAction& action) {
        ActionResult r;
        switch (action.kind) {
            case MotionKind::Forward: {
                Vec2 dir{std::cos(robot_.heading), std::sin(robot_.heading)};
                Vec2 target = robot_.position + dir * kForwardStepM;
                Cell cell = point_to_cell(target, spec_.resolution_m);
                if (!traversable(cell)) {
                    r.feedback = "blocked";
                    return r;
                }
                robot_.position = target;
                r.success = true;
                r.world_delta.push_back("robot");
                return r;
            }
            case MotionKind::TurnLeft:
            case MotionKind::TurnRight: {
                if (action.angle < 0.0 || action.angle > kMaxTurnRad + 1e-12) {
                    r.feedback = "turn angle exceeds the 35 degree per-step maximum";
                    return r;
                }
                double delta = action.kind == MotionKind::TurnLeft ? action.angle : -action.angle;
                robot_.heading = wrap_angle(robot_.heading + delta);
                r.success = true;
                r.world_delta.push_back("robot");
                return r;
            }
        }
        return r;
    }

    // True when no wall or closed door lies on the segment from the robot
    // to the target; the target's own footprint never blocks.
    bool line_of_sight_to(const ObjectSpec& target) const {
        std::set<Cell> footprint{target.position};
        if (const DoorSpec* d = spec_.find_door(target.id))
            for (int y = d->bbox.y0; y <= d->bbox.y1; ++y)
                for (int x = d->bbox.x0; x <= d->bbox.x1; ++x) footprint.insert({x, y});
        Vec2 goal = cell_center(target.position, spec_.resolution_m);
        Vec2 dir = goal - robot_.position;
        double len = dir.norm();
        if (len < 1e-9) return true;
        dir = dir * (1.0 / len);
        const double step = spec_.resolution_m / 2.0;
        for (double t = step; t < len; t += step) {
            Cell c = point_to_cell(robot_.position + dir * t, spec_.resolution_m);
            if (!spec_.in_bounds(c) || footprint.count(c)) continue;
            CellKind k = spec_.kind_at(c);
            if (k == CellKind::Wall) return false;
            if (k == CellKind::DoorFrame && !door_open_at(c)) return false;
        }
        return true;
    }

    ActionResult magic_interact(MagicVerb verb, const std::string& target_id) {
        ActionResult r;
        ObjectSpec* target = mutable_object(target_id);
        if (!target) {
            r.feedback = "no such object: " + target_id;
            return r;
        }
        double dist = distance(robot_.position, cell_center(target->position, spec_.resolution_m));
        if (dist > kReachRadiusM) {
            r.feedback = "too far";
            return r;
        }
        if (!line_of_sight_to(*target)) {
            r.feedback = "no line of sight to " + target_id;
            return r;
        }
        switch (verb) {
            case MagicVerb::Open:
            case MagicVerb::Close: {
                if (!target->articulated) {
                    r.feedback = target_id + " is not articulated";
                    return r;
                }
                if (robot_.gripper) {
                    r.feedback = "gripper full";
                    return r;
                }
                bool want_open = verb == MagicVerb::Open;
                if ((target->articulation_state == ArticulationState::Open) == want_open) {
                    r.feedback = target_id + (want_open ? " is already open" : " is already closed");
                    return r;
                }
                target->articulation_state = want_open ? ArticulationState::Open : ArticulationState::Closed;
                set_door_state(target_id, want_open);
                r.success = true;
                r.world_delta.push_back("object " + target_id);
                return r;
            }
            case MagicVerb::Grasp: {
                if (robot_.gripper) {
                    r.feedback = "gripper full";
                    return r;
                }
                if (target->attributes.count("fixed")) {
                    r.feedback = target_id + " is not movable";
                    return r;
                }
                if (inside_closed_container(*target)) {
                    r.feedback = target_id + " is inside a closed container";
                    return r;
                }
                target->contained_in.reset();
                target->on_top_of.reset();
                robot_.gripper = target_id;
                r.success = true;
                r.world_delta.push_back("object " + target_id);
                r.world_delta.push_back("robot");
                return r;
            }
            case MagicVerb::PlaceInside:
            case MagicVerb::PlaceOntop: {
                if (!robot_.gripper) {
                    r.feedback = "gripper empty, nothing to place";
                    return r;
                }
                if (*robot_.gripper == target_id) {
                    r.feedback = "cannot place " + target_id + " relative to itself";
                    return r;
                }
                if (verb == MagicVerb::PlaceInside && target->articulated &&
                    target->articulation_state == ArticulationState::Closed) {
                    r.feedback = target_id + " is closed, open it first";
                    return r;
                }
                if (inside_closed_container(*target)) {
                    r.feedback = target_id + " is inside a closed container";
                    return r;
                }
                ObjectSpec* held = mutable_object(*robot_.gripper);
                if (verb == MagicVerb::PlaceInside)
                    held->contained_in = target_id;
                else
                    held->on_top_of = target_id;
                held->position = target->position;
                r.world_delta.push_back("object " + held->id);
                robot_.gripper.reset();
                r.world_delta.push_back("robot");
                r.success = true;
                return r;
            }
        }
        return r;
    }

    RelationSet world_relations() const {
        RelationSet rels;
        for (const auto& o : objects_) {
            if (o.contained_in) rels.atoms.insert({"inside", o.id, *o.contained_in});
            if (o.on_top_of) rels.atoms.insert({"ontop", o.id, *o.on_top_of});
            if (o.articulation_state == ArticulationState::Open) rels.atoms.insert({"open", o.id, ""});
            if (o.articulation_state == ArticulationState::Closed) rels.atoms.insert({"closed", o.id, ""});
            rels.by_category[o.category].push_back(o.id);
        }
        for (auto& [cat, ids] : rels.by_category) std::sort(ids.begin(), ids.end());
        return rels;
    }

    // Canonical serialization of the mutable world state; two runs of the
    // same (scene, seed, action sequence) must produce identical output.
    json serialize() const {
        json objs = json::array();
        std::vector<const ObjectSpec*> ordered;
        for (const auto& o : objects_) ordered.push_back(&o);
        std::sort(ordered.begin(), ordered.end(),
                  [](const ObjectSpec* a, const ObjectSpec* b) { return a->id < b->id; });
        for (const ObjectSpec* o : ordered) objs.push_back(to_json(*o));
        json doors = json::array();
        for (const auto& d : doors_) doors.push_back(to_json(d));
        json robot{{"position", {robot_.position.x, robot_.position.y}},
                   {"heading", robot_.heading}};
        if (robot_.gripper) robot["gripper"] = *robot_.gripper;
        return json{{"scene", spec_.name}, {"robot", robot}, {"objects", objs}, {"doors", doors}};
    }

private:
    ObjectSpec* mutable_object(const std::string& id) {
        for (auto& o : objects_)
            if (o.id == id) return &o;
        return nullptr;
    }

    void set_door_state(const std::string& id, bool open) {
        for (auto& d : doors_)
            if (d.id == id) d.open = open;
    }

    bool blocks_ray(const Cell& c) const {
        CellKind k = spec_.kind_at(c);
        if (k == CellKind::Wall || k == CellKind::Furniture) return true;
        if (k == CellKind::DoorFrame) return !door_open_at(c);
        return false;
    }

    // Topmost uncontained object on a cell, if any; it determines the cell's
    // observed semantic category (the BEV stixel top).
    const ObjectSpec* top_object_at(const Cell& c) const {
        const ObjectSpec* best = nullptr;
        int best_depth = -1;
        for (const auto& o : objects_) {
            if (o.position != c || o.contained_in) continue;
            if (robot_.gripper && *robot_.gripper == o.id) continue;
            int depth = 0;
            const ObjectSpec* cur = &o;
            while (cur->on_top_of) {
                const ObjectSpec* base = object(*cur->on_top_of);
                if (!base) break;
                ++depth;
                cur = base;
            }
            if (depth > best_depth || (depth == best_depth && best && o.id < best->id)) {
                best = &o;
                best_depth = depth;
            }
        }
        return best;
    }

    void reveal(const Cell& c, std::set<Cell>& revealed, Observation& obs) const {
        if (!revealed.insert(c).second) return;
        RevealedCell rc;
        rc.cell = c;
        rc.kind = spec_.kind_at(c);
        if (rc.kind == CellKind::DoorFrame) {
            rc.category = "door";
        } else if (const ObjectSpec* top = top_object_at(c); top && rc.kind == CellKind::Free) {
            rc.category = top->category;
        } else {
            rc.category = spec_.category_at(c);
        }
        obs.revealed_cells.push_back(rc);
    }

    bool inside_closed_container(const ObjectSpec& o) const {
        const ObjectSpec* cur = &o;
        while (cur->contained_in) {
            const ObjectSpec* parent = object(*cur->contained_in);
            if (!parent) return false;
            if (parent->articulated && parent->articulation_state == ArticulationState::Closed)
                return true;
            cur = parent;
        }
        return false;
    }

    // Visible iff the root anchor cell was revealed and no enclosing
    // container hides it. Contents of articulated containers appear only
    // when open; contents of other containers stay hidden.
    bool object_visible(const ObjectSpec& o, const std::set<Cell>& revealed) const {
        const ObjectSpec* cur = &o;
        while (cur->contained_in) {
            const ObjectSpec* parent = object(*cur->contained_in);
            if (!parent) return false;
            if (parent->articulation_state != ArticulationState::Open) return false;
            cur = parent;
        }
        if (o.category == "door") {
            // A door is seen as soon as any of its frame cells is.
            if (const DoorSpec* d = spec_.find_door(o.id)) {
                for (int y = d->bbox.y0; y <= d->bbox.y1; ++y)
                    for (int x = d->bbox.x0; x <= d->bbox.x1; ++x)
                        if (revealed.count({x, y})) return true;
            }
            return false;
        }
        bool anchored_visible = revealed.count(cur->position) > 0;
        if (!anchored_visible && cur->on_top_of) {
            // Elevated objects poke above the face that stops the ray, so a
            // revealed neighbor of their cell is enough.
            for (int i = 0; i < 8 && !anchored_visible; ++i)
                anchored_visible = revealed.count({cur->position.x + kNeighborDx[i],
                                                   cur->position.y + kNeighborDy[i]}) > 0;
        }
        if (!anchored_visible) return false;
        double dist = distance(robot_.position, cell_center(cur->position, spec_.resolution_m));
        return dist <= kSensorRangeM;
    }

    SceneSpec spec_;
    std::vector<ObjectSpec> objects_;
    std::vector<DoorSpec> doors_;
    RobotState robot_;
};

}  // namespace tidygrid
