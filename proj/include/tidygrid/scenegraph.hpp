#pragma once

#include <functional>

#include "tidygrid/voronoi.hpp"

namespace tidygrid {

inline constexpr double kDefaultAssignLambda = 1.3;
inline constexpr double kCandidateRadiusM = 1.5;
inline constexpr int kMinCandidates = 3;

inline const std::vector<std::string>& room_vocabulary() {
    static const std::vector<std::string> kVocab = {
        "kitchen",  "living room", "bedroom", "bathroom", "dining room",
        "corridor", "garage",      "outdoor", "shop",     "room"};
    return kVocab;
}

// Deterministic keyword table used by the rules backend for room labels.
inline std::string rules_room_label(const std::vector<std::string>& categories) {
    static const std::map<std::string, std::string> kTable = {
        {"fridge", "kitchen"},        {"refrigerator", "kitchen"},
        {"electric_refrigerator", "kitchen"}, {"oven", "kitchen"},
        {"stove", "kitchen"},         {"sink", "kitchen"},
        {"microwave", "kitchen"},     {"dishwasher", "kitchen"},
        {"kettle", "kitchen"},        {"toaster", "kitchen"},
        {"bed", "bedroom"},           {"wardrobe", "bedroom"},
        {"nightstand", "bedroom"},    {"dresser", "bedroom"},
        {"sofa", "living room"},      {"couch", "living room"},
        {"television", "living room"}, {"tv", "living room"},
        {"armchair", "living room"},  {"coffee_table", "living room"},
        {"bookshelf", "living room"}, {"toilet", "bathroom"},
        {"bathtub", "bathroom"},      {"shower", "bathroom"},
        {"washbasin", "bathroom"},    {"dining_table", "dining room"},
        {"breakfast_table", "dining room"}, {"car", "garage"},
        {"workbench", "garage"},      {"toolbox", "garage"},
        {"tree", "outdoor"},          {"lawn", "outdoor"},
        {"bush", "outdoor"},          {"flower", "outdoor"},
        {"gate", "outdoor"},          {"plant", "outdoor"},
        {"wheelbarrow", "outdoor"},   {"checkout", "shop"},
        {"cash_register", "shop"},    {"shopping_cart", "shop"},
        {"shelf", "shop"}};
    static const std::vector<std::string> kPriority = {
        "kitchen", "bathroom", "bedroom", "living room", "dining room",
        "garage",  "outdoor",  "shop",    "corridor"};
    std::map<std::string, int> votes;
    for (const auto& cat : categories) {
        auto it = kTable.find(cat);
        if (it != kTable.end()) ++votes[it->second];
    }
    std::string best = "room";
    int best_votes = 0;
    for (const auto& room : kPriority) {
        auto it = votes.find(room);
        if (it != votes.end() && it->second > best_votes) {
            best = room;
            best_votes = it->second;
        }
    }
    return best;
}

// category + alphabetical suffix: apple_A, apple_B, ... apple_Z, apple_AA.
inline std::string instance_suffix(int ordinal) {
    std::string s;
    int n = ordinal + 1;
    while (n > 0) {
        int rem = (n - 1) % 26;
        s.insert(s.begin(), static_cast<char>('A' + rem));
        n = (n - 1) / 26;
    }
    return s;
}

// The agent's persistent belief about objects it has seen. Instance ids are
// assigned on first observation, in category order of appearance, and never
// change for the rest of the episode.
struct TrackedObject {
    std::string sim_id;
    std::string instance_id;
    std::string category;
    Cell cell;
    Vec2 position_m;
    ArticulationState articulation = ArticulationState::NotApplicable;
    std::optional<std::string> inside_sim;
    std::optional<std::string> ontop_sim;
    std::map<std::string, std::string> attributes;
    Vec2 best_viewpoint;
    double best_viewpoint_dist = kInfiniteDistance;
    int first_seen = -1;
    int last_seen = -1;
    bool in_gripper = false;
};

class ObjectStore {
public:
    void integrate(const Observation& obs, int step, double resolution) {
        for (const auto& v : obs.visible_objects) {
            auto it = objects_.find(v.id);
            if (it == objects_.end()) {
                TrackedObject t;
                t.sim_id = v.id;
                t.category = v.category;
                t.instance_id = v.category + "_" + instance_suffix(category_counts_[v.category]++);
                t.first_seen = step;
                it = objects_.emplace(v.id, std::move(t)).first;
                instance_to_sim_[it->second.instance_id] = v.id;
            }
            TrackedObject& t = it->second;
            t.cell = v.position;
            t.position_m = cell_center(v.position, resolution);
            t.articulation = v.articulation_state;
            t.inside_sim = v.contained_in;
            t.ontop_sim = v.on_top_of;
            t.attributes = v.attributes;
            t.last_seen = step;
            t.in_gripper = false;
            double d = distance(obs.robot_pose.position, cell_center(v.position, resolution));
            if (d < t.best_viewpoint_dist) {
                t.best_viewpoint_dist = d;
                t.best_viewpoint = obs.robot_pose.position;
            }
        }
    }

    // Manipulation outcomes the agent caused are definite knowledge even
    // without re-observation.
    void apply_grasp(const std::string& sim_id) {
        if (auto* t = find_mutable(sim_id)) {
            t->in_gripper = true;
            t->inside_sim.reset();
            t->ontop_sim.reset();
        }
    }
    void apply_place(const std::string& sim_id, const std::string& target, bool inside) {
        auto* t = find_mutable(sim_id);
        auto* tgt = find_mutable(target);
        if (!t) return;
        t->in_gripper = false;
        if (inside)
            t->inside_sim = target;
        else
            t->ontop_sim = target;
        if (tgt) {
            t->cell = tgt->cell;
            t->position_m = tgt->position_m;
        }
    }
    void apply_articulation(const std::string& sim_id, bool open) {
        if (auto* t = find_mutable(sim_id))
            t->articulation = open ? ArticulationState::Open : ArticulationState::Closed;
    }

    const TrackedObject* find(const std::string& sim_id) const {
        auto it = objects_.find(sim_id);
        return it == objects_.end() ? nullptr : &it->second;
    }
    const TrackedObject* find_by_instance(const std::string& instance_id) const {
        auto it = instance_to_sim_.find(instance_id);
        return it == instance_to_sim_.end() ? nullptr : find(it->second);
    }
    const std::map<std::string, TrackedObject>& all() const { return objects_; }
    bool observed(const std::string& sim_id) const { return objects_.count(sim_id) > 0; }

    std::set<std::string> observed_ids() const {
        std::set<std::string> out;
        for (const auto& [id, t] : objects_) out.insert(id);
        return out;
    }

private:
    TrackedObject* find_mutable(const std::string& sim_id) {
        auto it = objects_.find(sim_id);
        return it == objects_.end() ? nullptr : &it->second;
    }

    std::map<std::string, TrackedObject> objects_;
    std::map<std::string, std::string> instance_to_sim_;
    std::map<std::string, int> category_counts_;
};

struct ObjectNode {
    std::string instance_id;
    std::string sim_id;
    std::string category;
    Vec2 position;
    std::map<std::string, std::string> attributes;
    std::optional<std::string> inside;  // instance ids
    std::optional<std::string> ontop;
    ArticulationState articulation = ArticulationState::NotApplicable;
    Vec2 viewpoint;
    int region_id = -1;
};

struct RegionNode {
    int id = -1;
    int component = -1;
    std::string label = "room";
    std::string display_name;
    std::vector<std::string> object_ids;  // instance ids, sorted
    std::vector<int> node_ids;
    int frontier_count = 0;
    bool exploration_complete = true;
};

struct SceneGraph {
    std::map<int, RegionNode> regions;
    std::map<std::string, ObjectNode> objects;  // by instance id
    std::optional<int> robot_region;

    const RegionNode* region_by_name(const std::string& name) const {
        for (const auto& [id, r] : regions)
            if (r.display_name == name) return &r;
        // A bare room label resolves when it is unambiguous.
        const RegionNode* match = nullptr;
        for (const auto& [id, r] : regions) {
            std::string snake = r.label;
            for (auto& ch : snake)
                if (ch == ' ') ch = '_';
            if (snake == name || r.label == name) {
                if (match) return nullptr;
                match = &r;
            }
        }
        return match;
    }
};

struct Assignment {
    int component = -1;
    int region = -1;
    int node_object = -1;     // v, the node chosen near the object
    int node_viewpoint = -1;  // u, the node chosen near the viewpoint
    double cost = kInfiniteDistance;
    bool fallback = false;
};

inline std::vector<int> candidate_nodes(const VoronoiGraph& graph, const Vec2& point,
                                        double radius = kCandidateRadiusM,
                                        int min_count = kMinCandidates) {
    std::vector<std::pair<double, int>> by_dist;
    for (int v : graph.alive_nodes()) by_dist.emplace_back(distance(graph.node(v).position, point), v);
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<int> out;
    for (const auto& [d, v] : by_dist) {
        if (d <= radius || static_cast<int>(out.size()) < min_count)
            out.push_back(v);
        else
            break;
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Object-to-component assignment: minimize d_V(v,u) + d_E(O,v)^lambda +
// d_E(vp,u) over candidate nodes near the object (v) and near the viewpoint
// it was best observed from (u); pairs in different components cost
// infinity. Ties break toward the smallest (v, u) pair.
inline std::optional<Assignment> assign_object(
    const Vec2& object_pos, const Vec2& viewpoint, const VoronoiGraph& graph,
    double lambda = kDefaultAssignLambda,
    std::map<int, std::vector<double>>* dijkstra_cache = nullptr) {
    if (graph.node_count() == 0) return std::nullopt;
    std::vector<int> s_obj = candidate_nodes(graph, object_pos);
    std::vector<int> s_view = candidate_nodes(graph, viewpoint);

    Assignment best;
    std::map<int, std::vector<double>> local_cache;
    auto& cache = dijkstra_cache ? *dijkstra_cache : local_cache;
    for (int u : s_view) {
        auto it = cache.find(u);
        if (it == cache.end()) it = cache.emplace(u, shortest_paths_from(graph, u)).first;
        const std::vector<double>& dv = it->second;
        for (int v : s_obj) {
            if (graph.component(v) != graph.component(u)) continue;
            double cost = dv[v] + std::pow(distance(object_pos, graph.node(v).position), lambda) +
                          distance(viewpoint, graph.node(u).position);
            bool better = cost < best.cost;
            if (!better && cost == best.cost)
                better = std::tie(v, u) < std::tie(best.node_object, best.node_viewpoint);
            if (better) {
                best.cost = cost;
                best.node_object = v;
                best.node_viewpoint = u;
            }
        }
    }
    if (best.node_object < 0) {
        // Candidate pairs were all cross-component; fall back to the
        // component of the globally nearest node.
        auto nearest = closest_node(graph, object_pos);
        if (!nearest) return std::nullopt;
        best.node_object = *nearest;
        best.node_viewpoint = *nearest;
        best.fallback = true;
    }
    best.component = graph.component(best.node_object);
    best.region = graph.region(best.node_object);
    return best;
}

// Maps each frontier to the region of its nearest skeleton node.
inline void label_frontiers(std::vector<Frontier>& frontiers, const VoronoiGraph& graph,
                            double resolution) {
    for (auto& f : frontiers) {
        auto node = closest_node(graph, cell_center(f.centroid, resolution));
        f.region = node ? std::optional<int>(graph.region(*node)) : std::nullopt;
    }
}

using RoomClassifier = std::function<std::string(const std::vector<std::string>&)>;

// Rebuilds the three-level hierarchy from the current belief: regions from
// the separated Voronoi graph, objects assigned per the minimization above,
// labels from the classifier. Instance ids come from the store and are
// stable across rebuilds.
inline SceneGraph update_scene_graph(const ObjectStore& store, const VoronoiGraph& graph,
                                     const std::vector<Frontier>& frontiers,
                                     const Vec2& robot_position, const RoomClassifier& classifier,
                                     double lambda = kDefaultAssignLambda) {
    SceneGraph sg;
    if (graph.node_count() == 0) return sg;

    for (int v : graph.alive_nodes()) {
        int r = graph.region(v);
        auto [it, inserted] = sg.regions.try_emplace(r);
        if (inserted) {
            it->second.id = r;
            it->second.component = graph.component(v);
        }
        it->second.node_ids.push_back(v);
    }
    for (const auto& f : frontiers) {
        if (!f.region) continue;
        auto it = sg.regions.find(*f.region);
        if (it != sg.regions.end()) ++it->second.frontier_count;
    }
    for (auto& [id, region] : sg.regions)
        region.exploration_complete = region.frontier_count == 0;

    std::map<int, std::vector<double>> dijkstra_cache;
    for (const auto& [sim_id, t] : store.all()) {
        if (t.in_gripper) continue;
        Vec2 position = t.position_m;
        auto a = assign_object(position, t.best_viewpoint, graph, lambda, &dijkstra_cache);
        if (!a) continue;
        ObjectNode node;
        node.instance_id = t.instance_id;
        node.sim_id = sim_id;
        node.category = t.category;
        node.position = position;
        node.attributes = t.attributes;
        node.articulation = t.articulation;
        node.viewpoint = t.best_viewpoint;
        node.region_id = a->region;
        if (t.inside_sim)
            if (const auto* c = store.find(*t.inside_sim)) node.inside = c->instance_id;
        if (t.ontop_sim)
            if (const auto* c = store.find(*t.ontop_sim)) node.ontop = c->instance_id;
        auto rit = sg.regions.find(a->region);
        if (rit != sg.regions.end()) rit->second.object_ids.push_back(node.instance_id);
        sg.objects[node.instance_id] = std::move(node);
    }
    for (auto& [id, region] : sg.regions) std::sort(region.object_ids.begin(), region.object_ids.end());

    for (auto& [id, region] : sg.regions) {
        std::set<std::string> cats;
        for (const auto& oid : region.object_ids) cats.insert(sg.objects.at(oid).category);
        region.label = classifier(std::vector<std::string>(cats.begin(), cats.end()));
    }
    std::map<std::string, int> label_counts;
    for (auto& [id, region] : sg.regions) {
        std::string snake = region.label;
        for (auto& ch : snake)
            if (ch == ' ') ch = '_';
        region.display_name = snake + "_" + instance_suffix(label_counts[region.label]++);
    }

    if (auto nearest = closest_node(graph, robot_position))
        sg.robot_region = graph.region(*nearest);
    return sg;
}

// Restricts the planner's view to the robot's connected component. The full
// graph is kept by the caller; pruned content reappears on a later rebuild
// once connectivity is restored.
inline SceneGraph prune_unreachable(const SceneGraph& sg, const VoronoiGraph& graph,
                                    const Vec2& robot_position) {
    auto nearest = closest_node(graph, robot_position);
    if (!nearest) return sg;
    int robot_component = graph.component(*nearest);
    SceneGraph out;
    out.robot_region = sg.robot_region;
    for (const auto& [id, region] : sg.regions) {
        if (region.component != robot_component) continue;
        out.regions[id] = region;
        for (const auto& oid : region.object_ids) out.objects[oid] = sg.objects.at(oid);
    }
    return out;
}

inline json scene_graph_to_json(const SceneGraph& sg) {
    json regions = json::array();
    for (const auto& [id, region] : sg.regions) {
        json objs = json::array();
        for (const auto& oid : region.object_ids) {
            const ObjectNode& o = sg.objects.at(oid);
            json oj{{"instance_id", o.instance_id},
                    {"category", o.category},
                    {"position", {o.position.x, o.position.y}}};
            if (o.articulation != ArticulationState::NotApplicable)
                oj["articulation"] = to_string(o.articulation);
            if (o.inside) oj["inside"] = *o.inside;
            if (o.ontop) oj["ontop"] = *o.ontop;
            if (!o.attributes.empty()) oj["attributes"] = o.attributes;
            objs.push_back(oj);
        }
        regions.push_back(json{{"id", id},
                               {"label", region.label},
                               {"name", region.display_name},
                               {"component", region.component},
                               {"frontier_count", region.frontier_count},
                               {"exploration_complete", region.exploration_complete},
                               {"objects", objs}});
    }
    json j{{"regions", regions}};
    if (sg.robot_region) j["robot_region"] = *sg.robot_region;
    return j;
}

}  // namespace tidygrid
