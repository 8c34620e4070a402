#pragma once

#include "tidygrid/backend.hpp"

namespace tidygrid {

struct EpisodeOptions {
    int max_steps = 50;
    int post_completion_cap = 5;
    double sparsify_c = kDefaultSparsifyC;
    double separation_tau = kDefaultSeparationTau;
    double lambda = kDefaultAssignLambda;
    bool filter = true;
    bool refilter_each_step = true;
    int llm_retries = 2;
    double circle_radius_m = 1.0;
    int circle_samples = 16;
    std::string log_path;
    std::string scene_graph_dump_dir;  // when set, one scene-graph JSON per step
    // Test hooks: filter_observer sees (pruned scene, filtered scene) each
    // step; pipeline_observer sees the raw mapping/graph state.
    std::function<void(const SceneGraph&, const SceneGraph&)> filter_observer;
    std::function<void(int, const BevMap&, const VoronoiGraph&, const std::vector<Frontier>&)>
        pipeline_observer;
};

// One episode of the observe -> map -> graph -> filter -> plan -> execute
// loop, with the fixed termination rules: done(), the 50-step cap, or five
// high-level steps after all goal conditions are complete.
class EpisodeRunner {
public:
    EpisodeRunner(SimState& sim, const TaskSpec& task, LlmBackend& backend,
                  const EpisodeOptions& options)
        : sim_(sim),
          task_(task),
          backend_(backend),
          opt_(options),
          map_(sim.scene().width_cells, sim.scene().height_cells, sim.scene().resolution_m,
               sim.scene().free_space_categories) {}

    EpisodeRecord run() {
        EpisodeRecord record;
        record.task = task_.name;
        record.scene = sim_.scene().name;
        record.log_path = opt_.log_path;
        if (!opt_.log_path.empty()) {
            log_.open(opt_.log_path);
            if (!log_) throw std::runtime_error("cannot open episode log: " + opt_.log_path);
        }

        std::optional<int> completed_at;
        if (all_goals_satisfied()) completed_at = 0;

        Termination termination = Termination::StepCap;
        try {
            sense_and_integrate();
            initial_spin();
            while (step_ < opt_.max_steps) {
                ++step_;
                rebuild();

                MessageList messages = plan_prompt();
                std::string prompt_sha = request_hash(messages);
                SubpolicyCall call = request_plan(messages);

                bool done_called = false;
                bool success = false;
                std::string feedback = execute(call, success, done_called);
                history_.push_back({step_, call, success, feedback});
                last_feedback_ = feedback.empty() ? (success ? "success" : "failed") : feedback;

                std::vector<bool> satisfied = evaluate_goals(task_, sim_.world_relations());
                log_step(prompt_sha, call, success, feedback, satisfied);

                bool all_true =
                    std::all_of(satisfied.begin(), satisfied.end(), [](bool b) { return b; });
                if (all_true && !completed_at) completed_at = step_;
                if (done_called) {
                    termination = Termination::DoneCall;
                    break;
                }
                if (completed_at && step_ - *completed_at >= opt_.post_completion_cap) {
                    termination = Termination::PostCompletionCap;
                    break;
                }
            }
        } catch (const BackendError& e) {
            termination = Termination::Fault;
            last_fault_ = e.what();
            if (log_.is_open()) {
                log_ << json{{"fault", e.what()}, {"step", step_}}.dump() << "\n";
            }
        }

        record.steps = step_;
        record.terminated_by = termination;
        RelationSet rels = sim_.world_relations();
        record.satisfied = evaluate_goals(task_, rels);
        std::set<std::string> seen = store_.observed_ids();
        for (const auto& goal : task_.goal_conditions) {
            bool all_seen = true;
            for (const auto& id : goal.referenced_objects(rels))
                if (!seen.count(id)) all_seen = false;
            record.observed.push_back(all_seen);
        }
        return record;
    }

    const std::string& last_fault() const { return last_fault_; }

private:
    // --- perception ---

    void sense_and_integrate() {
        Observation obs = sim_.sense();
        map_.integrate(obs, step_);
        store_.integrate(obs, step_, sim_.resolution());
    }

    void turn_by(double delta) {
        MotionKind kind = delta >= 0 ? MotionKind::TurnLeft : MotionKind::TurnRight;
        sim_.step_motion({kind, std::min(std::abs(delta), kMaxTurnRad)});
    }

    void initial_spin() {
        double spun = 0.0;
        while (spun < 2.0 * kPi) {
            turn_by(kMaxTurnRad);
            spun += kMaxTurnRad;
            sense_and_integrate();
        }
    }

    bool rotate_towards(const Vec2& target) {
        for (int guard = 0; guard < 16; ++guard) {
            Vec2 d = target - sim_.robot().position;
            if (d.norm() < 1e-9) return true;
            double want = wrap_angle(std::atan2(d.y, d.x));
            double delta = want - sim_.robot().heading;
            while (delta > kPi) delta -= 2.0 * kPi;
            while (delta < -kPi) delta += 2.0 * kPi;
            if (std::abs(delta) < 1e-6) return true;
            turn_by(delta);
        }
        return true;
    }

    // Walks the path with bounded turns and forward steps, sensing after
    // every move so the map grows along the way.
    bool follow_path(const std::vector<Cell>& path, std::string& why) {
        const double tolerance = 0.045;
        int budget = static_cast<int>(path.size()) * 40 + 200;
        for (size_t i = 1; i < path.size(); ++i) {
            Vec2 waypoint = cell_center(path[i], sim_.resolution());
            while (distance(sim_.robot().position, waypoint) > tolerance) {
                if (--budget < 0) {
                    why = "motion timeout";
                    return false;
                }
                rotate_towards(waypoint);
                ActionResult r = sim_.step_motion({MotionKind::Forward, 0.0});
                if (!r.success) {
                    sense_and_integrate();
                    why = r.feedback;
                    return false;
                }
                sense_and_integrate();
            }
        }
        return true;
    }

    Cell robot_cell() const { return point_to_cell(sim_.robot().position, sim_.resolution()); }

    // --- per-step pipeline ---

    std::string classify_cached(const std::vector<std::string>& categories) {
        auto it = room_cache_.find(categories);
        if (it != room_cache_.end()) return it->second;
        std::string label = classify_region(categories, backend_);
        room_cache_[categories] = label;
        return label;
    }

    void rebuild() {
        Esdf esdf = compute_esdf(map_);
        graph_ = extract_gvd(esdf, map_);
        sparsify(graph_, opt_.sparsify_c);
        auto kernels = build_door_kernels(map_.observed_doors(), map_.resolution());
        separate_regions(graph_, kernels, opt_.separation_tau, map_.resolution());
        frontiers_ = find_frontiers(map_);
        label_frontiers(frontiers_, graph_, map_.resolution());
        if (opt_.pipeline_observer) opt_.pipeline_observer(step_, map_, graph_, frontiers_);

        auto classifier = [this](const std::vector<std::string>& cats) {
            return classify_cached(cats);
        };
        full_sg_ = update_scene_graph(store_, graph_, frontiers_, sim_.robot().position,
                                      classifier, opt_.lambda);
        pruned_sg_ = prune_unreachable(full_sg_, graph_, sim_.robot().position);

        view_sg_ = pruned_sg_;
        if (opt_.filter) {
            if (opt_.refilter_each_step || !sticky_keep_) {
                view_sg_ = filtered_view();
            } else {
                view_sg_ = apply_filter(pruned_sg_, *sticky_keep_);
            }
            if (opt_.filter_observer) opt_.filter_observer(pruned_sg_, view_sg_);
        }
        if (!opt_.scene_graph_dump_dir.empty()) {
            std::ofstream f(opt_.scene_graph_dump_dir + "/scene_step_" + std::to_string(step_) +
                            ".json");
            f << scene_graph_to_json(view_sg_).dump(2) << "\n";
        }
    }

    SceneGraph filtered_view() {
        std::string scene_text = serialize_scene(pruned_sg_);
        MessageList messages = build_filter_prompt(scene_text, description());
        for (int attempt = 0; attempt <= opt_.llm_retries; ++attempt) {
            std::string reply = backend_.complete(messages);
            KeepSet keep;
            std::vector<std::string> dropped;
            if (parse_filter_response(reply, pruned_sg_, keep, &dropped) == ParseStatus::Ok) {
                sticky_keep_ = keep;
                return apply_filter(pruned_sg_, keep);
            }
            messages.push_back({"user",
                                "Reply with one line per room: room_name: object_id, object_id"});
        }
        return pruned_sg_;  // filtering is an optimization, never a gate
    }

    std::string description() const { return substitute_description(task_, store_); }

    std::string robot_room_name() const {
        if (view_sg_.robot_region) {
            auto it = view_sg_.regions.find(*view_sg_.robot_region);
            if (it != view_sg_.regions.end()) return it->second.display_name;
        }
        if (full_sg_.robot_region) {
            auto it = full_sg_.regions.find(*full_sg_.robot_region);
            if (it != full_sg_.regions.end()) return it->second.display_name;
        }
        return "unknown_room_A";
    }

    MessageList plan_prompt() const {
        std::optional<std::string> held;
        if (sim_.robot().gripper)
            if (const TrackedObject* t = store_.find(*sim_.robot().gripper))
                held = t->instance_id;
        return build_plan_prompt(serialize_scene(view_sg_), robot_room_name(), held, description(),
                                 history_, last_feedback_);
    }

    SubpolicyCall request_plan(MessageList messages) {
        for (int attempt = 0; attempt <= opt_.llm_retries; ++attempt) {
            std::string reply = backend_.complete(messages);
            if (auto call = parse_plan_response(reply)) return *call;
            messages.push_back(
                {"user", "Reply with exactly one subpolicy call such as explore(room_name)."});
        }
        throw BackendError("planner produced no parseable subpolicy call after retries");
    }

    // --- subpolicies ---

    const RegionNode* resolve_room(const std::string& name) const {
        if (const RegionNode* r = view_sg_.region_by_name(name)) return r;
        return full_sg_.region_by_name(name);
    }

    const TrackedObject* resolve_object(const std::string& instance) const {
        return store_.find_by_instance(instance);
    }

    std::string execute(const SubpolicyCall& call, bool& success, bool& done_called) {
        success = false;
        if (call.name == "done") {
            done_called = true;
            success = true;
            return "";
        }
        if (call.name == "explore") return explore(call.room.value_or(""), success);

        const RegionNode* room = resolve_room(call.room.value_or(""));
        const TrackedObject* target = resolve_object(call.object.value_or(""));
        if (!room && !full_sg_.regions.empty())
            return "unknown target: " + call.room.value_or("");
        if (!target) return "unknown target: " + call.object.value_or("");

        if (call.name == "navigate") return navigate_to(*target, success);
        return go_to_and(call.name, *target, success);
    }

    std::string explore(const std::string& room_name, bool& success) {
        std::vector<const Frontier*> candidates;
        if (full_sg_.regions.empty()) {
            for (const auto& f : frontiers_) candidates.push_back(&f);
        } else {
            const RegionNode* room = resolve_room(room_name);
            if (!room) return "unknown target: " + room_name;
            for (const auto& f : frontiers_)
                if (f.region && *f.region == room->id) candidates.push_back(&f);
        }
        if (candidates.empty()) return "region fully explored";

        Grid<double> costs = dijkstra_costs(map_, robot_cell());
        const Frontier* best_frontier = nullptr;
        Cell best_cell;
        double best_cost = kInfiniteDistance;
        for (const Frontier* f : candidates)
            for (const Cell& c : f->cells) {
                double cost = costs.at(c);
                if (cost < best_cost) {
                    best_cost = cost;
                    best_cell = c;
                    best_frontier = f;
                }
            }
        if (!best_frontier) return "no path";

        auto path = plan_path(map_, robot_cell(), best_cell);
        if (!path) return "no path";
        std::string why;
        if (!follow_path(*path, why)) return why;
        initial_spin();  // look around at the frontier
        success = true;
        return "";
    }

    std::string navigate_to(const TrackedObject& target, bool& success) {
        auto node = closest_node(graph_, target.position_m);
        if (!node) return "no path";
        Cell goal = point_to_cell(graph_.node(*node).position, sim_.resolution());
        auto path = plan_path(map_, robot_cell(), goal);
        if (!path) return "no path";
        std::string why;
        if (!follow_path(*path, why)) return why;
        rotate_towards(target.position_m);
        sense_and_integrate();
        success = true;
        return "arrived at " + target.instance_id;
    }

    // Reachable circle samples around the target, cheapest first; samples
    // with a fully observed clear sightline outrank optimistic ones.
    std::vector<Cell> approach_candidates(const TrackedObject& target,
                                          const std::set<Cell>& footprint) const {
        Grid<double> costs = dijkstra_costs(map_, robot_cell());
        std::vector<std::tuple<int, double, size_t, Cell>> ranked;
        for (int k = 0; k < opt_.circle_samples; ++k) {
            double angle = 2.0 * kPi * k / opt_.circle_samples;
            Vec2 p = target.position_m + Vec2{std::cos(angle), std::sin(angle)} * opt_.circle_radius_m;
            Cell c = point_to_cell(p, sim_.resolution());
            if (!map_.in_bounds(c) || !map_.free(c)) continue;
            Vec2 center = cell_center(c, sim_.resolution());
            if (!map_.sight_clear(center, target.position_m, footprint)) continue;
            double cost = costs.at(c);
            if (cost == kInfiniteDistance) continue;
            bool certain = map_.sight_clear(center, target.position_m, footprint, false);
            ranked.emplace_back(certain ? 0 : 1, cost, costs.index(c), c);
        }
        std::sort(ranked.begin(), ranked.end());
        std::vector<Cell> out;
        for (const auto& [tier, cost, idx, c] : ranked) out.push_back(c);
        return out;
    }

    std::string go_to_and(const std::string& name, const TrackedObject& target, bool& success) {
        MagicVerb verb = MagicVerb::Open;
        if (name == "go_to_and_open") verb = MagicVerb::Open;
        else if (name == "go_to_and_close") verb = MagicVerb::Close;
        else if (name == "go_to_and_grasp") verb = MagicVerb::Grasp;
        else if (name == "go_to_and_place_inside") verb = MagicVerb::PlaceInside;
        else if (name == "go_to_and_place_ontop") verb = MagicVerb::PlaceOntop;

        std::set<Cell> footprint = map_.door_footprint(target.sim_id);
        footprint.insert(target.cell);
        double dist = distance(sim_.robot().position, target.position_m);
        bool in_position =
            dist <= kReachRadiusM &&
            map_.sight_clear(sim_.robot().position, target.position_m, footprint, false);

        std::string held_before = sim_.robot().gripper.value_or("");
        ActionResult r;
        std::string last_failure = "no path";
        for (int attempt = 0; attempt < 4; ++attempt) {
            if (!in_position) {
                auto candidates = approach_candidates(target, footprint);
                if (static_cast<size_t>(attempt) >= candidates.size()) break;
                auto path = plan_path(map_, robot_cell(), candidates[attempt]);
                if (!path) {
                    last_failure = "no path";
                    continue;
                }
                std::string why;
                if (!follow_path(*path, why)) {
                    last_failure = why;
                    continue;
                }
            }
            rotate_towards(target.position_m);
            sense_and_integrate();
            r = sim_.magic_interact(verb, target.sim_id);
            if (r.success) break;
            last_failure = r.feedback;
            // A blocked sightline means the sample was bad, not the action;
            // fall through to the next sample.
            if (r.feedback.rfind("no line of sight", 0) != 0 && r.feedback != "too far") break;
            in_position = false;
        }
        if (!r.success) return last_failure;

        switch (verb) {
            case MagicVerb::Open:
                store_.apply_articulation(target.sim_id, true);
                break;
            case MagicVerb::Close:
                store_.apply_articulation(target.sim_id, false);
                break;
            case MagicVerb::Grasp:
                store_.apply_grasp(target.sim_id);
                break;
            case MagicVerb::PlaceInside:
                store_.apply_place(held_before, target.sim_id, true);
                break;
            case MagicVerb::PlaceOntop:
                store_.apply_place(held_before, target.sim_id, false);
                break;
        }
        sense_and_integrate();
        success = true;
        return "";
    }

    // --- bookkeeping ---

    bool all_goals_satisfied() const {
        auto flags = evaluate_goals(task_, sim_.world_relations());
        return std::all_of(flags.begin(), flags.end(), [](bool b) { return b; });
    }

    void log_step(const std::string& prompt_sha, const SubpolicyCall& call, bool success,
                  const std::string& feedback, const std::vector<bool>& satisfied) {
        if (!log_.is_open()) return;
        json args = json::array();
        if (call.room) args.push_back(*call.room);
        if (call.object) args.push_back(*call.object);
        log_ << json{{"step", step_},
                     {"prompt_sha256", prompt_sha},
                     {"subpolicy", call.name},
                     {"args", args},
                     {"success", success},
                     {"feedback", feedback},
                     {"satisfied_flags", satisfied},
                     {"robot_room", robot_room_name()}}
                    .dump()
             << "\n";
    }

    SimState& sim_;
    const TaskSpec& task_;
    LlmBackend& backend_;
    EpisodeOptions opt_;
    BevMap map_;
    ObjectStore store_;
    VoronoiGraph graph_;
    std::vector<Frontier> frontiers_;
    SceneGraph full_sg_;
    SceneGraph pruned_sg_;
    SceneGraph view_sg_;
    std::vector<HistoryEntry> history_;
    std::optional<KeepSet> sticky_keep_;
    std::string last_feedback_;
    std::string last_fault_;
    std::map<std::vector<std::string>, std::string> room_cache_;
    std::ofstream log_;
    int step_ = 0;
};

inline EpisodeRecord run_episode(SimState& sim, const TaskSpec& task, LlmBackend& backend,
                                 const EpisodeOptions& options = {}) {
    EpisodeRunner runner(sim, task, backend, options);
    EpisodeRecord record = runner.run();
    return record;
}

// Run-scoped configuration; defaults reproduce the benchmark constants
// (50-step cap, 5 post-completion steps, lambda 1.3, 0.075 m cells).
struct RunConfig {
    std::string scene_path;
    std::vector<std::string> task_paths;
    std::string suite;  // "bundled" or empty
    std::string backend = "rules";
    std::string transcript_path;       // oracle input
    std::string record_transcript;     // capture path
    uint64_t seed = 0;
    int max_steps = 50;
    int post_completion_cap = 5;
    double sparsify_c = kDefaultSparsifyC;
    double separation_tau = kDefaultSeparationTau;
    double lambda = kDefaultAssignLambda;
    bool filter = true;
    std::string out_dir = "out";
    int parallelism = 1;

    json to_json() const {
        return json{{"scene", scene_path},
                    {"tasks", task_paths},
                    {"suite", suite},
                    {"backend", backend},
                    {"transcript", transcript_path},
                    {"record_transcript", record_transcript},
                    {"seed", seed},
                    {"max_steps", max_steps},
                    {"post_completion_cap", post_completion_cap},
                    {"c", sparsify_c},
                    {"tau", separation_tau},
                    {"lambda", lambda},
                    {"filter", filter},
                    {"out", out_dir},
                    {"parallelism", parallelism}};
    }

    static RunConfig from_json(const json& j) {
        RunConfig c;
        c.scene_path = j.value("scene", std::string());
        c.task_paths = j.value("tasks", std::vector<std::string>());
        c.suite = j.value("suite", std::string());
        c.backend = j.value("backend", std::string("rules"));
        c.transcript_path = j.value("transcript", std::string());
        c.record_transcript = j.value("record_transcript", std::string());
        c.seed = j.value("seed", 0ULL);
        c.max_steps = j.value("max_steps", 50);
        c.post_completion_cap = j.value("post_completion_cap", 5);
        c.sparsify_c = j.value("c", kDefaultSparsifyC);
        c.separation_tau = j.value("tau", kDefaultSeparationTau);
        c.lambda = j.value("lambda", kDefaultAssignLambda);
        c.filter = j.value("filter", true);
        c.out_dir = j.value("out", std::string("out"));
        c.parallelism = j.value("parallelism", 1);
        return c;
    }

    bool operator==(const RunConfig&) const = default;
};

}  // namespace tidygrid
