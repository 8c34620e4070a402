#pragma once

#include <fstream>

#include <openssl/evp.h>

#include "tidygrid/language.hpp"

namespace tidygrid {

class BackendError : public std::runtime_error {
public:
    explicit BackendError(const std::string& what) : std::runtime_error(what) {}
};

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

inline std::string request_hash(const MessageList& messages) {
    return sha256_hex(messages_to_json(messages).dump());
}

class LlmBackend {
public:
    enum class Slot { Main, Aux };

    virtual ~LlmBackend() = default;
    virtual std::string complete(const MessageList& messages, Slot slot = Slot::Main) = 0;
    virtual std::string kind() const = 0;
};

// Replays a recorded transcript keyed by the request hash; no network.
class OracleBackend : public LlmBackend {
public:
    explicit OracleBackend(const std::string& transcript_path) {
        std::ifstream f(transcript_path);
        if (!f) throw BackendError("cannot open transcript: " + transcript_path);
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            replies_[j.at("request_hash").get<std::string>()] = j.at("reply").get<std::string>();
        }
    }

    std::string complete(const MessageList& messages, Slot) override {
        std::string hash = request_hash(messages);
        auto it = replies_.find(hash);
        if (it == replies_.end())
            throw BackendError("oracle transcript has no entry for request hash " + hash);
        return it->second;
    }
    std::string kind() const override { return "oracle_script"; }

private:
    std::map<std::string, std::string> replies_;
};

// Wraps another backend and appends every (hash, reply) pair to a JSONL
// transcript that OracleBackend can replay.
class RecordingBackend : public LlmBackend {
public:
    RecordingBackend(LlmBackend& inner, const std::string& transcript_path)
        : inner_(inner), out_(transcript_path) {
        if (!out_) throw BackendError("cannot write transcript: " + transcript_path);
    }

    std::string complete(const MessageList& messages, Slot slot) override {
        std::string reply = inner_.complete(messages, slot);
        std::string hash = request_hash(messages);
        if (seen_.insert(hash).second) {
            out_ << json{{"request_hash", hash}, {"reply", reply}}.dump() << "\n";
            out_.flush();
        }
        return reply;
    }
    std::string kind() const override { return inner_.kind(); }

private:
    LlmBackend& inner_;
    std::ofstream out_;
    std::set<std::string> seen_;
};

namespace rules {

struct ParsedObject {
    std::string instance;
    std::string category;
    bool open = false;
    bool closed = false;
    std::string inside;
    std::string ontop;
};

struct ParsedRegion {
    std::string name;
    std::vector<ParsedObject> objects;
    int unexplored = 0;
};

struct ParsedScene {
    std::vector<ParsedRegion> regions;

    const ParsedObject* find(const std::string& instance) const {
        for (const auto& r : regions)
            for (const auto& o : r.objects)
                if (o.instance == instance) return &o;
        return nullptr;
    }
    std::string region_of(const std::string& instance) const {
        for (const auto& r : regions)
            for (const auto& o : r.objects)
                if (o.instance == instance) return r.name;
        return "";
    }
    std::vector<const ParsedObject*> instances_of(const std::string& category) const {
        std::vector<const ParsedObject*> out;
        for (const auto& r : regions)
            for (const auto& o : r.objects)
                if (o.category == category) out.push_back(&o);
        std::sort(out.begin(), out.end(), [](const ParsedObject* a, const ParsedObject* b) {
            return a->instance < b->instance;
        });
        return out;
    }
};

inline std::string instance_category(const std::string& instance) {
    auto pos = instance.find_last_of('_');
    if (pos == std::string::npos) return instance;
    for (size_t i = pos + 1; i < instance.size(); ++i)
        if (instance[i] < 'A' || instance[i] > 'Z') return instance;
    return instance.substr(0, pos);
}

// Re-reads the strict scene rendering out of a prompt.
inline ParsedScene parse_scene_text(const std::string& text) {
    ParsedScene scene;
    std::istringstream is(text);
    std::string line;
    bool in_scene = false;
    while (std::getline(is, line)) {
        if (!in_scene) {
            if (line == "Scene:") in_scene = true;
            continue;
        }
        if (line.rfind("- ", 0) == 0) {
            scene.regions.push_back({line.substr(2), {}, 0});
            continue;
        }
        if (scene.regions.empty()) break;
        if (line.rfind("  - ", 0) == 0) {
            ParsedObject o;
            std::string rest = line.substr(4);
            auto space = rest.find(' ');
            o.instance = rest.substr(0, space == std::string::npos ? rest.size() : space);
            o.category = instance_category(o.instance);
            auto lb = rest.find('[');
            if (lb != std::string::npos) {
                auto rb = rest.find(']', lb);
                std::string attrs = rest.substr(lb + 1, rb - lb - 1);
                o.open = attrs.find("open") != std::string::npos;
                o.closed = attrs.find("closed") != std::string::npos;
            }
            auto grab = [&](const std::string& tag) -> std::string {
                auto p = rest.find("(" + tag + ": ");
                if (p == std::string::npos) return "";
                auto start = p + tag.size() + 3;
                auto end = rest.find(')', start);
                return rest.substr(start, end - start);
            };
            o.inside = grab("inside");
            o.ontop = grab("ontop");
            scene.regions.back().objects.push_back(std::move(o));
            continue;
        }
        if (auto p = line.find("unexplored areas: "); p != std::string::npos) {
            scene.regions.back().unexplored = std::stoi(line.substr(p + 18));
            continue;
        }
        if (line.rfind("  objects", 0) == 0) continue;
        if (line.empty()) break;
        break;
    }
    return scene;
}

}  // namespace rules

// Deterministic scripted backend: answers filter prompts with the
// goal-referenced categories (plus doors), classification prompts with the
// keyword table, and plan prompts with a fixed achiever that explores
// first, opens closed targets before grasping, and calls done() once every
// observed goal condition holds and no task-relevant frontier remains.
class RulesBackend : public LlmBackend {
public:
    explicit RulesBackend(TaskSpec task) : task_(std::move(task)) {}

    std::string complete(const MessageList& messages, Slot) override {
        if (messages.empty()) throw BackendError("rules backend: empty prompt");
        const std::string& system = messages.front().content;
        const std::string& user = messages.back().content;
        if (system.find("scene filter") != std::string::npos) return filter_reply(user);
        if (system.find("task planner") != std::string::npos) return plan_reply(user);
        if (system.find("label rooms") != std::string::npos) return classify_reply(user);
        throw BackendError("rules backend: unrecognized prompt");
    }
    std::string kind() const override { return "rules"; }

private:
    std::string filter_reply(const std::string& user) const {
        rules::ParsedScene scene = rules::parse_scene_text(user);
        std::set<std::string> keep_categories = task_.relevant_categories;
        keep_categories.insert("door");
        std::ostringstream out;
        for (const auto& region : scene.regions) {
            std::vector<std::string> kept;
            for (const auto& o : region.objects)
                if (keep_categories.count(o.category)) kept.push_back(o.instance);
            if (!kept.empty()) {
                out << region.name << ": ";
                for (size_t i = 0; i < kept.size(); ++i) out << (i ? ", " : "") << kept[i];
                out << "\n";
            } else if (region.unexplored > 0) {
                out << region.name << "\n";
            }
        }
        std::string text = out.str();
        return text.empty() ? scene.regions.empty() ? "unknown_room_A" : scene.regions[0].name
                            : text;
    }

    std::string classify_reply(const std::string& user) const {
        std::vector<std::string> categories;
        auto p = user.find("region: ");
        if (p != std::string::npos) {
            auto end = user.find('\n', p);
            std::string list = user.substr(p + 8, end - p - 8);
            std::istringstream is(list);
            std::string item;
            while (std::getline(is, item, ',')) {
                size_t a = item.find_first_not_of(' ');
                size_t b = item.find_last_not_of(' ');
                if (a != std::string::npos) {
                    std::string cat = item.substr(a, b - a + 1);
                    if (cat != "(none)") categories.push_back(cat);
                }
            }
        }
        return rules_room_label(categories);
    }

    struct PromptState {
        rules::ParsedScene scene;
        std::optional<std::string> holding;
        std::set<std::string> failed;  // rendered calls that already failed
    };

    static PromptState read_prompt(const std::string& user) {
        PromptState st;
        st.scene = rules::parse_scene_text(user);
        auto hp = user.find("Robot status: in ");
        if (hp != std::string::npos) {
            auto line_end = user.find('\n', hp);
            std::string line = user.substr(hp, line_end - hp);
            auto hold = line.find("holding ");
            if (hold != std::string::npos) {
                std::string inst = line.substr(hold + 8);
                while (!inst.empty() && (inst.back() == '.' || inst.back() == ' ')) inst.pop_back();
                st.holding = inst;
            }
        }
        auto fp = user.find("Previously failed actions:");
        if (fp != std::string::npos) {
            std::istringstream is(user.substr(fp));
            std::string line;
            std::getline(is, line);
            while (std::getline(is, line) && !line.empty()) {
                if (auto call = parse_plan_response(line)) st.failed.insert(call->render());
            }
        }
        return st;
    }

    // Candidate actions are dropped when they already failed; the planner
    // then falls through to the next rule.
    std::optional<std::string> propose(const PromptState& st, const SubpolicyCall& call) const {
        std::string rendered = call.render();
        if (st.failed.count(rendered)) return std::nullopt;
        return rendered;
    }

    std::optional<std::string> resolve_target(const PromptState& st, const std::string& sim_id,
                                              std::string* category_out = nullptr) const {
        auto cat = task_.bound_categories.find(sim_id);
        if (cat == task_.bound_categories.end()) return std::nullopt;
        if (category_out) *category_out = cat->second;
        auto instances = st.scene.instances_of(cat->second);
        if (instances.empty()) {
            if (st.holding && rules::instance_category(*st.holding) == cat->second)
                return *st.holding;
            return std::nullopt;
        }
        return instances.front()->instance;
    }

    bool instance_satisfies(const PromptState& st, const std::string& instance,
                            const std::string& pred, const std::string& target_instance) const {
        if (st.holding && *st.holding == instance) return false;
        const rules::ParsedObject* o = st.scene.find(instance);
        if (!o) return false;
        if (pred == "open") return o->open;
        if (pred == "closed") return o->closed;
        if (pred == "inside") return o->inside == target_instance;
        if (pred == "ontop") return o->ontop == target_instance;
        return false;
    }

    // Next manipulation for a goal instance, honoring the open-before-place
    // gate; nullopt when the goal needs no action or cannot proceed yet.
    std::optional<std::string> manipulation_for(const PromptState& st, const std::string& pred,
                                                const std::string& instance,
                                                const std::string& target_instance) const {
        const rules::ParsedObject* target = st.scene.find(target_instance);
        if (!target) return std::nullopt;
        std::string target_region = st.scene.region_of(target_instance);
        if (pred == "inside" && target->closed) {
            if (st.holding) return std::nullopt;  // must open first, arm is busy
            return propose(st, {"go_to_and_open", target_region, target_instance});
        }
        if (st.holding && *st.holding == instance) {
            std::string verb = pred == "inside" ? "go_to_and_place_inside" : "go_to_and_place_ontop";
            return propose(st, {verb, target_region, target_instance});
        }
        if (st.holding) return std::nullopt;  // place the held object first
        const rules::ParsedObject* obj = st.scene.find(instance);
        if (!obj) return std::nullopt;
        return propose(st, {"go_to_and_grasp", st.scene.region_of(instance), instance});
    }

    std::string plan_reply(const std::string& user) const {
        PromptState st = read_prompt(user);

        bool any_forall = false;
        bool any_unobserved = false;
        bool all_satisfied = true;
        std::vector<std::string> actions;

        for (const auto& goal : task_.goal_conditions) {
            if (goal.kind == GoalCondition::Kind::ForAllCategory) {
                any_forall = true;
                std::string target_instance;
                if (!goal.target.empty()) {
                    auto t = resolve_target(st, goal.target);
                    if (!t) {
                        any_unobserved = true;
                        all_satisfied = false;
                        continue;
                    }
                    target_instance = *t;
                }
                std::vector<std::string> members;
                for (const auto* o : st.scene.instances_of(goal.category))
                    members.push_back(o->instance);
                if (st.holding && rules::instance_category(*st.holding) == goal.category)
                    members.push_back(*st.holding);
                for (const auto& inst : members) {
                    if (inst == target_instance) continue;
                    if (instance_satisfies(st, inst, goal.pred, target_instance)) continue;
                    all_satisfied = false;
                    if (auto a = manipulation_for(st, goal.pred, inst, target_instance))
                        actions.push_back(*a);
                }
            } else {
                std::string pred = goal.pred;
                auto a0 = resolve_target(st, goal.args[0]);
                if (!a0) {
                    any_unobserved = true;
                    all_satisfied = false;
                    continue;
                }
                if (!predicate_is_binary(pred)) {
                    if (instance_satisfies(st, *a0, pred, "")) continue;
                    all_satisfied = false;
                    if (st.holding) continue;
                    std::string verb = pred == "open" ? "go_to_and_open" : "go_to_and_close";
                    if (auto a = propose(st, {verb, st.scene.region_of(*a0), *a0}))
                        actions.push_back(*a);
                    continue;
                }
                auto b0 = resolve_target(st, goal.args[1]);
                if (!b0) {
                    any_unobserved = true;
                    all_satisfied = false;
                    continue;
                }
                if (instance_satisfies(st, *a0, pred, *b0)) continue;
                all_satisfied = false;
                if (auto a = manipulation_for(st, pred, *a0, *b0)) actions.push_back(*a);
            }
        }

        bool frontiers_left = false;
        for (const auto& r : st.scene.regions)
            if (r.unexplored > 0) frontiers_left = true;
        std::vector<std::string> closed_doors;
        for (const auto& r : st.scene.regions)
            for (const auto& o : r.objects)
                if (o.category == "door" && o.closed)
                    closed_doors.push_back("go_to_and_open(" + r.name + ", " + o.instance + ")");

        bool search_needed = (any_forall || any_unobserved) && (frontiers_left || !closed_doors.empty());

        if (all_satisfied && !(any_forall && (frontiers_left || !closed_doors.empty())))
            return "done()";

        // Put a held object down before anything else; the matching place
        // action is always first in `actions` when one exists.
        if (st.holding && !actions.empty()) return actions.front();

        if (search_needed && !st.holding) {
            if (frontiers_left) {
                for (const auto& r : st.scene.regions) {
                    if (r.unexplored == 0) continue;
                    if (auto a = propose(st, {"explore", r.name, std::nullopt})) return *a;
                }
            }
            for (const auto& d : closed_doors)
                if (!st.failed.count(d)) return d;
        }

        for (const auto& a : actions) return a;

        // Nothing actionable is left; closing the episode beats dithering.
        return "done()";
    }

    TaskSpec task_;
};

// Room classification through any backend: aux model slot, one retry on an
// unparseable reply, then the neutral fallback label.
inline std::string classify_region(const std::vector<std::string>& categories,
                                   LlmBackend& backend) {
    MessageList messages = build_classify_prompt(categories);
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply = backend.complete(messages, LlmBackend::Slot::Aux);
        if (auto label = parse_room_reply(reply)) return *label;
        messages.push_back({"user", "Answer with exactly one label from the list."});
    }
    return "room";
}

}  // namespace tidygrid
