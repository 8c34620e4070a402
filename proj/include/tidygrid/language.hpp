#pragma once

#include <sstream>

#include "tidygrid/scenegraph.hpp"
#include "tidygrid/taskspec.hpp"

namespace tidygrid {

struct Message {
    std::string role;
    std::string content;
};
using MessageList = std::vector<Message>;

inline json messages_to_json(const MessageList& messages) {
    json arr = json::array();
    for (const auto& m : messages) arr.push_back(json{{"role", m.role}, {"content", m.content}});
    return arr;
}

// --- scene serialization ---

namespace detail {

inline std::string object_line(const ObjectNode& o, bool attrs, bool rels) {
    std::string line = "  - " + o.instance_id;
    if (attrs) {
        std::vector<std::string> parts;
        if (o.articulation == ArticulationState::Open) parts.push_back("open");
        if (o.articulation == ArticulationState::Closed) parts.push_back("closed");
        for (const auto& [k, v] : o.attributes) parts.push_back(k + "=" + v);
        if (!parts.empty()) {
            line += " [";
            for (size_t i = 0; i < parts.size(); ++i) line += (i ? ", " : "") + parts[i];
            line += "]";
        }
    }
    if (rels) {
        if (o.inside) line += " (inside: " + *o.inside + ")";
        if (o.ontop) line += " (ontop: " + *o.ontop + ")";
    }
    return line;
}

}  // namespace detail

// Deterministic structured-text rendering of the (possibly filtered) scene
// graph: one section per region in id order, objects in instance-id order,
// one unexplored-areas line per region.
inline std::string serialize_scene(const SceneGraph& sg, bool include_attributes = true,
                                   bool include_relations = true) {
    std::ostringstream os;
    os << "Scene:\n";
    if (sg.regions.empty()) {
        os << "- unknown_room_A\n";
        os << "  objects: none\n";
        os << "  unexplored areas: 1\n";
        return os.str();
    }
    for (const auto& [id, region] : sg.regions) {
        os << "- " << region.display_name << "\n";
        if (region.object_ids.empty()) {
            os << "  objects: none\n";
        } else {
            os << "  objects:\n";
            for (const auto& oid : region.object_ids)
                os << detail::object_line(sg.objects.at(oid), include_attributes, include_relations)
                   << "\n";
        }
        os << "  unexplored areas: " << region.frontier_count << "\n";
    }
    return os.str();
}

// Task description with $-variables substituted: bound objects render as
// their instance id once observed, otherwise as an honest placeholder.
inline std::string substitute_description(const TaskSpec& task, const ObjectStore& store) {
    const std::string& tmpl = task.description_template;
    std::string out;
    for (size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] != '$') {
            out.push_back(tmpl[i]);
            continue;
        }
        size_t j = i + 1;
        while (j < tmpl.size() &&
               (std::isalnum(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_' || tmpl[j] == '.'))
            ++j;
        std::string var = tmpl.substr(i + 1, j - i - 1);
        auto it = task.bindings.find(var);
        if (it == task.bindings.end()) {
            out.push_back('$');
        } else if (const TrackedObject* t = store.find(it->second)) {
            out += t->instance_id;
        } else {
            auto cat = task.bound_categories.find(it->second);
            out += "the " + (cat != task.bound_categories.end() ? cat->second : var) +
                   " (not yet found)";
        }
        i = j - 1;
    }
    return out;
}

// --- filter prompt ---

inline MessageList build_filter_prompt(const std::string& scene_text, const std::string& task) {
    if (task.empty()) throw std::invalid_argument("build_filter_prompt: empty task text");
    MessageList messages;
    messages.push_back(
        {"system",
         "You are a scene filter for a household robot. You shorten scene descriptions by "
         "keeping only what matters for the current task."});
    std::ostringstream user;
    user << "Task: " << task << "\n\n";
    user << scene_text << "\n";
    user << "Keep every object the robot may need while completing the task, and every object "
            "that could help find task-relevant objects or point to unexplored parts of the "
            "scene. Drop everything else.\n";
    user << "Respond with one line per room you keep, formatted as\n";
    user << "room_name: object_id, object_id\n";
    user << "Write a room name alone to keep the room only for exploration. Use only names that "
            "appear in the scene.\n";
    messages.push_back({"user", user.str()});
    return messages;
}

struct KeepSet {
    std::set<std::string> regions;  // display names
    std::set<std::string> objects;  // instance ids
};

enum class ParseStatus { Ok, Retry };

// Strict line parse of the filter reply. Names that do not exist in the
// graph are dropped (and reported); a reply with no recognizable line asks
// for a retry.
inline ParseStatus parse_filter_response(const std::string& reply, const SceneGraph& sg,
                                         KeepSet& out, std::vector<std::string>* dropped = nullptr) {
    out = KeepSet{};
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    bool any_line = false;
    std::istringstream is(reply);
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty()) continue;
        if (line.rfind("- ", 0) == 0) line = trim(line.substr(2));
        std::string region_name = line;
        std::string rest;
        auto colon = line.find(':');
        if (colon != std::string::npos) {
            region_name = trim(line.substr(0, colon));
            rest = line.substr(colon + 1);
        }
        const RegionNode* region = sg.region_by_name(region_name);
        if (!region) {
            if (dropped) dropped->push_back("region '" + region_name + "'");
            continue;
        }
        any_line = true;
        out.regions.insert(region->display_name);
        std::istringstream items(rest);
        std::string item;
        while (std::getline(items, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            if (sg.objects.count(item))
                out.objects.insert(item);
            else if (dropped)
                dropped->push_back("object '" + item + "'");
        }
    }
    return any_line ? ParseStatus::Ok : ParseStatus::Retry;
}

// Induced subgraph of the keep set. Regions with frontiers are always
// retained so exploration stays possible.
inline SceneGraph apply_filter(const SceneGraph& sg, const KeepSet& keep) {
    SceneGraph out;
    out.robot_region = sg.robot_region;
    for (const auto& [id, region] : sg.regions) {
        bool has_kept_object = false;
        for (const auto& oid : region.object_ids)
            if (keep.objects.count(oid)) has_kept_object = true;
        bool retain = has_kept_object || keep.regions.count(region.display_name) ||
                      region.frontier_count > 0;
        if (!retain) continue;
        RegionNode copy = region;
        copy.object_ids.clear();
        for (const auto& oid : region.object_ids) {
            if (!keep.objects.count(oid)) continue;
            copy.object_ids.push_back(oid);
            out.objects[oid] = sg.objects.at(oid);
        }
        out.regions[id] = std::move(copy);
    }
    return out;
}

// --- plan prompt ---

struct SubpolicyCall {
    std::string name;
    std::optional<std::string> room;
    std::optional<std::string> object;

    std::string render() const {
        if (name == "done") return "done()";
        if (name == "explore") return "explore(" + room.value_or("?") + ")";
        return name + "(" + room.value_or("?") + ", " + object.value_or("?") + ")";
    }
};

struct HistoryEntry {
    int step = 0;
    SubpolicyCall call;
    bool success = false;
    std::string feedback;

    std::string render() const {
        std::string s = call.render() + " -> " + (success ? "success" : "failed");
        if (!feedback.empty()) s += ": " + feedback;
        return s;
    }
};

inline const std::vector<std::string>& subpolicy_names() {
    static const std::vector<std::string> kNames = {
        "explore",          "navigate",
        "go_to_and_open",   "go_to_and_close",
        "go_to_and_grasp",  "go_to_and_place_inside",
        "go_to_and_place_ontop", "done"};
    return kNames;
}

inline std::string skill_api_text() {
    return "Available subpolicies:\n"
           "- explore(room): drive to the closest unexplored frontier of that room.\n"
           "- navigate(room, object): move next to the given object.\n"
           "- go_to_and_open(room, object): move to the object and open it.\n"
           "- go_to_and_close(room, object): move to the object and close it.\n"
           "- go_to_and_grasp(room, object): move to the object and pick it up.\n"
           "- go_to_and_place_inside(room, object): put the held object inside the target "
           "object.\n"
           "- go_to_and_place_ontop(room, object): put the held object on top of the target "
           "object.\n"
           "- done(): finish the episode when the task is complete.\n";
}

// Prompt for the next-subpolicy decision: task, skill API, robot room and
// gripper, the filtered scene, the last five actions plus every failed one,
// and the latest feedback.
inline MessageList build_plan_prompt(const std::string& scene_text, const std::string& robot_room,
                                     const std::optional<std::string>& gripper,
                                     const std::string& task,
                                     const std::vector<HistoryEntry>& history,
                                     const std::string& last_feedback) {
    MessageList messages;
    messages.push_back({"system",
                        "You are a task planner for a household robot. Decide the single next "
                        "subpolicy call.\n" +
                            skill_api_text() +
                            "Reply with exactly one call, e.g. go_to_and_grasp(kitchen_A, "
                            "apple_A). You may reason first; the last call in your reply "
                            "counts."});
    std::ostringstream user;
    user << "Task: " << task << "\n\n";
    user << "Robot status: in " << robot_room << ", "
         << (gripper ? "holding " + *gripper : "gripper empty") << ".\n\n";
    user << scene_text << "\n";
    user << "Recent actions (last 5):\n";
    size_t begin = history.size() > 5 ? history.size() - 5 : 0;
    if (history.empty()) user << "(none)\n";
    for (size_t i = begin; i < history.size(); ++i)
        user << "step " << history[i].step << ": " << history[i].render() << "\n";
    user << "\nPreviously failed actions:\n";
    bool any_failed = false;
    for (const auto& h : history) {
        if (h.success) continue;
        any_failed = true;
        user << "step " << h.step << ": " << h.render() << "\n";
    }
    if (!any_failed) user << "(none)\n";
    user << "\nLast feedback: " << (last_feedback.empty() ? "none" : last_feedback) << "\n";
    user << "\nNext call:\n";
    messages.push_back({"user", user.str()});
    return messages;
}

// Extracts the last well-formed subpolicy call in the reply; nullopt asks
// the caller to retry.
inline std::optional<SubpolicyCall> parse_plan_response(const std::string& reply) {
    std::optional<SubpolicyCall> found;
    size_t i = 0;
    const size_t n = reply.size();
    auto is_ident = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    };
    while (i < n) {
        if (!is_ident(reply[i])) {
            ++i;
            continue;
        }
        size_t start = i;
        while (i < n && is_ident(reply[i])) ++i;
        std::string token = reply.substr(start, i - start);
        const auto& names = subpolicy_names();
        if (std::find(names.begin(), names.end(), token) == names.end()) continue;
        size_t j = i;
        while (j < n && (reply[j] == ' ' || reply[j] == '\t')) ++j;
        if (j >= n || reply[j] != '(') continue;
        size_t close = reply.find(')', j);
        if (close == std::string::npos) continue;
        std::string args_text = reply.substr(j + 1, close - j - 1);
        i = close + 1;

        std::vector<std::string> args;
        std::istringstream items(args_text);
        std::string item;
        while (std::getline(items, item, ',')) {
            size_t a = item.find_first_not_of(" \t\r\n");
            size_t b = item.find_last_not_of(" \t\r\n");
            if (a != std::string::npos) args.push_back(item.substr(a, b - a + 1));
        }
        size_t expected = token == "done" ? 0 : token == "explore" ? 1 : 2;
        if (args.size() != expected) continue;  // bad arity: not a valid call
        SubpolicyCall call;
        call.name = token;
        if (expected >= 1) call.room = args[0];
        if (expected == 2) call.object = args[1];
        found = call;
    }
    return found;
}

// --- room classification prompt ---

inline MessageList build_classify_prompt(const std::vector<std::string>& categories) {
    MessageList messages;
    messages.push_back({"system", "You label rooms for a robot's map."});
    std::ostringstream user;
    user << "Object categories observed in one region: ";
    if (categories.empty()) user << "(none)";
    for (size_t i = 0; i < categories.size(); ++i) user << (i ? ", " : "") << categories[i];
    user << "\nAnswer with exactly one label from:";
    for (const auto& label : room_vocabulary()) user << " " << label << ";";
    user << "\n";
    messages.push_back({"user", user.str()});
    return messages;
}

inline std::optional<std::string> parse_room_reply(const std::string& reply) {
    std::string lower = reply;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    std::vector<std::string> vocab = room_vocabulary();
    std::sort(vocab.begin(), vocab.end(),
              [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
    for (const auto& label : vocab)
        if (lower.find(label) != std::string::npos) return label;
    return std::nullopt;
}

}  // namespace tidygrid
