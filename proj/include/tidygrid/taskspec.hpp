#pragma once

#include <numeric>

#include "tidygrid/sim.hpp"

namespace tidygrid {

inline constexpr int kTaskSchemaVersion = 1;

class TaskParseError : public std::runtime_error {
public:
    TaskParseError(const std::string& what, int condition, int column)
        : std::runtime_error("condition " + std::to_string(condition) + ", col " +
                             std::to_string(column) + ": " + what),
          condition_index(condition),
          column(column) {}
    explicit TaskParseError(const std::string& what)
        : std::runtime_error(what), condition_index(0), column(0) {}

    int condition_index;
    int column;
};

inline bool predicate_is_binary(const std::string& pred) {
    return pred == "inside" || pred == "ontop";
}
inline bool known_predicate(const std::string& pred) {
    return pred == "inside" || pred == "ontop" || pred == "open" || pred == "closed";
}

struct GoalCondition {
    enum class Kind { Ground, ForAllCategory };

    Kind kind = Kind::Ground;
    std::string pred;
    std::vector<std::string> args;  // Ground: 1 or 2 sim ids
    std::string category;           // ForAllCategory only
    std::string target;             // ForAllCategory binary target
    std::string source;

    bool satisfied(const RelationSet& rels) const {
        if (kind == Kind::Ground) {
            return predicate_is_binary(pred) ? rels.has(pred, args[0], args[1])
                                             : rels.has(pred, args[0]);
        }
        for (const auto& id : rels.instances_of(category)) {
            bool ok = predicate_is_binary(pred) ? rels.has(pred, id, target) : rels.has(pred, id);
            if (!ok) return false;
        }
        return true;
    }

    // Every object the condition talks about; a condition only counts for
    // rTP once all of these have been observed.
    std::vector<std::string> referenced_objects(const RelationSet& rels) const {
        std::vector<std::string> out;
        if (kind == Kind::Ground) {
            out = args;
        } else {
            out = rels.instances_of(category);
            if (!target.empty()) out.push_back(target);
        }
        return out;
    }

    std::string render() const {
        if (kind == Kind::Ground) {
            std::string s = pred + " " + args[0];
            if (args.size() > 1) s += " " + args[1];
            return s;
        }
        std::string s = "forall " + category + " " + pred;
        if (!target.empty()) s += " " + target;
        return s;
    }
};

struct TaskSpec {
    std::string name;
    std::string description_template;
    std::map<std::string, std::string> bindings;         // $var -> sim id
    std::map<std::string, std::string> bound_categories; // sim id -> category
    std::vector<GoalCondition> goal_conditions;
    std::set<std::string> relevant_categories;

    json to_json() const {
        json conds = json::array();
        for (const auto& g : goal_conditions) conds.push_back(g.source);
        return json{{"schema_version", kTaskSchemaVersion},
                    {"name", name},
                    {"description_template", description_template},
                    {"bindings", bindings},
                    {"goal_conditions", conds}};
    }
};

// Minimal scene lookup the parser validates against.
struct SceneIndex {
    std::map<std::string, std::string> id_to_category;
    std::set<std::string> categories;

    static SceneIndex from_sim(const SimState& sim) {
        SceneIndex idx;
        for (const auto& o : sim.objects()) {
            idx.id_to_category[o.id] = o.category;
            idx.categories.insert(o.category);
        }
        return idx;
    }
    static SceneIndex from_scene(const SceneSpec& scene) {
        SceneIndex idx;
        for (const auto& o : scene.objects) {
            idx.id_to_category[o.id] = o.category;
            idx.categories.insert(o.category);
        }
        for (const auto& d : scene.doors) {
            idx.id_to_category[d.id] = "door";
            idx.categories.insert("door");
        }
        return idx;
    }
};

namespace detail {

struct Token {
    std::string text;
    int column;
};

// Splits a condition string on whitespace plus the informal (),
// punctuation, keeping 1-based column positions.
inline std::vector<Token> tokenize_condition(const std::string& s) {
    std::vector<Token> out;
    std::string cur;
    int start = 0;
    for (int i = 0; i <= static_cast<int>(s.size()); ++i) {
        char ch = i < static_cast<int>(s.size()) ? s[i] : ' ';
        if (std::isspace(static_cast<unsigned char>(ch)) || ch == '(' || ch == ')' || ch == ',') {
            if (!cur.empty()) {
                out.push_back({cur, start + 1});
                cur.clear();
            }
        } else {
            if (cur.empty()) start = i;
            cur.push_back(ch);
        }
    }
    return out;
}

}  // namespace detail

inline GoalCondition parse_condition(const std::string& text, int index,
                                     const std::map<std::string, std::string>& bindings,
                                     const SceneIndex& scene) {
    auto tokens = detail::tokenize_condition(text);
    if (tokens.empty()) throw TaskParseError("empty goal condition", index, 1);

    auto resolve = [&](const detail::Token& tok) -> std::string {
        std::string value = tok.text;
        if (!value.empty() && value[0] == '$') {
            auto it = bindings.find(value.substr(1));
            if (it == bindings.end())
                throw TaskParseError("unbound variable '" + value + "'", index, tok.column);
            value = it->second;
        }
        if (!scene.id_to_category.count(value))
            throw TaskParseError("unknown object '" + value + "'", index, tok.column);
        return value;
    };

    GoalCondition g;
    g.source = text;
    size_t at = 0;
    if (tokens[0].text == "forall") {
        g.kind = GoalCondition::Kind::ForAllCategory;
        if (tokens.size() < 3)
            throw TaskParseError("forall needs: category predicate [target]", index,
                                 tokens[0].column);
        g.category = tokens[1].text;
        if (!scene.categories.count(g.category))
            throw TaskParseError("unknown category '" + g.category + "'", index, tokens[1].column);
        g.pred = tokens[2].text;
        if (!known_predicate(g.pred))
            throw TaskParseError("unknown predicate '" + g.pred + "'", index, tokens[2].column);
        bool binary = predicate_is_binary(g.pred);
        size_t expected = binary ? 4 : 3;
        if (tokens.size() != expected)
            throw TaskParseError("predicate '" + g.pred + "' takes " +
                                     std::string(binary ? "a target" : "no target") +
                                     " in a forall condition",
                                 index, tokens.back().column);
        if (binary) g.target = resolve(tokens[3]);
        return g;
    }

    g.kind = GoalCondition::Kind::Ground;
    g.pred = tokens[at].text;
    if (!known_predicate(g.pred))
        throw TaskParseError("unknown predicate '" + g.pred + "'", index, tokens[at].column);
    size_t expected = predicate_is_binary(g.pred) ? 3 : 2;
    if (tokens.size() != expected)
        throw TaskParseError("predicate '" + g.pred + "' expects " +
                                 std::to_string(expected - 1) + " argument(s), got " +
                                 std::to_string(tokens.size() - 1),
                             index, tokens.back().column);
    for (size_t i = 1; i < tokens.size(); ++i) g.args.push_back(resolve(tokens[i]));
    return g;
}

// Scans "$name" occurrences; names may contain dots and digits
// (e.g. $electric_refrigerator.n.01_1).
inline std::vector<std::string> template_variables(const std::string& tmpl) {
    std::vector<std::string> out;
    for (size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] != '$') continue;
        size_t j = i + 1;
        while (j < tmpl.size() &&
               (std::isalnum(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_' || tmpl[j] == '.'))
            ++j;
        if (j > i + 1) out.push_back(tmpl.substr(i + 1, j - i - 1));
        i = j - 1;
    }
    return out;
}

inline TaskSpec parse_task(const json& j, const SceneIndex& scene) {
    int version = j.value("schema_version", 0);
    if (version != kTaskSchemaVersion)
        throw TaskParseError("unsupported task schema_version " + std::to_string(version));
    TaskSpec task;
    task.name = j.at("name").get<std::string>();
    task.description_template = j.at("description_template").get<std::string>();
    if (j.contains("bindings"))
        task.bindings = j.at("bindings").get<std::map<std::string, std::string>>();

    for (const auto& [var, id] : task.bindings) {
        auto it = scene.id_to_category.find(id);
        if (it == scene.id_to_category.end())
            throw TaskParseError("binding $" + var + " names unknown object '" + id + "'");
        task.bound_categories[id] = it->second;
    }
    for (const auto& var : template_variables(task.description_template))
        if (!task.bindings.count(var))
            throw TaskParseError("template variable $" + var + " has no binding");

    const auto& conds = j.at("goal_conditions");
    if (!conds.is_array() || conds.empty())
        throw TaskParseError("goal_conditions must be a non-empty array");
    int index = 1;
    for (const auto& c : conds) {
        GoalCondition g = parse_condition(c.get<std::string>(), index++, task.bindings, scene);
        if (g.kind == GoalCondition::Kind::ForAllCategory) {
            task.relevant_categories.insert(g.category);
            if (!g.target.empty()) {
                task.relevant_categories.insert(scene.id_to_category.at(g.target));
                task.bound_categories[g.target] = scene.id_to_category.at(g.target);
            }
        } else {
            for (const auto& id : g.args) {
                task.relevant_categories.insert(scene.id_to_category.at(id));
                task.bound_categories[id] = scene.id_to_category.at(id);
            }
        }
        task.goal_conditions.push_back(std::move(g));
    }
    return task;
}

inline TaskSpec parse_task(const std::string& source, const SceneIndex& scene) {
    return parse_task(json::parse(source), scene);
}

inline std::vector<bool> evaluate_goals(const TaskSpec& task, const RelationSet& rels) {
    std::vector<bool> out;
    out.reserve(task.goal_conditions.size());
    for (const auto& g : task.goal_conditions) out.push_back(g.satisfied(rels));
    return out;
}

enum class Termination { DoneCall, StepCap, PostCompletionCap, Fault };

inline std::string to_string(Termination t) {
    switch (t) {
        case Termination::DoneCall: return "done_call";
        case Termination::StepCap: return "step_cap";
        case Termination::PostCompletionCap: return "post_completion_cap";
        case Termination::Fault: return "fault";
    }
    return "fault";
}

inline Termination termination_from_string(const std::string& s) {
    if (s == "done_call") return Termination::DoneCall;
    if (s == "step_cap") return Termination::StepCap;
    if (s == "post_completion_cap") return Termination::PostCompletionCap;
    if (s == "fault") return Termination::Fault;
    throw std::runtime_error("unknown termination: " + s);
}

struct EpisodeRecord {
    std::string task;
    std::string scene;
    uint64_t seed = 0;
    Termination terminated_by = Termination::Fault;
    std::vector<bool> satisfied;  // per goal condition, at termination
    std::vector<bool> observed;   // per condition: all referenced objects seen
    int steps = 0;
    std::string log_path;

    bool all_satisfied() const {
        return std::all_of(satisfied.begin(), satisfied.end(), [](bool b) { return b; });
    }

    void validate() const {
        if (satisfied.size() != observed.size())
            throw std::runtime_error("episode record flag vectors differ in length (task '" +
                                     task + "')");
        if (satisfied.empty())
            throw std::runtime_error("episode record has no goal conditions (task '" + task + "')");
    }

    json to_json() const {
        return json{{"task", task},
                    {"scene", scene},
                    {"seed", seed},
                    {"terminated_by", to_string(terminated_by)},
                    {"satisfied", satisfied},
                    {"observed", observed},
                    {"steps", steps},
                    {"log", log_path}};
    }

    static EpisodeRecord from_json(const json& j) {
        EpisodeRecord r;
        r.task = j.at("task").get<std::string>();
        r.scene = j.value("scene", std::string());
        r.seed = j.value("seed", 0ULL);
        r.terminated_by = termination_from_string(j.at("terminated_by").get<std::string>());
        r.satisfied = j.at("satisfied").get<std::vector<bool>>();
        r.observed = j.at("observed").get<std::vector<bool>>();
        r.steps = j.at("steps").get<int>();
        r.log_path = j.value("log", std::string());
        r.validate();
        return r;
    }
};

struct MetricsReport {
    double sr = 0.0;
    double ttc = 0.0;
    double tp = 0.0;
    double rtp = 0.0;
    size_t episodes = 0;
    size_t rtp_eligible_episodes = 0;

    json to_json() const {
        json j{{"sr", sr},
               {"ttc", ttc},
               {"tp", tp},
               {"episodes", episodes},
               {"rtp_eligible_episodes", rtp_eligible_episodes}};
        if (rtp_eligible_episodes > 0)
            j["rtp"] = rtp;
        else
            j["rtp"] = nullptr;
        return j;
    }

    std::string to_text() const {
        char buf[256];
        std::string rtp_text = "   n/a";
        if (rtp_eligible_episodes > 0) {
            char rb[32];
            std::snprintf(rb, sizeof(rb), "%6.1f", rtp * 100.0);
            rtp_text = rb;
        }
        std::snprintf(buf, sizeof(buf),
                      "episodes %6zu\nSR  [%%] %6.1f\nTTC [%%] %6.1f\nTP  [%%] %6.1f\nrTP [%%] %s\n",
                      episodes, sr * 100.0, ttc * 100.0, tp * 100.0, rtp_text.c_str());
        return buf;
    }
};

// SR: all conditions satisfied and the episode ended with done(). TTC: all
// satisfied regardless of termination. TP: mean satisfied share. rTP: mean
// satisfied share over conditions whose referenced objects were all
// observed; episodes with no such condition drop out of the mean.
inline MetricsReport compute_metrics(const std::vector<EpisodeRecord>& records) {
    if (records.empty()) throw std::runtime_error("compute_metrics: no episode records");
    MetricsReport m;
    m.episodes = records.size();
    double rtp_sum = 0.0;
    for (const auto& r : records) {
        r.validate();
        bool complete = r.all_satisfied();
        if (complete && r.terminated_by == Termination::DoneCall) m.sr += 1.0;
        if (complete) m.ttc += 1.0;
        size_t satisfied = std::count(r.satisfied.begin(), r.satisfied.end(), true);
        m.tp += static_cast<double>(satisfied) / r.satisfied.size();
        size_t eligible = 0, eligible_satisfied = 0;
        for (size_t i = 0; i < r.satisfied.size(); ++i) {
            if (!r.observed[i]) continue;
            ++eligible;
            if (r.satisfied[i]) ++eligible_satisfied;
        }
        if (eligible > 0) {
            ++m.rtp_eligible_episodes;
            rtp_sum += static_cast<double>(eligible_satisfied) / eligible;
        }
    }
    m.sr /= m.episodes;
    m.ttc /= m.episodes;
    m.tp /= m.episodes;
    m.rtp = m.rtp_eligible_episodes > 0 ? rtp_sum / m.rtp_eligible_episodes : 0.0;
    return m;
}

}  // namespace tidygrid
