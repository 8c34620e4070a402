#pragma once

#include <fstream>
#include <limits>
#include <queue>

#include "tidygrid/sim.hpp"

namespace tidygrid {

enum class CellState : uint8_t { Unknown, Free, Occupied };

inline constexpr double kInfiniteDistance = std::numeric_limits<double>::infinity();

// Agent-side record of a door it has observed, built purely from
// observations (frame cells seen so far plus the door object's state).
struct ObservedDoor {
    std::string id;
    Cell center;
    bool open = false;
    std::set<Cell> frame_cells;

    DoorSpec as_spec() const {
        DoorSpec d;
        d.id = id;
        d.center = center;
        d.open = open;
        for (const Cell& c : frame_cells) d.bbox.expand(c);
        if (d.bbox.empty()) d.bbox.expand(center);
        d.orientation = d.bbox.width() >= d.bbox.height() ? DoorOrientation::Horizontal
                                                          : DoorOrientation::Vertical;
        d.length_cells = std::max(d.bbox.width(), d.bbox.height());
        return d;
    }
};

class BevMap {
public:
    BevMap() = default;
    BevMap(int width, int height, double resolution, std::set<std::string> free_categories)
        : resolution_(resolution),
          free_categories_(std::move(free_categories)),
          state_(width, height, CellState::Unknown),
          category_(width, height, -1),
          last_seen_(width, height, -1),
          sight_blocking_(width, height, 0) {}

    int width() const { return state_.width(); }
    int height() const { return state_.height(); }
    double resolution() const { return resolution_; }
    bool in_bounds(const Cell& c) const { return state_.in_bounds(c); }

    CellState state(const Cell& c) const { return state_.at(c); }
    bool known(const Cell& c) const { return state_.at(c) != CellState::Unknown; }
    bool free(const Cell& c) const { return state_.at(c) == CellState::Free; }
    bool occupied(const Cell& c) const { return state_.at(c) == CellState::Occupied; }
    int last_seen(const Cell& c) const { return last_seen_.at(c); }
    size_t known_count() const { return known_count_; }

    const std::string& category(const Cell& c) const {
        static const std::string kNone;
        int idx = category_.at(c);
        return idx < 0 ? kNone : category_names_[idx];
    }

    void integrate(const Observation& obs, int step) {
        std::vector<const VisibleObject*> visible_doors;
        for (const auto& v : obs.visible_objects)
            if (v.category == "door") visible_doors.push_back(&v);

        for (const auto& rc : obs.revealed_cells) {
            if (!in_bounds(rc.cell)) continue;
            last_seen_.at(rc.cell) = step;
            if (rc.category == "door") {
                integrate_door_cell(rc.cell, visible_doors);
                continue;
            }
            bool is_free = free_categories_.count(rc.category) > 0;
            state_.at(rc.cell) = is_free ? CellState::Free : CellState::Occupied;
            set_category(rc.cell, rc.category);
            sight_blocking_.at(rc.cell) = rc.kind == CellKind::Wall ? 1 : 0;
        }

        // A door's state can change without all of its frame cells being
        // re-revealed; refresh every known frame cell of each seen door.
        for (const VisibleObject* v : visible_doors) {
            auto it = doors_.find(v->id);
            if (it == doors_.end()) {
                ObservedDoor d;
                d.id = v->id;
                d.center = v->position;
                doors_[v->id] = d;
                it = doors_.find(v->id);
            }
            it->second.open = v->articulation_state == ArticulationState::Open;
            for (const Cell& c : it->second.frame_cells) apply_door_occupancy(c, it->second.open);
        }
        recount_known();
    }

    std::vector<DoorSpec> observed_doors() const {
        std::vector<DoorSpec> out;
        for (const auto& [id, d] : doors_) out.push_back(d.as_spec());
        return out;
    }

    // Direct writes, for fixtures and fully-known maps.
    void set_cell(const Cell& c, CellState s, const std::string& category = "floor", int step = 0) {
        if (state_.at(c) == CellState::Unknown && s != CellState::Unknown) ++known_count_;
        state_.at(c) = s;
        set_category(c, category);
        last_seen_.at(c) = step;
        sight_blocking_.at(c) = (category == "wall" || category == "door") ? 1 : 0;
    }
    void register_door(const ObservedDoor& d) { doors_[d.id] = d; }

    // Map-side line-of-sight: known walls and closed doors block; cells in
    // `exclude` (the target's footprint) never do. Unknown cells pass only
    // in optimistic mode.
    bool sight_clear(const Vec2& from, const Vec2& to, const std::set<Cell>& exclude = {},
                     bool optimistic_unknown = true) const {
        Vec2 dir = to - from;
        double len = dir.norm();
        if (len < 1e-9) return true;
        dir = dir * (1.0 / len);
        const double step = resolution_ / 2.0;
        for (double t = step; t < len; t += step) {
            Cell c = point_to_cell(from + dir * t, resolution_);
            if (!in_bounds(c) || exclude.count(c)) continue;
            if (sight_blocking_.at(c)) return false;
            if (!optimistic_unknown && !known(c)) return false;
        }
        return true;
    }

    std::set<Cell> door_footprint(const std::string& door_id) const {
        auto it = doors_.find(door_id);
        return it == doors_.end() ? std::set<Cell>{} : it->second.frame_cells;
    }

    void write_pgm(const std::string& path) const {
        std::ofstream f(path);
        f << "P2\n" << width() << " " << height() << "\n255\n";
        for (int y = 0; y < height(); ++y) {
            for (int x = 0; x < width(); ++x) {
                int v = 127;
                if (state({x, y}) == CellState::Free) v = 255;
                if (state({x, y}) == CellState::Occupied) v = 0;
                f << v << (x + 1 == width() ? "" : " ");
            }
            f << "\n";
        }
    }

    json semantics_json() const {
        json cells = json::array();
        for (int y = 0; y < height(); ++y)
            for (int x = 0; x < width(); ++x) {
                Cell c{x, y};
                if (!known(c)) continue;
                cells.push_back(json{{"x", x},
                                     {"y", y},
                                     {"state", state(c) == CellState::Free ? "free" : "occupied"},
                                     {"category", category(c)},
                                     {"last_seen", last_seen(c)}});
            }
        return json{{"resolution_m", resolution_}, {"cells", cells}};
    }

private:
    void set_category(const Cell& c, const std::string& name) {
        auto it = category_index_.find(name);
        int idx;
        if (it == category_index_.end()) {
            idx = static_cast<int>(category_names_.size());
            category_names_.push_back(name);
            category_index_[name] = idx;
        } else {
            idx = it->second;
        }
        category_.at(c) = idx;
    }

    void apply_door_occupancy(const Cell& c, bool open) {
        state_.at(c) = open ? CellState::Free : CellState::Occupied;
        set_category(c, open ? "floor" : "door");
        sight_blocking_.at(c) = open ? 0 : 1;
    }

    void integrate_door_cell(const Cell& c, const std::vector<const VisibleObject*>& visible_doors) {
        const VisibleObject* owner = nullptr;
        double best = std::numeric_limits<double>::max();
        for (const VisibleObject* v : visible_doors) {
            double d = std::hypot(double(v->position.x - c.x), double(v->position.y - c.y));
            if (d < best || (d == best && owner && v->id < owner->id)) {
                best = d;
                owner = v;
            }
        }
        bool open = false;
        if (owner) {
            auto& rec = doors_[owner->id];
            rec.id = owner->id;
            rec.center = owner->position;
            rec.open = owner->articulation_state == ArticulationState::Open;
            rec.frame_cells.insert(c);
            open = rec.open;
        }
        apply_door_occupancy(c, open);
    }

    void recount_known() {
        known_count_ = 0;
        for (CellState s : state_.data())
            if (s != CellState::Unknown) ++known_count_;
    }

    double resolution_ = kDefaultResolution;
    std::set<std::string> free_categories_;
    Grid<CellState> state_;
    Grid<int> category_;
    Grid<int> last_seen_;
    Grid<char> sight_blocking_;
    std::vector<std::string> category_names_;
    std::map<std::string, int> category_index_;
    std::map<std::string, ObservedDoor> doors_;
    size_t known_count_ = 0;
};

// Exact Euclidean distance field with the nearest-obstacle feature
// transform. Distances are meters between cell centers; unknown cells count
// as non-obstacle so clearance keeps growing toward frontiers.
struct Esdf {
    Grid<double> distance;   // meters; +inf when no obstacle exists
    Grid<int> nearest_site;  // flat index of nearest occupied cell, -1 if none
    double resolution = kDefaultResolution;

    double at(const Cell& c) const { return distance.at(c); }
    Cell site(const Cell& c) const {
        int idx = nearest_site.at(c);
        return {idx % distance.width(), idx / distance.width()};
    }
    bool has_site(const Cell& c) const { return nearest_site.at(c) >= 0; }
};

namespace detail {

// One-dimensional squared-distance envelope (Felzenszwalb & Huttenlocher),
// carrying an argmin payload through the pass.
inline void edt_1d(const std::vector<double>& f, const std::vector<int>& payload,
                   std::vector<double>& d_out, std::vector<int>& payload_out) {
    const int n = static_cast<int>(f.size());
    const double kInf = std::numeric_limits<double>::infinity();
    std::vector<int> v(n);
    std::vector<double> z(n + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == kInf) continue;
        if (f[v[k]] == kInf) {
            v[k] = q;
            continue;
        }
        double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        while (k > 0 && s <= z[k]) {
            --k;
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = kInf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        if (f[v[0]] == kInf) {
            d_out[q] = kInf;
            payload_out[q] = -1;
            continue;
        }
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d_out[q] = dq * dq + f[v[k]];
        payload_out[q] = payload[v[k]];
    }
}

}  // namespace detail

inline Esdf compute_esdf(const BevMap& map) {
    const int w = map.width();
    const int h = map.height();
    const double kInf = std::numeric_limits<double>::infinity();
    Esdf out;
    out.resolution = map.resolution();
    out.distance = Grid<double>(w, h, kInf);
    out.nearest_site = Grid<int>(w, h, -1);

    // Pass 1: per column, squared distance to the nearest occupied row.
    Grid<double> col_d(w, h, kInf);
    Grid<int> col_site(w, h, -1);
    std::vector<double> f(h);
    std::vector<int> payload(h);
    std::vector<double> d1(h);
    std::vector<int> p1(h);
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            bool occ = map.occupied({x, y});
            f[y] = occ ? 0.0 : kInf;
            payload[y] = y;
        }
        detail::edt_1d(f, payload, d1, p1);
        for (int y = 0; y < h; ++y) {
            col_d.at({x, y}) = d1[y];
            col_site.at({x, y}) = p1[y];
        }
    }

    // Pass 2: per row, envelope over the column results.
    std::vector<double> fr(w);
    std::vector<int> pr(w);
    std::vector<double> d2(w);
    std::vector<int> p2(w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            fr[x] = col_d.at({x, y});
            pr[x] = x;
        }
        detail::edt_1d(fr, pr, d2, p2);
        for (int x = 0; x < w; ++x) {
            if (p2[x] < 0) continue;
            int site_x = p2[x];
            int site_y = col_site.at({site_x, y});
            out.distance.at({x, y}) = std::sqrt(d2[x]) * map.resolution();
            out.nearest_site.at({x, y}) = site_y * w + site_x;
        }
    }
    return out;
}

struct Frontier {
    std::vector<Cell> cells;
    Cell centroid;
    std::optional<int> region;
};

inline bool is_frontier_cell(const BevMap& map, const Cell& c) {
    if (!map.free(c)) return false;
    for (int i = 0; i < 4; ++i) {
        Cell n{c.x + kNeighborDx[i], c.y + kNeighborDy[i]};
        if (map.in_bounds(n) && map.state(n) == CellState::Unknown) return true;
    }
    return false;
}

// Maximal 8-connected clusters of frontier cells, ordered row-major by
// centroid.
inline std::vector<Frontier> find_frontiers(const BevMap& map) {
    Grid<char> mark(map.width(), map.height(), 0);
    std::vector<Frontier> out;
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x) {
            Cell seed{x, y};
            if (mark.at(seed) || !is_frontier_cell(map, seed)) continue;
            Frontier f;
            std::vector<Cell> stack{seed};
            mark.at(seed) = 1;
            while (!stack.empty()) {
                Cell c = stack.back();
                stack.pop_back();
                f.cells.push_back(c);
                for (int i = 0; i < 8; ++i) {
                    Cell n{c.x + kNeighborDx[i], c.y + kNeighborDy[i]};
                    if (!map.in_bounds(n) || mark.at(n)) continue;
                    if (!is_frontier_cell(map, n)) continue;
                    mark.at(n) = 1;
                    stack.push_back(n);
                }
            }
            std::sort(f.cells.begin(), f.cells.end());
            long sx = 0, sy = 0;
            for (const Cell& c : f.cells) {
                sx += c.x;
                sy += c.y;
            }
            f.centroid = {static_cast<int>(std::lround(double(sx) / f.cells.size())),
                          static_cast<int>(std::lround(double(sy) / f.cells.size()))};
            out.push_back(std::move(f));
        }
    std::sort(out.begin(), out.end(), [](const Frontier& a, const Frontier& b) {
        return std::tie(a.centroid.y, a.centroid.x) < std::tie(b.centroid.y, b.centroid.x);
    });
    return out;
}

namespace detail {

struct AStarEntry {
    double f;
    double g;
    size_t index;

    bool operator>(const AStarEntry& o) const {
        if (f != o.f) return f > o.f;
        if (g != o.g) return g < o.g;  // prefer the deeper node on equal f
        return index > o.index;
    }
};

inline double octile(const Cell& a, const Cell& b, double res) {
    double dx = std::abs(a.x - b.x);
    double dy = std::abs(a.y - b.y);
    return res * (std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy));
}

}  // namespace detail

// 8-connected A* over known-free cells. Diagonal moves never cut corners.
// Returns the full cell path including both endpoints, or nullopt.
inline std::optional<std::vector<Cell>> plan_path(const BevMap& map, const Cell& start,
                                                  const Cell& goal) {
    if (!map.in_bounds(start) || !map.in_bounds(goal)) return std::nullopt;
    if (!map.free(start) || !map.free(goal)) return std::nullopt;
    if (start == goal) return std::vector<Cell>{start};

    const double res = map.resolution();
    const double kInf = std::numeric_limits<double>::infinity();
    Grid<double> g(map.width(), map.height(), kInf);
    Grid<int> parent(map.width(), map.height(), -1);
    std::priority_queue<detail::AStarEntry, std::vector<detail::AStarEntry>, std::greater<>> open;

    g.at(start) = 0.0;
    open.push({detail::octile(start, goal, res), 0.0, g.index(start)});
    while (!open.empty()) {
        auto top = open.top();
        open.pop();
        Cell c{static_cast<int>(top.index % map.width()), static_cast<int>(top.index / map.width())};
        if (top.g > g.at(c)) continue;
        if (c == goal) break;
        for (int i = 0; i < 8; ++i) {
            Cell n{c.x + kNeighborDx[i], c.y + kNeighborDy[i]};
            if (!map.in_bounds(n) || !map.free(n)) continue;
            bool diagonal = i >= 4;
            if (diagonal) {
                if (!map.free({c.x + kNeighborDx[i], c.y}) || !map.free({c.x, c.y + kNeighborDy[i]}))
                    continue;
            }
            double cost = top.g + (diagonal ? res * std::sqrt(2.0) : res);
            if (cost + 1e-12 < g.at(n)) {
                g.at(n) = cost;
                parent.at(n) = static_cast<int>(top.index);
                open.push({cost + detail::octile(n, goal, res), cost, g.index(n)});
            }
        }
    }
    if (g.at(goal) == kInf) return std::nullopt;
    std::vector<Cell> path;
    Cell c = goal;
    while (true) {
        path.push_back(c);
        if (c == start) break;
        int p = parent.at(c);
        c = {p % map.width(), p / map.width()};
    }
    std::reverse(path.begin(), path.end());
    return path;
}

inline double path_cost(const std::vector<Cell>& path, double res) {
    double cost = 0.0;
    for (size_t i = 1; i < path.size(); ++i) {
        bool diagonal = path[i].x != path[i - 1].x && path[i].y != path[i - 1].y;
        cost += diagonal ? res * std::sqrt(2.0) : res;
    }
    return cost;
}

// Single-source costs to every reachable free cell, same move model as
// plan_path. Used for ranking candidate goals.
inline Grid<double> dijkstra_costs(const BevMap& map, const Cell& start) {
    const double res = map.resolution();
    const double kInf = std::numeric_limits<double>::infinity();
    Grid<double> g(map.width(), map.height(), kInf);
    if (!map.in_bounds(start) || !map.free(start)) return g;
    std::priority_queue<detail::AStarEntry, std::vector<detail::AStarEntry>, std::greater<>> open;
    g.at(start) = 0.0;
    open.push({0.0, 0.0, g.index(start)});
    while (!open.empty()) {
        auto top = open.top();
        open.pop();
        Cell c{static_cast<int>(top.index % map.width()), static_cast<int>(top.index / map.width())};
        if (top.f > g.at(c)) continue;
        for (int i = 0; i < 8; ++i) {
            Cell n{c.x + kNeighborDx[i], c.y + kNeighborDy[i]};
            if (!map.in_bounds(n) || !map.free(n)) continue;
            bool diagonal = i >= 4;
            if (diagonal) {
                if (!map.free({c.x + kNeighborDx[i], c.y}) || !map.free({c.x, c.y + kNeighborDy[i]}))
                    continue;
            }
            double cost = top.f + (diagonal ? res * std::sqrt(2.0) : res);
            if (cost + 1e-12 < g.at(n)) {
                g.at(n) = cost;
                open.push({cost, cost, g.index(n)});
            }
        }
    }
    return g;
}

}  // namespace tidygrid
