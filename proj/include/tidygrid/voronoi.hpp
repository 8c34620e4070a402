#pragma once

#include <ostream>

#include "tidygrid/mapping.hpp"

namespace tidygrid {

inline constexpr double kDefaultSparsifyC = 1.0;       // meters
inline constexpr double kMinDoorSigma = 0.15;          // meters
inline const double kDefaultSeparationTau = 0.5 * kMinDoorSigma * std::sqrt(2.0 * kPi);

struct VoronoiNode {
    Vec2 position;
    double clearance = 0.0;
};

struct VoronoiEdgeData {
    double weight = 0.0;
    bool door_cut = false;
    std::vector<Vec2> polyline;  // oriented from the owning node to the neighbor
};

// Undirected simple graph over the GVD skeleton. Node ids are stable;
// removed nodes stay as dead slots. Edges carry the polyline they
// abstract so door-kernel integrals stay exact after sparsification.
class VoronoiGraph {
public:
    int add_node(const Vec2& position, double clearance) {
        nodes_.push_back({position, clearance});
        alive_.push_back(1);
        adj_.emplace_back();
        component_.push_back(-1);
        region_.push_back(-1);
        return static_cast<int>(nodes_.size()) - 1;
    }

    bool add_edge(int u, int v, double weight, std::vector<Vec2> polyline = {}) {
        if (u == v || has_edge(u, v)) return false;
        if (polyline.empty()) polyline = {nodes_[u].position, nodes_[v].position};
        VoronoiEdgeData forward{weight, false, polyline};
        std::reverse(polyline.begin(), polyline.end());
        VoronoiEdgeData backward{weight, false, std::move(polyline)};
        adj_[u][v] = std::move(forward);
        adj_[v][u] = std::move(backward);
        return true;
    }

    void remove_node(int v) {
        for (auto& [n, data] : adj_[v]) adj_[n].erase(v);
        adj_[v].clear();
        alive_[v] = 0;
    }

    bool alive(int v) const { return alive_[v] != 0; }
    bool has_edge(int u, int v) const { return adj_[u].count(v) > 0; }
    int degree(int v) const { return static_cast<int>(adj_[v].size()); }
    size_t size() const { return nodes_.size(); }

    size_t node_count() const {
        size_t n = 0;
        for (char a : alive_) n += a;
        return n;
    }
    size_t edge_count() const {
        size_t n = 0;
        for (const auto& m : adj_) n += m.size();
        return n / 2;
    }

    const VoronoiNode& node(int v) const { return nodes_[v]; }
    const std::map<int, VoronoiEdgeData>& neighbors(int v) const { return adj_[v]; }
    VoronoiEdgeData& edge(int u, int v) { return adj_[u].at(v); }
    const VoronoiEdgeData& edge(int u, int v) const { return adj_[u].at(v); }

    std::vector<int> alive_nodes() const {
        std::vector<int> out;
        for (int v = 0; v < static_cast<int>(nodes_.size()); ++v)
            if (alive_[v]) out.push_back(v);
        return out;
    }

    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        for (int u = 0; u < static_cast<int>(adj_.size()); ++u)
            for (const auto& [v, data] : adj_[u])
                if (u < v) out.emplace_back(u, v);
        return out;
    }

    int component(int v) const { return component_[v]; }
    int region(int v) const { return region_[v]; }
    void set_region(int v, int r) { region_[v] = r; }

    // Connected components over all (including door-cut) edges, labeled in
    // order of their smallest node id.
    void compute_components() {
        std::fill(component_.begin(), component_.end(), -1);
        component_count_ = 0;
        for (int v = 0; v < static_cast<int>(nodes_.size()); ++v) {
            if (!alive_[v] || component_[v] >= 0) continue;
            flood(v, component_count_++, /*use_cut=*/true, component_);
        }
    }

    // Region labels over uncut edges only.
    void compute_regions() {
        std::fill(region_.begin(), region_.end(), -1);
        region_count_ = 0;
        for (int v = 0; v < static_cast<int>(nodes_.size()); ++v) {
            if (!alive_[v] || region_[v] >= 0) continue;
            flood(v, region_count_++, /*use_cut=*/false, region_);
        }
    }

    int component_count() const { return component_count_; }
    int region_count() const { return region_count_; }

private:
    void flood(int seed, int label, bool use_cut, std::vector<int>& out) {
        std::vector<int> stack{seed};
        out[seed] = label;
        while (!stack.empty()) {
            int v = stack.back();
            stack.pop_back();
            for (const auto& [n, data] : adj_[v]) {
                if (!use_cut && data.door_cut) continue;
                if (out[n] < 0) {
                    out[n] = label;
                    stack.push_back(n);
                }
            }
        }
    }

    std::vector<VoronoiNode> nodes_;
    std::vector<char> alive_;
    std::vector<std::map<int, VoronoiEdgeData>> adj_;
    std::vector<int> component_;
    std::vector<int> region_;
    int component_count_ = 0;
    int region_count_ = 0;
};

namespace detail {

// Zhang-Suen thinning of a boolean mask down to a 1-cell 8-connected
// skeleton; preserves connectivity and endpoints.
inline void thin_mask(Grid<char>& mask) {
    const int w = mask.width();
    const int h = mask.height();
    auto get = [&](int x, int y) -> int {
        if (x < 0 || x >= w || y < 0 || y >= h) return 0;
        return mask.at({x, y}) ? 1 : 0;
    };
    bool changed = true;
    std::vector<Cell> removals;
    while (changed) {
        changed = false;
        for (int phase = 0; phase < 2; ++phase) {
            removals.clear();
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    if (!mask.at({x, y})) continue;
                    int p2 = get(x, y - 1), p3 = get(x + 1, y - 1), p4 = get(x + 1, y);
                    int p5 = get(x + 1, y + 1), p6 = get(x, y + 1), p7 = get(x - 1, y + 1);
                    int p8 = get(x - 1, y), p9 = get(x - 1, y - 1);
                    int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
                    if (b < 2 || b > 6) continue;
                    int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
                    int a = 0;
                    for (int i = 0; i < 8; ++i)
                        if (seq[i] == 0 && seq[i + 1] == 1) ++a;
                    if (a != 1) continue;
                    if (phase == 0) {
                        if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
                    } else {
                        if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
                    }
                    removals.push_back({x, y});
                }
            for (const Cell& c : removals) mask.at(c) = 0;
            changed = changed || !removals.empty();
        }
    }
}

inline int mask_degree(const Grid<char>& mask, const Cell& c) {
    int d = 0;
    for (int i = 0; i < 8; ++i) {
        Cell n{c.x + kNeighborDx[i], c.y + kNeighborDy[i]};
        if (mask.in_bounds(n) && mask.at(n)) ++d;
    }
    return d;
}

// Removes leaf chains that are shorter than the clearance at their
// attachment point: those are corner spurs of the medial axis, not
// corridors.
inline void prune_spurs(Grid<char>& mask, const Esdf& esdf) {
    for (int round = 0; round < 4; ++round) {
        bool changed = false;
        for (int y = 0; y < mask.height(); ++y)
            for (int x = 0; x < mask.width(); ++x) {
                Cell leaf{x, y};
                if (!mask.at(leaf) || mask_degree(mask, leaf) != 1) continue;
                std::vector<Cell> chain{leaf};
                Cell prev = leaf;
                Cell cur = leaf;
                bool junction_found = false;
                Cell junction;
                while (static_cast<int>(chain.size()) < 64) {
                    Cell next{-1, -1};
                    int options = 0;
                    for (int i = 0; i < 8; ++i) {
                        Cell n{cur.x + kNeighborDx[i], cur.y + kNeighborDy[i]};
                        if (!mask.in_bounds(n) || !mask.at(n) || n == prev) continue;
                        if (chain.size() > 1 && n == chain[chain.size() - 2]) continue;
                        ++options;
                        next = n;
                    }
                    if (options != 1) break;
                    if (mask_degree(mask, next) >= 3) {
                        junction_found = true;
                        junction = next;
                        break;
                    }
                    chain.push_back(next);
                    prev = cur;
                    cur = next;
                    if (mask_degree(mask, cur) == 1) break;  // chain ends in another leaf
                }
                if (!junction_found) continue;
                double limit = esdf.at(junction) / esdf.resolution + 1.0;
                if (static_cast<double>(chain.size()) <= limit) {
                    for (const Cell& c : chain) mask.at(c) = 0;
                    changed = true;
                }
            }
        if (!changed) break;
    }
}

}  // namespace detail

// Extracts the navigational skeleton of known free space: morphological
// thinning down to a 1-cell 8-connected medial axis (connectivity within
// each free component is preserved by construction), then corner spurs are
// pruned against the clearance field.
inline VoronoiGraph extract_gvd(const Esdf& esdf, const BevMap& map) {
    VoronoiGraph graph;
    const int w = map.width();
    const int h = map.height();
    Grid<char> mask(w, h, 0);
    bool any = false;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (map.free({x, y})) {
                mask.at({x, y}) = 1;
                any = true;
            }
    if (!any) return graph;

    detail::thin_mask(mask);
    detail::prune_spurs(mask, esdf);

    Grid<int> node_id(w, h, -1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.at({x, y}))
                node_id.at({x, y}) =
                    graph.add_node(cell_center({x, y}, map.resolution()), esdf.at({x, y}));

    const double res = map.resolution();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            Cell c{x, y};
            if (!mask.at(c)) continue;
            int u = node_id.at(c);
            // Orthogonal: east and south, so each pair is visited once.
            for (Cell n : {Cell{x + 1, y}, Cell{x, y + 1}}) {
                if (mask.in_bounds(n) && mask.at(n)) graph.add_edge(u, node_id.at(n), res);
            }
            // Diagonal: only when no orthogonal bridge carries the link.
            for (Cell n : {Cell{x + 1, y + 1}, Cell{x - 1, y + 1}}) {
                if (!mask.in_bounds(n) || !mask.at(n)) continue;
                Cell b1{n.x, y};
                Cell b2{x, n.y};
                if ((mask.in_bounds(b1) && mask.at(b1)) || (mask.in_bounds(b2) && mask.at(b2)))
                    continue;
                graph.add_edge(u, node_id.at(n), res * std::sqrt(2.0));
            }
        }
    graph.compute_components();
    graph.compute_regions();
    return graph;
}

// Alg.-style degree-2 contraction: one pass over the snapshot of degree-2
// nodes; a node is removed when its incident weights sum below c and the
// bypass edge neither duplicates an existing edge nor forms a self-loop.
inline void sparsify(VoronoiGraph& graph, double c) {
    std::vector<int> snapshot;
    for (int v : graph.alive_nodes())
        if (graph.degree(v) == 2) snapshot.push_back(v);
    for (int x : snapshot) {
        if (!graph.alive(x) || graph.degree(x) != 2) continue;
        auto it = graph.neighbors(x).begin();
        int v = it->first;
        double w1 = it->second.weight;
        ++it;
        int u = it->first;
        double w2 = it->second.weight;
        if (w1 + w2 >= c) continue;
        if (v == u || graph.has_edge(v, u)) continue;
        std::vector<Vec2> poly = graph.edge(v, x).polyline;
        const auto& tail = graph.edge(x, u).polyline;
        poly.insert(poly.end(), tail.begin() + 1, tail.end());
        graph.remove_node(x);
        graph.add_edge(v, u, w1 + w2, std::move(poly));
    }
}

// Anisotropic Gaussian fitted to an observed door: centered on the door,
// major axis along the opening, sigmas from the bbox half-extents with a
// floor for degenerate boxes.
struct DoorKernel {
    Vec2 center;
    Vec2 axis;  // unit vector along the opening
    double sigma_major = kMinDoorSigma;
    double sigma_minor = kMinDoorSigma;
    std::string door_id;

    double value(const Vec2& p) const {
        Vec2 d = p - center;
        double a = d.dot(axis);
        double b = d.dot({-axis.y, axis.x});
        return std::exp(-0.5 * (a * a / (sigma_major * sigma_major) +
                                b * b / (sigma_minor * sigma_minor)));
    }
};

inline std::vector<DoorKernel> build_door_kernels(const std::vector<DoorSpec>& doors,
                                                  double resolution) {
    std::vector<DoorKernel> out;
    for (const auto& d : doors) {
        DoorKernel k;
        k.door_id = d.id;
        k.center = {(d.bbox.x0 + d.bbox.x1 + 1) * 0.5 * resolution,
                    (d.bbox.y0 + d.bbox.y1 + 1) * 0.5 * resolution};
        bool horizontal = d.orientation == DoorOrientation::Horizontal;
        k.axis = horizontal ? Vec2{1.0, 0.0} : Vec2{0.0, 1.0};
        double long_side = std::max(d.bbox.width(), d.bbox.height()) * resolution;
        double short_side = std::min(d.bbox.width(), d.bbox.height()) * resolution;
        k.sigma_major = std::max(long_side * 0.5, kMinDoorSigma);
        k.sigma_minor = std::max(short_side * 0.5, kMinDoorSigma);
        out.push_back(k);
    }
    return out;
}

inline double kernel_field(const std::vector<DoorKernel>& kernels, const Vec2& p) {
    double v = 0.0;
    for (const auto& k : kernels) v += k.value(p);
    return v;
}

// Midpoint line integral of the summed kernel field along a polyline,
// sampled at the map resolution.
inline double edge_kernel_integral(const std::vector<Vec2>& polyline,
                                   const std::vector<DoorKernel>& kernels, double sample_step) {
    double integral = 0.0;
    for (size_t i = 1; i < polyline.size(); ++i) {
        Vec2 a = polyline[i - 1];
        Vec2 b = polyline[i];
        double len = distance(a, b);
        if (len <= 0.0) continue;
        int pieces = std::max(1, static_cast<int>(std::ceil(len / sample_step)));
        double ds = len / pieces;
        for (int s = 0; s < pieces; ++s) {
            double t = (s + 0.5) / pieces;
            integral += kernel_field(kernels, a + (b - a) * t) * ds;
        }
    }
    return integral;
}

// Cuts every edge whose kernel line integral exceeds tau and relabels
// regions from the remaining connectivity.
inline void separate_regions(VoronoiGraph& graph, const std::vector<DoorKernel>& kernels,
                             double tau, double sample_step) {
    for (const auto& [u, v] : graph.edges()) {
        double integral = edge_kernel_integral(graph.edge(u, v).polyline, kernels, sample_step);
        bool cut = integral > tau;
        graph.edge(u, v).door_cut = cut;
        graph.edge(v, u).door_cut = cut;
    }
    graph.compute_regions();
}

inline std::optional<int> closest_node(const VoronoiGraph& graph, const Vec2& point,
                                       std::optional<int> component = std::nullopt) {
    std::optional<int> best;
    double best_dist = 0.0;
    for (int v : graph.alive_nodes()) {
        if (component && graph.component(v) != *component) continue;
        double d = distance(graph.node(v).position, point);
        if (!best || d < best_dist) {
            best = v;
            best_dist = d;
        }
    }
    return best;
}

// Shortest-path lengths from src over the full edge set (door cuts do not
// affect the path metric).
inline std::vector<double> shortest_paths_from(const VoronoiGraph& graph, int src) {
    std::vector<double> dist(graph.size(), kInfiniteDistance);
    if (!graph.alive(src)) return dist;
    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    dist[src] = 0.0;
    open.push({0.0, src});
    while (!open.empty()) {
        auto [d, v] = open.top();
        open.pop();
        if (d > dist[v]) continue;
        for (const auto& [n, data] : graph.neighbors(v)) {
            double nd = d + data.weight;
            if (nd + 1e-12 < dist[n]) {
                dist[n] = nd;
                open.push({nd, n});
            }
        }
    }
    return dist;
}

inline void write_graph(std::ostream& os, const VoronoiGraph& graph) {
    char buf[128];
    for (int v : graph.alive_nodes()) {
        const auto& n = graph.node(v);
        std::snprintf(buf, sizeof(buf), "node %d %.6f %.6f %.6f", v, n.position.x, n.position.y,
                      n.clearance);
        os << buf << "\n";
    }
    for (const auto& [u, v] : graph.edges()) {
        if (graph.edge(u, v).door_cut) continue;
        std::snprintf(buf, sizeof(buf), "edge %d %d %.6f", u, v, graph.edge(u, v).weight);
        os << buf << "\n";
    }
    for (int v : graph.alive_nodes()) os << "region " << v << " " << graph.region(v) << "\n";
}

}  // namespace tidygrid
