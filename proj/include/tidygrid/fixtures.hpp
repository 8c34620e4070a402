#pragma once

#include "tidygrid/mapping.hpp"
#include "tidygrid/scene.hpp"
#include "tidygrid/taskspec.hpp"

namespace tidygrid {
namespace fixtures {

// Builds row-string scenes with ground-truth room annotations. Rooms are
// annotated with letters, door thresholds with '?', everything else is
// unannotated.
class SceneBuilder {
public:
    SceneBuilder(std::string name, int width, int height) {
        scene_.name = std::move(name);
        scene_.width_cells = width;
        scene_.height_cells = height;
        scene_.cells.assign(height, std::string(width, '#'));
        room_map_.assign(height, std::string(width, '#'));
        scene_.legend['#'] = {CellKind::Wall, "wall"};
        scene_.legend['.'] = {CellKind::Free, "floor"};
        scene_.legend[','] = {CellKind::Free, "lawn"};
        scene_.legend['+'] = {CellKind::DoorFrame, "door"};
    }

    void legend(char ch, CellKind kind, const std::string& category) {
        scene_.legend[ch] = {kind, category};
    }

    void fill(int x0, int y0, int x1, int y1, char ch) {
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) scene_.cells[y][x] = ch;
    }

    void annotate(int x0, int y0, int x1, int y1, char room) {
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) room_map_[y][x] = room;
    }

    void room(char letter, const std::string& label) { room_names_[letter] = label; }

    void add_door(const std::string& id, const CellRect& bbox, bool open) {
        DoorSpec d;
        d.id = id;
        d.bbox = bbox;
        d.center = {(bbox.x0 + bbox.x1) / 2, (bbox.y0 + bbox.y1) / 2};
        d.orientation =
            bbox.width() >= bbox.height() ? DoorOrientation::Horizontal : DoorOrientation::Vertical;
        d.length_cells = std::max(bbox.width(), bbox.height());
        d.open = open;
        scene_.doors.push_back(d);
        for (int y = bbox.y0; y <= bbox.y1; ++y)
            for (int x = bbox.x0; x <= bbox.x1; ++x) {
                scene_.cells[y][x] = '+';
                room_map_[y][x] = '?';
            }
    }

    // Furniture: fills a block of cells and registers a fixed object
    // anchored at the block's first cell.
    void add_furniture(const std::string& id, const std::string& category, char ch, int x0, int y0,
                       int x1, int y1, bool articulated = false, bool open = false) {
        legend(ch, CellKind::Furniture, category);
        fill(x0, y0, x1, y1, ch);
        ObjectSpec o;
        o.id = id;
        o.category = category;
        o.position = {x0, y0};
        o.articulated = articulated;
        o.articulation_state = articulated
                                   ? (open ? ArticulationState::Open : ArticulationState::Closed)
                                   : ArticulationState::NotApplicable;
        o.attributes["fixed"] = "true";
        scene_.objects.push_back(o);
    }

    void add_object(const std::string& id, const std::string& category, Cell position,
                    std::optional<std::string> on_top_of = std::nullopt,
                    std::optional<std::string> contained_in = std::nullopt) {
        ObjectSpec o;
        o.id = id;
        o.category = category;
        o.position = position;
        o.on_top_of = std::move(on_top_of);
        o.contained_in = std::move(contained_in);
        scene_.objects.push_back(o);
    }

    SceneSpec build() {
        RoomAnnotations ann;
        ann.names = room_names_;
        ann.map = room_map_;
        scene_.room_annotations = ann;
        scene_.validate();
        return scene_;
    }

private:
    SceneSpec scene_;
    std::vector<std::string> room_map_;
    std::map<char, std::string> room_names_;
};

inline json make_task(const std::string& name, const std::string& description,
                      const std::map<std::string, std::string>& bindings,
                      const std::vector<std::string>& conditions) {
    return json{{"schema_version", kTaskSchemaVersion},
                {"name", name},
                {"description_template", description},
                {"bindings", bindings},
                {"goal_conditions", conditions}};
}

// Picks a deterministic position from candidates using the scene seed.
inline Cell pick(std::mt19937_64& rng, const std::vector<Cell>& candidates) {
    return candidates[rng() % candidates.size()];
}

// --- two-room home: kitchen and living room joined by one door ---

inline SceneSpec two_room_scene(uint64_t seed, bool door_open) {
    SceneBuilder b(door_open ? "two_room" : "two_room_closed", 96, 48);
    std::mt19937_64 rng(seed);
    b.fill(1, 1, 46, 46, '.');   // kitchen
    b.fill(49, 1, 94, 46, '.');  // living room
    b.room('K', "kitchen");
    b.room('L', "living room");
    b.annotate(1, 1, 46, 46, 'K');
    b.annotate(49, 1, 94, 46, 'L');
    b.fill(47, 0, 48, 47, '#');
    b.annotate(47, 0, 48, 47, '#');
    b.add_door("door_1", CellRect{47, 20, 48, 27}, door_open);

    b.add_furniture("fridge_1", "electric_refrigerator", 'R', 4, 4, 6, 6, true, false);
    b.add_furniture("table_1", "table", 'T', 20, 6, 23, 8);
    b.add_furniture("microwave_1", "microwave", 'M', 12, 4, 13, 5, true, true);
    b.add_furniture("sofa_1", "sofa", 'S', 70, 8, 75, 10);
    b.add_furniture("television_1", "television", 'V', 86, 20, 87, 22);
    b.add_furniture("cabinet_1", "cabinet", 'C', 60, 40, 62, 42, true, false);

    b.add_object("beer_bottle_1", "beer_bottle", {21, 7}, "table_1");
    b.add_object("beer_bottle_2", "beer_bottle",
                 pick(rng, {{10, 40}, {14, 36}, {8, 30}, {30, 40}}));
    b.add_object("beer_bottle_3", "beer_bottle",
                 pick(rng, {{80, 40}, {88, 34}, {64, 16}, {78, 26}}));
    b.add_object("book_1", "book", pick(rng, {{82, 6}, {90, 12}, {58, 8}}));
    b.add_object("mug_1", "mug", pick(rng, {{34, 22}, {38, 14}, {26, 30}}));
    b.add_object("mug_2", "mug", pick(rng, {{56, 30}, {68, 26}, {90, 40}}));

    return b.build();
}

inline json task_store_beer() {
    return make_task("store_beer", "store all beer bottles in $electric_refrigerator.n.01_1",
                     {{"electric_refrigerator.n.01_1", "fridge_1"}},
                     {"forall beer_bottle inside $electric_refrigerator.n.01_1"});
}
inline json task_fetch_book() {
    return make_task("fetch_book", "put $book.n.02_1 on $table.n.02_1",
                     {{"book.n.02_1", "book_1"}, {"table.n.02_1", "table_1"}},
                     {"ontop $book.n.02_1 $table.n.02_1"});
}
inline json task_open_cabinet() {
    return make_task("open_cabinet", "open $cabinet.n.01_1 and leave it open",
                     {{"cabinet.n.01_1", "cabinet_1"}}, {"open $cabinet.n.01_1"});
}
inline json task_close_microwave() {
    return make_task("close_microwave", "make sure $microwave.n.02_1 is closed",
                     {{"microwave.n.02_1", "microwave_1"}}, {"closed $microwave.n.02_1"});
}

// --- studio: one small room, used by the trivially-satisfied task ---

inline SceneSpec studio_scene(uint64_t seed) {
    SceneBuilder b("studio", 32, 32);
    std::mt19937_64 rng(seed);
    b.fill(1, 1, 30, 30, '.');
    b.room('A', "room");
    b.annotate(1, 1, 30, 30, 'A');
    b.add_furniture("cabinet_1", "cabinet", 'C', 14, 14, 16, 16, true, false);
    b.add_object("mug_1", "mug", pick(rng, {{6, 6}, {24, 8}, {8, 24}}));
    return b.build();
}

inline json task_trivial_closed() {
    return make_task("trivial_closed", "make sure $cabinet.n.01_1 stays closed",
                     {{"cabinet.n.01_1", "cabinet_1"}}, {"closed $cabinet.n.01_1"});
}

// --- corridor flat: four rooms joined by a central corridor ---

inline SceneSpec corridor_maze_scene(uint64_t seed) {
    SceneBuilder b("corridor_maze", 140, 60);
    std::mt19937_64 rng(seed);
    b.fill(1, 26, 138, 33, '.');  // corridor
    b.room('H', "hallway");
    b.annotate(1, 26, 138, 33, 'H');

    b.fill(1, 1, 44, 24, '.');  // bedroom (NW)
    b.room('B', "bedroom");
    b.annotate(1, 1, 44, 24, 'B');
    b.fill(47, 1, 94, 24, '.');  // study (N)
    b.room('S', "study");
    b.annotate(47, 1, 94, 24, 'S');
    b.fill(97, 1, 138, 24, '.');  // bathroom (NE)
    b.room('T', "bathroom");
    b.annotate(97, 1, 138, 24, 'T');
    b.fill(1, 35, 138, 58, '.');  // lounge (S)
    b.room('L', "lounge");
    b.annotate(1, 35, 138, 58, 'L');

    b.fill(0, 25, 139, 25, '#');
    b.annotate(0, 25, 139, 25, '#');
    b.fill(0, 34, 139, 34, '#');
    b.annotate(0, 34, 139, 34, '#');
    b.fill(45, 0, 46, 24, '#');
    b.annotate(45, 0, 46, 24, '#');
    b.fill(95, 0, 96, 24, '#');
    b.annotate(95, 0, 96, 24, '#');

    b.add_door("door_1", CellRect{12, 25, 19, 25}, true);    // bedroom
    b.add_door("door_2", CellRect{64, 25, 71, 25}, true);    // study
    b.add_door("door_3", CellRect{112, 25, 119, 25}, false); // bathroom, closed
    b.add_door("door_4", CellRect{60, 34, 67, 34}, true);    // lounge

    b.add_furniture("bed_1", "bed", 'E', 4, 4, 12, 10);
    b.add_furniture("cabinet_2", "cabinet", 'C', 88, 4, 91, 7, true, false);
    b.add_furniture("table_2", "table", 'T', 60, 4, 64, 6);
    b.add_furniture("bathtub_1", "bathtub", 'U', 120, 4, 128, 8);
    b.add_furniture("sofa_2", "sofa", 'S', 20, 48, 26, 51);

    b.add_object("book_1", "book", pick(rng, {{24, 16}, {30, 8}, {18, 20}}));
    b.add_object("book_2", "book", pick(rng, {{56, 14}, {76, 18}, {52, 10}}));
    b.add_object("book_3", "book", {61, 5}, "table_2");
    b.add_object("towel_1", "towel", pick(rng, {{104, 14}, {110, 18}, {126, 16}}));
    b.add_object("mug_1", "mug", pick(rng, {{100, 44}, {80, 52}, {120, 40}}));
    b.add_object("basket_1", "basket", {34, 44});
    return b.build();
}

inline json task_tidy_books() {
    return make_task("tidy_books", "put all the books in $cabinet.n.01_1",
                     {{"cabinet.n.01_1", "cabinet_2"}}, {"forall book inside $cabinet.n.01_1"});
}
inline json task_bring_mug() {
    return make_task("bring_mug", "put $mug.n.04_1 on $table.n.02_1",
                     {{"mug.n.04_1", "mug_1"}, {"table.n.02_1", "table_2"}},
                     {"ontop $mug.n.04_1 $table.n.02_1"});
}
inline json task_fetch_towel() {
    return make_task("fetch_towel", "put $towel.n.01_1 in $basket.n.01_1",
                     {{"towel.n.01_1", "towel_1"}, {"basket.n.01_1", "basket_1"}},
                     {"inside $towel.n.01_1 $basket.n.01_1"});
}

// --- indoor-outdoor: a two-room house opening onto an L-shaped garden
// through a gate ---

inline SceneSpec indoor_outdoor_scene(uint64_t seed, bool gate_open = false) {
    SceneBuilder b("indoor_outdoor", 120, 70);
    std::mt19937_64 rng(seed);
    b.fill(1, 1, 34, 46, '.');  // kitchen
    b.room('K', "kitchen");
    b.annotate(1, 1, 34, 46, 'K');
    b.fill(37, 1, 68, 46, '.');  // living room
    b.room('L', "living room");
    b.annotate(37, 1, 68, 46, 'L');
    b.fill(35, 0, 36, 47, '#');
    b.annotate(35, 0, 36, 47, '#');
    b.fill(0, 47, 70, 48, '#');  // house south wall
    b.annotate(0, 47, 70, 48, '#');
    b.fill(69, 0, 70, 48, '#');  // house east wall
    b.annotate(69, 0, 70, 48, '#');

    b.fill(71, 1, 118, 48, ',');  // garden, east of the house
    b.fill(1, 49, 118, 68, ',');  // garden, south of the house
    b.room('G', "garden");
    b.annotate(71, 1, 118, 48, 'G');
    b.annotate(1, 49, 118, 68, 'G');

    b.add_door("door_1", CellRect{35, 18, 36, 25}, true);     // kitchen <-> living
    b.add_door("gate_1", CellRect{46, 47, 53, 48}, gate_open);  // living <-> garden

    b.add_furniture("fridge_1", "electric_refrigerator", 'R', 4, 4, 6, 6);
    b.add_furniture("sink_1", "sink", 'N', 14, 3, 16, 4);
    b.add_furniture("sofa_1", "sofa", 'S', 52, 6, 58, 9);
    b.add_furniture("tree_1", "tree", 'E', 92, 20, 96, 24);
    b.add_furniture("wheelbarrow_1", "wheelbarrow", 'W', 86, 56, 90, 58);

    b.add_object("basket_1", "basket", {100, 60});
    b.add_object("apple_1", "apple", pick(rng, {{98, 30}, {88, 36}, {104, 26}}));
    b.add_object("apple_2", "apple", pick(rng, {{30, 56}, {50, 60}, {70, 62}}));
    b.add_object("watering_can_1", "watering_can", pick(rng, {{80, 10}, {110, 8}, {76, 30}}));
    b.add_object("mug_1", "mug", pick(rng, {{20, 20}, {10, 36}, {28, 12}}));
    return b.build();
}

inline json task_harvest_apples() {
    return make_task("harvest_apples", "store all apples in $basket.n.01_1",
                     {{"basket.n.01_1", "basket_1"}}, {"forall apple inside $basket.n.01_1"});
}
inline json task_fetch_watering_can() {
    return make_task("fetch_watering_can", "put $watering_can.n.01_1 on $wheelbarrow.n.01_1",
                     {{"watering_can.n.01_1", "watering_can_1"},
                      {"wheelbarrow.n.01_1", "wheelbarrow_1"}},
                     {"ontop $watering_can.n.01_1 $wheelbarrow.n.01_1"});
}

// --- template registry (gen-scene) ---

struct GeneratedFixture {
    SceneSpec scene;
    std::vector<json> tasks;
};

inline std::vector<std::string> template_names() {
    return {"two-room", "two-room-closed", "studio", "corridor-maze", "indoor-outdoor"};
}

inline GeneratedFixture gen_scene(const std::string& tmpl, uint64_t seed) {
    if (tmpl == "two-room")
        return {two_room_scene(seed, true),
                {task_store_beer(), task_fetch_book(), task_open_cabinet(), task_close_microwave()}};
    if (tmpl == "two-room-closed") return {two_room_scene(seed, false), {task_store_beer()}};
    if (tmpl == "studio") return {studio_scene(seed), {task_trivial_closed()}};
    if (tmpl == "corridor-maze")
        return {corridor_maze_scene(seed), {task_tidy_books(), task_bring_mug(), task_fetch_towel()}};
    if (tmpl == "indoor-outdoor")
        return {indoor_outdoor_scene(seed), {task_harvest_apples(), task_fetch_watering_can()}};
    throw std::runtime_error("unknown scene template: " + tmpl);
}

struct SuiteEntry {
    std::string label;
    SceneSpec scene;
    json task;
};

// The bundled evaluation suite: grasp, place on top, place inside behind
// the articulation gate, open/close, exploration behind a closed door, and
// indoor-outdoor traversal.
inline std::vector<SuiteEntry> bundled_suite(uint64_t seed = 0) {
    std::vector<SuiteEntry> suite;
    SceneSpec two_open = two_room_scene(seed, true);
    SceneSpec two_closed = two_room_scene(seed, false);
    SceneSpec studio = studio_scene(seed);
    SceneSpec corridor = corridor_maze_scene(seed);
    SceneSpec outdoor = indoor_outdoor_scene(seed, false);

    suite.push_back({"two_room/store_beer", two_open, task_store_beer()});
    suite.push_back({"two_room/fetch_book", two_open, task_fetch_book()});
    suite.push_back({"two_room/open_cabinet", two_open, task_open_cabinet()});
    suite.push_back({"two_room/close_microwave", two_open, task_close_microwave()});
    suite.push_back({"two_room_closed/store_beer", two_closed, task_store_beer()});
    suite.push_back({"studio/trivial_closed", studio, task_trivial_closed()});
    suite.push_back({"corridor_maze/tidy_books", corridor, task_tidy_books()});
    suite.push_back({"corridor_maze/bring_mug", corridor, task_bring_mug()});
    suite.push_back({"corridor_maze/fetch_towel", corridor, task_fetch_towel()});
    suite.push_back({"indoor_outdoor/harvest_apples", outdoor, task_harvest_apples()});
    suite.push_back({"indoor_outdoor/fetch_watering_can", outdoor, task_fetch_watering_can()});
    return suite;
}

// --- map helpers (tests, pipelines on fully explored scenes) ---

// Ground-truth BEV map as if the scene were perfectly explored: free-space
// categories stay free, everything else (walls, furniture, closed doors,
// loose objects) is occupied. Doors are registered so kernels can be built.
inline BevMap fully_observed_map(const SceneSpec& scene) {
    BevMap map(scene.width_cells, scene.height_cells, scene.resolution_m,
               scene.free_space_categories);
    for (int y = 0; y < scene.height_cells; ++y)
        for (int x = 0; x < scene.width_cells; ++x) {
            Cell c{x, y};
            CellKind kind = scene.kind_at(c);
            const std::string& category = scene.category_at(c);
            if (kind == CellKind::DoorFrame) continue;  // handled per door below
            bool free = kind == CellKind::Free && scene.free_space_categories.count(category) > 0;
            map.set_cell(c, free ? CellState::Free : CellState::Occupied, category);
        }
    for (const auto& d : scene.doors) {
        ObservedDoor od;
        od.id = d.id;
        od.center = d.center;
        od.open = d.open;
        for (int y = d.bbox.y0; y <= d.bbox.y1; ++y)
            for (int x = d.bbox.x0; x <= d.bbox.x1; ++x) {
                od.frame_cells.insert({x, y});
                map.set_cell({x, y}, d.open ? CellState::Free : CellState::Occupied,
                             d.open ? "floor" : "door");
            }
        map.register_door(od);
    }
    for (const auto& o : scene.objects) {
        if (o.contained_in) continue;
        if (scene.kind_at(o.position) == CellKind::Free && !o.on_top_of)
            map.set_cell(o.position, CellState::Occupied, o.category);
    }
    return map;
}

// Random perfect maze (recursive backtracker) rendered as a fully known
// map; corridors are `corridor` cells wide with 1-cell walls.
inline BevMap random_maze_map(int cells_x, int cells_y, int corridor, uint64_t seed,
                              double resolution = kDefaultResolution) {
    const int pitch = corridor + 1;
    const int w = cells_x * pitch + 1;
    const int h = cells_y * pitch + 1;
    BevMap map(w, h, resolution, {"floor"});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) map.set_cell({x, y}, CellState::Occupied, "wall");

    auto carve_cell = [&](int cx, int cy) {
        for (int dy = 0; dy < corridor; ++dy)
            for (int dx = 0; dx < corridor; ++dx)
                map.set_cell({1 + cx * pitch + dx, 1 + cy * pitch + dy}, CellState::Free, "floor");
    };
    auto carve_wall = [&](int cx, int cy, int nx, int ny) {
        int x0 = 1 + std::min(cx, nx) * pitch;
        int y0 = 1 + std::min(cy, ny) * pitch;
        if (cx != nx) {  // horizontal neighbors: open the vertical wall strip
            int wall_x = x0 + corridor;
            for (int dy = 0; dy < corridor; ++dy)
                map.set_cell({wall_x, y0 + dy}, CellState::Free, "floor");
        } else {
            int wall_y = y0 + corridor;
            for (int dx = 0; dx < corridor; ++dx)
                map.set_cell({x0 + dx, wall_y}, CellState::Free, "floor");
        }
    };

    std::mt19937_64 rng(seed);
    std::vector<char> visited(static_cast<size_t>(cells_x) * cells_y, 0);
    std::vector<std::pair<int, int>> stack;
    stack.emplace_back(0, 0);
    visited[0] = 1;
    carve_cell(0, 0);
    while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        std::vector<std::pair<int, int>> options;
        constexpr int dx[4] = {1, -1, 0, 0};
        constexpr int dy[4] = {0, 0, 1, -1};
        for (int i = 0; i < 4; ++i) {
            int nx = cx + dx[i];
            int ny = cy + dy[i];
            if (nx < 0 || nx >= cells_x || ny < 0 || ny >= cells_y) continue;
            if (!visited[static_cast<size_t>(ny) * cells_x + nx]) options.emplace_back(nx, ny);
        }
        if (options.empty()) {
            stack.pop_back();
            continue;
        }
        auto [nx, ny] = options[rng() % options.size()];
        visited[static_cast<size_t>(ny) * cells_x + nx] = 1;
        carve_cell(nx, ny);
        carve_wall(cx, cy, nx, ny);
        stack.emplace_back(nx, ny);
    }
    return map;
}

}  // namespace fixtures
}  // namespace tidygrid
