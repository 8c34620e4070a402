#pragma once

#include <cassert>
#include <cmath>
#include <compare>
#include <cstdint>
#include <vector>

namespace tidygrid {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDefaultResolution = 0.075;  // meters per cell

inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }

// Wraps an angle into [0, 2*pi).
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a;
}

struct Cell {
    int x = 0;
    int y = 0;

    friend auto operator<=>(const Cell&, const Cell&) = default;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }

    friend auto operator<=>(const Vec2&, const Vec2&) = default;
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

inline Vec2 cell_center(const Cell& c, double resolution) {
    return {(c.x + 0.5) * resolution, (c.y + 0.5) * resolution};
}

inline Cell point_to_cell(const Vec2& p, double resolution) {
    return {static_cast<int>(std::floor(p.x / resolution)),
            static_cast<int>(std::floor(p.y / resolution))};
}

// Inclusive axis-aligned cell rectangle.
struct CellRect {
    int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

    bool contains(const Cell& c) const {
        return c.x >= x0 && c.x <= x1 && c.y >= y0 && c.y <= y1;
    }
    int width() const { return x1 - x0 + 1; }
    int height() const { return y1 - y0 + 1; }
    bool empty() const { return x1 < x0 || y1 < y0; }

    void expand(const Cell& c) {
        if (empty()) {
            x0 = x1 = c.x;
            y0 = y1 = c.y;
            return;
        }
        x0 = std::min(x0, c.x);
        x1 = std::max(x1, c.x);
        y0 = std::min(y0, c.y);
        y1 = std::max(y1, c.y);
    }

    friend auto operator<=>(const CellRect&, const CellRect&) = default;
};

template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height), data_(static_cast<size_t>(width) * height, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    bool in_bounds(const Cell& c) const {
        return c.x >= 0 && c.x < width_ && c.y >= 0 && c.y < height_;
    }
    size_t index(const Cell& c) const {
        return static_cast<size_t>(c.y) * width_ + c.x;
    }

    T& at(const Cell& c) {
        assert(in_bounds(c));
        return data_[index(c)];
    }
    const T& at(const Cell& c) const {
        assert(in_bounds(c));
        return data_[index(c)];
    }

    const std::vector<T>& data() const { return data_; }
    std::vector<T>& data() { return data_; }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

// Neighbor offsets, clockwise from north. The first four are the
// 4-neighborhood; all eight form the 8-neighborhood.
inline constexpr int kNeighborDx[8] = {0, 1, 0, -1, 1, 1, -1, -1};
inline constexpr int kNeighborDy[8] = {-1, 0, 1, 0, -1, 1, 1, -1};

}  // namespace tidygrid
