#ifndef CLAB_GRID_HPP
#define CLAB_GRID_HPP

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

namespace clab {

enum class BC { Dirichlet, Neumann };

// Rectangular tensor grid on [0,extent_x] x [0,extent_y] (or an interval in 1D).
// Nodes include both endpoints, so spacing = extent/(shape-1).
struct Grid {
    int dim = 1;
    std::array<double, 2> extents{1.0, 0.0};
    std::array<int, 2> shape{2, 1};
    std::array<double, 2> spacing{0.0, 0.0};
    std::vector<BC> bc; // one entry per system component, used by the scheme

    Grid() = default;
    Grid(int dim_, std::array<double, 2> extents_, std::array<int, 2> shape_,
         std::vector<BC> bc_ = {});

    int nodes() const { return shape[0] * (dim == 2 ? shape[1] : 1); }
    int index(int ix, int iy = 0) const { return ix + shape[0] * iy; }
    std::array<int, 2> coords(int idx) const {
        return {idx % shape[0], idx / shape[0]};
    }
    double x(int axis, int i) const { return i * spacing[axis]; }

    // Trapezoidal quadrature weight of a node (tensor product of 1D weights).
    double axis_weight(int axis, int i) const {
        return (i == 0 || i == shape[axis] - 1) ? 0.5 * spacing[axis] : spacing[axis];
    }
    double node_weight(int idx) const;

    double diameter() const;
    double min_spacing() const;
    bool same_layout(const Grid& o) const;
};

// Vector-valued nodal field; values are node-major: values[idx*m + c].
struct GridFunction {
    Grid grid;
    int m = 1;
    std::vector<double> values;

    GridFunction() = default;
    GridFunction(Grid g, int m_);

    double& at(int idx, int c) { return values[idx * m + c]; }
    double at(int idx, int c) const { return values[idx * m + c]; }
    bool all_finite() const;
    double sup_norm() const;

    static GridFunction constant(const Grid& g, const std::vector<double>& vals);
    // fn(x, y) -> m values; y ignored in 1D
    static GridFunction sample(const Grid& g, int m,
                               const std::function<std::vector<double>(double, double)>& fn);
};

// Euclidean norm over the components stored at one node.
inline double node_norm(const GridFunction& f, int idx) {
    double s = 0.0;
    for (int c = 0; c < f.m; ++c) {
        double v = f.at(idx, c);
        s += v * v;
    }
    return std::sqrt(s);
}

// Discrete Omega(x0,R): nodes within Euclidean distance R of the center node.
struct Region {
    int center = 0;
    double radius = 0.0;
    std::vector<int> nodes;
};

// Inclusion rule shared by all ball scans: squared distance vs radius with a
// relative slack so exact-tie nodes (corner at distance == diameter) stay in.
inline bool ball_contains(double dist2, double radius) {
    double r2 = radius * radius;
    return dist2 <= r2 * (1.0 + 4e-12) + 1e-30;
}

// Visits the contiguous node-index spans [begin,end) that make up the region.
// 1D: one span. 2D: one span per intersected row.
template <class F>
void for_each_region_span(const Grid& g, int center, double radius, F&& visit) {
    auto cc = g.coords(center);
    double hx = g.spacing[0];
    double cx = g.x(0, cc[0]);

    auto row_span = [&](double dy2, int iy) {
        double rem = radius * radius - dy2;
        double half = rem > 0.0 ? std::sqrt(rem) : 0.0;
        int lo = std::max(0, static_cast<int>(std::floor((cx - half) / hx)) - 1);
        int hi = std::min(g.shape[0] - 1, static_cast<int>(std::ceil((cx + half) / hx)) + 1);
        auto inside = [&](int ix) {
            double dx = g.x(0, ix) - cx;
            return ball_contains(dx * dx + dy2, radius);
        };
        while (lo <= hi && !inside(lo)) ++lo;
        while (hi >= lo && !inside(hi)) --hi;
        if (lo <= hi) visit(g.index(lo, iy), g.index(hi, iy) + 1);
    };

    if (g.dim == 1) {
        row_span(0.0, 0);
        return;
    }
    double hy = g.spacing[1];
    double cy = g.x(1, cc[1]);
    int jlo = std::max(0, static_cast<int>(std::floor((cy - radius) / hy)) - 1);
    int jhi = std::min(g.shape[1] - 1, static_cast<int>(std::ceil((cy + radius) / hy)) + 1);
    for (int iy = jlo; iy <= jhi; ++iy) {
        double dy = g.x(1, iy) - cy;
        double dy2 = dy * dy;
        if (!ball_contains(dy2, radius)) continue;
        row_span(dy2, iy);
    }
}

Region region_nodes(const Grid& g, int center, double radius);

// Quadrature-weighted mean over a region, per component.
std::vector<double> average(const GridFunction& f, const Region& region);

double integrate(const GridFunction& f, int c = 0);

GridFunction gradient(const GridFunction& f);            // m*dim comps, [c*dim+d]
GridFunction second_derivatives(const GridFunction& f);  // m*dim*dim comps
GridFunction divergence_of_flux(const GridFunction& flux, int m);

enum class Reflection { Odd, Even };

struct Extension {
    GridFunction field;
    bool trace_jump = false; // odd extension with nonvanishing values on the plane
};

// side: 0 = reflect about the low end of the axis, 1 = about the high end.
Extension extend_by_reflection(const GridFunction& f, int axis, int side, Reflection kind);

} // namespace clab

#endif
