#include "clab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "clab/error.hpp"

namespace clab {

Grid::Grid(int dim_, std::array<double, 2> extents_, std::array<int, 2> shape_,
           std::vector<BC> bc_)
    : dim(dim_), extents(extents_), shape(shape_), bc(std::move(bc_)) {
    if (dim != 1 && dim != 2)
        throw Error("bad-grid", "dim must be 1 or 2");
    if (dim == 1) {
        shape[1] = 1;
        extents[1] = 0.0;
    }
    for (int d = 0; d < dim; ++d) {
        if (shape[d] < 3)
            throw Error("bad-grid", "need at least 3 nodes per axis");
        if (!(extents[d] > 0.0))
            throw Error("bad-grid", "extents must be positive");
        spacing[d] = extents[d] / (shape[d] - 1);
    }
}

double Grid::node_weight(int idx) const {
    auto c = coords(idx);
    double w = axis_weight(0, c[0]);
    if (dim == 2) w *= axis_weight(1, c[1]);
    return w;
}

double Grid::diameter() const {
    double d2 = extents[0] * extents[0];
    if (dim == 2) d2 += extents[1] * extents[1];
    return std::sqrt(d2);
}

double Grid::min_spacing() const {
    double h = spacing[0];
    if (dim == 2) h = std::min(h, spacing[1]);
    return h;
}

bool Grid::same_layout(const Grid& o) const {
    return dim == o.dim && shape == o.shape && extents == o.extents;
}

GridFunction::GridFunction(Grid g, int m_) : grid(std::move(g)), m(m_) {
    values.assign(static_cast<size_t>(grid.nodes()) * m, 0.0);
}

bool GridFunction::all_finite() const {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

double GridFunction::sup_norm() const {
    double s = 0.0;
    for (double v : values) s = std::max(s, std::abs(v));
    return s;
}

GridFunction GridFunction::constant(const Grid& g, const std::vector<double>& vals) {
    GridFunction f(g, static_cast<int>(vals.size()));
    for (int i = 0; i < g.nodes(); ++i)
        for (int c = 0; c < f.m; ++c) f.at(i, c) = vals[c];
    return f;
}

GridFunction GridFunction::sample(const Grid& g, int m,
                                  const std::function<std::vector<double>(double, double)>& fn) {
    GridFunction f(g, m);
    for (int i = 0; i < g.nodes(); ++i) {
        auto c = g.coords(i);
        auto v = fn(g.x(0, c[0]), g.dim == 2 ? g.x(1, c[1]) : 0.0);
        for (int k = 0; k < m; ++k) f.at(i, k) = v[k];
    }
    return f;
}

Region region_nodes(const Grid& g, int center, double radius) {
    if (!(radius > 0.0))
        throw Error("empty-ball", "radius must be positive");
    Region r;
    r.center = center;
    r.radius = radius;
    for_each_region_span(g, center, radius, [&](int b, int e) {
        for (int i = b; i < e; ++i) r.nodes.push_back(i);
    });
    return r;
}

std::vector<double> average(const GridFunction& f, const Region& region) {
    if (region.nodes.empty())
        throw Error("empty-ball", "region has no nodes");
    std::vector<double> sum(f.m, 0.0);
    double wsum = 0.0;
    for (int i : region.nodes) {
        double w = f.grid.node_weight(i);
        wsum += w;
        for (int c = 0; c < f.m; ++c) sum[c] += w * f.at(i, c);
    }
    for (double& s : sum) s /= wsum;
    return sum;
}

double integrate(const GridFunction& f, int c) {
    double s = 0.0;
    for (int i = 0; i < f.grid.nodes(); ++i) s += f.grid.node_weight(i) * f.at(i, c);
    return s;
}

namespace {

// d/dx_axis of component c of f at node (ix,iy): central inside, one-sided
// second order at the two ends.
double diff1(const GridFunction& f, int c, int axis, int ix, int iy) {
    const Grid& g = f.grid;
    double h = g.spacing[axis];
    int n = g.shape[axis];
    int i = (axis == 0) ? ix : iy;
    auto val = [&](int k) {
        return (axis == 0) ? f.at(g.index(k, iy), c) : f.at(g.index(ix, k), c);
    };
    if (i == 0) return (-3.0 * val(0) + 4.0 * val(1) - val(2)) / (2.0 * h);
    if (i == n - 1) return (3.0 * val(n - 1) - 4.0 * val(n - 2) + val(n - 3)) / (2.0 * h);
    return (val(i + 1) - val(i - 1)) / (2.0 * h);
}

double diff2(const GridFunction& f, int c, int axis, int ix, int iy) {
    const Grid& g = f.grid;
    double h = g.spacing[axis];
    int n = g.shape[axis];
    int i = (axis == 0) ? ix : iy;
    auto val = [&](int k) {
        return (axis == 0) ? f.at(g.index(k, iy), c) : f.at(g.index(ix, k), c);
    };
    if (i == 0)
        return (2.0 * val(0) - 5.0 * val(1) + 4.0 * val(2) - val(3)) / (h * h);
    if (i == n - 1)
        return (2.0 * val(n - 1) - 5.0 * val(n - 2) + 4.0 * val(n - 3) - val(n - 4)) / (h * h);
    return (val(i + 1) - 2.0 * val(i) + val(i - 1)) / (h * h);
}

} // namespace

GridFunction gradient(const GridFunction& f) {
    const Grid& g = f.grid;
    GridFunction out(g, f.m * g.dim);
    for (int i = 0; i < g.nodes(); ++i) {
        auto cc = g.coords(i);
        for (int c = 0; c < f.m; ++c)
            for (int d = 0; d < g.dim; ++d)
                out.at(i, c * g.dim + d) = diff1(f, c, d, cc[0], cc[1]);
    }
    return out;
}

GridFunction second_derivatives(const GridFunction& f) {
    const Grid& g = f.grid;
    int dim = g.dim;
    GridFunction out(g, f.m * dim * dim);
    // pure second derivatives
    for (int i = 0; i < g.nodes(); ++i) {
        auto cc = g.coords(i);
        for (int c = 0; c < f.m; ++c)
            for (int d = 0; d < dim; ++d)
                out.at(i, c * dim * dim + d * dim + d) = diff2(f, c, d, cc[0], cc[1]);
    }
    if (dim == 2) {
        // mixed partials: average the two composition orders, symmetric by construction
        GridFunction dx(g, f.m), dy(g, f.m);
        for (int i = 0; i < g.nodes(); ++i) {
            auto cc = g.coords(i);
            for (int c = 0; c < f.m; ++c) {
                dx.at(i, c) = diff1(f, c, 0, cc[0], cc[1]);
                dy.at(i, c) = diff1(f, c, 1, cc[0], cc[1]);
            }
        }
        for (int i = 0; i < g.nodes(); ++i) {
            auto cc = g.coords(i);
            for (int c = 0; c < f.m; ++c) {
                double mixed = 0.5 * (diff1(dy, c, 0, cc[0], cc[1]) + diff1(dx, c, 1, cc[0], cc[1]));
                out.at(i, c * 4 + 1) = mixed;
                out.at(i, c * 4 + 2) = mixed;
            }
        }
    }
    return out;
}

GridFunction divergence_of_flux(const GridFunction& flux, int m) {
    const Grid& g = flux.grid;
    int dim = g.dim;
    if (flux.m != m * dim)
        throw Error("bad-shape", "flux must have m*dim components");
    GridFunction out(g, m);
    for (int i = 0; i < g.nodes(); ++i) {
        auto cc = g.coords(i);
        for (int c = 0; c < m; ++c) {
            double s = 0.0;
            for (int d = 0; d < dim; ++d) s += diff1(flux, c * dim + d, d, cc[0], cc[1]);
            out.at(i, c) = s;
        }
    }
    return out;
}

Extension extend_by_reflection(const GridFunction& f, int axis, int side, Reflection kind) {
    const Grid& g = f.grid;
    if (axis < 0 || axis >= g.dim)
        throw Error("bad-shape", "reflection axis outside grid dimension");
    int n = g.shape[axis];
    std::array<int, 2> shape2 = g.shape;
    shape2[axis] = 2 * n - 1;
    std::array<double, 2> ext2 = g.extents;
    ext2[axis] *= 2.0;
    Grid g2(g.dim, ext2, shape2, g.bc);

    Extension result;
    result.field = GridFunction(g2, f.m);
    double sign = (kind == Reflection::Odd) ? -1.0 : 1.0;

    for (int j2 = 0; j2 < g2.nodes(); ++j2) {
        auto cc = g2.coords(j2);
        int k = cc[axis];
        bool mirrored;
        int orig;
        if (side == 0) {
            // reflection plane at the low end; original occupies k >= n-1
            mirrored = k < n - 1;
            orig = mirrored ? (n - 1) - k : k - (n - 1);
        } else {
            mirrored = k > n - 1;
            orig = mirrored ? 2 * (n - 1) - k : k;
        }
        auto oc = cc;
        oc[axis] = orig;
        int j = g.index(oc[0], g.dim == 2 ? oc[1] : 0);
        for (int c = 0; c < f.m; ++c)
            result.field.at(j2, c) = (mirrored ? sign : 1.0) * f.at(j, c);
    }

    if (kind == Reflection::Odd) {
        // odd extension needs a vanishing trace on the reflection plane
        int plane = (side == 0) ? 0 : n - 1;
        for (int i = 0; i < g.nodes(); ++i) {
            if (g.coords(i)[axis] != plane) continue;
            for (int c = 0; c < f.m; ++c)
                if (f.at(i, c) != 0.0) result.trace_jump = true;
        }
    }
    return result;
}

} // namespace clab
