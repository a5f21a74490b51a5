#include "liftreg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "liftreg/errors.hpp"

namespace liftreg {

void validate_grid(const GridSpec& grid)
{
    for (int a = 0; a < 3; ++a) {
        if (grid.dims[a] < 1) {
            throw InputError("grid dims must be >= 1 (axis " + std::to_string(a) + ")");
        }
        if (!(grid.spacing[a] > 0.0) || !std::isfinite(grid.spacing[a])) {
            throw InputError("grid spacing must be finite and > 0 (axis " + std::to_string(a) + ")");
        }
    }
    if (!is_finite(grid.origin)) {
        throw InputError("grid origin must be finite");
    }
}

std::size_t Mask3D::count() const
{
    return static_cast<std::size_t>(std::count(data.begin(), data.end(), std::uint8_t{1}));
}

void validate(const Image3D& vol)
{
    validate_grid(vol.grid);
    if (vol.data.size() != vol.grid.voxel_count()) {
        throw InputError("image data length does not match grid dims");
    }
    for (double v : vol.data) {
        if (!std::isfinite(v)) {
            throw InputError("image contains non-finite values");
        }
    }
}

void validate(const Mask3D& mask)
{
    validate_grid(mask.grid);
    if (mask.data.size() != mask.grid.voxel_count()) {
        throw InputError("mask data length does not match grid dims");
    }
    for (auto v : mask.data) {
        if (v > 1) {
            throw InputError("mask values must be 0 or 1");
        }
    }
}

void validate(const DisplacementField& u)
{
    validate_grid(u.grid);
    if (u.data.size() != 3 * u.grid.voxel_count()) {
        throw InputError("displacement data length must be 3 * voxel count");
    }
    for (double v : u.data) {
        if (!std::isfinite(v)) {
            throw InputError("displacement field contains non-finite values");
        }
    }
}

void validate_unique_ids(const Landmarks& landmarks)
{
    std::set<std::int64_t> seen;
    for (const auto& lm : landmarks) {
        if (!seen.insert(lm.id).second) {
            throw InputError("duplicate landmark id " + std::to_string(lm.id));
        }
    }
}

namespace {

struct Cell {
    int i0, j0, k0;
    double fx, fy, fz;
};

inline Cell locate(const Vec3& c)
{
    const double flx = std::floor(c.x);
    const double fly = std::floor(c.y);
    const double flz = std::floor(c.z);
    return {static_cast<int>(flx), static_cast<int>(fly), static_cast<int>(flz), c.x - flx, c.y - fly, c.z - flz};
}

// Any coordinate at or beyond one voxel outside the grid samples to zero.
inline bool fully_outside(const GridSpec& g, const Vec3& c)
{
    return !(c.x > -1.0 && c.x < g.dims[0] && c.y > -1.0 && c.y < g.dims[1] && c.z > -1.0 && c.z < g.dims[2]);
}

inline bool cell_inside(const GridSpec& g, const Cell& c)
{
    return c.i0 >= 0 && c.j0 >= 0 && c.k0 >= 0 && c.i0 + 1 < g.dims[0] && c.j0 + 1 < g.dims[1] &&
           c.k0 + 1 < g.dims[2];
}

inline double corner(const GridSpec& g, std::span<const double> data, int i, int j, int k)
{
    if (i < 0 || j < 0 || k < 0 || i >= g.dims[0] || j >= g.dims[1] || k >= g.dims[2]) {
        return 0.0;
    }
    return data[g.index(i, j, k)];
}

// Gathers the 8 corner values of a cell (zero outside the grid).
inline void gather(const GridSpec& g, std::span<const double> data, const Cell& c, double v[8])
{
    if (cell_inside(g, c)) {
        const std::size_t sx = 1;
        const std::size_t sy = static_cast<std::size_t>(g.dims[0]);
        const std::size_t sz = sy * static_cast<std::size_t>(g.dims[1]);
        const std::size_t base = g.index(c.i0, c.j0, c.k0);
        v[0] = data[base];
        v[1] = data[base + sx];
        v[2] = data[base + sy];
        v[3] = data[base + sx + sy];
        v[4] = data[base + sz];
        v[5] = data[base + sx + sz];
        v[6] = data[base + sy + sz];
        v[7] = data[base + sx + sy + sz];
        return;
    }
    for (int n = 0; n < 8; ++n) {
        v[n] = corner(g, data, c.i0 + (n & 1), c.j0 + ((n >> 1) & 1), c.k0 + ((n >> 2) & 1));
    }
}

} // namespace

double sample_trilinear_index(const GridSpec& grid, std::span<const double> data, const Vec3& index_coord)
{
    if (fully_outside(grid, index_coord)) {
        return 0.0;
    }
    const Cell c = locate(index_coord);
    double v[8];
    gather(grid, data, c, v);
    const double c00 = v[0] + c.fx * (v[1] - v[0]);
    const double c10 = v[2] + c.fx * (v[3] - v[2]);
    const double c01 = v[4] + c.fx * (v[5] - v[4]);
    const double c11 = v[6] + c.fx * (v[7] - v[6]);
    const double c0 = c00 + c.fy * (c10 - c00);
    const double c1 = c01 + c.fy * (c11 - c01);
    return c0 + c.fz * (c1 - c0);
}

double sample_trilinear_index_grad(const GridSpec& grid, std::span<const double> data,
                                   const Vec3& index_coord, Vec3& grad_index)
{
    if (fully_outside(grid, index_coord)) {
        grad_index = {};
        return 0.0;
    }
    const Cell c = locate(index_coord);
    double v[8];
    gather(grid, data, c, v);
    const double gy = 1.0 - c.fy, gz = 1.0 - c.fz;

    const double c00 = v[0] + c.fx * (v[1] - v[0]);
    const double c10 = v[2] + c.fx * (v[3] - v[2]);
    const double c01 = v[4] + c.fx * (v[5] - v[4]);
    const double c11 = v[6] + c.fx * (v[7] - v[6]);
    const double c0 = c00 + c.fy * (c10 - c00);
    const double c1 = c01 + c.fy * (c11 - c01);

    grad_index.x = gz * (gy * (v[1] - v[0]) + c.fy * (v[3] - v[2])) +
                   c.fz * (gy * (v[5] - v[4]) + c.fy * (v[7] - v[6]));
    grad_index.y = gz * (c10 - c00) + c.fz * (c11 - c01);
    grad_index.z = c1 - c0;
    return c0 + c.fz * (c1 - c0);
}

void scatter_trilinear_index(const GridSpec& grid, std::span<double> data, const Vec3& index_coord, double weight)
{
    if (fully_outside(grid, index_coord)) {
        return;
    }
    const Cell c = locate(index_coord);
    const double wx[2] = {1.0 - c.fx, c.fx};
    const double wy[2] = {1.0 - c.fy, c.fy};
    const double wz[2] = {1.0 - c.fz, c.fz};
    for (int n = 0; n < 8; ++n) {
        const int a = n & 1, b = (n >> 1) & 1, d = (n >> 2) & 1;
        const int i = c.i0 + a, j = c.j0 + b, k = c.k0 + d;
        if (i < 0 || j < 0 || k < 0 || i >= grid.dims[0] || j >= grid.dims[1] || k >= grid.dims[2]) {
            continue;
        }
        data[grid.index(i, j, k)] += weight * wx[a] * wy[b] * wz[d];
    }
}

double trilinear_sample(const Image3D& vol, const Vec3& p)
{
    if (!is_finite(p)) {
        throw InputError("trilinear_sample: non-finite point");
    }
    return sample_trilinear_index(vol.grid, vol.data, vol.grid.to_index(p));
}

Vec3 trilinear_sample(const DisplacementField& u, const Vec3& p)
{
    if (!is_finite(p)) {
        throw InputError("trilinear_sample: non-finite point");
    }
    const Vec3 c = u.grid.to_index(p);
    if (fully_outside(u.grid, c)) {
        return {};
    }
    const Cell cell = locate(c);
    Vec3 out;
    for (int n = 0; n < 8; ++n) {
        const int a = n & 1, b = (n >> 1) & 1, d = (n >> 2) & 1;
        const int i = cell.i0 + a, j = cell.j0 + b, k = cell.k0 + d;
        if (i < 0 || j < 0 || k < 0 || i >= u.grid.dims[0] || j >= u.grid.dims[1] || k >= u.grid.dims[2]) {
            continue;
        }
        const double w = (a ? cell.fx : 1.0 - cell.fx) * (b ? cell.fy : 1.0 - cell.fy) * (d ? cell.fz : 1.0 - cell.fz);
        out += w * u.at(i, j, k);
    }
    return out;
}

namespace {

// Continuous source-grid coordinate of x + u(x) for target voxel (i,j,k).
// When both grids coincide the map is formed directly in index space so that
// u = 0 lands exactly on voxel centres.
template <class F>
void for_each_pullback(const GridSpec& src_grid, const DisplacementField& u, F&& f)
{
    const GridSpec& g = u.grid;
    const bool same = (src_grid == g);
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++n) {
                const Vec3 d = u.at(n);
                Vec3 c;
                if (same) {
                    c = {i + d.x / g.spacing.x, j + d.y / g.spacing.y, k + d.z / g.spacing.z};
                } else {
                    c = src_grid.to_index(g.world(i, j, k) + d);
                }
                f(n, c);
            }
        }
    }
}

void require_finite(const DisplacementField& u)
{
    for (double v : u.data) {
        if (!std::isfinite(v)) {
            throw InputError("displacement field contains non-finite values");
        }
    }
}

} // namespace

Image3D warp_image(const Image3D& src, const DisplacementField& u, Interpolation interp)
{
    require_finite(u);
    if (u.data.size() != 3 * u.grid.voxel_count()) {
        throw InputError("warp_image: displacement data length mismatch");
    }
    Image3D out(u.grid);
    const GridSpec& sg = src.grid;
    if (interp == Interpolation::trilinear) {
        for_each_pullback(sg, u, [&](std::size_t n, const Vec3& c) {
            out.data[n] = sample_trilinear_index(sg, src.data, c);
        });
    } else {
        for_each_pullback(sg, u, [&](std::size_t n, const Vec3& c) {
            const int i = static_cast<int>(std::floor(c.x + 0.5));
            const int j = static_cast<int>(std::floor(c.y + 0.5));
            const int k = static_cast<int>(std::floor(c.z + 0.5));
            out.data[n] = corner(sg, src.data, i, j, k);
        });
    }
    return out;
}

Mask3D warp_mask(const Mask3D& src, const DisplacementField& u)
{
    require_finite(u);
    Mask3D out(u.grid);
    const GridSpec& sg = src.grid;
    for_each_pullback(sg, u, [&](std::size_t n, const Vec3& c) {
        const int i = static_cast<int>(std::floor(c.x + 0.5));
        const int j = static_cast<int>(std::floor(c.y + 0.5));
        const int k = static_cast<int>(std::floor(c.z + 0.5));
        if (i < 0 || j < 0 || k < 0 || i >= sg.dims[0] || j >= sg.dims[1] || k >= sg.dims[2]) {
            out.data[n] = 0;
        } else {
            out.data[n] = src.data[sg.index(i, j, k)];
        }
    });
    return out;
}

DisplacementField image_gradient(const Image3D& vol)
{
    const GridSpec& g = vol.grid;
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] < 2) {
            throw InputError("image_gradient requires at least 2 voxels per axis");
        }
    }
    DisplacementField out(g);
    const std::size_t stride[3] = {1, static_cast<std::size_t>(g.dims[0]),
                                   static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1])};
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++n) {
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    const double h = g.spacing[a];
                    double d;
                    if (idx[a] == 0) {
                        d = (vol.data[n + stride[a]] - vol.data[n]) / h;
                    } else if (idx[a] == g.dims[a] - 1) {
                        d = (vol.data[n] - vol.data[n - stride[a]]) / h;
                    } else {
                        d = (vol.data[n + stride[a]] - vol.data[n - stride[a]]) / (2.0 * h);
                    }
                    out.data[3 * n + a] = d;
                }
            }
        }
    }
    return out;
}

JacobianStats jacobian_stats(const DisplacementField& u)
{
    const GridSpec& g = u.grid;
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] < 2) {
            throw InputError("jacobian_stats requires at least 2 voxels per axis");
        }
    }
    const std::size_t stride[3] = {1, static_cast<std::size_t>(g.dims[0]),
                                   static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1])};
    JacobianStats stats;
    stats.min_det = std::numeric_limits<double>::infinity();
    std::size_t negative = 0;
    for (int k = 1; k + 1 < g.dims[2]; ++k) {
        for (int j = 1; j + 1 < g.dims[1]; ++j) {
            for (int i = 1; i + 1 < g.dims[0]; ++i) {
                const std::size_t n = g.index(i, j, k);
                // J[c][a] = d u_c / d x_a
                double J[3][3];
                for (int a = 0; a < 3; ++a) {
                    const double inv = 0.5 / g.spacing[a];
                    for (int c = 0; c < 3; ++c) {
                        J[c][a] = (u.data[3 * (n + stride[a]) + c] - u.data[3 * (n - stride[a]) + c]) * inv;
                    }
                }
                for (int c = 0; c < 3; ++c) {
                    J[c][c] += 1.0;
                }
                const double det = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                                   J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                                   J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
                stats.min_det = std::min(stats.min_det, det);
                if (det < 0.0) {
                    ++negative;
                }
                ++stats.interior_voxels;
            }
        }
    }
    stats.pct_negative =
        stats.interior_voxels == 0 ? 0.0 : 100.0 * static_cast<double>(negative) / static_cast<double>(stats.interior_voxels);
    return stats;
}

Image3D apply_mask(const Image3D& vol, const Mask3D& mask)
{
    if (!(vol.grid == mask.grid)) {
        throw InputError("apply_mask: image and mask grids differ");
    }
    Image3D out = vol;
    for (std::size_t n = 0; n < out.data.size(); ++n) {
        out.data[n] *= static_cast<double>(mask.data[n]);
    }
    return out;
}

DisplacementField zero_field(const GridSpec& grid) { return DisplacementField(grid); }

} // namespace liftreg
