#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "liftreg/grid.hpp"

namespace liftreg {

/// Scalar volume on a regular grid, x-fastest layout.
struct Image3D {
    GridSpec grid;
    std::vector<double> data;

    Image3D() = default;
    explicit Image3D(const GridSpec& g, double fill = 0.0) : grid(g), data(g.voxel_count(), fill) {}

    double& at(int i, int j, int k) { return data[grid.index(i, j, k)]; }
    double at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
};

/// Binary segmentation on a regular grid. Values are exactly 0 or 1.
struct Mask3D {
    GridSpec grid;
    std::vector<std::uint8_t> data;

    Mask3D() = default;
    explicit Mask3D(const GridSpec& g, std::uint8_t fill = 0) : grid(g), data(g.voxel_count(), fill) {}

    std::uint8_t at(int i, int j, int k) const { return data[grid.index(i, j, k)]; }
    std::size_t count() const;
};

/// Per-voxel 3-vector field in world millimeters, interleaved (ux,uy,uz) per voxel.
/// As a displacement u it defines the pull-back map x -> x + u(x).
struct DisplacementField {
    GridSpec grid;
    std::vector<double> data;

    DisplacementField() = default;
    explicit DisplacementField(const GridSpec& g) : grid(g), data(3 * g.voxel_count(), 0.0) {}

    Vec3 at(std::size_t voxel) const { return {data[3 * voxel], data[3 * voxel + 1], data[3 * voxel + 2]}; }
    Vec3 at(int i, int j, int k) const { return at(grid.index(i, j, k)); }
    void set(std::size_t voxel, const Vec3& v)
    {
        data[3 * voxel] = v.x;
        data[3 * voxel + 1] = v.y;
        data[3 * voxel + 2] = v.z;
    }
};

struct Landmark {
    std::int64_t id = 0;
    Vec3 position;
};

/// World-mm points with unique ids.
using Landmarks = std::vector<Landmark>;

enum class Interpolation { trilinear, nearest };

// Type invariants. Each throws InputError with a message naming the violation.
void validate(const Image3D& vol);
void validate(const Mask3D& mask);
void validate(const DisplacementField& u);
void validate_unique_ids(const Landmarks& landmarks);

/// Trilinear interpolation in continuous voxel coordinates. Neighbours that fall
/// outside the grid contribute zero, so the interpolant decays to 0 over one voxel
/// past the boundary and is exactly 0 beyond that. No finiteness check.
double sample_trilinear_index(const GridSpec& grid, std::span<const double> data, const Vec3& index_coord);

/// Same as sample_trilinear_index but also returns d(value)/d(index_coord).
double sample_trilinear_index_grad(const GridSpec& grid, std::span<const double> data,
                                   const Vec3& index_coord, Vec3& grad_index);

/// Adjoint of sample_trilinear_index: adds weight * w_corner into each in-grid corner.
void scatter_trilinear_index(const GridSpec& grid, std::span<double> data, const Vec3& index_coord, double weight);

/// Trilinear sample at a world-mm point; throws InputError on non-finite coordinates.
double trilinear_sample(const Image3D& vol, const Vec3& p);

/// Trilinear sample of each component of a vector field at a world-mm point.
Vec3 trilinear_sample(const DisplacementField& u, const Vec3& p);

/// out(x) = src(x + u(x)) for every voxel x of u's grid.
Image3D warp_image(const Image3D& src, const DisplacementField& u,
                   Interpolation interp = Interpolation::trilinear);

/// Nearest-neighbour pull-back of a mask onto u's grid.
Mask3D warp_mask(const Mask3D& src, const DisplacementField& u);

/// Spatial gradient in world units. Central differences inside, one-sided at the
/// boundary. Requires at least two voxels on every axis.
DisplacementField image_gradient(const Image3D& vol);

struct JacobianStats {
    double pct_negative = 0.0;
    double min_det = 0.0;
    std::size_t interior_voxels = 0;
};

/// det(I + grad u) over interior voxels, central differences in world units.
JacobianStats jacobian_stats(const DisplacementField& u);

/// Element-wise product of an image with a mask.
Image3D apply_mask(const Image3D& vol, const Mask3D& mask);

/// Separable Gaussian smoothing with sigma in voxels, kernel truncated at 3 sigma and
/// renormalised at the boundary. Operates on each of `channels` interleaved channels.
void gaussian_smooth(const GridSpec& grid, std::span<double> data, int channels, double sigma_voxels);

DisplacementField zero_field(const GridSpec& grid);

} // namespace liftreg
