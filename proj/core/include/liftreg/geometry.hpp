#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "liftreg/grid.hpp"
#include "liftreg/volume.hpp"

namespace liftreg {

/// Detector image, u-fastest layout.
struct Image2D {
    std::array<int, 2> dims{1, 1};
    std::array<double, 2> spacing{1.0, 1.0};
    std::vector<double> data;

    Image2D() = default;
    Image2D(std::array<int, 2> d, std::array<double, 2> s, double fill = 0.0)
        : dims(d), spacing(s), data(static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]), fill)
    {
    }

    double& at(int a, int b) { return data[static_cast<std::size_t>(b) * dims[0] + a]; }
    double at(int a, int b) const { return data[static_cast<std::size_t>(b) * dims[0] + a]; }
};

/// Stationary multi-emitter tomosynthesis geometry: a line of point emitters
/// above a fixed flat detector.
struct SdctGeometry {
    std::vector<Vec3> emitter_positions;
    // World position of the centre of detector pixel (0,0).
    Vec3 detector_origin;
    // Orthonormal in-plane axes; pixel (a,b) sits at origin + a*pu*axes[0] + b*pv*axes[1].
    std::array<Vec3, 2> detector_axes{Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    std::array<int, 2> detector_dims{1, 1};
    std::array<double, 2> detector_spacing{1.0, 1.0};

    std::size_t n_emitters() const { return emitter_positions.size(); }
    // axes[0] x axes[1]; emitters live on the positive side.
    Vec3 detector_normal() const { return cross(detector_axes[0], detector_axes[1]); }
    Vec3 pixel_position(double a, double b) const
    {
        return detector_origin + (a * detector_spacing[0]) * detector_axes[0] +
               (b * detector_spacing[1]) * detector_axes[1];
    }
    Vec3 detector_center() const
    {
        return pixel_position(0.5 * (detector_dims[0] - 1), 0.5 * (detector_dims[1] - 1));
    }
};

/// Throws InputError if the geometry violates its invariants.
void validate(const SdctGeometry& geom);

struct SdctParams {
    int n_emitters = 4;
    double span_angle_deg = 30.0;
    double source_detector_distance = 1000.0;
    // Shift of the emitter-line centre from the detector centre, in detector (u,v) mm.
    std::array<double, 2> line_offset{0.0, 0.0};
    // Direction of the emitter line in detector (u,v) coordinates; normalised internally.
    std::array<double, 2> line_direction{1.0, 0.0};
    Vec3 detector_center{};
    std::array<Vec3, 2> detector_axes{Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    std::array<int, 2> detector_dims{200, 200};
    std::array<double, 2> detector_spacing{2.2, 2.2};
};

/// Evenly spaced collinear emitters on a line parallel to the detector at height
/// source_detector_distance. The two extreme emitters subtend span_angle_deg at the
/// detector point beneath the line centre; line length = 2 d tan(span/2).
SdctGeometry build_sdct_geometry(const SdctParams& params);

struct ProjectionSet {
    SdctGeometry geometry;
    std::vector<Image2D> images;
};

/// Throws InputError when the image count or dims disagree with the geometry,
/// or any pixel is negative or non-finite.
void validate(const ProjectionSet& projs);

/// Half the smallest voxel spacing.
double default_drr_step(const GridSpec& grid);

/// Line integral of vol along each emitter-to-pixel segment, midpoint rule with
/// fixed step_mm measured from the pixel towards the emitter.
Image2D render_drr(const Image3D& vol, const SdctGeometry& geom, std::size_t emitter_index, double step_mm);

/// All emitters.
ProjectionSet render_projections(const Image3D& vol, const SdctGeometry& geom, double step_mm);

/// Exact adjoint of render_drr: accumulates step_mm * weight(pixel) into `volume`
/// along the same sample positions.
void render_drr_adjoint(const Image2D& pixel_weights, const GridSpec& grid, const SdctGeometry& geom,
                        std::size_t emitter_index, double step_mm, std::span<double> volume);

struct DetectorHit {
    bool valid = false;
    bool degenerate = false;  // x level with the emitter, projection undefined
    double a = 0.0;  // pixel coordinates
    double b = 0.0;
};

/// Central projection of x from the emitter onto the detector plane.
/// Invalid when x is level with the emitter or the ray points away from the detector.
DetectorHit project_to_detector(const SdctGeometry& geom, std::size_t emitter_index, const Vec3& x);

struct LiftedVolume {
    std::vector<Image3D> channels;
    std::size_t degenerate_voxels = 0;
};

/// Backprojects each P_i onto target_grid: voxel x takes the bilinearly
/// interpolated intensity of P_i at x's projection, or 0 when it misses the detector.
LiftedVolume lift3d(const ProjectionSet& projs, const GridSpec& target_grid);

} // namespace liftreg
