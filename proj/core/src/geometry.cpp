#include "liftreg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "liftreg/errors.hpp"

namespace liftreg {

void validate(const SdctGeometry& geom)
{
    if (geom.emitter_positions.empty()) {
        throw InputError("geometry: n_emitters must be >= 1");
    }
    const Vec3& u = geom.detector_axes[0];
    const Vec3& v = geom.detector_axes[1];
    if (std::abs(dot(u, u) - 1.0) > 1e-9 || std::abs(dot(v, v) - 1.0) > 1e-9 || std::abs(dot(u, v)) > 1e-9) {
        throw InputError("geometry: detector_axes must be orthonormal");
    }
    for (int a = 0; a < 2; ++a) {
        if (geom.detector_dims[a] < 1) {
            throw InputError("geometry: detector_dims must be >= 1");
        }
        if (!(geom.detector_spacing[a] > 0.0) || !std::isfinite(geom.detector_spacing[a])) {
            throw InputError("geometry: detector_spacing must be finite and > 0");
        }
    }
    if (!is_finite(geom.detector_origin)) {
        throw InputError("geometry: detector_origin must be finite");
    }
    const Vec3 n = geom.detector_normal();
    for (std::size_t i = 0; i < geom.emitter_positions.size(); ++i) {
        const Vec3& c = geom.emitter_positions[i];
        if (!is_finite(c)) {
            throw InputError("geometry: emitter " + std::to_string(i) + " is not finite");
        }
        if (!(dot(c - geom.detector_origin, n) > 0.0)) {
            throw InputError("geometry: emitter " + std::to_string(i) +
                             " must lie strictly on the positive-normal side of the detector plane");
        }
    }
}

SdctGeometry build_sdct_geometry(const SdctParams& p)
{
    if (p.n_emitters < 1) {
        throw InputError("build_sdct_geometry: n_emitters must be >= 1");
    }
    if (!(p.span_angle_deg > 0.0 && p.span_angle_deg < 180.0)) {
        throw InputError("build_sdct_geometry: span_angle must be in (0, 180) degrees");
    }
    if (!(p.source_detector_distance > 0.0) || !std::isfinite(p.source_detector_distance)) {
        throw InputError("build_sdct_geometry: source_detector_distance must be > 0");
    }
    const double ld_norm = std::hypot(p.line_direction[0], p.line_direction[1]);
    if (!(ld_norm > 0.0)) {
        throw InputError("build_sdct_geometry: line_direction must be non-zero");
    }

    SdctGeometry g;
    g.detector_axes = p.detector_axes;
    g.detector_dims = p.detector_dims;
    g.detector_spacing = p.detector_spacing;
    const Vec3& du = g.detector_axes[0];
    const Vec3& dv = g.detector_axes[1];
    g.detector_origin = p.detector_center - (0.5 * (p.detector_dims[0] - 1) * p.detector_spacing[0]) * du -
                        (0.5 * (p.detector_dims[1] - 1) * p.detector_spacing[1]) * dv;
    const Vec3 normal = cross(du, dv);

    const Vec3 line_center = p.detector_center + p.line_offset[0] * du + p.line_offset[1] * dv +
                             p.source_detector_distance * normal;
    const Vec3 line_dir = (p.line_direction[0] / ld_norm) * du + (p.line_direction[1] / ld_norm) * dv;
    const double half_span = 0.5 * p.span_angle_deg * std::numbers::pi / 180.0;
    const double length = 2.0 * p.source_detector_distance * std::tan(half_span);

    g.emitter_positions.reserve(static_cast<std::size_t>(p.n_emitters));
    for (int k = 0; k < p.n_emitters; ++k) {
        const double t = p.n_emitters == 1 ? 0.0 : -0.5 * length + length * k / (p.n_emitters - 1);
        g.emitter_positions.push_back(line_center + t * line_dir);
    }
    validate(g);
    return g;
}

void validate(const ProjectionSet& projs)
{
    validate(projs.geometry);
    if (projs.images.size() != projs.geometry.n_emitters()) {
        throw InputError("projections: image count (" + std::to_string(projs.images.size()) +
                         ") != n_emitters (" + std::to_string(projs.geometry.n_emitters()) + ")");
    }
    for (const auto& img : projs.images) {
        if (img.dims != projs.geometry.detector_dims) {
            throw InputError("projections: image dims do not match geometry detector_dims");
        }
        if (img.data.size() != static_cast<std::size_t>(img.dims[0]) * static_cast<std::size_t>(img.dims[1])) {
            throw InputError("projections: image data length mismatch");
        }
        for (double v : img.data) {
            if (!std::isfinite(v) || v < 0.0) {
                throw InputError("projections: pixel values must be finite and >= 0");
            }
        }
    }
}

double default_drr_step(const GridSpec& grid) { return 0.5 * grid.min_spacing(); }

namespace {

// Walks the midpoint samples of the segment pixel(a,b) -> emitter that can touch the
// volume's interpolation support, calling f(index_coord) for each one.
template <class F>
void walk_ray(const GridSpec& grid, const SdctGeometry& geom, const Vec3& emitter, int a, int b, double step, F&& f)
{
    const Vec3 q = geom.pixel_position(a, b);
    const Vec3 d = emitter - q;
    const double length = norm(d);
    if (!(length > 0.0)) {
        throw InputError("render_drr: degenerate ray (emitter coincides with a pixel)");
    }
    const Vec3 dir = d * (1.0 / length);
    const long long count = static_cast<long long>(std::floor(length / step + 0.5));
    if (count <= 0) {
        return;
    }

    // Support of the zero-padded trilinear interpolant is the open box (-1, dims) in index space.
    double s_in = 0.0;
    double s_out = length;
    for (int ax = 0; ax < 3; ++ax) {
        const double lo = grid.origin[ax] - grid.spacing[ax];
        const double hi = grid.origin[ax] + grid.dims[ax] * grid.spacing[ax];
        if (std::abs(dir[ax]) < 1e-300) {
            if (q[ax] <= lo || q[ax] >= hi) {
                return;
            }
            continue;
        }
        double t1 = (lo - q[ax]) / dir[ax];
        double t2 = (hi - q[ax]) / dir[ax];
        if (t1 > t2) {
            std::swap(t1, t2);
        }
        s_in = std::max(s_in, t1);
        s_out = std::min(s_out, t2);
    }
    if (s_in > s_out) {
        return;
    }
    const long long k_lo = std::max(0LL, static_cast<long long>(std::ceil(s_in / step - 0.5)));
    const long long k_hi = std::min(count - 1, static_cast<long long>(std::floor(s_out / step - 0.5)));

    const Vec3 q_index = grid.to_index(q);
    const Vec3 dir_index{dir.x / grid.spacing.x, dir.y / grid.spacing.y, dir.z / grid.spacing.z};
    for (long long k = k_lo; k <= k_hi; ++k) {
        const double s = (static_cast<double>(k) + 0.5) * step;
        f(q_index + s * dir_index);
    }
}

void check_render_args(const SdctGeometry& geom, std::size_t emitter_index, double step_mm)
{
    if (emitter_index >= geom.n_emitters()) {
        throw InputError("render_drr: emitter_index out of range");
    }
    if (!(step_mm > 0.0) || !std::isfinite(step_mm)) {
        throw InputError("render_drr: step_mm must be > 0");
    }
}

} // namespace

Image2D render_drr(const Image3D& vol, const SdctGeometry& geom, std::size_t emitter_index, double step_mm)
{
    check_render_args(geom, emitter_index, step_mm);
    Image2D out(geom.detector_dims, geom.detector_spacing);
    const Vec3 c = geom.emitter_positions[emitter_index];
    const std::span<const double> data(vol.data);
    for (int b = 0; b < geom.detector_dims[1]; ++b) {
        for (int a = 0; a < geom.detector_dims[0]; ++a) {
            double sum = 0.0;
            walk_ray(vol.grid, geom, c, a, b, step_mm,
                     [&](const Vec3& ci) { sum += sample_trilinear_index(vol.grid, data, ci); });
            out.at(a, b) = sum * step_mm;
        }
    }
    return out;
}

ProjectionSet render_projections(const Image3D& vol, const SdctGeometry& geom, double step_mm)
{
    ProjectionSet out;
    out.geometry = geom;
    out.images.reserve(geom.n_emitters());
    for (std::size_t i = 0; i < geom.n_emitters(); ++i) {
        out.images.push_back(render_drr(vol, geom, i, step_mm));
    }
    return out;
}

void render_drr_adjoint(const Image2D& pixel_weights, const GridSpec& grid, const SdctGeometry& geom,
                        std::size_t emitter_index, double step_mm, std::span<double> volume)
{
    check_render_args(geom, emitter_index, step_mm);
    if (pixel_weights.dims != geom.detector_dims) {
        throw InputError("render_drr_adjoint: weight image dims do not match detector");
    }
    if (volume.size() != grid.voxel_count()) {
        throw InputError("render_drr_adjoint: volume buffer size mismatch");
    }
    const Vec3 c = geom.emitter_positions[emitter_index];
    for (int b = 0; b < geom.detector_dims[1]; ++b) {
        for (int a = 0; a < geom.detector_dims[0]; ++a) {
            const double w = pixel_weights.at(a, b) * step_mm;
            if (w == 0.0) {
                continue;
            }
            walk_ray(grid, geom, c, a, b, step_mm,
                     [&](const Vec3& ci) { scatter_trilinear_index(grid, volume, ci, w); });
        }
    }
}

DetectorHit project_to_detector(const SdctGeometry& geom, std::size_t emitter_index, const Vec3& x)
{
    DetectorHit hit;
    const Vec3 c = geom.emitter_positions.at(emitter_index);
    const Vec3 n = geom.detector_normal();
    const Vec3 ray = x - c;
    const double denom = dot(n, ray);
    if (std::abs(denom) <= 1e-12 * std::max(1.0, norm(ray))) {
        hit.degenerate = true;
        return hit;
    }
    const double t = dot(n, geom.detector_origin - c) / denom;
    if (!(t > 0.0)) {
        return hit;
    }
    const Vec3 rel = c + t * ray - geom.detector_origin;
    hit.a = dot(rel, geom.detector_axes[0]) / geom.detector_spacing[0];
    hit.b = dot(rel, geom.detector_axes[1]) / geom.detector_spacing[1];
    hit.valid = true;
    return hit;
}

namespace {

// Bilinear lookup over the physical detector area [-0.5, W-0.5] x [-0.5, H-0.5]
// with edge clamping; 0 outside it.
double sample_detector(const Image2D& img, double a, double b)
{
    const int W = img.dims[0], H = img.dims[1];
    if (!(a >= -0.5 && a <= W - 0.5 && b >= -0.5 && b <= H - 0.5)) {
        return 0.0;
    }
    a = std::clamp(a, 0.0, static_cast<double>(W - 1));
    b = std::clamp(b, 0.0, static_cast<double>(H - 1));
    const int a0 = std::min(static_cast<int>(std::floor(a)), std::max(W - 2, 0));
    const int b0 = std::min(static_cast<int>(std::floor(b)), std::max(H - 2, 0));
    const int a1 = std::min(a0 + 1, W - 1), b1 = std::min(b0 + 1, H - 1);
    const double fa = a - a0, fb = b - b0;
    const double v00 = img.at(a0, b0), v10 = img.at(a1, b0), v01 = img.at(a0, b1), v11 = img.at(a1, b1);
    return (1 - fb) * ((1 - fa) * v00 + fa * v10) + fb * ((1 - fa) * v01 + fa * v11);
}

} // namespace

LiftedVolume lift3d(const ProjectionSet& projs, const GridSpec& target_grid)
{
    validate_grid(target_grid);
    const SdctGeometry& geom = projs.geometry;
    validate(geom);
    if (projs.images.size() != geom.n_emitters()) {
        throw InputError("lift3d: image count does not match n_emitters");
    }
    LiftedVolume out;
    out.channels.reserve(geom.n_emitters());
    for (std::size_t e = 0; e < geom.n_emitters(); ++e) {
        const Image2D& img = projs.images[e];
        if (img.dims != geom.detector_dims) {
            throw InputError("lift3d: projection dims do not match geometry detector_dims");
        }
        Image3D channel(target_grid);
        std::size_t n = 0;
        for (int k = 0; k < target_grid.dims[2]; ++k) {
            for (int j = 0; j < target_grid.dims[1]; ++j) {
                for (int i = 0; i < target_grid.dims[0]; ++i, ++n) {
                    const DetectorHit hit = project_to_detector(geom, e, target_grid.world(i, j, k));
                    if (hit.degenerate) {
                        ++out.degenerate_voxels;
                        continue;
                    }
                    if (hit.valid) {
                        channel.data[n] = sample_detector(img, hit.a, hit.b);
                    }
                }
            }
        }
        out.channels.push_back(std::move(channel));
    }
    return out;
}

} // namespace liftreg
