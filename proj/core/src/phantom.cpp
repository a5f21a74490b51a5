#include "liftreg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "liftreg/errors.hpp"

namespace liftreg {

namespace {

constexpr int kMinPhantomDims = 16;
constexpr int kWaypointsPerVessel = 4;

// Stream indices for derive_seed.
constexpr std::uint64_t kAnatomyStream = 1;
constexpr std::uint64_t kCoefficientStream = 2;
constexpr std::uint64_t kModeStreamBase = 1000;

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

struct Ellipsoid {
    Vec3 center;
    Vec3 radii;

    double level(const Vec3& p) const
    {
        const Vec3 d = p - center;
        return (d.x * d.x) / (radii.x * radii.x) + (d.y * d.y) / (radii.y * radii.y) +
               (d.z * d.z) / (radii.z * radii.z);
    }
};

double segment_distance_sq(const Vec3& p, const Vec3& a, const Vec3& b)
{
    const Vec3 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec3 d = p - (a + t * ab);
    return dot(d, d);
}

// White noise smoothed with sigma and scaled to a peak magnitude of 1. The noise is
// drawn on a grid padded by the kernel reach and cropped, so the field is stationary
// up to the boundary (no renormalisation artefacts at the faces).
std::vector<double> smooth_noise(const GridSpec& grid, std::uint64_t seed, double sigma)
{
    const int pad = static_cast<int>(std::ceil(3.0 * sigma));
    GridSpec padded = grid;
    for (int a = 0; a < 3; ++a) {
        padded.dims[a] += 2 * pad;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> big(padded.voxel_count());
    for (double& v : big) {
        v = normal(rng);
    }
    gaussian_smooth(padded, big, 1, sigma);
    std::vector<double> field(grid.voxel_count());
    std::size_t n = 0;
    for (int k = 0; k < grid.dims[2]; ++k) {
        for (int j = 0; j < grid.dims[1]; ++j) {
            for (int i = 0; i < grid.dims[0]; ++i, ++n) {
                field[n] = big[padded.index(i + pad, j + pad, k + pad)];
            }
        }
    }
    double peak = 0.0;
    for (double v : field) {
        peak = std::max(peak, std::abs(v));
    }
    if (peak > 0.0) {
        for (double& v : field) {
            v /= peak;
        }
    }
    return field;
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
    return splitmix64(master ^ splitmix64(index));
}

void validate(const PhantomSpec& spec)
{
    for (int a = 0; a < 3; ++a) {
        if (spec.dims[a] < kMinPhantomDims) {
            throw InputError("phantom: dims must be >= " + std::to_string(kMinPhantomDims) + " per axis");
        }
        if (!(spec.spacing[a] > 0.0)) {
            throw InputError("phantom: spacing must be > 0");
        }
    }
    if (spec.n_vessels < 0) {
        throw InputError("phantom: n_vessels must be >= 0");
    }
    if (spec.deformation.n_modes < 1) {
        throw InputError("phantom: deformation.n_modes must be >= 1");
    }
    if (!(spec.deformation.magnitude_mm > 0.0) || !(spec.deformation.smoothness_sigma_voxels > 0.0)) {
        throw InputError("phantom: deformation magnitude and smoothness sigma must be > 0");
    }
    if (!(spec.detector_extent_factor > 0.0) || !(spec.detector_gap_mm >= 0.0)) {
        throw InputError("phantom: detector_extent_factor must be > 0 and detector_gap_mm >= 0");
    }
    const double top = spec.detector_gap_mm + spec.dims[2] * spec.spacing.z;
    if (!(spec.source_detector_distance > top)) {
        throw InputError("phantom: emitters must lie above the volume (source_detector_distance too small)");
    }
}

GridSpec phantom_grid(const PhantomSpec& spec)
{
    GridSpec g;
    g.dims = spec.dims;
    g.spacing = spec.spacing;
    g.origin = {-0.5 * (spec.dims[0] - 1) * spec.spacing.x, -0.5 * (spec.dims[1] - 1) * spec.spacing.y,
                spec.detector_gap_mm + 0.5 * spec.spacing.z};
    return g;
}

SdctGeometry phantom_geometry(const PhantomSpec& spec)
{
    SdctParams p;
    p.n_emitters = spec.n_emitters;
    p.span_angle_deg = spec.span_angle_deg;
    p.source_detector_distance = spec.source_detector_distance;
    p.line_offset = spec.line_offset;
    p.line_direction = {1.0, 0.0};
    p.detector_center = {0.0, 0.0, 0.0};
    p.detector_axes = {Vec3{1, 0, 0}, Vec3{0, 1, 0}};
    p.detector_dims = {static_cast<int>(std::lround(spec.detector_extent_factor * spec.dims[0])),
                       static_cast<int>(std::lround(spec.detector_extent_factor * spec.dims[1]))};
    p.detector_spacing = {spec.spacing.x, spec.spacing.y};
    return build_sdct_geometry(p);
}

Phantom gen_phantom(const PhantomSpec& spec) { return gen_phantom(spec, spec.seed); }

Phantom gen_phantom(const PhantomSpec& spec, std::uint64_t seed)
{
    validate(spec);
    const GridSpec grid = phantom_grid(spec);
    std::mt19937_64 rng(derive_seed(seed, kAnatomyStream));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const Vec3 extent{(grid.dims[0] - 1) * grid.spacing.x, (grid.dims[1] - 1) * grid.spacing.y,
                      (grid.dims[2] - 1) * grid.spacing.z};
    const Vec3 middle = grid.origin + 0.5 * extent;
    Ellipsoid lung;
    lung.center = middle + Vec3{(unit(rng) - 0.5) * 2.0 * grid.spacing.x, (unit(rng) - 0.5) * 2.0 * grid.spacing.y,
                                (unit(rng) - 0.5) * 2.0 * grid.spacing.z};
    const Vec3 shape{0.36, 0.31, 0.36};
    for (int a = 0; a < 3; ++a) {
        lung.radii[a] = shape[a] * extent[a] * (0.92 + 0.12 * unit(rng));
    }

    Phantom out;
    out.image = Image3D(grid);
    out.mask = Mask3D(grid);
    const std::vector<double> parenchyma = smooth_noise(grid, derive_seed(seed, kAnatomyStream + 1), 4.0);

    // Vessel polylines with waypoints inside the shrunken lung.
    const double shrink = 0.7;
    std::vector<std::vector<Vec3>> vessels(static_cast<std::size_t>(spec.n_vessels));
    for (auto& path : vessels) {
        while (path.size() < kWaypointsPerVessel) {
            const Vec3 p{lung.center.x + (2.0 * unit(rng) - 1.0) * shrink * lung.radii.x,
                         lung.center.y + (2.0 * unit(rng) - 1.0) * shrink * lung.radii.y,
                         lung.center.z + (2.0 * unit(rng) - 1.0) * shrink * lung.radii.z};
            if (lung.level(p) <= shrink * shrink) {
                path.push_back(p);
            }
        }
    }

    const double inner_radius = std::min(lung.radii.x, std::min(lung.radii.y, lung.radii.z));
    const double taper_mm = 2.0 * grid.min_spacing();
    const double tube_radius = 1.2 * grid.min_spacing();
    const double reach2 = 9.0 * tube_radius * tube_radius;
    std::size_t n = 0;
    for (int k = 0; k < grid.dims[2]; ++k) {
        for (int j = 0; j < grid.dims[1]; ++j) {
            for (int i = 0; i < grid.dims[0]; ++i, ++n) {
                const Vec3 p = grid.world(i, j, k);
                if (lung.level(p) > 1.0) {
                    continue;
                }
                out.mask.data[n] = 1;
                double vessel = 0.0;
                for (const auto& path : vessels) {
                    for (std::size_t w = 0; w + 1 < path.size(); ++w) {
                        const double d2 = segment_distance_sq(p, path[w], path[w + 1]);
                        if (d2 < reach2) {
                            vessel = std::max(vessel, std::exp(-0.5 * d2 / (tube_radius * tube_radius)));
                        }
                    }
                }
                // Taper to zero over the outer shell so the intensity is continuous
                // across the mask boundary.
                const double depth = (1.0 - std::sqrt(lung.level(p))) * inner_radius;
                const double t = std::clamp(depth / taper_mm, 0.0, 1.0);
                const double taper = t * t * (3.0 - 2.0 * t);
                out.image.data[n] = taper * (0.3 + 0.08 * parenchyma[n] + 0.7 * vessel);
            }
        }
    }

    std::int64_t id = 1;
    for (const auto& path : vessels) {
        for (const Vec3& p : path) {
            const Vec3 c = grid.to_index(p);
            const int i = static_cast<int>(std::lround(c.x));
            const int j = static_cast<int>(std::lround(c.y));
            const int k = static_cast<int>(std::lround(c.z));
            if (out.mask.at(i, j, k) != 1) {
                throw InputError("phantom: landmark fell outside the lung mask; dims too small for the structures");
            }
            out.landmarks.push_back({id++, p});
        }
    }
    return out;
}

std::vector<DisplacementField> deformation_modes(const PhantomSpec& spec)
{
    validate(spec);
    const GridSpec grid = phantom_grid(spec);
    std::vector<DisplacementField> modes;
    modes.reserve(static_cast<std::size_t>(spec.deformation.n_modes));
    for (int m = 0; m < spec.deformation.n_modes; ++m) {
        const std::vector<double> s = smooth_noise(grid, derive_seed(spec.seed, kModeStreamBase + m),
                                                   spec.deformation.smoothness_sigma_voxels);
        DisplacementField f(grid);
        const int axis = m % 3;
        for (std::size_t n = 0; n < s.size(); ++n) {
            f.data[3 * n + axis] = s[n];
        }
        modes.push_back(std::move(f));
    }
    return modes;
}

double displacement_gradient_bound(const DisplacementField& u)
{
    const GridSpec& g = u.grid;
    const std::size_t stride[3] = {1, static_cast<std::size_t>(g.dims[0]),
                                   static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1])};
    double peak[3][3] = {};
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++n) {
                const int idx[3] = {i, j, k};
                for (int d = 0; d < 3; ++d) {
                    if (idx[d] + 1 >= g.dims[d]) {
                        continue;
                    }
                    for (int c = 0; c < 3; ++c) {
                        const double v =
                            std::abs(u.data[3 * (n + stride[d]) + c] - u.data[3 * n + c]) / g.spacing[d];
                        peak[c][d] = std::max(peak[c][d], v);
                    }
                }
            }
        }
    }
    double bound = 0.0;
    for (int c = 0; c < 3; ++c) {
        bound = std::max(bound, peak[c][0] + peak[c][1] + peak[c][2]);
    }
    return bound;
}

DisplacementField gen_smooth_dvf(const PhantomSpec& spec, std::span<const double> alpha)
{
    const auto modes = deformation_modes(spec);
    return gen_smooth_dvf(spec, modes, alpha);
}

DisplacementField gen_smooth_dvf(const PhantomSpec& spec, std::span<const DisplacementField> modes,
                                 std::span<const double> alpha)
{
    if (alpha.size() != modes.size()) {
        throw InputError("gen_smooth_dvf: expected one coefficient per generator mode");
    }
    const GridSpec grid = phantom_grid(spec);
    DisplacementField u(grid);
    for (std::size_t m = 0; m < modes.size(); ++m) {
        if (!(modes[m].grid == grid)) {
            throw InputError("gen_smooth_dvf: generator mode grid does not match the phantom grid");
        }
        const double a = spec.deformation.magnitude_mm * alpha[m];
        for (std::size_t n = 0; n < u.data.size(); ++n) {
            u.data[n] += a * modes[m].data[n];
        }
    }
    const double bound = displacement_gradient_bound(u);
    if (bound > kMaxDisplacementGradient) {
        const double s = kMaxDisplacementGradient / bound;
        for (double& v : u.data) {
            v *= s;
        }
    }
    return u;
}

std::vector<double> draw_mode_coefficients(const PhantomSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(derive_seed(seed, kCoefficientStream));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> alpha(static_cast<std::size_t>(spec.deformation.n_modes));
    for (double& a : alpha) {
        a = normal(rng);
    }
    return alpha;
}

Landmarks invert_landmarks(const DisplacementField& u, const Landmarks& source)
{
    constexpr int kMaxIterations = 100;
    constexpr double kTolerance = 1e-6;
    Landmarks out;
    out.reserve(source.size());
    for (const auto& ls : source) {
        Vec3 p = ls.position;
        bool converged = false;
        for (int it = 0; it < kMaxIterations; ++it) {
            const Vec3 next = ls.position - trilinear_sample(u, p);
            const double step = norm(next - p);
            p = next;
            if (step < kTolerance && norm(p + trilinear_sample(u, p) - ls.position) < kTolerance) {
                converged = true;
                break;
            }
        }
        if (!converged) {
            throw NumericalError("landmark inversion did not converge for id " + std::to_string(ls.id));
        }
        out.push_back({ls.id, p});
    }
    return out;
}

PhantomSample make_pair(const PhantomSpec& spec, std::uint64_t seed)
{
    const auto modes = deformation_modes(spec);
    return make_pair(spec, seed, modes);
}

PhantomSample make_pair(const PhantomSpec& spec, std::uint64_t seed, std::span<const DisplacementField> modes)
{
    const auto alpha = draw_mode_coefficients(spec, seed);
    return make_pair_with_coefficients(spec, seed, modes, alpha);
}

PhantomSample make_pair_with_coefficients(const PhantomSpec& spec, std::uint64_t seed,
                                          std::span<const DisplacementField> modes, std::span<const double> alpha)
{
    Phantom ph = gen_phantom(spec, seed);
    PhantomSample s;
    s.true_coefficients.assign(alpha.begin(), alpha.end());
    s.true_displacement = gen_smooth_dvf(spec, modes, alpha);
    s.target = warp_image(ph.image, s.true_displacement, Interpolation::trilinear);
    s.target_mask = warp_mask(ph.mask, s.true_displacement);
    s.target_landmarks = invert_landmarks(s.true_displacement, ph.landmarks);
    const SdctGeometry geom = phantom_geometry(spec);
    s.projections = render_projections(s.target, geom, default_drr_step(s.target.grid));
    s.source = std::move(ph.image);
    s.source_mask = std::move(ph.mask);
    s.source_landmarks = std::move(ph.landmarks);
    return s;
}

} // namespace liftreg
