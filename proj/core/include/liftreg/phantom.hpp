#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "liftreg/geometry.hpp"
#include "liftreg/subspace.hpp"
#include "liftreg/volume.hpp"

namespace liftreg {

struct DeformationSpec {
    // Latent rank of the generator.
    int n_modes = 4;
    // Scale of a unit coefficient, in mm (peak of a single mode).
    double magnitude_mm = 8.0;
    double smoothness_sigma_voxels = 16.0;
};

/// Synthetic lung-like volumes and their acquisition.
///
/// The volume is centred laterally over the detector, which lies in the z = 0 plane
/// with axes +x and +y; emitters sit at z = source_detector_distance and the
/// emitter line runs along x. The bottom face of the volume is detector_gap_mm
/// above the detector.
struct PhantomSpec {
    Dims3 dims{64, 64, 64};
    Vec3 spacing{5.5, 5.5, 5.5};
    std::uint64_t seed = 0;
    int n_vessels = 12;
    DeformationSpec deformation;

    int n_emitters = 4;
    double span_angle_deg = 30.0;
    double source_detector_distance = 1000.0;
    std::array<double, 2> line_offset{0.0, 0.0};
    double detector_gap_mm = 20.0;
    // Detector extent relative to the lateral volume extent.
    double detector_extent_factor = 1.25;
};

void validate(const PhantomSpec& spec);

GridSpec phantom_grid(const PhantomSpec& spec);
SdctGeometry phantom_geometry(const PhantomSpec& spec);

/// Seed splitting used for every derived random stream: splitmix64 of the
/// master seed combined with splitmix64 of the stream index.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct Phantom {
    Image3D image;
    Mask3D mask;
    Landmarks landmarks;
};

/// Ellipsoidal lung with smooth parenchyma and n_vessels bright tubes, zero outside
/// the mask. Landmarks are the tube waypoints. Uses spec.seed.
Phantom gen_phantom(const PhantomSpec& spec);
Phantom gen_phantom(const PhantomSpec& spec, std::uint64_t seed);

/// Fixed generator modes B_m for spec.seed. Mode m is a smoothed random scalar field,
/// peak-normalised to 1, displacing along axis m mod 3.
std::vector<DisplacementField> deformation_modes(const PhantomSpec& spec);

/// magnitude * sum_m alpha_m B_m, scaled down when needed so that the summed
/// per-row bound on |du_c/dx_d| stays below kMaxDisplacementGradient.
DisplacementField gen_smooth_dvf(const PhantomSpec& spec, std::span<const double> alpha);
DisplacementField gen_smooth_dvf(const PhantomSpec& spec, std::span<const DisplacementField> modes,
                                 std::span<const double> alpha);

/// Standard-normal mode coefficients for a sample seed.
std::vector<double> draw_mode_coefficients(const PhantomSpec& spec, std::uint64_t seed);

/// Row-sum bound on the forward-difference Jacobian of u (max over rows of the
/// sum over columns of the largest |du_c/dx_d| anywhere on the grid).
double displacement_gradient_bound(const DisplacementField& u);

inline constexpr double kMaxDisplacementGradient = 0.45;

struct PhantomSample {
    Image3D source;
    Image3D target;
    Mask3D source_mask;
    Mask3D target_mask;
    ProjectionSet projections;
    Landmarks source_landmarks;
    Landmarks target_landmarks;
    DisplacementField true_displacement;
    std::vector<double> true_coefficients;
};

/// Source phantom from `seed`, deformation from the generator modes, target by
/// pull-back, target landmarks by fixed-point inversion, projections of the target.
PhantomSample make_pair(const PhantomSpec& spec, std::uint64_t seed);
PhantomSample make_pair(const PhantomSpec& spec, std::uint64_t seed, std::span<const DisplacementField> modes);
PhantomSample make_pair_with_coefficients(const PhantomSpec& spec, std::uint64_t seed,
                                          std::span<const DisplacementField> modes, std::span<const double> alpha);

/// Solves lm_src = p + u(p) for p by fixed-point iteration (tolerance 1e-6 mm,
/// at most 100 iterations); throws NumericalError otherwise.
Landmarks invert_landmarks(const DisplacementField& u, const Landmarks& source);

} // namespace liftreg
