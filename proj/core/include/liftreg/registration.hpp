#pragma once

#include <string>
#include <vector>

#include "liftreg/geometry.hpp"
#include "liftreg/losses.hpp"
#include "liftreg/optimizer.hpp"
#include "liftreg/subspace.hpp"
#include "liftreg/volume.hpp"

namespace liftreg {

struct RegistrationReport {
    double final_loss = 0.0;
    std::vector<double> loss_trace;
    int iterations = 0;
    std::string stop_reason;
    AlphaVector alpha;  // empty for dense registration
    double wall_time_s = 0.0;
};

struct SubspaceRegistration {
    AlphaVector alpha;
    DisplacementField displacement;
    RegistrationReport report;
};

struct DenseRegistration {
    DisplacementField displacement;
    RegistrationReport report;
};

/// Optimises the subspace coefficients against the masked 3D similarity, starting
/// from alpha = 0 (the mean field). Internally the coefficients are scaled by
/// sqrt(voxel count) so that step_size is roughly a per-voxel displacement in mm.
SubspaceRegistration register_subspace_3d(const Image3D& source, const Image3D& target, const Mask3D& source_mask,
                                          const Mask3D& target_mask, const DeformationSubspace& sub,
                                          const LossConfig& loss_cfg, const OptimConfig& opt_cfg);

/// Same model, but similarity is measured between the target projections and DRRs
/// of the warped masked source. The target volume is never needed.
SubspaceRegistration register_subspace_2d(const Image3D& source, const ProjectionSet& target_projections,
                                          const Mask3D& source_mask, const DeformationSubspace& sub,
                                          const LossConfig& loss_cfg, const OptimConfig& opt_cfg);

/// Free-form optimisation over every displacement component from u = 0. Each
/// gradient is smoothed with a Gaussian of sigma = 1 voxel before the line search.
DenseRegistration register_dense_3d(const Image3D& source, const Image3D& target, const Mask3D& source_mask,
                                    const Mask3D& target_mask, const LossConfig& loss_cfg,
                                    const OptimConfig& opt_cfg);

/// Smoothing applied to dense gradients, in voxels.
inline constexpr double kDenseGradientSigma = 1.0;

} // namespace liftreg
