#pragma once

#include <array>
#include <cstddef>

#include "liftreg/volume.hpp"

namespace liftreg {

struct TreResult {
    double mtre_mm = 0.0;
    std::array<double, 3> per_axis_mm{0.0, 0.0, 0.0};  // mean |residual| along x, y, z
    std::size_t n_landmarks = 0;
    std::size_t excluded = 0;  // target landmarks outside the field's grid
};

/// Residual per pair is (l_t + u(l_t)) - l_s, u sampled trilinearly at l_t.
/// Pairs are matched by id; the id sets must agree.
TreResult mtre(const DisplacementField& u, const Landmarks& source, const Landmarks& target);

/// 100 * 2|a & b| / (|a| + |b|); 100 when both are empty.
double dice(const Mask3D& a, const Mask3D& b);

struct MetricsReport {
    double mtre_mm = 0.0;
    std::array<double, 3> per_axis_mm{0.0, 0.0, 0.0};
    double dice_pct = 0.0;
    double pct_neg_jacobian = 0.0;
    std::size_t n_landmarks = 0;
    std::size_t excluded_landmarks = 0;
};

/// mTRE, Dice of the nearest-warped source mask against the target mask, and
/// the folding percentage of u.
MetricsReport evaluate_registration(const DisplacementField& u, const Landmarks& source, const Landmarks& target,
                                    const Mask3D& source_mask, const Mask3D& target_mask);

/// Mean over voxels in `region` (all voxels when empty) of ||a - b||.
double mean_endpoint_error(const DisplacementField& a, const DisplacementField& b, const Mask3D* region = nullptr);

} // namespace liftreg
