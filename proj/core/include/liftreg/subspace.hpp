#pragma once

#include <span>
#include <vector>

#include "liftreg/volume.hpp"

namespace liftreg {

/// Coefficients of the basis fields, one per mode.
using AlphaVector = std::vector<double>;

/// Affine family of displacement fields  u = mean + sum_i alpha_i * basis_i.
///
/// The basis rows are right singular vectors of the mean-centred data matrix
/// (samples x 3*W*H*D), each of unit Euclidean norm as a flat vector.
/// `singular_values` are those of that raw matrix (no 1/sqrt(n-1) scaling) for the
/// kept modes; `spectrum` holds every singular value, kept or not.
struct DeformationSubspace {
    GridSpec grid;
    std::vector<double> mean;
    std::vector<std::vector<double>> basis;
    std::vector<double> singular_values;
    std::vector<double> spectrum;
    double variance_fraction = 1.0;

    std::size_t n_modes() const { return basis.size(); }
    std::size_t field_length() const { return 3 * grid.voxel_count(); }
};

/// Mean + truncated SVD of the centred fields. Keeps the smallest number of modes
/// whose cumulative squared singular values reach `variance_fraction` of the total;
/// numerically zero singular values are never kept.
DeformationSubspace build_subspace(std::span<const DisplacementField> fields, double variance_fraction);

/// Subspace with the given mean and no modes.
DeformationSubspace mean_only_subspace(const DisplacementField& mean);

/// alpha_i = <u - mean, e_i>.
AlphaVector project(const DeformationSubspace& sub, const DisplacementField& u);

/// mean + sum alpha_i e_i.
DisplacementField reconstruct(const DeformationSubspace& sub, std::span<const double> alpha);

/// <g, e_i> for every mode; g is a flat field on the subspace grid.
AlphaVector project_direction(const DeformationSubspace& sub, std::span<const double> g);

/// Throws InputError when the subspace invariants fail (lengths, ordering).
void validate(const DeformationSubspace& sub);

} // namespace liftreg
