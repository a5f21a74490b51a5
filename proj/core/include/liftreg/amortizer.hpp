#pragma once

#include <span>
#include <vector>

#include "liftreg/subspace.hpp"
#include "liftreg/volume.hpp"

namespace liftreg {

/// Features are block means of every channel of [lifted..., source] over a
/// blocks x blocks x blocks partition of the grid.
inline constexpr int kAmortizerBlocks = 8;

std::vector<double> amortizer_features(const Image3D& source, std::span<const Image3D> lifted,
                                       int blocks = kAmortizerBlocks);

struct AmortizerSample {
    const Image3D* source = nullptr;
    std::span<const Image3D> lifted;
    AlphaVector alpha_target;
};

/// Closed-form ridge regression from pooled features to subspace coefficients,
/// with an unpenalised intercept.
struct LinearAmortizer {
    int blocks = kAmortizerBlocks;
    std::vector<double> feature_mean;
    std::vector<double> target_mean;
    // feature_count x n_modes, row-major.
    std::vector<double> weights;
    std::size_t n_features = 0;
    std::size_t n_modes = 0;
};

/// ridge = 0 gives the minimum-norm least-squares fit.
LinearAmortizer fit_linear_amortizer(std::span<const AmortizerSample> samples, double ridge,
                                     int blocks = kAmortizerBlocks);

AlphaVector predict_alpha(const LinearAmortizer& model, std::span<const double> features);
AlphaVector predict_alpha(const LinearAmortizer& model, const Image3D& source, std::span<const Image3D> lifted);

} // namespace liftreg
