#pragma once

// Phantom-based registration setups shared by the registration tests and the
// acceptance suite.

#include <vector>

#include "liftreg/phantom.hpp"
#include "liftreg/subspace.hpp"

namespace testing {

using namespace liftreg;

inline PhantomSpec small_phantom_spec(int n = 32, std::uint64_t seed = 7)
{
    PhantomSpec spec;
    spec.dims = {n, n, n};
    // Keep the physical extent of the default 64^3 / 5.5 mm volume.
    const double s = 5.5 * 64.0 / n;
    spec.spacing = {s, s, s};
    spec.seed = seed;
    return spec;
}

// Generator fields drawn with derive_seed(master, i), i = 0..count-1.
inline std::vector<DisplacementField> training_fields(const PhantomSpec& spec,
                                                      const std::vector<DisplacementField>& modes, int count,
                                                      std::uint64_t master = 99)
{
    std::vector<DisplacementField> out;
    for (int i = 0; i < count; ++i) {
        const auto alpha = draw_mode_coefficients(spec, derive_seed(master, static_cast<std::uint64_t>(i)));
        out.push_back(gen_smooth_dvf(spec, modes, alpha));
    }
    return out;
}

// Subspace of the training fields with the mean replaced by zero, so alpha = 0 is
// the identity map.
inline DeformationSubspace centred_subspace(const std::vector<DisplacementField>& fields, double vf)
{
    DeformationSubspace sub = build_subspace(fields, vf);
    std::fill(sub.mean.begin(), sub.mean.end(), 0.0);
    return sub;
}

} // namespace testing
