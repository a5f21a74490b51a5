#include "liftreg/evaluation.hpp"

#include <cmath>
#include <map>
#include <string>

#include "liftreg/errors.hpp"

namespace liftreg {

namespace {

bool inside_grid(const GridSpec& g, const Vec3& p)
{
    const Vec3 c = g.to_index(p);
    for (int a = 0; a < 3; ++a) {
        if (!(c[a] >= 0.0 && c[a] <= g.dims[a] - 1)) {
            return false;
        }
    }
    return true;
}

} // namespace

TreResult mtre(const DisplacementField& u, const Landmarks& source, const Landmarks& target)
{
    validate_unique_ids(source);
    validate_unique_ids(target);
    if (source.size() != target.size()) {
        throw InputError("mtre: source and target landmark sets differ in size");
    }
    std::map<std::int64_t, Vec3> by_id;
    for (const auto& lm : source) {
        by_id.emplace(lm.id, lm.position);
    }

    TreResult out;
    for (const auto& lt : target) {
        const auto it = by_id.find(lt.id);
        if (it == by_id.end()) {
            throw InputError("mtre: target landmark id " + std::to_string(lt.id) + " has no source partner");
        }
        if (!inside_grid(u.grid, lt.position)) {
            ++out.excluded;
            continue;
        }
        const Vec3 r = lt.position + trilinear_sample(u, lt.position) - it->second;
        out.mtre_mm += norm(r);
        for (int a = 0; a < 3; ++a) {
            out.per_axis_mm[a] += std::abs(r[a]);
        }
        ++out.n_landmarks;
    }
    if (out.n_landmarks > 0) {
        const double inv = 1.0 / static_cast<double>(out.n_landmarks);
        out.mtre_mm *= inv;
        for (double& v : out.per_axis_mm) {
            v *= inv;
        }
    }
    return out;
}

double dice(const Mask3D& a, const Mask3D& b)
{
    if (!(a.grid == b.grid)) {
        throw InputError("dice: mask grids differ");
    }
    std::size_t na = 0, nb = 0, both = 0;
    for (std::size_t n = 0; n < a.data.size(); ++n) {
        na += a.data[n];
        nb += b.data[n];
        both += static_cast<std::size_t>(a.data[n] & b.data[n]);
    }
    if (na + nb == 0) {
        return 100.0;
    }
    return 100.0 * 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

MetricsReport evaluate_registration(const DisplacementField& u, const Landmarks& source, const Landmarks& target,
                                    const Mask3D& source_mask, const Mask3D& target_mask)
{
    validate(u);
    if (!(target_mask.grid == u.grid)) {
        throw InputError("evaluate: target mask grid does not match the displacement grid");
    }
    MetricsReport rep;
    const TreResult tre = mtre(u, source, target);
    rep.mtre_mm = tre.mtre_mm;
    rep.per_axis_mm = tre.per_axis_mm;
    rep.n_landmarks = tre.n_landmarks;
    rep.excluded_landmarks = tre.excluded;
    rep.dice_pct = dice(warp_mask(source_mask, u), target_mask);
    rep.pct_neg_jacobian = jacobian_stats(u).pct_negative;
    return rep;
}

double mean_endpoint_error(const DisplacementField& a, const DisplacementField& b, const Mask3D* region)
{
    if (!(a.grid == b.grid) || (region != nullptr && !(region->grid == a.grid))) {
        throw InputError("endpoint error: grids differ");
    }
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < a.grid.voxel_count(); ++n) {
        if (region != nullptr && region->data[n] == 0) {
            continue;
        }
        sum += norm(a.at(n) - b.at(n));
        ++count;
    }
    return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

} // namespace liftreg
