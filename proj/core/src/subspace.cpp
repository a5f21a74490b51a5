#include "liftreg/subspace.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "liftreg/errors.hpp"

namespace liftreg {

namespace {

// Relative cutoff below which a singular value counts as zero.
constexpr double kRankTolerance = 1e-10;

double flat_dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        s += a[n] * b[n];
    }
    return s;
}

} // namespace

DeformationSubspace build_subspace(std::span<const DisplacementField> fields, double variance_fraction)
{
    if (fields.empty()) {
        throw InputError("build_subspace: need at least one displacement field");
    }
    if (!(variance_fraction > 0.0 && variance_fraction <= 1.0)) {
        throw InputError("build_subspace: variance_fraction must be in (0, 1]");
    }
    const GridSpec& grid = fields[0].grid;
    for (const auto& f : fields) {
        validate(f);
        if (!(f.grid == grid)) {
            throw InputError("build_subspace: displacement fields are not on a shared grid");
        }
    }

    const std::size_t n_samples = fields.size();
    const std::size_t length = fields[0].data.size();

    DeformationSubspace sub;
    sub.grid = grid;
    sub.variance_fraction = variance_fraction;
    sub.mean.assign(length, 0.0);
    for (const auto& f : fields) {
        for (std::size_t n = 0; n < length; ++n) {
            sub.mean[n] += f.data[n];
        }
    }
    for (double& v : sub.mean) {
        v /= static_cast<double>(n_samples);
    }
    if (n_samples == 1) {
        return sub;
    }

    // Centred data, transposed: length x n_samples. QR first, then an SVD of the small
    // triangular factor; right singular vectors of the data are Q * U_r.
    Eigen::MatrixXd centred(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(n_samples));
    for (std::size_t s = 0; s < n_samples; ++s) {
        for (std::size_t n = 0; n < length; ++n) {
            centred(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(s)) = fields[s].data[n] - sub.mean[n];
        }
    }
    const auto cols = static_cast<Eigen::Index>(n_samples);
    const auto rank_cap = std::min<Eigen::Index>(cols, static_cast<Eigen::Index>(length));

    Eigen::HouseholderQR<Eigen::Ref<Eigen::MatrixXd>> qr(centred);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(rank_cap).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeThinU);
    const Eigen::VectorXd sigma = svd.singularValues();

    sub.spectrum.assign(sigma.data(), sigma.data() + sigma.size());
    double total = 0.0;
    for (double s : sub.spectrum) {
        total += s * s;
    }
    if (!(total > 0.0) || sigma.size() == 0) {
        return sub;
    }
    const double cutoff = kRankTolerance * sigma(0);
    double cumulative = 0.0;
    Eigen::Index keep = 0;
    for (Eigen::Index m = 0; m < sigma.size(); ++m) {
        if (sigma(m) <= cutoff) {
            break;
        }
        cumulative += sigma(m) * sigma(m);
        keep = m + 1;
        // Relative slack absorbs rounding when variance_fraction == 1.
        if (cumulative >= variance_fraction * total * (1.0 - 1e-12)) {
            break;
        }
    }

    Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(length), keep);
    basis.topRows(rank_cap) = svd.matrixU().leftCols(keep);
    basis.applyOnTheLeft(qr.householderQ());
    sub.basis.resize(static_cast<std::size_t>(keep));
    sub.singular_values.resize(static_cast<std::size_t>(keep));
    for (Eigen::Index m = 0; m < keep; ++m) {
        sub.basis[static_cast<std::size_t>(m)].assign(basis.col(m).data(), basis.col(m).data() + length);
        sub.singular_values[static_cast<std::size_t>(m)] = sigma(m);
    }
    return sub;
}

DeformationSubspace mean_only_subspace(const DisplacementField& mean)
{
    DeformationSubspace sub;
    sub.grid = mean.grid;
    sub.mean = mean.data;
    sub.variance_fraction = 1.0;
    return sub;
}

AlphaVector project_direction(const DeformationSubspace& sub, std::span<const double> g)
{
    if (g.size() != sub.field_length()) {
        throw InputError("project: field length does not match subspace grid");
    }
    AlphaVector out(sub.n_modes());
    for (std::size_t m = 0; m < sub.n_modes(); ++m) {
        out[m] = flat_dot(g, sub.basis[m]);
    }
    return out;
}

AlphaVector project(const DeformationSubspace& sub, const DisplacementField& u)
{
    if (!(u.grid == sub.grid)) {
        throw InputError("project: displacement grid does not match subspace grid");
    }
    std::vector<double> centred(u.data.size());
    for (std::size_t n = 0; n < centred.size(); ++n) {
        centred[n] = u.data[n] - sub.mean[n];
    }
    return project_direction(sub, centred);
}

DisplacementField reconstruct(const DeformationSubspace& sub, std::span<const double> alpha)
{
    if (alpha.size() != sub.n_modes()) {
        throw InputError("reconstruct: alpha has " + std::to_string(alpha.size()) + " entries, subspace has " +
                         std::to_string(sub.n_modes()) + " modes");
    }
    DisplacementField u(sub.grid);
    u.data = sub.mean;
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        const double a = alpha[m];
        if (!std::isfinite(a)) {
            throw InputError("reconstruct: non-finite coefficient");
        }
        const auto& e = sub.basis[m];
        for (std::size_t n = 0; n < u.data.size(); ++n) {
            u.data[n] += a * e[n];
        }
    }
    return u;
}

void validate(const DeformationSubspace& sub)
{
    validate_grid(sub.grid);
    if (sub.mean.size() != sub.field_length()) {
        throw InputError("subspace: mean field length mismatch");
    }
    if (sub.singular_values.size() != sub.basis.size()) {
        throw InputError("subspace: N_e must equal the number of singular values");
    }
    for (const auto& e : sub.basis) {
        if (e.size() != sub.field_length()) {
            throw InputError("subspace: basis field length mismatch");
        }
    }
    for (std::size_t m = 0; m < sub.singular_values.size(); ++m) {
        if (sub.singular_values[m] < 0.0 || (m > 0 && sub.singular_values[m] > sub.singular_values[m - 1])) {
            throw InputError("subspace: singular values must be non-negative and non-increasing");
        }
    }
    if (!(sub.variance_fraction > 0.0 && sub.variance_fraction <= 1.0)) {
        throw InputError("subspace: variance_fraction out of range");
    }
}

} // namespace liftreg
