#include <doctest.h>

#include <Eigen/Dense>

#include "liftreg/errors.hpp"
#include "test_support.hpp"

using namespace liftreg;
using namespace testing;

namespace {

double flat_dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += b[i] * b[i];
    }
    return std::sqrt(num / std::max(den, 1e-300));
}

std::vector<DisplacementField> random_fields(const GridSpec& g, int count, std::uint64_t seed)
{
    std::vector<DisplacementField> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(random_field(g, seed + static_cast<std::uint64_t>(i), 2.0));
    }
    return out;
}

} // namespace

TEST_CASE("build_subspace: single field gives the field as mean and no modes") {
    const GridSpec g = cube_grid(4);
    const DisplacementField u = random_field(g, 1, 3.0);
    const DeformationSubspace sub = build_subspace(std::vector{u}, 0.5);
    CHECK(sub.n_modes() == 0);
    CHECK(sub.mean == u.data);
    CHECK(reconstruct(sub, AlphaVector{}).data == u.data);
}

TEST_CASE("build_subspace: two distinct fields give one mode and exact reconstruction") {
    const GridSpec g = cube_grid(3);
    const std::vector<DisplacementField> f = {random_field(g, 5, 1.0), random_field(g, 6, 1.0)};
    const DeformationSubspace sub = build_subspace(f, 0.99);
    REQUIRE(sub.n_modes() == 1);
    // Rank-one oracle: the centred rows are +-(f1 - f0)/2, so sigma = ||f1 - f0|| / sqrt(2).
    double d2 = 0.0;
    for (std::size_t i = 0; i < f[0].data.size(); ++i) {
        d2 += (f[1].data[i] - f[0].data[i]) * (f[1].data[i] - f[0].data[i]);
        CHECK(sub.mean[i] == doctest::Approx(0.5 * (f[0].data[i] + f[1].data[i])));
    }
    CHECK(sub.singular_values[0] == doctest::Approx(std::sqrt(d2 / 2.0)).epsilon(1e-12));
    for (const auto& u : f) {
        CHECK(rel_l2(reconstruct(sub, project(sub, u)).data, u.data) < 1e-12);
    }
}

TEST_CASE("project / reconstruct identities") {
    const GridSpec g = cube_grid(4);
    const DeformationSubspace sub = build_subspace(random_fields(g, 6, 10), 1.0);
    REQUIRE(sub.n_modes() == 5);

    for (double a : project(sub, reconstruct(sub, AlphaVector(5, 0.0)))) {
        CHECK(std::abs(a) < 1e-12);
    }
    DisplacementField shifted(g);
    for (std::size_t i = 0; i < shifted.data.size(); ++i) {
        shifted.data[i] = sub.mean[i] + 3.0 * sub.basis[0][i];
    }
    const AlphaVector a = project(sub, shifted);
    CHECK(a[0] == doctest::Approx(3.0).epsilon(1e-12));
    for (std::size_t m = 1; m < a.size(); ++m) {
        CHECK(std::abs(a[m]) < 1e-10);
    }
    const AlphaVector alpha = {0.5, -1.25, 2.0, 0.0, 4.5};
    const AlphaVector back = project(sub, reconstruct(sub, alpha));
    for (std::size_t m = 0; m < alpha.size(); ++m) {
        CHECK(std::abs(back[m] - alpha[m]) < 1e-8);
    }
    CHECK_THROWS_AS(reconstruct(sub, AlphaVector(4, 0.0)), InputError);
    CHECK_THROWS_AS(project(sub, zero_field(cube_grid(5))), InputError);
}

TEST_CASE("reconstruct(project(u)) is the least-squares point of the affine subspace") {
    const GridSpec g = cube_grid(4);
    const DeformationSubspace sub = build_subspace(random_fields(g, 5, 20), 0.9);
    REQUIRE(sub.n_modes() >= 1);
    const DisplacementField u = random_field(g, 99, 2.0);

    // Normal equations over the (unnormalised) basis, solved independently with Eigen.
    const Eigen::Index len = static_cast<Eigen::Index>(sub.field_length());
    const Eigen::Index k = static_cast<Eigen::Index>(sub.n_modes());
    Eigen::MatrixXd B(len, k);
    Eigen::VectorXd r(len);
    for (Eigen::Index i = 0; i < len; ++i) {
        r(i) = u.data[static_cast<std::size_t>(i)] - sub.mean[static_cast<std::size_t>(i)];
        for (Eigen::Index m = 0; m < k; ++m) {
            B(i, m) = sub.basis[static_cast<std::size_t>(m)][static_cast<std::size_t>(i)];
        }
    }
    const Eigen::VectorXd coef = (B.transpose() * B).ldlt().solve(B.transpose() * r);
    const DisplacementField rec = reconstruct(sub, project(sub, u));
    for (Eigen::Index i = 0; i < len; ++i) {
        const double ls = sub.mean[static_cast<std::size_t>(i)] + (B.row(i) * coef)(0);
        CHECK(rec.data[static_cast<std::size_t>(i)] == doctest::Approx(ls).epsilon(1e-9));
    }
}

TEST_CASE("subspace invariants: orthonormality, ordering, variance, energy accounting") {
    const GridSpec g = cube_grid(4);
    const auto fields = random_fields(g, 12, 40);
    for (double vf : {0.5, 0.8, 0.95, 1.0}) {
        const DeformationSubspace sub = build_subspace(fields, vf);
        for (std::size_t a = 0; a < sub.n_modes(); ++a) {
            for (std::size_t b = 0; b < sub.n_modes(); ++b) {
                CHECK(std::abs(flat_dot(sub.basis[a], sub.basis[b]) - (a == b ? 1.0 : 0.0)) < 1e-8);
            }
            if (a > 0) {
                CHECK(sub.singular_values[a] <= sub.singular_values[a - 1]);
            }
        }
        double kept = 0.0, total = 0.0;
        for (std::size_t m = 0; m < sub.spectrum.size(); ++m) {
            total += sub.spectrum[m] * sub.spectrum[m];
            if (m < sub.n_modes()) {
                kept += sub.spectrum[m] * sub.spectrum[m];
            }
        }
        CHECK(kept / total >= vf * (1.0 - 1e-12));
        // Smallest such N_e: one fewer mode would fall short.
        if (sub.n_modes() > 0) {
            const double s = sub.spectrum[sub.n_modes() - 1];
            CHECK((kept - s * s) / total < vf);
        }
        double residual = 0.0;
        for (const auto& u : fields) {
            const DisplacementField rec = reconstruct(sub, project(sub, u));
            for (std::size_t i = 0; i < u.data.size(); ++i) {
                residual += (u.data[i] - rec.data[i]) * (u.data[i] - rec.data[i]);
            }
        }
        CHECK(residual == doctest::Approx(total - kept).epsilon(1e-6).scale(total));
    }
}

TEST_CASE("training reconstruction error is non-increasing in the variance fraction") {
    const GridSpec g = cube_grid(4);
    const auto fields = random_fields(g, 10, 70);
    double previous = std::numeric_limits<double>::infinity();
    for (double vf : {0.3, 0.6, 0.9, 0.99, 1.0}) {
        const DeformationSubspace sub = build_subspace(fields, vf);
        double err = 0.0;
        for (const auto& u : fields) {
            err += rel_l2(reconstruct(sub, project(sub, u)).data, u.data);
        }
        CHECK(err <= previous + 1e-12);
        previous = err;
        if (vf == 1.0) {
            for (const auto& u : fields) {
                CHECK(rel_l2(reconstruct(sub, project(sub, u)).data, u.data) < 1e-6);
            }
        }
    }
}

TEST_CASE("zero singular values are dropped") {
    const GridSpec g = cube_grid(3);
    const DisplacementField a = random_field(g, 1, 1.0), b = random_field(g, 2, 1.0);
    // Duplicated samples: rank one after centring.
    const DeformationSubspace sub = build_subspace(std::vector{a, b, a, b}, 1.0);
    CHECK(sub.n_modes() == 1);
}

TEST_CASE("build_subspace: argument errors") {
    const GridSpec g = cube_grid(3);
    const auto fields = random_fields(g, 3, 1);
    CHECK_THROWS_AS(build_subspace(fields, 0.0), InputError);
    CHECK_THROWS_AS(build_subspace(fields, 1.01), InputError);
    CHECK_THROWS_AS(build_subspace(std::vector<DisplacementField>{}, 0.5), InputError);
    auto mixed = fields;
    mixed.push_back(zero_field(cube_grid(4)));
    CHECK_THROWS_AS(build_subspace(mixed, 0.5), InputError);
}

TEST_CASE("mean_only_subspace reconstructs its mean") {
    const DisplacementField u = random_field(cube_grid(3), 8, 1.0);
    const DeformationSubspace sub = mean_only_subspace(u);
    CHECK(sub.n_modes() == 0);
    CHECK(reconstruct(sub, AlphaVector{}).data == u.data);
    CHECK(project(sub, u).empty());
}
