#include <doctest.h>

#include <limits>

#include "liftreg/errors.hpp"
#include "test_support.hpp"

using namespace liftreg;
using namespace testing;

TEST_CASE("trilinear_sample: constant volume") {
    const GridSpec g = cube_grid(5, 2.0, {1.0, -3.0, 0.5});
    const Image3D v(g, 5.0);
    CHECK(trilinear_sample(v, {4.3, 1.1, 3.7}) == doctest::Approx(5.0).epsilon(1e-15));
    CHECK(trilinear_sample(v, g.world(2, 2, 2)) == 5.0);
}

TEST_CASE("trilinear_sample: grid-aligned points reproduce voxel values") {
    const GridSpec g = cube_grid(4, 1.5, {-2.0, 0.0, 3.0});
    const Image3D v = random_image(g, 11);
    for (int k = 0; k < 4; ++k) {
        for (int j = 0; j < 4; ++j) {
            for (int i = 0; i < 4; ++i) {
                CHECK(trilinear_sample(v, g.world(i, j, k)) == v.at(i, j, k));
            }
        }
    }
}

TEST_CASE("trilinear_sample: cell centre of a 2x2x2 volume is the corner mean") {
    Image3D v(cube_grid(2));
    for (int n = 0; n < 8; ++n) {
        v.data[static_cast<std::size_t>(n)] = n;
    }
    CHECK(trilinear_sample(v, {0.5, 0.5, 0.5}) == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("trilinear_sample: matches textbook weights and is linear in the data") {
    const GridSpec g = cube_grid(6, 1.3, {0.2, -0.4, 1.0});
    const Image3D a = random_image(g, 1);
    const Image3D b = random_image(g, 2);
    Image3D mix(g);
    for (std::size_t n = 0; n < mix.data.size(); ++n) {
        mix.data[n] = 2.5 * a.data[n] - 0.75 * b.data[n];
    }
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> d(-2.0, 9.0);
    for (int t = 0; t < 200; ++t) {
        const Vec3 p{d(rng), d(rng), d(rng)};
        CHECK(trilinear_sample(a, p) == doctest::Approx(reference_trilinear(a, p)).epsilon(1e-12));
        CHECK(trilinear_sample(mix, p) ==
              doctest::Approx(2.5 * trilinear_sample(a, p) - 0.75 * trilinear_sample(b, p)).epsilon(1e-12));
    }
}

TEST_CASE("trilinear_sample: zero outside the grid, error on non-finite points") {
    const GridSpec g = cube_grid(4);
    const Image3D v(g, 1.0);
    CHECK(trilinear_sample(v, {-1.0, 1.0, 1.0}) == 0.0);
    CHECK(trilinear_sample(v, {1.0, 1.0, 4.5}) == 0.0);
    // Within one voxel past the face the zero neighbours blend in.
    CHECK(trilinear_sample(v, {3.5, 1.0, 1.0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(trilinear_sample(v, {std::nan(""), 0.0, 0.0}), InputError);
    CHECK_THROWS_AS(trilinear_sample(v, {0.0, std::numeric_limits<double>::infinity(), 0.0}), InputError);
}

TEST_CASE("sample_trilinear_index_grad matches finite differences off cell faces") {
    const GridSpec g = cube_grid(5);
    const Image3D v = random_image(g, 7);
    const Vec3 c{1.3, 2.6, 0.4};
    Vec3 grad;
    const double value = sample_trilinear_index_grad(g, v.data, c, grad);
    CHECK(value == doctest::Approx(sample_trilinear_index(g, v.data, c)));
    const double h = 1e-6;
    for (int a = 0; a < 3; ++a) {
        Vec3 p = c, m = c;
        p[a] += h;
        m[a] -= h;
        const double fd = (sample_trilinear_index(g, v.data, p) - sample_trilinear_index(g, v.data, m)) / (2 * h);
        CHECK(grad[a] == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("scatter_trilinear_index is the adjoint of sampling") {
    const GridSpec g = cube_grid(4);
    const Image3D v = random_image(g, 5);
    std::vector<double> acc(g.voxel_count(), 0.0);
    const Vec3 c{1.7, -0.4, 2.2};
    scatter_trilinear_index(g, acc, c, 1.0);
    double inner = 0.0;
    for (std::size_t n = 0; n < acc.size(); ++n) {
        inner += acc[n] * v.data[n];
    }
    CHECK(inner == doctest::Approx(sample_trilinear_index(g, v.data, c)).epsilon(1e-14));
}

TEST_CASE("warp_image: zero displacement is the exact identity") {
    const GridSpec g = cube_grid(7, 1.7, {3.0, 2.0, -1.0});
    const Image3D v = random_image(g, 21);
    const Image3D w = warp_image(v, zero_field(g));
    CHECK(w.grid == v.grid);
    CHECK(w.data == v.data);
    CHECK(warp_image(v, zero_field(g), Interpolation::nearest).data == v.data);
}

TEST_CASE("warp_image: one-voxel shift along x") {
    const GridSpec g = {{6, 5, 4}, {2.0, 3.0, 1.5}, {0.0, 1.0, 2.0}};
    const Image3D v = random_image(g, 4);
    DisplacementField u(g);
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        u.set(n, {g.spacing.x, 0.0, 0.0});
    }
    const Image3D w = warp_image(v, u);
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i + 1 < g.dims[0]; ++i) {
                CHECK(w.at(i, j, k) == doctest::Approx(v.at(i + 1, j, k)).epsilon(1e-14));
            }
            CHECK(w.at(g.dims[0] - 1, j, k) == 0.0);
        }
    }
}

TEST_CASE("warp_image: impulse preserved under identity") {
    const GridSpec g = cube_grid(5);
    Image3D v(g);
    v.at(2, 3, 1) = 1.0;
    const Image3D w = warp_image(v, zero_field(g));
    for (std::size_t n = 0; n < w.data.size(); ++n) {
        CHECK(w.data[n] == v.data[n]);
    }
}

TEST_CASE("warp_image: non-finite displacement is rejected") {
    const GridSpec g = cube_grid(3);
    DisplacementField u(g);
    u.data[4] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(warp_image(Image3D(g, 1.0), u), InputError);
}

TEST_CASE("warp_mask: nearest-neighbour output stays binary") {
    const GridSpec g = cube_grid(8);
    const Mask3D m = ball_mask(g, 0.3);
    const DisplacementField u = random_field(g, 9, 1.7);
    const Mask3D w = warp_mask(m, u);
    for (auto v : w.data) {
        CHECK((v == 0 || v == 1));
    }
    CHECK(warp_mask(m, zero_field(g)).data == m.data);
}

TEST_CASE("image_gradient: constant and affine fields") {
    const GridSpec g = {{6, 5, 7}, {1.5, 2.0, 0.5}, {-1.0, 4.0, 2.0}};
    const DisplacementField zero = image_gradient(Image3D(g, 3.0));
    for (double c : zero.data) {
        CHECK(c == 0.0);
    }
    Image3D x(g), affine(g);
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i) {
                const Vec3 p = g.world(i, j, k);
                x.at(i, j, k) = p.x;
                affine.at(i, j, k) = p.x + 2.0 * p.y + 3.0 * p.z;
            }
        }
    }
    const DisplacementField gx = image_gradient(x);
    const DisplacementField ga = image_gradient(affine);
    // One-sided boundary differences are exact for affine fields too, so check everywhere.
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        const Vec3 a = gx.at(n);
        CHECK(a.x == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(a.y == doctest::Approx(0.0));
        CHECK(a.z == doctest::Approx(0.0));
        const Vec3 b = ga.at(n);
        CHECK(b.x == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(b.y == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(b.z == doctest::Approx(3.0).epsilon(1e-12));
    }
    CHECK_THROWS_AS(image_gradient(Image3D(GridSpec{{1, 4, 4}, {1, 1, 1}, {}})), InputError);
}

TEST_CASE("jacobian_stats: identity, reflection and constant shift") {
    const GridSpec g = cube_grid(6, 2.0);
    const JacobianStats id = jacobian_stats(zero_field(g));
    CHECK(id.pct_negative == 0.0);
    CHECK(id.min_det == doctest::Approx(1.0));
    CHECK(id.interior_voxels == 64);

    DisplacementField flip(g), shift(g);
    for (int k = 0; k < 6; ++k) {
        for (int j = 0; j < 6; ++j) {
            for (int i = 0; i < 6; ++i) {
                const std::size_t n = g.index(i, j, k);
                flip.set(n, -2.0 * g.world(i, j, k));
                shift.set(n, {1.5, -0.5, 3.0});
            }
        }
    }
    const JacobianStats f = jacobian_stats(flip);
    CHECK(f.pct_negative == 100.0);
    CHECK(f.min_det == doctest::Approx(-1.0).epsilon(1e-12));
    const JacobianStats s = jacobian_stats(shift);
    CHECK(s.pct_negative == 0.0);
    CHECK(s.min_det == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("jacobian_stats: no interior voxels reports zero folding") {
    const JacobianStats s = jacobian_stats(zero_field(GridSpec{{2, 2, 2}, {1, 1, 1}, {}}));
    CHECK(s.interior_voxels == 0);
    CHECK(s.pct_negative == 0.0);
}

TEST_CASE("gaussian_smooth keeps constants and preserves mass of an interior impulse") {
    const GridSpec g = cube_grid(21);
    std::vector<double> c(g.voxel_count(), 2.0);
    gaussian_smooth(g, c, 1, 1.5);
    for (double v : c) {
        CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
    }
    std::vector<double> impulse(g.voxel_count(), 0.0);
    impulse[g.index(10, 10, 10)] = 1.0;
    gaussian_smooth(g, impulse, 1, 1.5);
    double mass = 0.0;
    for (double v : impulse) {
        mass += v;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("type invariants") {
    Mask3D m(cube_grid(2));
    m.data[0] = 2;
    CHECK_THROWS_AS(validate(m), InputError);
    Image3D v(cube_grid(2));
    v.data.pop_back();
    CHECK_THROWS_AS(validate(v), InputError);
    CHECK_THROWS_AS(validate_grid(GridSpec{{0, 1, 1}, {1, 1, 1}, {}}), InputError);
    CHECK_THROWS_AS(validate_grid(GridSpec{{1, 1, 1}, {1, -1, 1}, {}}), InputError);
    CHECK_THROWS_AS(validate_unique_ids({{1, {}}, {1, {1, 1, 1}}}), InputError);
}
