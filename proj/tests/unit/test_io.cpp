#include <doctest.h>

#include <fstream>

#include "liftreg/errors.hpp"
#include "liftreg/io.hpp"
#include "test_support.hpp"

using namespace liftreg;
using namespace testing;
namespace fs = std::filesystem;

namespace {

// Values exactly representable in float32, so f32 round trips are bitwise.
Image3D f32_image(const GridSpec& g, std::uint64_t seed)
{
    Image3D v = random_image(g, seed, -3.0, 3.0);
    for (double& x : v.data) {
        x = static_cast<double>(static_cast<float>(x));
    }
    return v;
}

void write_text(const fs::path& p, const std::string& text)
{
    std::ofstream(p, std::ios::binary) << text;
}

} // namespace

TEST_CASE("io: volume round trips in both dtypes") {
    const fs::path dir = scratch_dir("io_volume");
    const GridSpec g = {{5, 4, 3}, {1.5, 2.0, 0.75}, {-1.0, 3.25, 10.0}};
    const Image3D a = f32_image(g, 1);
    io::write_volume(dir / "a.json", a);
    const Image3D b = io::read_volume(dir / "a.json");
    CHECK(b.grid == a.grid);
    CHECK(b.data == a.data);
    CHECK(fs::file_size(dir / "a.raw") == 4 * g.voxel_count());

    const Image3D c = random_image(g, 2);
    io::write_volume(dir / "c.json", c, io::DType::f64le);
    CHECK(io::read_volume(dir / "c.json").data == c.data);
    CHECK(fs::file_size(dir / "c.raw") == 8 * g.voxel_count());

    const io::json h = io::read_json(dir / "c.json");
    CHECK(h.at("kind") == "volume");
    CHECK(h.at("dtype") == "f64le");
    CHECK(h.at("payload") == "c.raw");
}

TEST_CASE("io: mask, dvf, multichannel and alpha round trips") {
    const fs::path dir = scratch_dir("io_kinds");
    const GridSpec g = cube_grid(4, 2.0, {1, 2, 3});
    const Mask3D m = ball_mask(g);
    io::write_mask(dir / "m.json", m);
    const Mask3D m2 = io::read_mask(dir / "m.json");
    CHECK(m2.data == m.data);
    CHECK(m2.grid == g);

    const DisplacementField u = random_field(g, 3, 4.0);
    io::write_dvf(dir / "u.json", u, io::DType::f64le);
    const DisplacementField u2 = io::read_dvf(dir / "u.json");
    CHECK(u2.data == u.data);
    CHECK(io::read_header(dir / "u.json").channels == 3);

    const std::vector<Image3D> chans = {f32_image(g, 4), f32_image(g, 5), f32_image(g, 6)};
    io::write_multichannel(dir / "mc.json", chans);
    const auto back = io::read_multichannel(dir / "mc.json");
    REQUIRE(back.size() == 3);
    for (std::size_t c = 0; c < 3; ++c) {
        CHECK(back[c].data == chans[c].data);
    }

    const std::vector<double> alpha = {0.1, -2.5, 1e-17, 3.0};
    io::write_alpha(dir / "alpha.json", alpha);
    CHECK(io::read_alpha(dir / "alpha.json") == alpha);
}

TEST_CASE("io: projections and geometry round trip; mismatches name the field") {
    const fs::path dir = scratch_dir("io_proj");
    const GridSpec g = cube_grid(6, 1.0, {-2.5, -2.5, 4});
    const SdctGeometry geom = small_geometry(g, 3);
    const ProjectionSet projs = render_projections(random_image(g, 7), geom, 0.5);
    io::write_geometry(dir / "geometry.json", geom);
    io::write_projections(dir / "p.json", projs, io::DType::f64le);

    const SdctGeometry geom2 = io::read_geometry(dir / "geometry.json");
    REQUIRE(geom2.n_emitters() == geom.n_emitters());
    for (std::size_t e = 0; e < geom.n_emitters(); ++e) {
        CHECK(geom2.emitter_positions[e] == geom.emitter_positions[e]);
    }
    CHECK(geom2.detector_origin == geom.detector_origin);
    CHECK(geom2.detector_dims == geom.detector_dims);
    CHECK(geom2.detector_spacing == geom.detector_spacing);

    const ProjectionSet p2 = io::read_projections(dir / "p.json", geom2);
    REQUIRE(p2.images.size() == 3);
    for (std::size_t e = 0; e < 3; ++e) {
        CHECK(p2.images[e].data == projs.images[e].data);
    }

    SdctGeometry fewer = geom;
    fewer.emitter_positions.pop_back();
    CHECK_THROWS_WITH_AS(io::read_projections(dir / "p.json", fewer), doctest::Contains("n_emitters"), InputError);
    SdctGeometry wider = geom;
    wider.detector_dims[0] += 1;
    CHECK_THROWS_WITH_AS(io::read_projections(dir / "p.json", wider), doctest::Contains("detector_dims"),
                         InputError);
    SdctGeometry finer = geom;
    finer.detector_spacing[1] *= 0.5;
    CHECK_THROWS_WITH_AS(io::read_projections(dir / "p.json", finer), doctest::Contains("detector_spacing"),
                         InputError);

    CHECK_THROWS_AS(io::geometry_from_json(io::json{{"n_emitters", 2}}), InputError);
}

TEST_CASE("io: subspace round trip") {
    const fs::path dir = scratch_dir("io_subspace");
    const GridSpec g = cube_grid(3);
    std::vector<DisplacementField> fields;
    for (std::uint64_t i = 0; i < 5; ++i) {
        fields.push_back(random_field(g, 10 + i, 1.0));
    }
    const DeformationSubspace sub = build_subspace(fields, 0.9);
    io::write_subspace(dir / "s.json", sub, io::DType::f64le);
    const DeformationSubspace s2 = io::read_subspace(dir / "s.json");
    CHECK(s2.grid == sub.grid);
    CHECK(s2.mean == sub.mean);
    CHECK(s2.basis == sub.basis);
    CHECK(s2.singular_values == sub.singular_values);
    CHECK(s2.spectrum == sub.spectrum);
    CHECK(s2.variance_fraction == sub.variance_fraction);
    const io::json h = io::read_json(dir / "s.json");
    CHECK(h.at("N_e") == sub.n_modes());
    CHECK(h.at("fields") == sub.n_modes() + 1);
}

TEST_CASE("io: header and payload errors") {
    const fs::path dir = scratch_dir("io_errors");
    const GridSpec g = cube_grid(3);
    io::write_volume(dir / "v.json", Image3D(g, 1.0));
    io::write_mask(dir / "m.json", Mask3D(g, 1));

    CHECK_THROWS_WITH_AS(io::read_mask(dir / "v.json"), doctest::Contains("kind"), InputError);
    CHECK_THROWS_AS(io::read_dvf(dir / "v.json"), InputError);
    CHECK_THROWS_AS(io::read_volume(dir / "missing.json"), InputError);

    // Truncated payload.
    fs::resize_file(dir / "v.raw", 4 * g.voxel_count() - 4);
    CHECK_THROWS_WITH_AS(io::read_volume(dir / "v.json"), doctest::Contains("bytes"), InputError);

    // Non-finite payload.
    io::write_volume(dir / "n.json", Image3D(g, 1.0));
    {
        std::fstream f(dir / "n.raw", std::ios::in | std::ios::out | std::ios::binary);
        const float bad = std::numeric_limits<float>::quiet_NaN();
        f.write(reinterpret_cast<const char*>(&bad), sizeof bad);
    }
    CHECK_THROWS_AS(io::read_volume(dir / "n.json"), InputError);

    // Non-binary mask values.
    {
        std::fstream f(dir / "m.raw", std::ios::in | std::ios::out | std::ios::binary);
        const float two = 2.0f;
        f.write(reinterpret_cast<const char*>(&two), sizeof two);
    }
    CHECK_THROWS_AS(io::read_mask(dir / "m.json"), InputError);

    write_text(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS(io::read_volume(dir / "bad.json"), InputError);
    io::json h = io::read_json(dir / "v.json");
    h["dtype"] = "f16le";
    io::write_json(dir / "dtype.json", h);
    CHECK_THROWS_AS(io::read_header(dir / "dtype.json"), InputError);
    h = io::read_json(dir / "v.json");
    h["kind"] = "tensor";
    io::write_json(dir / "kind.json", h);
    CHECK_THROWS_AS(io::read_header(dir / "kind.json"), InputError);
    CHECK_THROWS_AS(io::parse_dtype("f16"), InputError);
}

TEST_CASE("io: landmark CSV") {
    const fs::path dir = scratch_dir("io_landmarks");
    const Landmarks lm = {{3, {1.5, -2.25, 1e-3}}, {1, {0.1, 0.2, 0.3}}, {42, {-7.0, 1e5, 3.0 / 7.0}}};
    io::write_landmarks(dir / "l.csv", lm);
    const Landmarks back = io::read_landmarks(dir / "l.csv");
    REQUIRE(back.size() == lm.size());
    for (std::size_t i = 0; i < lm.size(); ++i) {
        CHECK(back[i].id == lm[i].id);
        CHECK(back[i].position == lm[i].position);
    }

    write_text(dir / "dup.csv", "id,x,y,z\n1,0,0,0\n1,1,1,1\n");
    CHECK_THROWS_WITH_AS(io::read_landmarks(dir / "dup.csv"), doctest::Contains("duplicate"), InputError);
    write_text(dir / "header.csv", "x,y,z\n1,0,0\n");
    CHECK_THROWS_AS(io::read_landmarks(dir / "header.csv"), InputError);
    write_text(dir / "cols.csv", "id,x,y,z\n1,0,0\n");
    CHECK_THROWS_AS(io::read_landmarks(dir / "cols.csv"), InputError);
    write_text(dir / "num.csv", "id,x,y,z\n1,0,abc,0\n");
    CHECK_THROWS_AS(io::read_landmarks(dir / "num.csv"), InputError);
    write_text(dir / "empty.csv", "id,x,y,z\n");
    CHECK(io::read_landmarks(dir / "empty.csv").empty());
}

TEST_CASE("io: phantom spec JSON keeps defaults for missing keys") {
    const PhantomSpec d;
    const PhantomSpec s = io::phantom_spec_from_json(io::json{{"dims", {32, 32, 32}}, {"spacing", 11.0}});
    CHECK(s.dims == Dims3{32, 32, 32});
    CHECK(s.spacing == Vec3{11.0, 11.0, 11.0});
    CHECK(s.n_vessels == d.n_vessels);
    CHECK(s.deformation.magnitude_mm == d.deformation.magnitude_mm);
    CHECK(s.n_emitters == d.n_emitters);

    const PhantomSpec r = io::phantom_spec_from_json(io::phantom_spec_to_json(s));
    CHECK(r.dims == s.dims);
    CHECK(r.spacing == s.spacing);
    CHECK(r.source_detector_distance == s.source_detector_distance);

    CHECK_THROWS_AS(io::phantom_spec_from_json(io::json{{"dims", {32, 32}}}), InputError);
    CHECK_THROWS_AS(io::phantom_spec_from_json(io::json{{"n_vessels", "many"}}), InputError);
}

TEST_CASE("io: JSON output is byte-stable and doubles round-trip") {
    const fs::path dir = scratch_dir("io_json");
    io::json j = {{"b", 0.1}, {"a", {1, 2, 3}}};
    io::write_json(dir / "x.json", j);
    io::write_json(dir / "y.json", io::read_json(dir / "x.json"));
    std::ifstream x(dir / "x.json"), y(dir / "y.json");
    const std::string sx((std::istreambuf_iterator<char>(x)), {}), sy((std::istreambuf_iterator<char>(y)), {});
    CHECK(sx == sy);
    CHECK(sx.back() == '\n');
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345.678}) {
        CHECK(std::stod(io::format_double(v)) == v);
    }
}
