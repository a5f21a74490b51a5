#include "liftreg/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "liftreg/errors.hpp"

namespace liftreg::io {

namespace fs = std::filesystem;

namespace {

constexpr const char* kLayout = "x-fastest interleaved";

const std::set<std::string> kHeaderKeys = {"kind", "dims", "spacing", "origin", "channels",
                                           "fields", "dtype", "layout", "payload"};

std::size_t dtype_size(DType d) { return d == DType::f32le ? 4 : 8; }

template <class T>
T byteswap_if_needed(T v)
{
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        std::reverse(b, b + sizeof(T));
        std::memcpy(&v, b, sizeof(T));
        return v;
    }
}

fs::path payload_path(const fs::path& header_path)
{
    fs::path p = header_path;
    p.replace_extension(".raw");
    return p;
}

ContainerKind parse_kind(const std::string& s)
{
    if (s == "volume") return ContainerKind::volume;
    if (s == "mask") return ContainerKind::mask;
    if (s == "dvf") return ContainerKind::dvf;
    if (s == "image2d") return ContainerKind::image2d;
    if (s == "subspace") return ContainerKind::subspace;
    throw InputError("container: unknown kind '" + s + "'");
}

json vec3_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec3_from(const json& j, const char* field)
{
    if (!j.is_array() || j.size() != 3) {
        throw InputError(std::string("expected a 3-element array for '") + field + "'");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

template <class T>
T get_field(const json& j, const char* field)
{
    if (!j.contains(field)) {
        throw InputError(std::string("missing field '") + field + "'");
    }
    try {
        return j.at(field).get<T>();
    } catch (const json::exception& e) {
        throw InputError(std::string("bad value for field '") + field + "': " + e.what());
    }
}

const json& required(const json& j, const char* field)
{
    if (!j.is_object() || !j.contains(field)) {
        throw InputError(std::string("missing field '") + field + "'");
    }
    return j.at(field);
}

void expect_kind(const ContainerHeader& h, ContainerKind expected, const fs::path& path)
{
    if (h.kind != expected) {
        throw InputError("container " + path.string() + ": kind is '" + to_string(h.kind) + "', expected '" +
                         to_string(expected) + "'");
    }
}

GridSpec grid_of(const ContainerHeader& h)
{
    GridSpec g;
    g.dims = h.dims;
    g.spacing = h.spacing;
    g.origin = h.origin;
    return g;
}

ContainerHeader header_for(ContainerKind kind, const GridSpec& g, int channels, DType dtype)
{
    ContainerHeader h;
    h.kind = kind;
    h.dims = g.dims;
    h.spacing = g.spacing;
    h.origin = g.origin;
    h.channels = channels;
    h.dtype = dtype;
    return h;
}

} // namespace

std::string to_string(ContainerKind kind)
{
    switch (kind) {
    case ContainerKind::volume: return "volume";
    case ContainerKind::mask: return "mask";
    case ContainerKind::dvf: return "dvf";
    case ContainerKind::image2d: return "image2d";
    case ContainerKind::subspace: return "subspace";
    }
    return "unknown";
}

std::string to_string(DType dtype) { return dtype == DType::f32le ? "f32le" : "f64le"; }

DType parse_dtype(const std::string& name)
{
    if (name == "f32le" || name == "f32") return DType::f32le;
    if (name == "f64le" || name == "f64") return DType::f64le;
    throw InputError("unknown dtype '" + name + "' (expected f32le or f64le)");
}

std::size_t ContainerHeader::element_count() const
{
    std::size_t n = static_cast<std::size_t>(channels) * static_cast<std::size_t>(fields);
    for (int d : dims) {
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_json(const fs::path& path, const json& j)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot open " + path.string() + " for writing");
    }
    out << j.dump(2) << '\n';
    if (!out) {
        throw InputError("failed writing " + path.string());
    }
}

json read_json(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw InputError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

void write_container(const fs::path& header_path, const ContainerHeader& h, std::span<const double> values)
{
    if (values.size() != h.element_count()) {
        throw InputError("container: value count does not match header dims/channels");
    }
    const fs::path raw = payload_path(header_path);
    json j = h.extra.is_object() ? h.extra : json::object();
    j["kind"] = to_string(h.kind);
    if (h.kind == ContainerKind::image2d) {
        j["dims"] = json::array({h.dims[0], h.dims[1]});
        j["spacing"] = json::array({h.spacing.x, h.spacing.y});
        j["origin"] = json::array({h.origin.x, h.origin.y});
    } else {
        j["dims"] = json::array({h.dims[0], h.dims[1], h.dims[2]});
        j["spacing"] = vec3_json(h.spacing);
        j["origin"] = vec3_json(h.origin);
    }
    j["channels"] = h.channels;
    j["fields"] = h.fields;
    j["dtype"] = to_string(h.dtype);
    j["layout"] = kLayout;
    j["payload"] = raw.filename().string();

    std::ofstream out(raw, std::ios::binary);
    if (!out) {
        throw InputError("cannot open " + raw.string() + " for writing");
    }
    std::vector<char> bytes(values.size() * dtype_size(h.dtype));
    char* dst = bytes.data();
    for (double v : values) {
        if (h.dtype == DType::f32le) {
            const float f = byteswap_if_needed(static_cast<float>(v));
            std::memcpy(dst, &f, 4);
            dst += 4;
        } else {
            const double d = byteswap_if_needed(v);
            std::memcpy(dst, &d, 8);
            dst += 8;
        }
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw InputError("failed writing " + raw.string());
    }
    write_json(header_path, j);
}

ContainerHeader read_header(const fs::path& header_path)
{
    const json j = read_json(header_path);
    ContainerHeader h;
    h.kind = parse_kind(get_field<std::string>(j, "kind"));
    const auto dims = get_field<std::vector<int>>(j, "dims");
    const auto spacing = get_field<std::vector<double>>(j, "spacing");
    std::vector<double> origin = j.contains("origin") ? get_field<std::vector<double>>(j, "origin")
                                                      : std::vector<double>(dims.size(), 0.0);
    const std::size_t rank = h.kind == ContainerKind::image2d ? 2 : 3;
    if (dims.size() != rank || spacing.size() != rank || origin.size() != rank) {
        throw InputError("container " + header_path.string() + ": dims/spacing/origin must have " +
                         std::to_string(rank) + " entries");
    }
    for (std::size_t a = 0; a < rank; ++a) {
        if (dims[a] < 1) {
            throw InputError("container " + header_path.string() + ": dims must be >= 1");
        }
        if (!(spacing[a] > 0.0)) {
            throw InputError("container " + header_path.string() + ": spacing must be > 0");
        }
        h.dims[a] = dims[a];
        h.spacing[static_cast<int>(a)] = spacing[a];
        h.origin[static_cast<int>(a)] = origin[a];
    }
    h.channels = get_field<int>(j, "channels");
    h.fields = j.contains("fields") ? get_field<int>(j, "fields") : 1;
    if (h.channels < 1 || h.fields < 1) {
        throw InputError("container " + header_path.string() + ": channels and fields must be >= 1");
    }
    h.dtype = parse_dtype(get_field<std::string>(j, "dtype"));
    if (j.contains("layout") && j.at("layout") != kLayout) {
        throw InputError("container " + header_path.string() + ": unsupported layout");
    }
    h.extra = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!kHeaderKeys.count(it.key())) {
            h.extra[it.key()] = it.value();
        }
    }
    return h;
}

Container read_container(const fs::path& header_path)
{
    Container c;
    c.header = read_header(header_path);
    const fs::path raw = payload_path(header_path);
    std::ifstream in(raw, std::ios::binary | std::ios::ate);
    if (!in) {
        throw InputError("cannot open payload " + raw.string());
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = c.header.element_count() * dtype_size(c.header.dtype);
    if (size != expected) {
        throw InputError("payload " + raw.string() + " has " + std::to_string(size) + " bytes, header implies " +
                         std::to_string(expected));
    }
    in.seekg(0);
    std::vector<char> bytes(size);
    in.read(bytes.data(), static_cast<std::streamsize>(size));
    c.values.resize(c.header.element_count());
    const char* src = bytes.data();
    for (double& v : c.values) {
        if (c.header.dtype == DType::f32le) {
            float f;
            std::memcpy(&f, src, 4);
            v = static_cast<double>(byteswap_if_needed(f));
            src += 4;
        } else {
            double d;
            std::memcpy(&d, src, 8);
            v = byteswap_if_needed(d);
            src += 8;
        }
        if (!std::isfinite(v)) {
            throw InputError("payload " + raw.string() + " contains non-finite values");
        }
    }
    return c;
}

void write_volume(const fs::path& path, const Image3D& vol, DType dtype)
{
    validate(vol);
    write_container(path, header_for(ContainerKind::volume, vol.grid, 1, dtype), vol.data);
}

Image3D read_volume(const fs::path& path)
{
    Container c = read_container(path);
    expect_kind(c.header, ContainerKind::volume, path);
    if (c.header.channels != 1 || c.header.fields != 1) {
        throw InputError("container " + path.string() + ": expected a single-channel volume");
    }
    Image3D vol;
    vol.grid = grid_of(c.header);
    vol.data = std::move(c.values);
    validate(vol);
    return vol;
}

void write_mask(const fs::path& path, const Mask3D& mask)
{
    validate(mask);
    std::vector<double> values(mask.data.begin(), mask.data.end());
    write_container(path, header_for(ContainerKind::mask, mask.grid, 1, DType::f32le), values);
}

Mask3D read_mask(const fs::path& path)
{
    const Container c = read_container(path);
    expect_kind(c.header, ContainerKind::mask, path);
    Mask3D mask(grid_of(c.header));
    if (c.values.size() != mask.data.size()) {
        throw InputError("container " + path.string() + ": expected a single-channel mask");
    }
    for (std::size_t n = 0; n < c.values.size(); ++n) {
        if (c.values[n] != 0.0 && c.values[n] != 1.0) {
            throw InputError("container " + path.string() + ": mask values must be 0 or 1");
        }
        mask.data[n] = static_cast<std::uint8_t>(c.values[n]);
    }
    return mask;
}

void write_dvf(const fs::path& path, const DisplacementField& u, DType dtype)
{
    validate(u);
    ContainerHeader h = header_for(ContainerKind::dvf, u.grid, 3, dtype);
    h.extra["units"] = "mm";
    write_container(path, h, u.data);
}

DisplacementField read_dvf(const fs::path& path)
{
    Container c = read_container(path);
    expect_kind(c.header, ContainerKind::dvf, path);
    if (c.header.channels != 3 || c.header.fields != 1) {
        throw InputError("container " + path.string() + ": a dvf must have 3 channels");
    }
    DisplacementField u;
    u.grid = grid_of(c.header);
    u.data = std::move(c.values);
    validate(u);
    return u;
}

void write_multichannel(const fs::path& path, std::span<const Image3D> channels, DType dtype)
{
    if (channels.empty()) {
        throw InputError("multichannel volume needs at least one channel");
    }
    const GridSpec& g = channels[0].grid;
    const std::size_t nc = channels.size();
    std::vector<double> values(g.voxel_count() * nc);
    for (std::size_t c = 0; c < nc; ++c) {
        if (!(channels[c].grid == g)) {
            throw InputError("multichannel volume: channel grids differ");
        }
        for (std::size_t n = 0; n < g.voxel_count(); ++n) {
            values[n * nc + c] = channels[c].data[n];
        }
    }
    write_container(path, header_for(ContainerKind::volume, g, static_cast<int>(nc), dtype), values);
}

std::vector<Image3D> read_multichannel(const fs::path& path)
{
    const Container c = read_container(path);
    expect_kind(c.header, ContainerKind::volume, path);
    const GridSpec g = grid_of(c.header);
    const auto nc = static_cast<std::size_t>(c.header.channels);
    std::vector<Image3D> out(nc, Image3D(g));
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        for (std::size_t k = 0; k < nc; ++k) {
            out[k].data[n] = c.values[n * nc + k];
        }
    }
    return out;
}

void write_projections(const fs::path& path, const ProjectionSet& projs, DType dtype)
{
    validate(projs);
    const auto& g = projs.geometry;
    ContainerHeader h;
    h.kind = ContainerKind::image2d;
    h.dims = {g.detector_dims[0], g.detector_dims[1], 1};
    h.spacing = {g.detector_spacing[0], g.detector_spacing[1], 1.0};
    h.channels = static_cast<int>(projs.images.size());
    h.dtype = dtype;
    const std::size_t pixels = static_cast<std::size_t>(h.dims[0]) * static_cast<std::size_t>(h.dims[1]);
    const std::size_t nc = projs.images.size();
    std::vector<double> values(pixels * nc);
    for (std::size_t c = 0; c < nc; ++c) {
        for (std::size_t p = 0; p < pixels; ++p) {
            values[p * nc + c] = projs.images[c].data[p];
        }
    }
    write_container(path, h, values);
}

ProjectionSet read_projections(const fs::path& path, const SdctGeometry& geometry)
{
    const Container c = read_container(path);
    expect_kind(c.header, ContainerKind::image2d, path);
    const auto& h = c.header;
    if (h.dims[0] != geometry.detector_dims[0] || h.dims[1] != geometry.detector_dims[1]) {
        throw InputError("projections " + path.string() + ": dims [" + std::to_string(h.dims[0]) + ", " +
                         std::to_string(h.dims[1]) + "] do not match geometry field 'detector_dims' [" +
                         std::to_string(geometry.detector_dims[0]) + ", " +
                         std::to_string(geometry.detector_dims[1]) + "]");
    }
    if (static_cast<std::size_t>(h.channels) != geometry.n_emitters()) {
        throw InputError("projections " + path.string() + ": channels (" + std::to_string(h.channels) +
                         ") do not match geometry field 'n_emitters' (" +
                         std::to_string(geometry.n_emitters()) + ")");
    }
    if (std::abs(h.spacing.x - geometry.detector_spacing[0]) > 1e-9 ||
        std::abs(h.spacing.y - geometry.detector_spacing[1]) > 1e-9) {
        throw InputError("projections " + path.string() +
                         ": spacing does not match geometry field 'detector_spacing'");
    }
    ProjectionSet projs;
    projs.geometry = geometry;
    const std::size_t nc = static_cast<std::size_t>(h.channels);
    const std::size_t pixels = static_cast<std::size_t>(h.dims[0]) * static_cast<std::size_t>(h.dims[1]);
    for (std::size_t k = 0; k < nc; ++k) {
        Image2D img(geometry.detector_dims, geometry.detector_spacing);
        for (std::size_t p = 0; p < pixels; ++p) {
            img.data[p] = c.values[p * nc + k];
        }
        projs.images.push_back(std::move(img));
    }
    validate(projs);
    return projs;
}

void write_subspace(const fs::path& path, const DeformationSubspace& sub, DType dtype)
{
    validate(sub);
    ContainerHeader h = header_for(ContainerKind::subspace, sub.grid, 3, dtype);
    h.fields = static_cast<int>(1 + sub.n_modes());
    h.extra["N_e"] = sub.n_modes();
    h.extra["variance_fraction"] = sub.variance_fraction;
    h.extra["singular_values"] = sub.singular_values;
    h.extra["spectrum"] = sub.spectrum;
    h.extra["convention"] = "singular values of the raw mean-centred data matrix (samples x 3WHD), no 1/sqrt(n-1)";
    h.extra["units"] = "mm";
    std::vector<double> values;
    values.reserve(sub.field_length() * h.fields);
    values.insert(values.end(), sub.mean.begin(), sub.mean.end());
    for (const auto& e : sub.basis) {
        values.insert(values.end(), e.begin(), e.end());
    }
    write_container(path, h, values);
}

DeformationSubspace read_subspace(const fs::path& path)
{
    const Container c = read_container(path);
    expect_kind(c.header, ContainerKind::subspace, path);
    const auto& h = c.header;
    if (h.channels != 3) {
        throw InputError("subspace " + path.string() + ": channels must be 3");
    }
    DeformationSubspace sub;
    sub.grid = grid_of(h);
    const std::size_t modes = static_cast<std::size_t>(h.fields - 1);
    if (get_field<std::size_t>(h.extra, "N_e") != modes) {
        throw InputError("subspace " + path.string() + ": field 'N_e' disagrees with the payload field count");
    }
    sub.variance_fraction = get_field<double>(h.extra, "variance_fraction");
    sub.singular_values = get_field<std::vector<double>>(h.extra, "singular_values");
    if (h.extra.contains("spectrum")) {
        sub.spectrum = get_field<std::vector<double>>(h.extra, "spectrum");
    }
    const std::size_t len = sub.field_length();
    sub.mean.assign(c.values.begin(), c.values.begin() + static_cast<std::ptrdiff_t>(len));
    for (std::size_t m = 0; m < modes; ++m) {
        const auto first = c.values.begin() + static_cast<std::ptrdiff_t>((m + 1) * len);
        sub.basis.emplace_back(first, first + static_cast<std::ptrdiff_t>(len));
    }
    validate(sub);
    return sub;
}

json geometry_to_json(const SdctGeometry& g)
{
    json j;
    j["n_emitters"] = g.n_emitters();
    json emitters = json::array();
    for (const auto& c : g.emitter_positions) {
        emitters.push_back(vec3_json(c));
    }
    j["emitter_positions"] = emitters;
    j["detector_origin"] = vec3_json(g.detector_origin);
    j["detector_axes"] = json::array({vec3_json(g.detector_axes[0]), vec3_json(g.detector_axes[1])});
    j["detector_dims"] = json::array({g.detector_dims[0], g.detector_dims[1]});
    j["detector_spacing"] = json::array({g.detector_spacing[0], g.detector_spacing[1]});
    return j;
}

SdctGeometry geometry_from_json(const json& j)
{
    SdctGeometry g;
    const auto n = get_field<std::size_t>(j, "n_emitters");
    const json& emitters = required(j, "emitter_positions");
    if (!emitters.is_array() || emitters.size() != n) {
        throw InputError("geometry: field 'emitter_positions' must list n_emitters points");
    }
    for (const auto& e : emitters) {
        g.emitter_positions.push_back(vec3_from(e, "emitter_positions"));
    }
    g.detector_origin = vec3_from(required(j, "detector_origin"), "detector_origin");
    const json& axes = required(j, "detector_axes");
    if (!axes.is_array() || axes.size() != 2) {
        throw InputError("geometry: field 'detector_axes' must hold two vectors");
    }
    g.detector_axes = {vec3_from(axes[0], "detector_axes"), vec3_from(axes[1], "detector_axes")};
    const auto dims = get_field<std::vector<int>>(j, "detector_dims");
    const auto spacing = get_field<std::vector<double>>(j, "detector_spacing");
    if (dims.size() != 2 || spacing.size() != 2) {
        throw InputError("geometry: fields 'detector_dims' and 'detector_spacing' need two entries");
    }
    g.detector_dims = {dims[0], dims[1]};
    g.detector_spacing = {spacing[0], spacing[1]};
    validate(g);
    return g;
}

void write_geometry(const fs::path& path, const SdctGeometry& geom) { write_json(path, geometry_to_json(geom)); }

SdctGeometry read_geometry(const fs::path& path) { return geometry_from_json(read_json(path)); }

void write_landmarks(const fs::path& path, const Landmarks& landmarks)
{
    validate_unique_ids(landmarks);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InputError("cannot open " + path.string() + " for writing");
    }
    out << "id,x,y,z\n";
    for (const auto& lm : landmarks) {
        out << lm.id << ',' << format_double(lm.position.x) << ',' << format_double(lm.position.y) << ','
            << format_double(lm.position.z) << '\n';
    }
}

Landmarks read_landmarks(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InputError("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != "id,x,y,z") {
        throw InputError("landmarks " + path.string() + ": expected header 'id,x,y,z'");
    }
    Landmarks out;
    std::set<std::int64_t> seen;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 4) {
            throw InputError("landmarks " + path.string() + ":" + std::to_string(line_no) + ": expected 4 columns");
        }
        Landmark lm;
        auto parse = [&](const std::string& s, auto& value) {
            const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
            if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
                throw InputError("landmarks " + path.string() + ":" + std::to_string(line_no) + ": bad number '" +
                                 s + "'");
            }
        };
        parse(cells[0], lm.id);
        parse(cells[1], lm.position.x);
        parse(cells[2], lm.position.y);
        parse(cells[3], lm.position.z);
        if (!seen.insert(lm.id).second) {
            throw InputError("landmarks " + path.string() + ": duplicate id " + std::to_string(lm.id));
        }
        out.push_back(lm);
    }
    return out;
}

json phantom_spec_to_json(const PhantomSpec& s)
{
    json j;
    j["dims"] = json::array({s.dims[0], s.dims[1], s.dims[2]});
    j["spacing"] = vec3_json(s.spacing);
    j["seed"] = s.seed;
    j["n_vessels"] = s.n_vessels;
    j["deformation"] = {{"n_modes", s.deformation.n_modes},
                        {"magnitude_mm", s.deformation.magnitude_mm},
                        {"smoothness_sigma_voxels", s.deformation.smoothness_sigma_voxels}};
    j["n_emitters"] = s.n_emitters;
    j["span_angle_deg"] = s.span_angle_deg;
    j["source_detector_distance"] = s.source_detector_distance;
    j["line_offset"] = json::array({s.line_offset[0], s.line_offset[1]});
    j["detector_gap_mm"] = s.detector_gap_mm;
    j["detector_extent_factor"] = s.detector_extent_factor;
    return j;
}

PhantomSpec phantom_spec_from_json(const json& j)
{
    PhantomSpec s;
    try {
        if (j.contains("dims")) {
            const auto d = j.at("dims").get<std::vector<int>>();
            if (d.size() != 3) {
                throw InputError("phantom spec: 'dims' needs 3 entries");
            }
            s.dims = {d[0], d[1], d[2]};
        }
        if (j.contains("spacing")) {
            const json& sp = j.at("spacing");
            s.spacing = sp.is_number() ? Vec3{sp.get<double>(), sp.get<double>(), sp.get<double>()}
                                       : vec3_from(sp, "spacing");
        }
        s.seed = j.value("seed", s.seed);
        s.n_vessels = j.value("n_vessels", s.n_vessels);
        if (j.contains("deformation")) {
            const json& d = j.at("deformation");
            s.deformation.n_modes = d.value("n_modes", s.deformation.n_modes);
            s.deformation.magnitude_mm = d.value("magnitude_mm", s.deformation.magnitude_mm);
            s.deformation.smoothness_sigma_voxels =
                d.value("smoothness_sigma_voxels", s.deformation.smoothness_sigma_voxels);
        }
        s.n_emitters = j.value("n_emitters", s.n_emitters);
        s.span_angle_deg = j.value("span_angle_deg", s.span_angle_deg);
        s.source_detector_distance = j.value("source_detector_distance", s.source_detector_distance);
        if (j.contains("line_offset")) {
            const auto o = j.at("line_offset").get<std::vector<double>>();
            if (o.size() != 2) {
                throw InputError("phantom spec: 'line_offset' needs 2 entries");
            }
            s.line_offset = {o[0], o[1]};
        }
        s.detector_gap_mm = j.value("detector_gap_mm", s.detector_gap_mm);
        s.detector_extent_factor = j.value("detector_extent_factor", s.detector_extent_factor);
    } catch (const json::exception& e) {
        throw InputError(std::string("phantom spec: ") + e.what());
    }
    validate(s);
    return s;
}

json metrics_to_json(const MetricsReport& r, const std::vector<std::string>& warnings)
{
    json j;
    j["mtre_mm"] = r.mtre_mm;
    j["per_axis_mm"] = json::array({r.per_axis_mm[0], r.per_axis_mm[1], r.per_axis_mm[2]});
    j["dice_pct"] = r.dice_pct;
    j["pct_neg_jacobian"] = r.pct_neg_jacobian;
    j["n_landmarks"] = r.n_landmarks;
    j["warnings"] = warnings;
    return j;
}

json report_to_json(const RegistrationReport& r)
{
    json j;
    j["final_loss"] = r.final_loss;
    j["loss_trace"] = r.loss_trace;
    j["iterations"] = r.iterations;
    j["stop_reason"] = r.stop_reason;
    j["alpha"] = r.alpha;
    j["wall_time_s"] = r.wall_time_s;
    return j;
}

void write_alpha(const fs::path& path, std::span<const double> alpha)
{
    write_json(path, json(std::vector<double>(alpha.begin(), alpha.end())));
}

std::vector<double> read_alpha(const fs::path& path)
{
    const json j = read_json(path);
    if (!j.is_array()) {
        throw InputError("alpha file " + path.string() + " must be a JSON array of numbers");
    }
    try {
        return j.get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw InputError("alpha file " + path.string() + ": " + e.what());
    }
}

} // namespace liftreg::io
