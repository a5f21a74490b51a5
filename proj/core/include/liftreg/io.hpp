#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "liftreg/evaluation.hpp"
#include "liftreg/geometry.hpp"
#include "liftreg/phantom.hpp"
#include "liftreg/registration.hpp"
#include "liftreg/subspace.hpp"
#include "liftreg/volume.hpp"

namespace liftreg::io {

using json = nlohmann::json;

// Raw+JSON container: `<name>.json` header next to a `<name>.raw` payload of
// little-endian floats, x-fastest with channels interleaved per element.

enum class ContainerKind { volume, mask, dvf, image2d, subspace };
enum class DType { f32le, f64le };

std::string to_string(ContainerKind kind);
std::string to_string(DType dtype);
DType parse_dtype(const std::string& name);

struct ContainerHeader {
    ContainerKind kind = ContainerKind::volume;
    // Three entries for volumetric kinds; image2d uses the first two (third is 1).
    std::array<int, 3> dims{1, 1, 1};
    Vec3 spacing{1.0, 1.0, 1.0};
    Vec3 origin{};
    int channels = 1;
    // Number of stacked fields (subspace: mean + N_e basis fields); 1 otherwise.
    int fields = 1;
    DType dtype = DType::f32le;
    json extra = json::object();

    std::size_t element_count() const;
};

/// Writes header + payload; the payload file sits beside the header with a .raw extension.
void write_container(const std::filesystem::path& header_path, const ContainerHeader& header,
                     std::span<const double> values);

struct Container {
    ContainerHeader header;
    std::vector<double> values;
};

/// Reads and validates a container; payload length must match the header exactly.
Container read_container(const std::filesystem::path& header_path);
ContainerHeader read_header(const std::filesystem::path& header_path);

void write_volume(const std::filesystem::path& path, const Image3D& vol, DType dtype = DType::f32le);
Image3D read_volume(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const Mask3D& mask);
Mask3D read_mask(const std::filesystem::path& path);

void write_dvf(const std::filesystem::path& path, const DisplacementField& u, DType dtype = DType::f32le);
DisplacementField read_dvf(const std::filesystem::path& path);

/// N-channel volume (kind "volume", channels = N).
void write_multichannel(const std::filesystem::path& path, std::span<const Image3D> channels,
                        DType dtype = DType::f32le);
std::vector<Image3D> read_multichannel(const std::filesystem::path& path);

/// Projection images as one image2d container with one channel per emitter.
void write_projections(const std::filesystem::path& path, const ProjectionSet& projs, DType dtype = DType::f32le);
/// Pairs the images with `geometry`; throws InputError naming the mismatched field.
ProjectionSet read_projections(const std::filesystem::path& path, const SdctGeometry& geometry);

void write_subspace(const std::filesystem::path& path, const DeformationSubspace& sub, DType dtype = DType::f32le);
DeformationSubspace read_subspace(const std::filesystem::path& path);

json geometry_to_json(const SdctGeometry& geom);
SdctGeometry geometry_from_json(const json& j);
void write_geometry(const std::filesystem::path& path, const SdctGeometry& geom);
SdctGeometry read_geometry(const std::filesystem::path& path);

/// CSV with header "id,x,y,z", millimetres, LF line endings.
void write_landmarks(const std::filesystem::path& path, const Landmarks& landmarks);
Landmarks read_landmarks(const std::filesystem::path& path);

json phantom_spec_to_json(const PhantomSpec& spec);
/// Missing keys keep their defaults.
PhantomSpec phantom_spec_from_json(const json& j);

json metrics_to_json(const MetricsReport& report, const std::vector<std::string>& warnings = {});
json report_to_json(const RegistrationReport& report);

void write_alpha(const std::filesystem::path& path, std::span<const double> alpha);
std::vector<double> read_alpha(const std::filesystem::path& path);

/// Pretty-printed, trailing newline, key order sorted: byte-stable for equal input.
void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

} // namespace liftreg::io
