#include <cmath>
#include <vector>

#include "liftreg/errors.hpp"
#include "liftreg/volume.hpp"

namespace liftreg {

void gaussian_smooth(const GridSpec& grid, std::span<double> data, int channels, double sigma_voxels)
{
    if (channels < 1 || data.size() != grid.voxel_count() * static_cast<std::size_t>(channels)) {
        throw InputError("gaussian_smooth: data length does not match grid and channel count");
    }
    if (!(sigma_voxels > 0.0)) {
        return;
    }
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_voxels)));
    std::vector<double> kernel(2 * radius + 1);
    for (int t = -radius; t <= radius; ++t) {
        kernel[t + radius] = std::exp(-0.5 * t * t / (sigma_voxels * sigma_voxels));
    }

    const std::size_t stride[3] = {1, static_cast<std::size_t>(grid.dims[0]),
                                   static_cast<std::size_t>(grid.dims[0]) * static_cast<std::size_t>(grid.dims[1])};
    std::vector<double> line;
    std::vector<double> out_line;
    for (int axis = 0; axis < 3; ++axis) {
        const int len = grid.dims[axis];
        if (len < 2) {
            continue;
        }
        line.resize(static_cast<std::size_t>(len) * channels);
        out_line.resize(line.size());
        const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        for (int q = 0; q < grid.dims[a2]; ++q) {
            for (int p = 0; p < grid.dims[a1]; ++p) {
                int idx[3];
                idx[axis] = 0;
                idx[a1] = p;
                idx[a2] = q;
                const std::size_t base = grid.index(idx[0], idx[1], idx[2]);
                for (int t = 0; t < len; ++t) {
                    const std::size_t n = base + static_cast<std::size_t>(t) * stride[axis];
                    for (int c = 0; c < channels; ++c) {
                        line[static_cast<std::size_t>(t) * channels + c] = data[n * channels + c];
                    }
                }
                for (int t = 0; t < len; ++t) {
                    const int lo = std::max(0, t - radius), hi = std::min(len - 1, t + radius);
                    double wsum = 0.0;
                    for (int c = 0; c < channels; ++c) {
                        out_line[static_cast<std::size_t>(t) * channels + c] = 0.0;
                    }
                    for (int s = lo; s <= hi; ++s) {
                        const double w = kernel[s - t + radius];
                        wsum += w;
                        for (int c = 0; c < channels; ++c) {
                            out_line[static_cast<std::size_t>(t) * channels + c] += w * line[static_cast<std::size_t>(s) * channels + c];
                        }
                    }
                    for (int c = 0; c < channels; ++c) {
                        out_line[static_cast<std::size_t>(t) * channels + c] /= wsum;
                    }
                }
                for (int t = 0; t < len; ++t) {
                    const std::size_t n = base + static_cast<std::size_t>(t) * stride[axis];
                    for (int c = 0; c < channels; ++c) {
                        data[n * channels + c] = out_line[static_cast<std::size_t>(t) * channels + c];
                    }
                }
            }
        }
    }
}

} // namespace liftreg
