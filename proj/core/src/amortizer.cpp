#include "liftreg/amortizer.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "liftreg/errors.hpp"

namespace liftreg {

std::vector<double> amortizer_features(const Image3D& source, std::span<const Image3D> lifted, int blocks)
{
    const GridSpec& g = source.grid;
    if (blocks < 1) {
        throw InputError("amortizer: blocks must be >= 1");
    }
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] < blocks) {
            throw InputError("amortizer: grid is smaller than the block partition");
        }
    }
    for (const auto& ch : lifted) {
        if (ch.grid.dims != g.dims) {
            throw InputError("amortizer: lifted channel dims differ from the source");
        }
    }
    const std::size_t per_channel = static_cast<std::size_t>(blocks) * blocks * blocks;
    const std::size_t channels = lifted.size() + 1;
    std::vector<double> features(per_channel * channels, 0.0);
    std::vector<double> counts(per_channel, 0.0);

    std::vector<std::size_t> block_of(g.voxel_count());
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        const int bk = k * blocks / g.dims[2];
        for (int j = 0; j < g.dims[1]; ++j) {
            const int bj = j * blocks / g.dims[1];
            for (int i = 0; i < g.dims[0]; ++i, ++n) {
                const int bi = i * blocks / g.dims[0];
                block_of[n] = (static_cast<std::size_t>(bk) * blocks + bj) * blocks + bi;
                counts[block_of[n]] += 1.0;
            }
        }
    }
    for (std::size_t c = 0; c < channels; ++c) {
        const Image3D& img = c < lifted.size() ? lifted[c] : source;
        double* out = features.data() + c * per_channel;
        for (std::size_t v = 0; v < img.data.size(); ++v) {
            out[block_of[v]] += img.data[v];
        }
        for (std::size_t b = 0; b < per_channel; ++b) {
            out[b] /= counts[b];
        }
    }
    return features;
}

LinearAmortizer fit_linear_amortizer(std::span<const AmortizerSample> samples, double ridge, int blocks)
{
    if (samples.empty()) {
        throw InputError("amortizer: need at least one training pair");
    }
    if (!(ridge >= 0.0)) {
        throw InputError("amortizer: ridge must be >= 0");
    }
    const auto n = static_cast<Eigen::Index>(samples.size());
    LinearAmortizer model;
    model.blocks = blocks;
    model.n_modes = samples[0].alpha_target.size();

    std::vector<std::vector<double>> rows;
    rows.reserve(samples.size());
    for (const auto& s : samples) {
        if (s.source == nullptr) {
            throw InputError("amortizer: training pair without a source image");
        }
        rows.push_back(amortizer_features(*s.source, s.lifted, blocks));
        if (rows.back().size() != rows.front().size()) {
            throw InputError("amortizer: feature dimension mismatch between training pairs");
        }
        if (s.alpha_target.size() != model.n_modes) {
            throw InputError("amortizer: alpha targets differ in length");
        }
    }
    model.n_features = rows.front().size();
    const auto p = static_cast<Eigen::Index>(model.n_features);
    const auto k = static_cast<Eigen::Index>(model.n_modes);

    Eigen::MatrixXd X(n, p);
    Eigen::MatrixXd Y(n, k);
    for (Eigen::Index r = 0; r < n; ++r) {
        X.row(r) = Eigen::Map<const Eigen::RowVectorXd>(rows[static_cast<std::size_t>(r)].data(), p);
        Y.row(r) = Eigen::Map<const Eigen::RowVectorXd>(samples[static_cast<std::size_t>(r)].alpha_target.data(), k);
    }
    const Eigen::RowVectorXd x_mean = X.colwise().mean();
    const Eigen::RowVectorXd y_mean = Y.colwise().mean();
    X.rowwise() -= x_mean;
    Y.rowwise() -= y_mean;

    Eigen::MatrixXd W;
    if (ridge == 0.0) {
        W = X.completeOrthogonalDecomposition().solve(Y);
    } else if (n <= p) {
        // Dual form: W = X^T (X X^T + ridge I)^-1 Y
        Eigen::MatrixXd K = X * X.transpose();
        K.diagonal().array() += ridge;
        W = X.transpose() * K.ldlt().solve(Y);
    } else {
        Eigen::MatrixXd A = X.transpose() * X;
        A.diagonal().array() += ridge;
        W = A.ldlt().solve(X.transpose() * Y);
    }
    if (!W.allFinite()) {
        throw NumericalError("amortizer: ridge solve produced non-finite weights");
    }

    model.feature_mean.assign(x_mean.data(), x_mean.data() + p);
    model.target_mean.assign(y_mean.data(), y_mean.data() + k);
    model.weights.resize(static_cast<std::size_t>(p * k));
    for (Eigen::Index i = 0; i < p; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            model.weights[static_cast<std::size_t>(i * k + j)] = W(i, j);
        }
    }
    return model;
}

AlphaVector predict_alpha(const LinearAmortizer& model, std::span<const double> features)
{
    if (features.size() != model.n_features) {
        throw InputError("amortizer: expected " + std::to_string(model.n_features) + " features, got " +
                         std::to_string(features.size()));
    }
    AlphaVector out = model.target_mean;
    for (std::size_t i = 0; i < model.n_features; ++i) {
        const double x = features[i] - model.feature_mean[i];
        if (x == 0.0) {
            continue;
        }
        for (std::size_t j = 0; j < model.n_modes; ++j) {
            out[j] += x * model.weights[i * model.n_modes + j];
        }
    }
    return out;
}

AlphaVector predict_alpha(const LinearAmortizer& model, const Image3D& source, std::span<const Image3D> lifted)
{
    return predict_alpha(model, amortizer_features(source, lifted, model.blocks));
}

} // namespace liftreg
