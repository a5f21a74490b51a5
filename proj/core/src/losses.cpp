#include "liftreg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "liftreg/errors.hpp"

namespace liftreg {

void validate(const LossConfig& cfg)
{
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
        throw InputError("loss config: lambda must be finite and >= 0");
    }
    if (cfg.mode == LossMode::sim2d && !(cfg.drr_step_mm >= 0.0)) {
        throw InputError("loss config: drr_step_mm must be > 0 (or 0 for the default)");
    }
}

namespace {

struct Moments {
    double mean_a = 0.0, mean_b = 0.0;
    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    double count = 0.0;
};

Moments moments(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> support)
{
    Moments m;
    const bool all = support.empty();
    double sa = 0.0, sb = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        if (all || support[n]) {
            sa += a[n];
            sb += b[n];
            m.count += 1.0;
        }
    }
    if (m.count == 0.0) {
        return m;
    }
    m.mean_a = sa / m.count;
    m.mean_b = sb / m.count;
    for (std::size_t n = 0; n < a.size(); ++n) {
        if (all || support[n]) {
            const double da = a[n] - m.mean_a, db = b[n] - m.mean_b;
            m.var_a += da * da;
            m.var_b += db * db;
            m.cov += da * db;
        }
    }
    m.var_a /= m.count;
    m.var_b /= m.count;
    m.cov /= m.count;
    return m;
}

void check_sizes(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> support)
{
    if (a.size() != b.size()) {
        throw InputError("ncc: inputs differ in size");
    }
    if (!support.empty() && support.size() != a.size()) {
        throw InputError("ncc: support mask size mismatch");
    }
}

// Both sides flat: nothing to align, so the similarity term is taken as perfect.
bool both_flat(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> support)
{
    const Moments m = moments(a, b, support);
    return m.var_a < kNccEpsilon && m.var_b < kNccEpsilon;
}

} // namespace

NccResult ncc(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> support)
{
    check_sizes(a, b, support);
    const Moments m = moments(a, b, support);
    if (m.var_a < kNccEpsilon || m.var_b < kNccEpsilon) {
        return {0.0, true};
    }
    return {m.cov / std::sqrt(m.var_a * m.var_b), false};
}

NccResult ncc(const Image3D& a, const Image3D& b)
{
    if (a.grid.dims != b.grid.dims) {
        throw InputError("ncc: image dims differ");
    }
    return ncc(a.data, b.data);
}

NccResult ncc(const Image2D& a, const Image2D& b)
{
    if (a.dims != b.dims) {
        throw InputError("ncc: image dims differ");
    }
    return ncc(a.data, b.data);
}

NccResult ncc_with_grad(std::span<const double> a, std::span<const double> b, std::span<double> d_b,
                        std::span<const std::uint8_t> support)
{
    check_sizes(a, b, support);
    if (d_b.size() != b.size()) {
        throw InputError("ncc: gradient buffer size mismatch");
    }
    std::fill(d_b.begin(), d_b.end(), 0.0);
    const Moments m = moments(a, b, support);
    if (m.var_a < kNccEpsilon || m.var_b < kNccEpsilon) {
        return {0.0, true};
    }
    const double sigma_ab = std::sqrt(m.var_a * m.var_b);
    const double r = m.cov / sigma_ab;
    // d r / d b_k = ((a_k - mean_a) / (sa sb) - r (b_k - mean_b) / sb^2) / n
    const double c1 = 1.0 / (sigma_ab * m.count);
    const double c2 = r / (m.var_b * m.count);
    const bool all = support.empty();
    for (std::size_t n = 0; n < b.size(); ++n) {
        if (all || support[n]) {
            d_b[n] = c1 * (a[n] - m.mean_a) - c2 * (b[n] - m.mean_b);
        }
    }
    return {r, false};
}

double masked_sim_loss(const Image3D& target, const Image3D& source, const Mask3D& target_mask,
                       const Mask3D& source_mask, const DisplacementField& u)
{
    LossInputs in;
    in.source = &source;
    in.source_mask = &source_mask;
    in.target = &target;
    in.target_mask = &target_mask;
    LossConfig cfg;
    cfg.lambda = 0.0;
    return RegistrationLoss(in, cfg).evaluate(u).similarity;
}

namespace {

void check_diffusion_dims(const GridSpec& g)
{
    for (int a = 0; a < 3; ++a) {
        if (g.dims[a] < 2) {
            throw InputError("diffusion energy requires at least 2 voxels per axis");
        }
    }
}

} // namespace

double diffusion_energy(const DisplacementField& u)
{
    const GridSpec& g = u.grid;
    check_diffusion_dims(g);
    const std::size_t stride[3] = {1, static_cast<std::size_t>(g.dims[0]),
                                   static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1])};
    double sum = 0.0;
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++n) {
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    if (idx[a] + 1 >= g.dims[a]) {
                        continue;
                    }
                    const double inv = 1.0 / g.spacing[a];
                    const std::size_t m = n + stride[a];
                    for (int c = 0; c < 3; ++c) {
                        const double d = (u.data[3 * m + c] - u.data[3 * n + c]) * inv;
                        sum += d * d;
                    }
                }
            }
        }
    }
    return sum / static_cast<double>(g.voxel_count());
}

void add_diffusion_gradient(const DisplacementField& u, double scale, std::span<double> out)
{
    const GridSpec& g = u.grid;
    check_diffusion_dims(g);
    if (out.size() != u.data.size()) {
        throw InputError("diffusion gradient: output buffer size mismatch");
    }
    if (scale == 0.0) {
        return;
    }
    const std::size_t stride[3] = {1, static_cast<std::size_t>(g.dims[0]),
                                   static_cast<std::size_t>(g.dims[0]) * static_cast<std::size_t>(g.dims[1])};
    const double base = 2.0 * scale / static_cast<double>(g.voxel_count());
    std::size_t n = 0;
    for (int k = 0; k < g.dims[2]; ++k) {
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int i = 0; i < g.dims[0]; ++i, ++n) {
                const int idx[3] = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    if (idx[a] + 1 >= g.dims[a]) {
                        continue;
                    }
                    const double w = base / (g.spacing[a] * g.spacing[a]);
                    const std::size_t m = n + stride[a];
                    for (int c = 0; c < 3; ++c) {
                        const double d = w * (u.data[3 * m + c] - u.data[3 * n + c]);
                        out[3 * m + c] += d;
                        out[3 * n + c] -= d;
                    }
                }
            }
        }
    }
}

RegistrationLoss::RegistrationLoss(const LossInputs& in, const LossConfig& cfg) : cfg_(cfg)
{
    validate(cfg);
    if (in.source == nullptr || in.source_mask == nullptr) {
        throw InputError("loss: source image and source mask are required");
    }
    if (!(in.source->grid == in.source_mask->grid)) {
        throw InputError("loss: source image and source mask grids differ");
    }
    moving_ = apply_mask(*in.source, *in.source_mask);

    if (cfg.mode == LossMode::sim3d) {
        if (in.target == nullptr || in.target_mask == nullptr) {
            throw InputError("loss: sim3d requires the target image and target mask");
        }
        if (!(in.target->grid == moving_.grid) || !(in.target_mask->grid == moving_.grid)) {
            throw InputError("loss: target and source grids differ");
        }
        fixed_ = apply_mask(*in.target, *in.target_mask);
        if (cfg.ncc_within_target_mask) {
            support_ = in.target_mask->data;
        }
    } else {
        if (in.projections == nullptr) {
            throw InputError("loss: sim2d requires target projections with geometry");
        }
        validate(*in.projections);
        projections_ = in.projections;
        step_mm_ = cfg.drr_step_mm > 0.0 ? cfg.drr_step_mm : default_drr_step(moving_.grid);
    }
}

LossValue RegistrationLoss::evaluate(const DisplacementField& u) const { return run(u, nullptr); }

LossValue RegistrationLoss::evaluate(const DisplacementField& u, DisplacementField& grad) const
{
    return run(u, &grad);
}

LossValue RegistrationLoss::run(const DisplacementField& u, DisplacementField* grad) const
{
    const GridSpec& g = moving_.grid;
    if (!(u.grid == g)) {
        throw InputError("loss: displacement grid does not match the image grid");
    }
    const std::size_t count = g.voxel_count();

    // Pull back the masked source; keep d(sample)/d(index coord) for the chain rule.
    Image3D warped(g);
    std::vector<double> sample_grad;
    if (grad != nullptr) {
        sample_grad.resize(3 * count);
    }
    {
        std::size_t n = 0;
        for (int k = 0; k < g.dims[2]; ++k) {
            for (int j = 0; j < g.dims[1]; ++j) {
                for (int i = 0; i < g.dims[0]; ++i, ++n) {
                    const double ux = u.data[3 * n], uy = u.data[3 * n + 1], uz = u.data[3 * n + 2];
                    if (!std::isfinite(ux) || !std::isfinite(uy) || !std::isfinite(uz)) {
                        throw NumericalError("loss: non-finite displacement");
                    }
                    const Vec3 c{i + ux / g.spacing.x, j + uy / g.spacing.y, k + uz / g.spacing.z};
                    if (grad != nullptr) {
                        Vec3 gi;
                        warped.data[n] = sample_trilinear_index_grad(g, moving_.data, c, gi);
                        sample_grad[3 * n] = gi.x / g.spacing.x;
                        sample_grad[3 * n + 1] = gi.y / g.spacing.y;
                        sample_grad[3 * n + 2] = gi.z / g.spacing.z;
                    } else {
                        warped.data[n] = sample_trilinear_index(g, moving_.data, c);
                    }
                }
            }
        }
    }

    LossValue out;
    std::vector<double> d_warped;  // dL_sim / d warped
    if (grad != nullptr) {
        d_warped.assign(count, 0.0);
    }

    if (cfg_.mode == LossMode::sim3d) {
        NccResult r;
        if (grad != nullptr) {
            r = ncc_with_grad(fixed_.data, warped.data, d_warped, support_);
            for (double& v : d_warped) {
                v = -v;
            }
        } else {
            r = ncc(fixed_.data, warped.data, support_);
        }
        out.similarity = r.degenerate && both_flat(fixed_.data, warped.data, support_) ? 0.0 : 1.0 - r.value;
        out.degenerate = r.degenerate;
    } else {
        const auto& geom = projections_->geometry;
        const std::size_t n_emit = geom.n_emitters();
        const double inv_n = 1.0 / static_cast<double>(n_emit);
        double sim = 0.0;
        for (std::size_t e = 0; e < n_emit; ++e) {
            const Image2D drr = render_drr(warped, geom, e, step_mm_);
            const Image2D& target = projections_->images[e];
            NccResult r;
            if (grad != nullptr) {
                Image2D d_drr(drr.dims, drr.spacing);
                r = ncc_with_grad(target.data, drr.data, d_drr.data);
                for (double& v : d_drr.data) {
                    v *= -inv_n;
                }
                render_drr_adjoint(d_drr, g, geom, e, step_mm_, d_warped);
            } else {
                r = ncc(target.data, drr.data);
            }
            sim += r.degenerate && both_flat(target.data, drr.data, {}) ? 0.0 : 1.0 - r.value;
            out.degenerate = out.degenerate || r.degenerate;
        }
        out.similarity = sim * inv_n;
    }

    out.regularization = diffusion_energy(u);
    out.total = out.similarity + cfg_.lambda * out.regularization;

    if (grad != nullptr) {
        if (!(grad->grid == g) || grad->data.size() != 3 * count) {
            *grad = DisplacementField(g);
        }
        for (std::size_t n = 0; n < count; ++n) {
            for (int c = 0; c < 3; ++c) {
                grad->data[3 * n + c] = d_warped[n] * sample_grad[3 * n + c];
            }
        }
        add_diffusion_gradient(u, cfg_.lambda, grad->data);
    }
    return out;
}

double total_loss(const LossInputs& inputs, const DisplacementField& u, const LossConfig& cfg)
{
    return RegistrationLoss(inputs, cfg).evaluate(u).total;
}

AlphaVector grad_alpha(const LossInputs& inputs, const LossConfig& cfg, const DeformationSubspace& sub,
                       std::span<const double> alpha)
{
    RegistrationLoss loss(inputs, cfg);
    if (!(sub.grid == loss.grid())) {
        throw InputError("grad_alpha: subspace grid does not match the image grid");
    }
    const DisplacementField u = reconstruct(sub, alpha);
    DisplacementField g(u.grid);
    loss.evaluate(u, g);
    return project_direction(sub, g.data);
}

DisplacementField grad_dense(const LossInputs& inputs, const LossConfig& cfg, const DisplacementField& u)
{
    RegistrationLoss loss(inputs, cfg);
    DisplacementField g(u.grid);
    loss.evaluate(u, g);
    return g;
}

} // namespace liftreg
