#include "liftreg/registration.hpp"

#include <chrono>
#include <cmath>

#include "liftreg/errors.hpp"

namespace liftreg {

namespace {

RegistrationReport make_report(const OptimResult& res, double seconds)
{
    RegistrationReport rep;
    rep.final_loss = res.loss;
    rep.loss_trace = res.loss_trace;
    rep.iterations = res.iterations;
    rep.stop_reason = to_string(res.stop);
    rep.wall_time_s = seconds;
    return rep;
}

SubspaceRegistration optimise_subspace(const RegistrationLoss& loss, const DeformationSubspace& sub,
                                       const OptimConfig& opt_cfg)
{
    validate(sub);
    if (!(sub.grid == loss.grid())) {
        throw InputError("registration: subspace grid does not match the image grid");
    }
    const auto start = std::chrono::steady_clock::now();
    const double scale = std::sqrt(static_cast<double>(sub.grid.voxel_count()));
    const std::size_t modes = sub.n_modes();

    DisplacementField grad_u(sub.grid);
    AlphaVector alpha(modes);
    Objective objective = [&](std::span<const double> beta, std::span<double> grad) {
        for (std::size_t m = 0; m < modes; ++m) {
            alpha[m] = scale * beta[m];
        }
        const DisplacementField u = reconstruct(sub, alpha);
        if (grad.empty()) {
            return loss.evaluate(u).total;
        }
        const double value = loss.evaluate(u, grad_u).total;
        const AlphaVector g = project_direction(sub, grad_u.data);
        for (std::size_t m = 0; m < modes; ++m) {
            grad[m] = scale * g[m];
        }
        return value;
    };
    const OptimResult res = minimize(objective, std::vector<double>(modes, 0.0), opt_cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    SubspaceRegistration out;
    out.alpha.resize(modes);
    for (std::size_t m = 0; m < modes; ++m) {
        out.alpha[m] = scale * res.x[m];
    }
    out.displacement = reconstruct(sub, out.alpha);
    out.report = make_report(res, seconds);
    out.report.alpha = out.alpha;
    return out;
}

} // namespace

SubspaceRegistration register_subspace_3d(const Image3D& source, const Image3D& target, const Mask3D& source_mask,
                                          const Mask3D& target_mask, const DeformationSubspace& sub,
                                          const LossConfig& loss_cfg, const OptimConfig& opt_cfg)
{
    LossConfig cfg = loss_cfg;
    cfg.mode = LossMode::sim3d;
    LossInputs in;
    in.source = &source;
    in.source_mask = &source_mask;
    in.target = &target;
    in.target_mask = &target_mask;
    return optimise_subspace(RegistrationLoss(in, cfg), sub, opt_cfg);
}

SubspaceRegistration register_subspace_2d(const Image3D& source, const ProjectionSet& target_projections,
                                          const Mask3D& source_mask, const DeformationSubspace& sub,
                                          const LossConfig& loss_cfg, const OptimConfig& opt_cfg)
{
    LossConfig cfg = loss_cfg;
    cfg.mode = LossMode::sim2d;
    LossInputs in;
    in.source = &source;
    in.source_mask = &source_mask;
    in.projections = &target_projections;
    return optimise_subspace(RegistrationLoss(in, cfg), sub, opt_cfg);
}

DenseRegistration register_dense_3d(const Image3D& source, const Image3D& target, const Mask3D& source_mask,
                                    const Mask3D& target_mask, const LossConfig& loss_cfg,
                                    const OptimConfig& opt_cfg)
{
    LossConfig cfg = loss_cfg;
    cfg.mode = LossMode::sim3d;
    LossInputs in;
    in.source = &source;
    in.source_mask = &source_mask;
    in.target = &target;
    in.target_mask = &target_mask;
    const RegistrationLoss loss(in, cfg);
    const GridSpec grid = loss.grid();
    const auto start = std::chrono::steady_clock::now();

    DisplacementField u(grid);
    DisplacementField grad_u(grid);
    Objective objective = [&](std::span<const double> x, std::span<double> grad) {
        std::copy(x.begin(), x.end(), u.data.begin());
        if (grad.empty()) {
            return loss.evaluate(u).total;
        }
        const double value = loss.evaluate(u, grad_u).total;
        std::copy(grad_u.data.begin(), grad_u.data.end(), grad.begin());
        return value;
    };
    Preconditioner smooth = [&](std::span<double> g) { gaussian_smooth(grid, g, 3, kDenseGradientSigma); };

    const OptimResult res = minimize(objective, std::vector<double>(3 * grid.voxel_count(), 0.0), opt_cfg, smooth);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    DenseRegistration out;
    out.displacement = DisplacementField(grid);
    out.displacement.data = res.x;
    out.report = make_report(res, seconds);
    return out;
}

} // namespace liftreg
