#include "liftreg/optimizer.hpp"

#include <algorithm>
#include <cmath>

#include "liftreg/errors.hpp"

namespace liftreg {

namespace {

constexpr double kArmijo = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxBacktracks = 40;
constexpr std::size_t kLossWindow = 5;

double max_abs(std::span<const double> v)
{
    double m = 0.0;
    for (double x : v) {
        m = std::max(m, std::abs(x));
    }
    return m;
}

double dot(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t n = 0; n < a.size(); ++n) {
        s += a[n] * b[n];
    }
    return s;
}

void require_finite(double value, std::span<const double> grad)
{
    if (!std::isfinite(value)) {
        throw NumericalError("optimizer: loss became non-finite");
    }
    for (double g : grad) {
        if (!std::isfinite(g)) {
            throw NumericalError("optimizer: gradient became non-finite");
        }
    }
}

} // namespace

void validate(const OptimConfig& cfg)
{
    if (cfg.max_iters < 1) {
        throw InputError("optim config: max_iters must be >= 1");
    }
    if (!(cfg.step_size > 0.0)) {
        throw InputError("optim config: step_size must be > 0");
    }
    if (!(cfg.tol_grad > 0.0) || !(cfg.tol_loss > 0.0)) {
        throw InputError("optim config: tolerances must be > 0");
    }
    if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
        throw InputError("optim config: momentum must be in [0, 1)");
    }
}

std::string to_string(StopReason reason)
{
    switch (reason) {
    case StopReason::max_iters: return "max_iters";
    case StopReason::grad_tol: return "grad_tol";
    case StopReason::loss_tol: return "loss_tol";
    case StopReason::line_search: return "line_search";
    }
    return "unknown";
}

OptimResult minimize(const Objective& f, std::vector<double> x0, const OptimConfig& cfg,
                     const Preconditioner& precondition)
{
    validate(cfg);
    const std::size_t n = x0.size();
    OptimResult res;
    res.x = std::move(x0);

    std::vector<double> grad(n), trial_grad(n), trial(n), direction(n), velocity(n, 0.0);
    double loss = f(res.x, grad);
    require_finite(loss, grad);
    res.loss_trace.push_back(loss);

    double t = -1.0;  // step multiplier; set from step_size on the first iteration
    for (int it = 0; it < cfg.max_iters; ++it) {
        if (n == 0 || max_abs(grad) < cfg.tol_grad) {
            res.stop = StopReason::grad_tol;
            break;
        }

        direction = grad;
        if (precondition) {
            precondition(direction);
        }
        for (double& d : direction) {
            d = -d;
        }
        if (cfg.optimizer == OptimizerKind::momentum) {
            for (std::size_t k = 0; k < n; ++k) {
                velocity[k] = cfg.momentum * velocity[k] + direction[k];
            }
            if (dot(grad, velocity) < 0.0) {
                direction = velocity;
            } else {
                velocity = direction;
            }
        }
        double slope = dot(grad, direction);
        if (!(slope < 0.0)) {
            // Preconditioned direction is not a descent direction; fall back.
            for (std::size_t k = 0; k < n; ++k) {
                direction[k] = -grad[k];
            }
            slope = -dot(grad, grad);
            std::fill(velocity.begin(), velocity.end(), 0.0);
        }
        if (t < 0.0) {
            t = cfg.step_size / max_abs(direction);
        }

        bool accepted = false;
        double trial_loss = loss;
        for (int bt = 0; bt < kMaxBacktracks; ++bt) {
            for (std::size_t k = 0; k < n; ++k) {
                trial[k] = res.x[k] + t * direction[k];
            }
            trial_loss = f(trial, trial_grad);
            require_finite(trial_loss, trial_grad);
            if (trial_loss <= loss + kArmijo * t * slope) {
                accepted = true;
                break;
            }
            t *= kShrink;
        }
        if (!accepted) {
            res.stop = StopReason::line_search;
            break;
        }
        res.x.swap(trial);
        grad.swap(trial_grad);
        loss = trial_loss;
        res.loss_trace.push_back(loss);
        res.iterations = it + 1;
        t *= 2.0;

        if (res.loss_trace.size() > kLossWindow) {
            const double before = res.loss_trace[res.loss_trace.size() - 1 - kLossWindow];
            const double scale = std::max(std::abs(before), 1e-300);
            if ((before - loss) / scale < cfg.tol_loss) {
                res.stop = StopReason::loss_tol;
                break;
            }
        }
        if (it + 1 == cfg.max_iters) {
            res.stop = StopReason::max_iters;
        }
    }
    res.loss = loss;
    return res;
}

} // namespace liftreg
