#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace liftreg {

enum class OptimizerKind { gradient_descent, momentum };

struct OptimConfig {
    int max_iters = 200;
    // Max-norm length of the first trial step, in parameter units. Later trials
    // start from twice the last accepted step length.
    double step_size = 1.0;
    OptimizerKind optimizer = OptimizerKind::gradient_descent;
    // Stop when ||grad||_inf < tol_grad.
    double tol_grad = 1e-10;
    // Stop when the loss fell by less than tol_loss (relative) over the last 5 iterations.
    double tol_loss = 1e-6;
    double momentum = 0.9;
    std::uint64_t seed = 0;
};

void validate(const OptimConfig& cfg);

enum class StopReason { max_iters, grad_tol, loss_tol, line_search };

std::string to_string(StopReason reason);

/// Evaluates f(x); when `grad` is non-empty also writes df/dx into it.
using Objective = std::function<double(std::span<const double> x, std::span<double> grad)>;

/// Maps a gradient to a (positive definite) preconditioned gradient in place.
using Preconditioner = std::function<void(std::span<double> g)>;

struct OptimResult {
    std::vector<double> x;
    double loss = 0.0;
    // Initial loss followed by every accepted loss.
    std::vector<double> loss_trace;
    int iterations = 0;
    StopReason stop = StopReason::max_iters;
};

/// Descent with Armijo backtracking (c = 1e-4, shrink 0.5); the accepted loss trace
/// is non-increasing. Throws NumericalError on a non-finite loss or gradient.
OptimResult minimize(const Objective& f, std::vector<double> x0, const OptimConfig& cfg,
                     const Preconditioner& precondition = {});

} // namespace liftreg
