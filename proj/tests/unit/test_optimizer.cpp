#include <doctest.h>

#include <cmath>
#include <limits>

#include "liftreg/errors.hpp"
#include "liftreg/optimizer.hpp"

using namespace liftreg;

namespace {

// f(x) = sum w_i (x_i - c_i)^2 with minimiser c.
Objective quadratic(std::vector<double> w, std::vector<double> c)
{
    return [w, c](std::span<const double> x, std::span<double> g) {
        double f = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            f += w[i] * (x[i] - c[i]) * (x[i] - c[i]);
            if (!g.empty()) {
                g[i] = 2.0 * w[i] * (x[i] - c[i]);
            }
        }
        return f;
    };
}

bool non_increasing(const std::vector<double>& trace)
{
    for (std::size_t i = 1; i < trace.size(); ++i) {
        if (trace[i] > trace[i - 1]) {
            return false;
        }
    }
    return true;
}

} // namespace

TEST_CASE("minimize: gradient descent reaches the minimiser of a quadratic") {
    OptimConfig cfg;
    cfg.max_iters = 500;
    cfg.tol_loss = 1e-300;
    cfg.tol_grad = 1e-9;
    const OptimResult r = minimize(quadratic({1.0, 4.0, 0.5}, {1.0, -2.0, 3.0}), {0.0, 0.0, 0.0}, cfg);
    CHECK(r.stop == StopReason::grad_tol);
    CHECK(r.x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(r.x[1] == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(r.x[2] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(non_increasing(r.loss_trace));
    CHECK(r.loss_trace.size() == static_cast<std::size_t>(r.iterations) + 1);
}

TEST_CASE("minimize: momentum also converges and keeps a non-increasing trace") {
    OptimConfig cfg;
    cfg.optimizer = OptimizerKind::momentum;
    cfg.max_iters = 1000;
    cfg.tol_loss = 1e-300;
    cfg.tol_grad = 1e-8;
    const OptimResult r = minimize(quadratic({1.0, 50.0}, {2.0, 0.5}), {-3.0, 4.0}, cfg);
    CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(r.x[1] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(non_increasing(r.loss_trace));
}

TEST_CASE("minimize: stop reasons") {
    OptimConfig cfg;
    cfg.max_iters = 3;
    const Objective f = quadratic({1.0}, {100.0});
    CHECK(minimize(f, {0.0}, cfg).stop == StopReason::max_iters);
    CHECK(minimize(f, {0.0}, cfg).iterations == 3);

    cfg.max_iters = 10;
    const OptimResult at_min = minimize(f, {100.0}, cfg);
    CHECK(at_min.stop == StopReason::grad_tol);
    CHECK(at_min.iterations == 0);
    CHECK(at_min.loss_trace.size() == 1);

    // A large constant offset over a decaying tail: relative improvements soon fall
    // below the loss tolerance.
    cfg.max_iters = 1000;
    cfg.tol_loss = 1e-2;
    const Objective tail = [](std::span<const double> x, std::span<double> g) {
        if (!g.empty()) {
            g[0] = -std::exp(-x[0]);
        }
        return 1000.0 + std::exp(-x[0]);
    };
    CHECK(minimize(tail, {0.0}, cfg).stop == StopReason::loss_tol);

    // A wrong gradient sign defeats every backtrack.
    const Objective lying = [](std::span<const double> x, std::span<double> g) {
        if (!g.empty()) {
            g[0] = -2.0 * (x[0] - 1.0);
        }
        return (x[0] - 1.0) * (x[0] - 1.0);
    };
    CHECK(minimize(lying, {0.0}, cfg).stop == StopReason::line_search);
}

TEST_CASE("minimize: empty parameter vector returns immediately") {
    const Objective f = [](std::span<const double>, std::span<double>) { return 2.5; };
    const OptimResult r = minimize(f, {}, OptimConfig{});
    CHECK(r.loss == 2.5);
    CHECK(r.iterations == 0);
}

TEST_CASE("minimize: preconditioner is applied") {
    int calls = 0;
    const Preconditioner scale = [&](std::span<double> g) {
        ++calls;
        for (double& v : g) {
            v *= 0.5;
        }
    };
    OptimConfig cfg;
    cfg.max_iters = 5;
    minimize(quadratic({1.0, 1.0}, {1.0, 1.0}), {0.0, 0.0}, cfg, scale);
    CHECK(calls > 0);
}

TEST_CASE("minimize: configuration and numerical errors") {
    const Objective f = quadratic({1.0}, {0.0});
    OptimConfig bad;
    bad.max_iters = 0;
    CHECK_THROWS_AS(minimize(f, {1.0}, bad), InputError);
    bad = OptimConfig{};
    bad.step_size = 0.0;
    CHECK_THROWS_AS(minimize(f, {1.0}, bad), InputError);
    bad = OptimConfig{};
    bad.momentum = 1.0;
    CHECK_THROWS_AS(validate(bad), InputError);

    const Objective nan_loss = [](std::span<const double>, std::span<double> g) {
        if (!g.empty()) {
            g[0] = 1.0;
        }
        return std::numeric_limits<double>::quiet_NaN();
    };
    CHECK_THROWS_AS(minimize(nan_loss, {0.0}, OptimConfig{}), NumericalError);
    const Objective nan_later = [](std::span<const double> x, std::span<double> g) {
        if (!g.empty()) {
            g[0] = 1.0;
        }
        return x[0] < 0.0 ? std::numeric_limits<double>::infinity() : x[0];
    };
    CHECK_THROWS_AS(minimize(nan_later, {0.5}, OptimConfig{}), NumericalError);
}
