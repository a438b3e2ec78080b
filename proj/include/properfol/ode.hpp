#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace properfol::ode {

using State = std::vector<double>;

/// Right-hand side dy/ds = f(s, y); may throw to abort the integration.
using Rhs = std::function<void(double s, const State& y, State& dyds)>;

/// Called after every accepted step with the new (s, y, dy/ds) and the step size.
using Observer = std::function<void(double s, const State& y, const State& dyds, double h)>;

struct Options {
    double rtol = 1e-9;
    double atol = 1e-9;
    double h0 = 1e-2;
    double h_min = 1e-13;     ///< relative to max(1, |s|); smaller steps count as underflow
    std::size_t max_steps = 2'000'000;
    bool adaptive = true;     ///< false: fixed steps of h0, no error control
};

enum class Status { completed, step_underflow, max_steps };

/// Dormand-Prince 5(4) with FSAL and local extrapolation (the 5th-order
/// solution is propagated). In fixed-step mode the same tableau runs with
/// h = h0 and the last step shortened to land on s_end.
inline Status dormand_prince(const Rhs& rhs, State y, double s0, double s_end, const Options& opt,
                             const Observer& observe) {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    const std::size_t n = y.size();
    State k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), y_new(n);
    const double direction = s_end >= s0 ? 1.0 : -1.0;
    double s = s0;
    double h = std::abs(opt.h0) * direction;
    rhs(s, y, k1);
    observe(s, y, k1, 0.0);

    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        const double remaining = s_end - s;
        if (remaining * direction <= 0.0 || std::abs(remaining) <= 1e-15 * std::max(1.0, std::abs(s_end)))
            return Status::completed;
        bool last = false;
        if ((s + h * (1.0 + 1e-9) - s_end) * direction >= 0.0) {
            h = remaining;
            last = true;
        }
        if (std::abs(h) < opt.h_min * std::max(1.0, std::abs(s))) return Status::step_underflow;

        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
        rhs(s + c2 * h, tmp, k2);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
        rhs(s + c3 * h, tmp, k3);
        for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        rhs(s + c4 * h, tmp, k4);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        rhs(s + c5 * h, tmp, k5);
        for (std::size_t i = 0; i < n; ++i)
            tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
        rhs(s + h, tmp, k6);
        for (std::size_t i = 0; i < n; ++i)
            y_new[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        rhs(s + h, y_new, k7);

        double err = 0.0;
        if (opt.adaptive) {
            for (std::size_t i = 0; i < n; ++i) {
                const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
                const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
                err += (e / sc) * (e / sc);
            }
            err = std::sqrt(err / static_cast<double>(n));
        }

        if (!opt.adaptive || err <= 1.0) {
            s = last ? s_end : s + h;
            y.swap(y_new);
            k1.swap(k7);
            observe(s, y, k1, h);
            if (opt.adaptive) {
                const double grow = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
                if (!last) h *= grow;
            }
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
        }
    }
    return Status::max_steps;
}

} // namespace properfol::ode
